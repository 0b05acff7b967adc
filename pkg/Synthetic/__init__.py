# Synthetic package
