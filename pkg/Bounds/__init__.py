# Bounds package
