# Noise package
