"""Lower bounds for forms on spheres via a sparse spectral hierarchy."""
__version__ = "0.1.0"
