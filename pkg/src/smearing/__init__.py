"""Chapman-Kolmogorov preserving smearing distributions."""
__version__ = "0.1.0"
