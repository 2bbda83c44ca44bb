"""Multi-exposure synthesis, classical fusion and pseudo-ground-truth dataset generation."""

__version__ = "0.1.0"
