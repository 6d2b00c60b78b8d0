"""2-D spectral DTRM furnace solver with MLP/CNN surrogate models."""

__version__ = "0.1.0"
