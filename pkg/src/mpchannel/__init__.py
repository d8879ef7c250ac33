"""Matrix-product-channel postprocessing of noisy variational states."""

__version__ = "0.1.0"
