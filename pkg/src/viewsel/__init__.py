"""View clustering and view selection for large multi-view reconstructions."""

__version__ = "0.1.0"
