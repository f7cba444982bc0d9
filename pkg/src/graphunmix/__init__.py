"""Hyperspectral unmixing with graph-regularized nonnegative matrix factorization."""

__version__ = "0.1.0"
