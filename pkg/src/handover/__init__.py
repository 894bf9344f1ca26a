"""Foresight-based takeover-request stack for an abstract driving world."""

from ._kernel import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
