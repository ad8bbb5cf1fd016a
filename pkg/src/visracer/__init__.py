"""Desk-scale vision-based racing: simulator, representation learning, SAC driver."""

from .kernels import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
