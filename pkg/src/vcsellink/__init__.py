"""Desk-scale simulator of a >200 Gb/s directly-modulated VCSEL IM-DD link
with duobinary DSP, Volterra equalization, noise cancellation and MLSE."""

from .kernels import BACKEND as kernel_backend

__all__ = ["kernel_backend"]
__version__ = "0.1.0"
