"""Display-only figure rendering for link-simulator sweep results."""
from .render import FigureSpec, FigureError, KINDS, KP4_BER, render

__all__ = ["FigureSpec", "FigureError", "KINDS", "KP4_BER", "render"]
