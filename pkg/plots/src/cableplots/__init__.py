"""Figure rendering over cablempc CSV/JSON experiment artifacts."""

from .figures import FigureSpec, recompute_margins, render

__all__ = ["FigureSpec", "recompute_margins", "render"]
