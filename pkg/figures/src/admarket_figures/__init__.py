"""Figure scripts for admarket CSV artifacts."""

from .render import ColumnMismatchError, FigureSpec, render

__all__ = ["ColumnMismatchError", "FigureSpec", "render"]
