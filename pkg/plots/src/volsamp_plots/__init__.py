"""Figure rendering for volsamp experiment CSV outputs."""

from .render import FigureSpec, SchemaError, load_table, render

__version__ = "0.1.0"
