"""Offline rendering of hfcavity CSV outputs into publication-style figures.

Reads only the documented CSV schemas; computation happens upstream and
files are the entire interface.
"""

__version__ = "0.1.0"

from .render import FigureKind, PlotSpec, RenderError, render

__all__ = ["FigureKind", "PlotSpec", "RenderError", "render"]
