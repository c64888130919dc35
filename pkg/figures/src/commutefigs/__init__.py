"""Render commutesim scenario CSV output into figures.

This package only reads the documented CSV files; it never imports the
simulator and never mutates simulation data.
"""

from .render import render_figures

__version__ = "0.1.0"
