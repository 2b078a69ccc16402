"""Conditional Gaussian PDF recovery: simulation, filtering, KDE and mixtures."""

from ._cgpdf import *  # noqa: F401,F403
from ._cgpdf import __version__  # noqa: F401
