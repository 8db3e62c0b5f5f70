"""Dual-modality microscopy classification pipeline (C++ core bindings)."""

from ._duomic import *  # noqa: F401,F403
from ._duomic import __version__  # noqa: F401
