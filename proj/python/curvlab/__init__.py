"""Curvature-dimension checks on finite metric measure spaces."""

from ._curvlab import *  # noqa: F401,F403
from ._curvlab import __doc__  # noqa: F401
