"""Poincare constants of Gaussian measures outside obstacles, and the reflected OU pinball."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

__version__ = "0.1.0"
