"""Bandwidth estimation from the delay of probes of different sizes."""

from ._core import *  # noqa: F401,F403
from ._core import BwestError, __doc__  # noqa: F401
