"""Empirical processes of dependent sequences: chaining, reduction and numerical checks."""

from . import chaining, distmodel, empproc, errors, procgen, reduction, verify
from .distmodel import CantorCdf, Exponential, Normal, Uniform01
from .errors import EplError
from .procgen import ProcessSpec, generate

__version__ = "0.1.0"
