"""Lattice experiments on p-energies of S^1-valued maps, their Jacobians and limits as p -> 2."""

__version__ = "0.1.0"

from .currents import BoxDomain, Constants, OneCurrent, ZeroCurrent, pair_min, polygon  # noqa: F401
from .flatnorm import flat_distance, flat_norm_zero  # noqa: F401
