"""Monotone DR-submodular maximisation over distributive lattices under knapsack constraints."""

from .errors import (CapExceeded, CycleDetected, EmptyMotion, LatticeDRError, NoConvergence, NotAnIdeal,
                     NotReduced, OutOfBox, PosetError, ValidationFailed)
from .functions import CostFunction, Instance, ObjectiveOracle
from .poset import Poset, build

__all__ = [
    "CapExceeded", "CycleDetected", "EmptyMotion", "LatticeDRError", "NoConvergence", "NotAnIdeal",
    "NotReduced", "OutOfBox", "PosetError", "ValidationFailed", "CostFunction", "Instance",
    "ObjectiveOracle", "Poset", "build",
]
