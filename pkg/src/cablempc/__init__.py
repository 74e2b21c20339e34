"""Aerial manipulation of an extensible cable: FDM ground truth, POD
reduced-order model, hybrid NMPC, and a segmented obstacle-avoidance planner."""

from .params import CableParams, Mode
from .dynamics import FullState

__all__ = ["CableParams", "Mode", "FullState"]
__version__ = "0.1.0"
