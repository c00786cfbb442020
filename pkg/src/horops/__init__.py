"""Horofunction compactification, shadows and Patterson-Sullivan measures for discrete subgroups of SL(d, R)."""

from .decompositions import PartialFlag, cartan_projection, flag_projection, kak
from .horofunction import HorofunctionPoint, Interior, act, cocycle_B, embed_flag, evaluate
from .orbit import GroupPresentation, Orbit, enumerate_ball
from .weyl import Functional, Theta

__version__ = "0.1.0"

__all__ = [
    "Functional",
    "GroupPresentation",
    "HorofunctionPoint",
    "Interior",
    "Orbit",
    "PartialFlag",
    "Theta",
    "act",
    "cartan_projection",
    "cocycle_B",
    "embed_flag",
    "enumerate_ball",
    "evaluate",
    "flag_projection",
    "kak",
]
