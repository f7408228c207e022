"""reconlab: training-data reconstruction attacks by informed adversaries,
differentially private training as mitigation, and the reconstruction
robustness bound calculus."""

from . import accounting, data, glm, metrics, mia, nn, rero, shadow
from .rng import Rng

__all__ = [
    "accounting",
    "data",
    "glm",
    "metrics",
    "mia",
    "nn",
    "rero",
    "shadow",
    "Rng",
]

__version__ = "0.1.0"
