"""Spectral (group-Fourier) design of probabilistic models over discrete groups."""

from .config import CONFIG, Config
from .errors import (
    DuplicatesCollapsed,
    GuardError,
    NegativeConditional,
    NegativeMass,
    NormalizationError,
    SpectraError,
    ZeroPosteriorMass,
    ZeroSuccessProbability,
)

__version__ = "0.1.0"

__all__ = [
    "CONFIG",
    "Config",
    "DuplicatesCollapsed",
    "GuardError",
    "NegativeConditional",
    "NegativeMass",
    "NormalizationError",
    "SpectraError",
    "ZeroPosteriorMass",
    "ZeroSuccessProbability",
]
