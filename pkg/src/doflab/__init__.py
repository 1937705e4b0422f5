"""Numerical laboratory for the two-user MISO broadcast channel with
unequal mixed CSIT: the optimal DoF polygon, the multi-phase schemes
that achieve it, exact prelog accounting and Monte Carlo link-level
validation."""

from .errors import DegenerateChannelError, DegenerateSchemeError, DomainError
from .model import BeamformerSet, ChannelRealization, CsitQuality, EquivalentChannelStats
from .region import DofPoint, DofRegion, RegionCase
from .scheduler import PhasePlan, PhaseSpec, Scheme, Stream, StreamBudget

__all__ = [
    "BeamformerSet",
    "ChannelRealization",
    "CsitQuality",
    "DegenerateChannelError",
    "DegenerateSchemeError",
    "DofPoint",
    "DofRegion",
    "DomainError",
    "EquivalentChannelStats",
    "PhasePlan",
    "PhaseSpec",
    "RegionCase",
    "Scheme",
    "Stream",
    "StreamBudget",
]

__version__ = "0.1.0"
