"""Optimal DoF polygon for the two-user MISO BC with unequal mixed CSIT.

The region is cut out by

    d1 >= 0,  d2 >= 0,  d1 <= 1,  d2 <= 1,
    2*d1 + d2 <= 2 + alpha1,
    d1 + 2*d2 <= 2 + alpha2,

and its corner list changes shape at ``2*alpha1 - alpha2 == 1``: below
that the two slanted faces meet strictly inside the unit square (case 1),
at or above it they meet on the ``d1 == 1`` edge (case 2).  The boundary
itself is assigned to case 2; there the two corner lists coincide up to a
repeated vertex, which is deduplicated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import CsitQuality


class RegionCase(enum.Enum):
    CASE1 = "case1"
    CASE2 = "case2"


@dataclass(frozen=True)
class DofPoint:
    """An achievable (or candidate) DoF pair."""

    d1: float
    d2: float

    def __post_init__(self):
        if self.d1 < 0.0 or self.d2 < 0.0:
            raise DomainError(f"DoF values must be nonnegative, got {(self.d1, self.d2)}")

    def as_tuple(self) -> tuple[float, float]:
        return (self.d1, self.d2)


@dataclass(frozen=True)
class DofRegion:
    """Corner representation of the region, counterclockwise from (0, 0)."""

    quality: CsitQuality
    case_tag: RegionCase
    corners: tuple[DofPoint, ...]

    def corner_array(self) -> np.ndarray:
        return np.array([c.as_tuple() for c in self.corners], dtype=float)

    def area(self) -> float:
        """Shoelace area of the polygon."""
        xy = self.corner_array()
        x, y = xy[:, 0], xy[:, 1]
        return 0.5 * float(np.abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def to_json_dict(self) -> dict:
        return {
            "alpha1": self.quality.alpha1,
            "alpha2": self.quality.alpha2,
            "case": self.case_tag.value,
            "corners": [[c.d1, c.d2] for c in self.corners],
        }


def _as_point(p) -> DofPoint:
    return p if isinstance(p, DofPoint) else DofPoint(*p)


def _case1_corner_list(a1: float, a2: float) -> list[tuple[float, float]]:
    c = ((2.0 + 2.0 * a1 - a2) / 3.0, (2.0 + 2.0 * a2 - a1) / 3.0)
    return [(0.0, 0.0), (1.0, 0.0), (1.0, a1), c, (a2, 1.0), (0.0, 1.0)]


def _case2_corner_list(a1: float, a2: float) -> list[tuple[float, float]]:
    return [(0.0, 0.0), (1.0, 0.0), (1.0, (1.0 + a2) / 2.0), (a2, 1.0), (0.0, 1.0)]


def _dedup(points: list[tuple[float, float]], tol: float = 1e-12) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for p in points:
        if out and abs(p[0] - out[-1][0]) <= tol and abs(p[1] - out[-1][1]) <= tol:
            continue
        out.append(p)
    return out


def corners(quality: CsitQuality) -> DofRegion:
    """Corner points of the region, counterclockwise starting at (0, 0)."""
    if not isinstance(quality, CsitQuality):
        quality = CsitQuality(*quality)
    a1, a2 = quality.alpha1, quality.alpha2
    if quality.is_case1:
        tag, pts = RegionCase.CASE1, _case1_corner_list(a1, a2)
    else:
        tag, pts = RegionCase.CASE2, _case2_corner_list(a1, a2)
    return DofRegion(
        quality=quality,
        case_tag=tag,
        corners=tuple(DofPoint(*p) for p in _dedup(pts)),
    )


def constraint_slacks(quality: CsitQuality, p) -> tuple[float, ...]:
    """Signed slack of every face at ``p`` (negative means violated)."""
    pt = _as_point(p)
    a1, a2 = quality.alpha1, quality.alpha2
    d1, d2 = pt.d1, pt.d2
    return (
        d1,
        d2,
        1.0 - d1,
        1.0 - d2,
        2.0 + a1 - (2.0 * d1 + d2),
        2.0 + a2 - (d1 + 2.0 * d2),
    )


def boundary_deficit(quality: CsitQuality, p) -> float:
    """Minimum signed slack; >= 0 inside, < 0 outside by that margin."""
    return min(constraint_slacks(quality, p))


def contains(quality: CsitQuality, p, tol: float = 0.0) -> bool:
    """True iff every region inequality holds within ``tol``."""
    if tol < 0.0:
        raise DomainError(f"tolerance must be nonnegative, got {tol}")
    return boundary_deficit(quality, p) >= -tol


def boundary_samples(region: DofRegion, per_edge: int = 32) -> np.ndarray:
    """Evenly spaced points along the polygon boundary, for plotting."""
    xy = region.corner_array()
    rows = []
    n = len(xy)
    for i in range(n):
        a, b = xy[i], xy[(i + 1) % n]
        for t in np.linspace(0.0, 1.0, per_edge, endpoint=False):
            rows.append((1.0 - t) * a + t * b)
    return np.array(rows)
