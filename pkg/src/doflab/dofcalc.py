"""DoF accounting of phase plans, closed-form limits and region coverage.

The accounting is exact: user i's DoF is the duration-weighted sum of
that user's stream prelogs over the (real-valued) schedule.  The common
stream carries quantized overhead and earns no credit, except in the
single-slot scheme where it carries fresh user-2 information.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from . import region as region_mod
from .errors import DomainError
from .model import CsitQuality
from .region import DofPoint
from .scheduler import PhasePlan, Scheme, Stream, default_delta, plan_x1, plan_x2, plan_x3, validate_plan

USER1_STREAMS = (Stream.A, Stream.A_P)
USER2_STREAMS = (Stream.B, Stream.B_P)


@dataclass(frozen=True)
class DofAccount:
    """Per-user DoF of a plan plus the per-phase bit breakdown."""

    d1: float
    d2: float
    per_phase: tuple[tuple[float, float, float], ...]  # (user1 bits, user2 bits, duration)


def achieved_dof(plan: PhasePlan, use_integer_durations: bool = False) -> DofAccount:
    """Add up the prelog-bits each user collects, divided by total time.

    Real durations are the default so the scheme arithmetic is isolated
    from rounding; pass ``use_integer_durations=True`` to quantify the
    rounding loss instead.
    """
    report = validate_plan(plan)
    if not report.valid:
        raise DomainError(
            "plan fails validation: "
            f"residuals={report.real_residuals}, budgets={report.budget_violations}, "
            f"durations={report.duration_violations}"
        )
    durations = (
        [float(ph.duration) for ph in plan.phases]
        if use_integer_durations
        else list(plan.durations_real)
    )
    per_phase = []
    for ph, t in zip(plan.phases, durations):
        bits1 = t * sum(b.prelog for b in ph.budgets if b.stream in USER1_STREAMS)
        bits2 = t * sum(b.prelog for b in ph.budgets if b.stream in USER2_STREAMS)
        if plan.c_credit_user2:
            c = ph.budget(Stream.C)
            if c is not None:
                bits2 += t * c.prelog
        per_phase.append((bits1, bits2, t))
    total = sum(t for _, _, t in per_phase)
    return DofAccount(
        d1=sum(b1 for b1, _, _ in per_phase) / total,
        d2=sum(b2 for _, b2, _ in per_phase) / total,
        per_phase=tuple(per_phase),
    )


def asymptotic_dof(scheme: Scheme, quality: CsitQuality, delta: float | None = None) -> DofPoint:
    """Large-S limit of each scheme (independent of delta for X1).

    X1 hits the intersection of the two slanted faces; X2 saturates user 1
    and climbs to alpha1 (bent case) or (1 + alpha2)/2 (flat case, equality
    boundary included); X3 saturates user 2.
    """
    a1, a2 = quality.alpha1, quality.alpha2
    if scheme is Scheme.X1:
        if not quality.is_case1:
            raise DomainError("the X1 corner only exists for 2*alpha1 - alpha2 < 1")
        return DofPoint((2.0 + 2.0 * a1 - a2) / 3.0, (2.0 + 2.0 * a2 - a1) / 3.0)
    if scheme is Scheme.X2:
        return DofPoint(1.0, a1 if quality.is_case1 else (1.0 + a2) / 2.0)
    if scheme is Scheme.X3:
        return DofPoint(a2, 1.0)
    raise DomainError(f"unknown scheme {scheme}")


def time_share(points: list[tuple[DofPoint, float]]) -> DofPoint:
    """Convex combination of DoF points (weights nonnegative, summing to 1)."""
    if not points:
        raise DomainError("need at least one point")
    weights = [w for _, w in points]
    if any(w < 0.0 for w in weights):
        raise DomainError(f"weights must be nonnegative, got {weights}")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise DomainError(f"weights must sum to 1, got {sum(weights)}")
    d1 = sum(p.d1 * w for p, w in points)
    d2 = sum(p.d2 * w for p, w in points)
    return DofPoint(d1, d2)


def _point_to_convex_polygon(point: np.ndarray, poly: np.ndarray) -> float:
    """Distance from a point to a filled convex polygon (0 inside)."""
    n = len(poly)
    inside = True
    best = np.inf
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        edge = b - a
        rel = point - a
        if edge[0] * rel[1] - edge[1] * rel[0] < 0.0:
            inside = False
        t = np.clip(np.dot(rel, edge) / max(np.dot(edge, edge), 1e-300), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(rel - t * edge)))
    return 0.0 if inside else best


def hausdorff_distance(poly_a: np.ndarray, poly_b: np.ndarray) -> float:
    """Hausdorff distance between two filled convex polygons (CCW vertices)."""
    d_ab = max(_point_to_convex_polygon(p, poly_b) for p in poly_a)
    d_ba = max(_point_to_convex_polygon(p, poly_a) for p in poly_b)
    return max(d_ab, d_ba)


@dataclass(frozen=True)
class CoverageReport:
    """How close the scheme points come to filling the outer-bound polygon."""

    quality: CsitQuality
    case_tag: str
    scheme_points: tuple[tuple[str, str, float, float], ...]  # (scheme, kind, d1, d2)
    hausdorff_finite: float
    hausdorff_asymptotic: float


def _hull(points: list[tuple[float, float]]) -> np.ndarray:
    pts = np.array(points, dtype=float)
    hull = ConvexHull(pts)
    return pts[hull.vertices]


def region_coverage(
    quality: CsitQuality,
    delta: float | None = None,
    S: int = 40,
    T1: int = 8,
) -> CoverageReport:
    """Convex hull of the scheme points versus the outer-bound polygon.

    Finite-S points use the exact accounting of the constructed plans;
    where no finite plan exists (X2 at alpha1 = 1) the closed-form corner
    stands in, and the point is labelled accordingly.
    """
    reg = region_mod.corners(quality)
    base = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]

    asym: list[tuple[str, tuple[float, float]]] = []
    if quality.is_case1:
        asym.append(("x1", asymptotic_dof(Scheme.X1, quality).as_tuple()))
    asym.append(("x2", asymptotic_dof(Scheme.X2, quality).as_tuple()))
    asym.append(("x3", asymptotic_dof(Scheme.X3, quality).as_tuple()))

    finite: list[tuple[str, str, tuple[float, float]]] = []
    if quality.is_case1:
        d = delta if delta is not None else default_delta(quality)
        acc = achieved_dof(plan_x1(quality, d, S=S, T1=T1))
        finite.append(("x1", "finite", (acc.d1, acc.d2)))
    if quality.alpha1 < 1.0:
        acc = achieved_dof(plan_x2(quality, S=S, T1=T1))
        finite.append(("x2", "finite", (acc.d1, acc.d2)))
    else:
        finite.append(("x2", "asymptotic", asymptotic_dof(Scheme.X2, quality).as_tuple()))
    acc = achieved_dof(plan_x3(quality))
    finite.append(("x3", "finite", (acc.d1, acc.d2)))

    region_poly = reg.corner_array()
    hull_fin = _hull(base + [p for _, _, p in finite])
    hull_asym = _hull(base + [p for _, p in asym])

    points = tuple(
        [(name, kind, p[0], p[1]) for name, kind, p in finite]
        + [(name, "asymptotic", p[0], p[1]) for name, p in asym]
    )
    return CoverageReport(
        quality=quality,
        case_tag=reg.case_tag.value,
        scheme_points=points,
        hausdorff_finite=hausdorff_distance(hull_fin, region_poly),
        hausdorff_asymptotic=hausdorff_distance(hull_asym, region_poly),
    )


ACCOUNT_CSV_HEADER = [
    "scheme", "alpha1", "alpha2", "delta", "S", "d1", "d2", "d1_limit", "d2_limit", "err",
]


def account_csv_row(plan: PhasePlan, account: DofAccount) -> list:
    """One emitter row: finite-S accounting next to the closed-form limit."""
    limit = asymptotic_dof(plan.scheme, plan.quality, plan.delta)
    err = float(np.hypot(account.d1 - limit.d1, account.d2 - limit.d2))
    return [
        plan.scheme.value,
        plan.quality.alpha1,
        plan.quality.alpha2,
        "" if plan.delta is None else plan.delta,
        plan.num_phases,
        account.d1,
        account.d2,
        limit.d1,
        limit.d2,
        err,
    ]


def write_accounts_csv(path, rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ACCOUNT_CSV_HEADER)
        writer.writerows(rows)
