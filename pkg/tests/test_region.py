import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from doflab.errors import DomainError
from doflab.model import CsitQuality
from doflab.region import (
    DofPoint,
    RegionCase,
    _case1_corner_list,
    _case2_corner_list,
    _dedup,
    boundary_deficit,
    boundary_samples,
    constraint_slacks,
    contains,
    corners,
)


def shoelace(points) -> float:
    xy = np.asarray(points, dtype=float)
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def symmetric_polygon(alpha: float):
    mid = (2.0 + alpha) / 3.0
    return _dedup([(0.0, 0.0), (1.0, 0.0), (1.0, alpha), (mid, mid), (alpha, 1.0), (0.0, 1.0)])


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_symmetric_reduction_is_exact(alpha):
    got = [c.as_tuple() for c in corners(CsitQuality(alpha, alpha)).corners]
    assert got == symmetric_polygon(alpha)


def test_one_sided_perfect_csit_corners():
    reg = corners(CsitQuality(1.0, 0.0))
    assert reg.case_tag is RegionCase.CASE2
    assert [c.as_tuple() for c in reg.corners] == [(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.0, 1.0)]


def test_perfect_csit_is_unit_square():
    reg = corners(CsitQuality(1.0, 1.0))
    assert [c.as_tuple() for c in reg.corners] == [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


def test_reference_quality_corner_values():
    reg = corners(CsitQuality(0.5, 0.2))
    assert reg.case_tag is RegionCase.CASE1
    got = [c.as_tuple() for c in reg.corners]
    assert got[2] == (1.0, 0.5)
    assert got[3] == pytest.approx((14.0 / 15.0, 19.0 / 30.0), abs=1e-15)
    assert got[4] == (0.2, 1.0)


def test_contains_examples():
    q = CsitQuality(0.5, 0.2)
    assert contains(q, DofPoint(1.0, 0.5), 0.0)
    slacks = constraint_slacks(q, DofPoint(1.0, 0.5))
    assert slacks[2] == 0.0 and slacks[4] == 0.0  # tight on d1<=1 and 2d1+d2
    assert contains(CsitQuality(0.8, 0.1), DofPoint(0.0, 0.0), 0.0)
    assert not contains(CsitQuality(0.0, 0.0), DofPoint(0.7, 0.7), 0.0)


def test_boundary_deficit_examples():
    q = CsitQuality(0.5, 0.2)
    c = corners(q).corners[3]
    assert boundary_deficit(q, c) == pytest.approx(0.0, abs=1e-15)

    # Oracle: enumerate the slacks by hand for the interior point.
    p = DofPoint(0.5, 0.5)
    q11 = CsitQuality(1.0, 1.0)
    by_hand = min(
        p.d1, p.d2, 1 - p.d1, 1 - p.d2,
        2 + 1.0 - 2 * p.d1 - p.d2, 2 + 1.0 - p.d1 - 2 * p.d2,
    )
    assert by_hand == 0.5
    assert boundary_deficit(q11, p) == by_hand

    assert boundary_deficit(CsitQuality(0.0, 0.0), DofPoint(1.0, 1.0)) == pytest.approx(-1.0)


def test_negative_tolerance_rejected():
    with pytest.raises(DomainError):
        contains(CsitQuality(0.5, 0.2), DofPoint(0.1, 0.1), -1e-3)


def test_negative_dof_point_rejected():
    with pytest.raises(DomainError):
        DofPoint(-0.1, 0.5)


quality_st = st.tuples(
    st.floats(0.0, 1.0, allow_nan=False), st.floats(0.0, 1.0, allow_nan=False)
).map(lambda t: CsitQuality(max(t), min(t)))


@settings(max_examples=200, deadline=None)
@given(
    quality_st,
    st.floats(0.0, 1.0, allow_nan=False),
    st.floats(0.0, 1.0, allow_nan=False),
    st.floats(0.0, 0.2, allow_nan=False),
)
def test_contains_iff_deficit_above_negative_tol(q, d1, d2, tol):
    p = DofPoint(d1, d2)
    assert contains(q, p, tol) == (boundary_deficit(q, p) >= -tol)


@settings(max_examples=200, deadline=None)
@given(quality_st, quality_st)
def test_region_monotone_in_quality(qa, qb):
    lo = CsitQuality(min(qa.alpha1, qb.alpha1), min(qa.alpha2, qb.alpha2))
    hi = CsitQuality(max(qa.alpha1, qb.alpha1), max(qa.alpha2, qb.alpha2))
    for corner in corners(lo).corners:
        assert contains(hi, corner, 1e-12)


def test_case_split_boundary_continuity():
    # The two corner lists must describe the same polygon wherever
    # 2*alpha1 - alpha2 == 1, so the region's area cannot jump there.
    for a2 in np.arange(0.0, 1.0 + 1e-9, 0.01):
        a1 = (1.0 + a2) / 2.0
        area1 = shoelace(_dedup(_case1_corner_list(a1, a2)))
        area2 = shoelace(_dedup(_case2_corner_list(a1, a2)))
        assert abs(area1 - area2) <= 1e-6
        expected = RegionCase.CASE1 if 2.0 * a1 - a2 < 1.0 else RegionCase.CASE2
        assert corners(CsitQuality(a1, a2)).case_tag is expected
    # Representable boundary points land in case 2.
    assert corners(CsitQuality(0.5, 0.0)).case_tag is RegionCase.CASE2
    assert corners(CsitQuality(0.75, 0.5)).case_tag is RegionCase.CASE2


@pytest.mark.parametrize("a1,a2", [(0.5, 0.2), (0.9, 0.1), (0.3, 0.3), (1.0, 0.0), (0.75, 0.5)])
def test_corners_are_extreme_points(a1, a2):
    # LP feasibility: a corner expressible as a convex combination of the
    # others would make the LP feasible.
    pts = corners(CsitQuality(a1, a2)).corner_array()
    for i in range(len(pts)):
        others = np.delete(pts, i, axis=0)
        a_eq = np.vstack([others.T, np.ones(len(others))])
        b_eq = np.array([pts[i, 0], pts[i, 1], 1.0])
        res = linprog(np.zeros(len(others)), A_eq=a_eq, b_eq=b_eq, bounds=(0, 1))
        assert not res.success, f"corner {pts[i]} is a convex combination"


@settings(max_examples=100, deadline=None)
@given(quality_st)
def test_corner_order_counterclockwise_from_origin(q):
    pts = corners(q).corner_array()
    assert tuple(pts[0]) == (0.0, 0.0)
    # Strictly positive cross products at every vertex: convex and CCW.
    n = len(pts)
    for i in range(n):
        a, b, c = pts[i], pts[(i + 1) % n], pts[(i + 2) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        assert cross > -1e-12
    # No repeated consecutive vertices survive deduplication.
    for i in range(n):
        assert np.linalg.norm(pts[i] - pts[(i + 1) % n]) > 1e-12


def test_json_export_schema():
    reg = corners(CsitQuality(0.5, 0.2))
    data = reg.to_json_dict()
    assert set(data) == {"alpha1", "alpha2", "case", "corners"}
    assert data["case"] == "case1"
    assert data["corners"][0] == [0.0, 0.0]


def test_boundary_samples_lie_on_boundary():
    q = CsitQuality(0.5, 0.2)
    reg = corners(q)
    for d1, d2 in boundary_samples(reg, per_edge=8):
        assert abs(boundary_deficit(q, DofPoint(d1, d2))) <= 1e-12
