import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doflab.errors import DegenerateSchemeError, DomainError
from doflab.model import CsitQuality
from doflab.scheduler import (
    Scheme,
    Stream,
    default_delta,
    plan_from_json_dict,
    plan_to_json_dict,
    plan_x1,
    plan_x2,
    plan_x3,
    validate_plan,
    with_tampered_prelog,
)

Q = CsitQuality(0.5, 0.2)


def budget_map(phase):
    return {b.stream: (b.power_exp, b.prelog) for b in phase.budgets}


class TestDefaultDelta:
    def test_reference_quality(self):
        assert default_delta(Q) == pytest.approx(0.2 / 6.0)

    def test_no_csit(self):
        assert default_delta(CsitQuality(0.0, 0.0)) == pytest.approx(1.0 / 6.0)

    def test_partial(self):
        assert default_delta(CsitQuality(0.4, 0.0)) == pytest.approx(1.0 / 30.0)

    def test_flat_case_not_applicable(self):
        with pytest.raises(DomainError):
            default_delta(CsitQuality(0.8, 0.0))


class TestPlanX1:
    def test_derived_constants_and_durations(self):
        plan = plan_x1(Q, 0.05, S=6, T1=9)
        assert plan.derived["xi"] == pytest.approx(26.0 / 9.0, abs=1e-15)
        assert plan.derived["mu"] == pytest.approx(8.0 / 9.0, abs=1e-15)
        assert plan.derived["gamma"] == pytest.approx(0.5, abs=1e-15)
        assert plan.phases[0].duration == 9
        assert plan.phases[1].duration == 26
        assert plan.phases[2].duration == 23  # round(26 * 8/9)
        assert plan.durations_real[2] == pytest.approx(26.0 * 8.0 / 9.0)

    def test_phase_budgets_follow_the_table(self):
        plan = plan_x1(Q, 0.05, S=5, T1=4)
        head = budget_map(plan.phases[0])
        assert head[Stream.A] == (1.0, 1.0)
        assert head[Stream.A_P] == (0.8, 0.8)
        assert head[Stream.B] == (1.0, 1.0)
        assert head[Stream.B_P] == (0.5, 0.5)
        assert (plan.phases[0].quant_prelog_a, plan.phases[0].quant_prelog_b) == (0.8, 0.5)

        mid = budget_map(plan.phases[1])
        assert mid[Stream.C] == (1.0, pytest.approx(0.45))
        assert mid[Stream.A] == (pytest.approx(0.55), pytest.approx(0.55))
        assert mid[Stream.A_P] == (pytest.approx(0.35), pytest.approx(0.35))
        assert mid[Stream.B_P] == (0.05, 0.05)
        assert plan.phases[1].quant_prelog_a == pytest.approx(0.35)
        assert plan.phases[1].quant_prelog_b == pytest.approx(0.05)

        tail = budget_map(plan.phases[-1])
        assert tail[Stream.C] == (1.0, 0.8)
        assert tail[Stream.A] == (0.2, 0.2)
        assert tail[Stream.B] == (0.2, 0.2)
        assert plan.phases[-1].quant_prelog_a == 0.0

    def test_phase1_bits_match_phase2_carrying_capacity(self):
        plan = plan_x1(Q, 0.05, S=6, T1=9)
        emitted = 9 * (2.0 - 0.5 - 0.2)
        carried = plan.durations_real[1] * plan.phases[1].budget(Stream.C).prelog
        assert emitted == pytest.approx(11.7, abs=1e-12)
        assert carried == pytest.approx(emitted, abs=1e-12)

    def test_no_csit_middle_budgets(self):
        plan = plan_x1(CsitQuality(0.0, 0.0), 1.0 / 6.0, S=4, T1=3)
        mid = budget_map(plan.phases[1])
        assert mid[Stream.C][1] == pytest.approx(5.0 / 6.0)
        assert mid[Stream.A][1] == pytest.approx(1.0 / 6.0)

    def test_preconditions(self):
        with pytest.raises(DomainError):
            plan_x1(Q, 0.2, S=5, T1=4)  # delta above the open bound 0.1/3... (0.2/3)
        with pytest.raises(DomainError):
            plan_x1(Q, 0.0, S=5, T1=4)
        with pytest.raises(DomainError):
            plan_x1(Q, 0.05, S=2, T1=4)
        with pytest.raises(DomainError):
            plan_x1(CsitQuality(0.8, 0.0), 0.01, S=5, T1=4)


class TestPlanX2:
    def test_derived_constants_and_durations(self):
        plan = plan_x2(Q, S=6, T1=5)
        assert plan.derived["tau"] == pytest.approx(1.6)
        assert plan.derived["beta"] == pytest.approx(0.6)
        assert plan.derived["eta"] == pytest.approx(0.375)
        assert plan.phases[1].duration == 8
        assert plan.phases[2].duration == 5  # round(8 * 0.6)
        assert plan.durations_real[2] == pytest.approx(4.8)

    def test_bit_conservation_head_to_phase2(self):
        plan = plan_x2(Q, S=5, T1=5)
        emitted = 5 * (1.0 - 0.2)
        carried = plan.durations_real[1] * plan.phases[1].budget(Stream.C).prelog
        assert emitted == pytest.approx(4.0, abs=1e-12)
        assert carried == pytest.approx(emitted, abs=1e-12)

    def test_budgets_follow_the_table(self):
        plan = plan_x2(Q, S=5, T1=5)
        head = budget_map(plan.phases[0])
        assert head[Stream.A] == (1.0, 1.0)
        assert head[Stream.A_P] == (0.8, 0.8)
        assert head[Stream.B] == (0.5, 0.5)
        assert Stream.B_P not in head
        assert plan.phases[0].quant_prelog_b == 0.0
        mid = budget_map(plan.phases[1])
        assert mid[Stream.C] == (1.0, 0.5)
        assert mid[Stream.A_P] == (pytest.approx(0.3), pytest.approx(0.3))
        assert plan.phases[1].quant_prelog_a == pytest.approx(0.3)

    def test_equal_qualities_collapse_to_two_phases(self):
        plan = plan_x2(CsitQuality(0.5, 0.5), S=7, T1=4)
        assert plan.num_phases == 2
        assert plan.derived["beta"] == 0.0
        assert plan.durations_real == (4.0, 4.0)
        assert validate_plan(plan).valid

    def test_perfect_current_csit_degenerates(self):
        with pytest.raises(DegenerateSchemeError):
            plan_x2(CsitQuality(1.0, 0.3), S=5, T1=4)


class TestPlanX3:
    def test_reference_quality(self):
        plan = plan_x3(Q)
        assert plan.num_phases == 1 and plan.phases[0].duration == 1
        budgets = budget_map(plan.phases[0])
        assert budgets[Stream.C] == (1.0, 0.5)
        assert budgets[Stream.A] == (0.2, 0.2)
        assert budgets[Stream.B] == (0.5, 0.5)
        assert plan.c_credit_user2

    def test_perfect_csit_is_pure_zero_forcing(self):
        budgets = budget_map(plan_x3(CsitQuality(1.0, 1.0)).phases[0])
        assert budgets[Stream.C][1] == 0.0
        assert budgets[Stream.A] == (1.0, 1.0)
        assert budgets[Stream.B] == (1.0, 1.0)

    def test_one_sided_csit(self):
        budgets = budget_map(plan_x3(CsitQuality(1.0, 0.0)).phases[0])
        assert budgets[Stream.C][1] == 0.0
        assert budgets[Stream.A] == (0.0, 0.0)
        assert budgets[Stream.B] == (1.0, 1.0)


class TestValidatePlan:
    def test_constructed_plans_have_zero_real_residuals(self):
        for plan in (plan_x1(Q, 0.05, S=6, T1=9), plan_x2(Q, S=6, T1=5)):
            report = validate_plan(plan)
            assert report.valid
            assert max(abs(r) for r in report.real_residuals) <= 1e-12

    def test_tampered_common_rate_is_flagged(self):
        plan = plan_x2(Q, S=5, T1=5)
        c = plan.phases[1].budget(Stream.C)
        tampered = with_tampered_prelog(plan, 1, Stream.C, c.prelog - 0.1)
        report = validate_plan(tampered)
        assert not report.valid
        t2 = tampered.durations_real[1]
        assert report.real_residuals[0] == pytest.approx(-t2 * 0.1)

    def test_single_slot_plan_trivially_valid(self):
        report = validate_plan(plan_x3(Q))
        assert report.valid and report.real_residuals == ()


case1_st = st.tuples(
    st.floats(0.0, 0.99), st.floats(0.0, 0.99), st.floats(0.05, 0.95)
).map(
    lambda t: (CsitQuality(max(t[0], t[1]), min(t[0], t[1])), t[2])
).filter(lambda qd: qd[0].is_case1)


@settings(max_examples=100, deadline=None)
@given(case1_st, st.integers(3, 10), st.integers(1, 12))
def test_x1_recursion_contracts_and_ledger_closes(qd, S, T1):
    quality, frac = qd
    delta = frac * (1.0 - 2.0 * quality.alpha1 + quality.alpha2) / 3.0
    plan = plan_x1(quality, delta, S=S, T1=T1)
    # Strict contraction in exact arithmetic; qualities that sit on the
    # case boundary only because of float rounding get an ulp of grace.
    assert 0.0 < plan.derived["mu"] < 1.0 + 1e-12
    assert plan.derived["gamma"] > 0.0
    report = validate_plan(plan)
    assert report.valid
    emitted = sum(
        t * (ph.quant_prelog_a + ph.quant_prelog_b)
        for t, ph in zip(plan.durations_real, plan.phases)
    )
    carried = sum(
        t * ph.budget(Stream.C).prelog
        for t, ph in zip(plan.durations_real[1:], plan.phases[1:])
    )
    assert emitted == pytest.approx(carried, abs=1e-9 * max(1.0, emitted))
    for ph in plan.phases:
        for b in ph.budgets:
            assert 0.0 <= b.prelog <= b.power_exp + 1e-12 <= 1.0 + 1e-12


@settings(max_examples=100, deadline=None)
@given(
    st.tuples(st.floats(0.0, 0.95), st.floats(0.0, 0.95)).map(
        lambda t: CsitQuality(max(t), min(t))
    ),
    st.integers(3, 10),
    st.integers(1, 12),
)
def test_x2_recursion_contracts(quality, S, T1):
    plan = plan_x2(quality, S=S, T1=T1)
    assert validate_plan(plan).valid
    if 2.0 * quality.alpha1 - quality.alpha2 > 1.0:
        assert plan.derived["beta"] > 1.0


def test_rounding_stays_within_half_slot_or_clamps():
    plan = plan_x1(Q, 0.05, S=8, T1=10)
    for ph, tr in zip(plan.phases, plan.durations_real):
        assert abs(ph.duration - tr) <= 0.5 or ph.duration == 1
    # Clamp path: tiny T1 drives late phases under one slot.
    small = plan_x2(CsitQuality(0.3, 0.0), S=8, T1=1)
    assert all(ph.duration >= 1 for ph in small.phases)


def test_json_round_trip_is_bit_exact():
    for plan in (plan_x1(Q, 1.0 / 30.0, S=7, T1=9), plan_x2(Q, S=5, T1=5), plan_x3(Q)):
        dumped = json.dumps(plan_to_json_dict(plan))
        restored = plan_from_json_dict(json.loads(dumped))
        assert restored == plan
        assert json.dumps(plan_to_json_dict(restored)) == dumped
