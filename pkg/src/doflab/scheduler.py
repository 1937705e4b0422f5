"""Phase plans for the three transmission schemes.

A plan is a schedule of phases; each phase carries per-stream power
exponents and rate prelogs (dimensionless, absolute powers only exist in
the link simulation) plus the per-slot quantization prelogs of the two
overheard-interference terms.  The defining constraint is the bit
ledger: the common stream of phase s+1 must carry exactly the
quantization bits emitted by phase s,

    T_{s+1} * r_c_{s+1} == T_s * (quant_a_s + quant_b_s),

which holds with equality on the real-valued duration recursions.

Durations are computed as real recursions from the scheme constants and
rounded half-to-even (clamped at 1) to integers; both are kept on the
plan, with the per-phase residuals in ``rounding_report``.
"""

from __future__ import annotations

import enum
import sys
from dataclasses import dataclass, replace

from .errors import DegenerateSchemeError, DomainError
from .model import CsitQuality

LEDGER_TOL = 1e-12


class Scheme(enum.Enum):
    X1 = "x1"
    X2 = "x2"
    X3 = "x3"


class Stream(enum.Enum):
    A = "a"        # zero-forced private symbol, user 1
    A_P = "a_p"    # random-direction private symbol, user 1
    B = "b"        # zero-forced private symbol, user 2
    B_P = "b_p"    # random-direction private symbol, user 2
    C = "c"        # common stream (quantized past interference)


@dataclass(frozen=True)
class StreamBudget:
    """Power exponent and rate prelog assigned to one stream for one phase."""

    stream: Stream
    power_exp: float
    prelog: float

    def __post_init__(self):
        if not (0.0 <= self.power_exp <= 1.0):
            raise DomainError(f"power exponent {self.power_exp} outside [0, 1]")
        if not (0.0 <= self.prelog <= 1.0):
            raise DomainError(f"prelog {self.prelog} outside [0, 1]")
        if self.prelog > self.power_exp + LEDGER_TOL:
            raise DomainError(
                f"prelog {self.prelog} exceeds power exponent {self.power_exp}"
            )


@dataclass(frozen=True)
class PhaseSpec:
    """One phase: integer duration, stream budgets, quantization prelogs."""

    duration: int
    budgets: tuple[StreamBudget, ...]
    quant_prelog_a: float = 0.0
    quant_prelog_b: float = 0.0

    def __post_init__(self):
        if self.duration < 1:
            raise DomainError(f"duration must be >= 1, got {self.duration}")
        if self.quant_prelog_a < 0.0 or self.quant_prelog_b < 0.0:
            raise DomainError("quantization prelogs must be nonnegative")

    def budget(self, stream: Stream) -> StreamBudget | None:
        for b in self.budgets:
            if b.stream is stream:
                return b
        return None

    def has(self, stream: Stream) -> bool:
        return self.budget(stream) is not None


@dataclass(frozen=True)
class PhasePlan:
    """A scheme's full schedule plus the constants that generated it."""

    scheme: Scheme
    quality: CsitQuality
    delta: float | None
    phases: tuple[PhaseSpec, ...]
    durations_real: tuple[float, ...]
    derived: dict
    c_credit_user2: bool = False

    @property
    def rounding_report(self) -> tuple[float, ...]:
        """Per-phase residual: real duration minus rounded integer duration."""
        return tuple(
            tr - ph.duration for tr, ph in zip(self.durations_real, self.phases)
        )

    @property
    def num_phases(self) -> int:
        return len(self.phases)


def _round_duration(t_real: float) -> int:
    return max(1, int(round(t_real)))


def _budgets(*entries: tuple[Stream, float, float]) -> tuple[StreamBudget, ...]:
    return tuple(StreamBudget(s, p, r) for s, p, r in entries)


def default_delta(quality: CsitQuality) -> float:
    """Half the open-interval bound (1 - 2*alpha1 + alpha2)/3: interior and reproducible."""
    if not quality.is_case1:
        raise DomainError(
            "delta only parameterizes the bent-region scheme; "
            f"2*alpha1 - alpha2 = {2 * quality.alpha1 - quality.alpha2} >= 1"
        )
    return (1.0 - 2.0 * quality.alpha1 + quality.alpha2) / 6.0


def plan_x1(
    quality: CsitQuality,
    delta: float | None = None,
    S: int = 8,
    T1: int = 8,
) -> PhasePlan:
    """Multi-phase plan hitting the middle corner of the bent region.

    Phase 1 superimposes both users' zero-forced and random-direction
    symbols at full rate; phases 2..S-1 repeat a reduced-power pattern
    under the common stream; phase S carries only the last ledger batch.

    Args:
        quality: must satisfy 2*alpha1 - alpha2 < 1.
        delta: power back-off in (0, (1 - 2*alpha1 + alpha2)/3); None
            picks :func:`default_delta`.
        S: number of phases, >= 3.
        T1: phase-1 duration, >= 1.
    """
    a1, a2 = quality.alpha1, quality.alpha2
    if not quality.is_case1:
        raise DomainError("plan_x1 requires 2*alpha1 - alpha2 < 1")
    if delta is None:
        delta = default_delta(quality)
    bound = (1.0 - 2.0 * a1 + a2) / 3.0
    if not (0.0 < delta < bound):
        raise DomainError(f"delta must lie in (0, {bound}), got {delta}")
    if S < 3:
        raise DomainError(f"need at least 3 phases, got S={S}")
    if T1 < 1:
        raise DomainError(f"T1 must be >= 1, got {T1}")

    xi = (2.0 - a1 - a2) / (1.0 - a1 - delta)
    mu = (a1 - a2 + 2.0 * delta) / (1.0 - a1 - delta)
    gamma = (a1 - a2 + 2.0 * delta) / (1.0 - a2)

    t_real = [float(T1), T1 * xi]
    for _ in range(3, S):
        t_real.append(t_real[-1] * mu)
    t_real.append(t_real[-1] * gamma)

    head = PhaseSpec(
        duration=T1,
        budgets=_budgets(
            (Stream.A, 1.0, 1.0),
            (Stream.A_P, 1.0 - a2, 1.0 - a2),
            (Stream.B, 1.0, 1.0),
            (Stream.B_P, 1.0 - a1, 1.0 - a1),
        ),
        quant_prelog_a=1.0 - a2,
        quant_prelog_b=1.0 - a1,
    )
    middle_budgets = _budgets(
        (Stream.C, 1.0, 1.0 - a1 - delta),
        (Stream.A, a1 + delta, a1 + delta),
        (Stream.A_P, a1 - a2 + delta, a1 - a2 + delta),
        (Stream.B, a1 + delta, a1 + delta),
        (Stream.B_P, delta, delta),
    )
    tail = PhaseSpec(
        duration=_round_duration(t_real[-1]),
        budgets=_budgets(
            (Stream.C, 1.0, 1.0 - a2),
            (Stream.A, a2, a2),
            (Stream.B, a2, a2),
        ),
    )
    phases = [head]
    for s in range(2, S):
        phases.append(
            PhaseSpec(
                duration=_round_duration(t_real[s - 1]),
                budgets=middle_budgets,
                quant_prelog_a=a1 - a2 + delta,
                quant_prelog_b=delta,
            )
        )
    phases.append(tail)
    return PhasePlan(
        scheme=Scheme.X1,
        quality=quality,
        delta=delta,
        phases=tuple(phases),
        durations_real=tuple(t_real),
        derived={"xi": xi, "mu": mu, "gamma": gamma},
    )


def plan_x2(quality: CsitQuality, S: int = 8, T1: int = 8) -> PhasePlan:
    """Multi-phase plan saturating user 1 at a full degree of freedom.

    User 2 keeps a single zero-forced symbol throughout; only user 1's
    overheard interference is quantized and carried forward.  For
    alpha1 == alpha2 the middle recursion ratio is zero and the plan
    collapses to two phases (head plus ledger-clearing tail).
    """
    a1, a2 = quality.alpha1, quality.alpha2
    if a1 >= 1.0:
        raise DegenerateSchemeError(
            "alpha1 = 1 makes the duration recursion constants infinite; "
            "plan a single zero-forced channel use instead (see plan_x3)"
        )
    if S < 3:
        raise DomainError(f"need at least 3 phases, got S={S}")
    if T1 < 1:
        raise DomainError(f"T1 must be >= 1, got {T1}")

    tau = (1.0 - a2) / (1.0 - a1)
    beta = (a1 - a2) / (1.0 - a1)
    eta = (a1 - a2) / (1.0 - a2)

    head = PhaseSpec(
        duration=T1,
        budgets=_budgets(
            (Stream.A, 1.0, 1.0),
            (Stream.A_P, 1.0 - a2, 1.0 - a2),
            (Stream.B, a1, a1),
        ),
        quant_prelog_a=1.0 - a2,
    )
    tail_budgets = _budgets(
        (Stream.C, 1.0, 1.0 - a2),
        (Stream.A, a2, a2),
        (Stream.B, a2, a2),
    )
    derived = {"tau": tau, "beta": beta, "eta": eta}

    t_real = [float(T1), T1 * tau]
    for _ in range(3, S):
        t_real.append(t_real[-1] * beta)
    t_real.append(t_real[-1] * eta)

    if a1 == a2 or min(t_real) < sys.float_info.min:
        # Nothing (or less than one representable slot) left to carry
        # after phase 2: head plus a ledger-clearing tail suffice.
        t_real = [float(T1), T1 * tau]
        phases = (head, PhaseSpec(duration=_round_duration(t_real[1]), budgets=tail_budgets))
        return PhasePlan(
            scheme=Scheme.X2,
            quality=quality,
            delta=None,
            phases=phases,
            durations_real=tuple(t_real),
            derived=derived,
        )

    middle_budgets = _budgets(
        (Stream.C, 1.0, 1.0 - a1),
        (Stream.A, a1, a1),
        (Stream.A_P, a1 - a2, a1 - a2),
        (Stream.B, a1, a1),
    )
    phases = [head]
    for s in range(2, S):
        phases.append(
            PhaseSpec(
                duration=_round_duration(t_real[s - 1]),
                budgets=middle_budgets,
                quant_prelog_a=a1 - a2,
            )
        )
    phases.append(PhaseSpec(duration=_round_duration(t_real[-1]), budgets=tail_budgets))
    return PhasePlan(
        scheme=Scheme.X2,
        quality=quality,
        delta=None,
        phases=tuple(phases),
        durations_real=tuple(t_real),
        derived=derived,
    )


def plan_x3(quality: CsitQuality) -> PhasePlan:
    """Single channel use: common stream on top of two zero-forced symbols.

    The common stream carries fresh information for user 2 here (there is
    no past interference to forward), which is what lifts user 2 to a
    full degree of freedom.
    """
    a1, a2 = quality.alpha1, quality.alpha2
    phase = PhaseSpec(
        duration=1,
        budgets=_budgets(
            (Stream.C, 1.0, 1.0 - a1),
            (Stream.A, a2, a2),
            (Stream.B, a1, a1),
        ),
    )
    return PhasePlan(
        scheme=Scheme.X3,
        quality=quality,
        delta=None,
        phases=(phase,),
        durations_real=(1.0,),
        derived={},
        c_credit_user2=True,
    )


@dataclass(frozen=True)
class PlanValidation:
    """Report produced by :func:`validate_plan`."""

    real_residuals: tuple[float, ...]
    integer_residuals: tuple[float, ...]
    budget_violations: tuple[str, ...]
    duration_violations: tuple[str, ...]
    valid: bool


def _ledger_residuals(plan: PhasePlan, durations) -> tuple[float, ...]:
    res = []
    for s in range(plan.num_phases - 1):
        emitted = durations[s] * (plan.phases[s].quant_prelog_a + plan.phases[s].quant_prelog_b)
        c_next = plan.phases[s + 1].budget(Stream.C)
        carried = durations[s + 1] * (c_next.prelog if c_next is not None else 0.0)
        res.append(carried - emitted)
    return tuple(res)


def validate_plan(plan: PhasePlan) -> PlanValidation:
    """Check the bit ledger (real durations, exact) and the budget ranges.

    The ledger gate is LEDGER_TOL relative to the bits carried (absolute
    for small plans): long flat-case schedules grow geometrically and
    their float residuals scale with duration granularity, not with any
    accounting defect.  Integer-duration residuals are reported but not
    enforced; rounding noise there is expected and quantified separately
    by the DoF accounting.
    """
    real_res = _ledger_residuals(plan, plan.durations_real)
    int_res = _ledger_residuals(plan, [ph.duration for ph in plan.phases])
    carried = [
        max(1.0, t * (ph.quant_prelog_a + ph.quant_prelog_b))
        for t, ph in zip(plan.durations_real, plan.phases)
    ]

    budget_violations = []
    for idx, ph in enumerate(plan.phases):
        for b in ph.budgets:
            if not (0.0 <= b.power_exp <= 1.0):
                budget_violations.append(
                    f"phase {idx + 1} stream {b.stream.value}: power exponent {b.power_exp}"
                )
            if not (0.0 <= b.prelog <= 1.0) or b.prelog > b.power_exp + LEDGER_TOL:
                budget_violations.append(
                    f"phase {idx + 1} stream {b.stream.value}: prelog {b.prelog} "
                    f"vs power exponent {b.power_exp}"
                )
        if ph.quant_prelog_a < 0.0 or ph.quant_prelog_b < 0.0:
            budget_violations.append(f"phase {idx + 1}: negative quantization prelog")

    duration_violations = []
    for idx, (ph, tr) in enumerate(zip(plan.phases, plan.durations_real)):
        if ph.duration < 1:
            duration_violations.append(f"phase {idx + 1}: integer duration {ph.duration}")
        if tr <= 0.0:
            duration_violations.append(f"phase {idx + 1}: real duration {tr}")

    valid = (
        all(abs(r) <= LEDGER_TOL * c for r, c in zip(real_res, carried))
        and not budget_violations
        and not duration_violations
    )
    return PlanValidation(
        real_residuals=real_res,
        integer_residuals=int_res,
        budget_violations=tuple(budget_violations),
        duration_violations=tuple(duration_violations),
        valid=valid,
    )


def plan_to_json_dict(plan: PhasePlan) -> dict:
    """JSON-ready dict; floats survive a dump/load cycle bit-exactly."""
    return {
        "scheme": plan.scheme.value,
        "quality": {"alpha1": plan.quality.alpha1, "alpha2": plan.quality.alpha2},
        "delta": plan.delta,
        "derived": dict(plan.derived),
        "c_credit_user2": plan.c_credit_user2,
        "phases": [
            {
                "duration": ph.duration,
                "duration_real": tr,
                "budgets": {
                    b.stream.value: {"power_exp": b.power_exp, "prelog": b.prelog}
                    for b in ph.budgets
                },
                "quant_prelog_a": ph.quant_prelog_a,
                "quant_prelog_b": ph.quant_prelog_b,
            }
            for ph, tr in zip(plan.phases, plan.durations_real)
        ],
    }


_STREAM_ORDER = (Stream.C, Stream.A, Stream.A_P, Stream.B, Stream.B_P)


def plan_from_json_dict(data: dict) -> PhasePlan:
    """Inverse of :func:`plan_to_json_dict` (stream order is normalized)."""
    phases = []
    t_real = []
    for ph in data["phases"]:
        budgets = tuple(
            StreamBudget(stream, ph["budgets"][stream.value]["power_exp"],
                         ph["budgets"][stream.value]["prelog"])
            for stream in _STREAM_ORDER
            if stream.value in ph["budgets"]
        )
        phases.append(
            PhaseSpec(
                duration=ph["duration"],
                budgets=budgets,
                quant_prelog_a=ph["quant_prelog_a"],
                quant_prelog_b=ph["quant_prelog_b"],
            )
        )
        t_real.append(ph["duration_real"])
    return PhasePlan(
        scheme=Scheme(data["scheme"]),
        quality=CsitQuality(data["quality"]["alpha1"], data["quality"]["alpha2"]),
        delta=data["delta"],
        phases=tuple(phases),
        durations_real=tuple(t_real),
        derived=dict(data["derived"]),
        c_credit_user2=data.get("c_credit_user2", False),
    )


def with_tampered_prelog(plan: PhasePlan, phase_index: int, stream: Stream, new_prelog: float) -> PhasePlan:
    """Copy of ``plan`` with one stream prelog overwritten (for ledger tests)."""
    ph = plan.phases[phase_index]
    budgets = tuple(
        replace(b, prelog=new_prelog) if b.stream is stream else b for b in ph.budgets
    )
    phases = list(plan.phases)
    phases[phase_index] = replace(ph, budgets=budgets)
    return replace(plan, phases=tuple(phases))
