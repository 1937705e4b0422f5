"""Symbol-level Monte Carlo validation of a phase plan.

For each SNR grid point and each distinct phase role (head / middle /
tail, or the single slot of the one-shot scheme) the campaign samples a
batch of channel slots, rebuilds the overheard interference, quantizes
it with the plan's bit budget, and evaluates Gaussian mutual information
for every decode step in scheme order: the common stream first (treating
everything else as noise), then the back-substituted 2x2 private
channels, and plain SISO decoding in the final phase.  Slopes of mean MI
versus log2(P) over the grid estimate the per-stream prelogs, and the
duration-weighted combination of per-user slopes mirrors the exact DoF
accounting.

Decoding is information-theoretic throughout: Gaussian inputs, log /
log-det formulas, quantization error entering as Gaussian noise of the
measured variance.  All symbol powers are nominal (P to the budget
exponent); channel coefficients are per-realization.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import (
    BeamformerSet,
    ChannelRealization,
    CsitQuality,
    bdot,
    cnormal,
    make_beamformers,
    sample_channel,
    substream,
)
from .scheduler import PhasePlan, PhaseSpec, Stream, validate_plan

# Finite-SNR bit allowance added per complex sample when the campaign
# quantizes interference.  The asymptotic budget is prelog*log2(P) plus
# an o(log P) term; this constant stands in for that term so that
# sub-2-bit budgets still resolve at desk-scale SNR.
QUANT_EXTRA_BITS = 4.0

# Quantizer loading used by the campaign (+-k sample-std-devs).  The
# bare operation defaults to 4 sigma; at the top of a desk-scale grid
# the expected Gaussian overload beyond 4 sigma (~1.5e-5 of the source
# power) already dwarfs the unit distortion target, so campaign runs
# load wider and spend the extra granular step on it.
QUANT_RANGE_SIGMAS = 6.0

_USER1 = (Stream.A, Stream.A_P)
_USER2 = (Stream.B, Stream.B_P)
_BEAM_OF = {Stream.A: "u", Stream.A_P: "u_p", Stream.B: "v", Stream.B_P: "v_p", Stream.C: "w"}


def make_snr_grid(min_db: float, max_db: float, points: int) -> tuple[float, ...]:
    """Geometric SNR grid from a dB range."""
    return tuple(10.0 ** (db / 10.0) for db in np.linspace(min_db, max_db, points))


@dataclass(frozen=True)
class TrialConfig:
    """One campaign: a plan, an SNR grid, a trial count and a seed."""

    plan: PhasePlan
    snr_grid: tuple[float, ...]
    trials: int
    seed: int

    def __post_init__(self):
        if len(self.snr_grid) < 3:
            raise DomainError("need at least 3 SNR grid points")
        if max(self.snr_grid) / min(self.snr_grid) < 1e3:
            raise DomainError("SNR grid must span at least 3 decades")
        if list(self.snr_grid) != sorted(self.snr_grid):
            raise DomainError("SNR grid must be ascending")
        if self.trials < 1:
            raise DomainError("need at least one trial per grid point")


@dataclass(frozen=True)
class QuantRecord:
    """Measured behaviour of one quantization pass."""

    source_power_exp: float
    budget_prelog: float
    measured_distortion: float
    passthrough: bool = False


@dataclass(frozen=True)
class SymbolDraw:
    """Per-stream Gaussian symbols at the phase's nominal powers (0 if absent)."""

    a: np.ndarray | float = 0.0
    a_p: np.ndarray | float = 0.0
    b: np.ndarray | float = 0.0
    b_p: np.ndarray | float = 0.0
    c: np.ndarray | float = 0.0


def draw_symbols(
    phase: PhaseSpec, snr: float, rng: np.random.Generator, size: int | None = None
) -> SymbolDraw:
    """Draw each present stream with variance P**power_exp."""
    shape = () if size is None else (size,)
    values = {}
    for field, stream in (("a", Stream.A), ("a_p", Stream.A_P), ("b", Stream.B),
                          ("b_p", Stream.B_P), ("c", Stream.C)):
        budget = phase.budget(stream)
        if budget is not None:
            values[field] = cnormal(rng, snr**budget.power_exp, shape)
    return SymbolDraw(**values)


def interference_terms(
    real: ChannelRealization, beams: BeamformerSet, symbols: SymbolDraw
) -> tuple[np.ndarray, np.ndarray]:
    """Overheard interference (as the transmitter can rebuild it afterwards).

    Returns ``(c_bar_a, c_bar_b)``: what user 2 suffers from user 1's
    streams and what user 1 suffers from user 2's streams.
    """
    c_bar_a = bdot(real.g_tilde, beams.u) * symbols.a + bdot(real.g, beams.u_p) * symbols.a_p
    c_bar_b = bdot(real.h_tilde, beams.v) * symbols.b + bdot(real.h, beams.v_p) * symbols.b_p
    return np.asarray(c_bar_a), np.asarray(c_bar_b)


def _uniform_midrise(x: np.ndarray, sigma: float, levels: int, range_sigmas: float) -> np.ndarray:
    if sigma == 0.0:
        return np.zeros_like(x)
    lo = -range_sigmas * sigma
    step = 2.0 * range_sigmas * sigma / levels
    idx = np.clip(np.floor((x - lo) / step), 0, levels - 1)
    return lo + (idx + 0.5) * step


def quantize_interference(
    samples: np.ndarray,
    budget_prelog: float,
    snr: float,
    extra_bits: float = 0.0,
    scale: np.ndarray | None = None,
    range_sigmas: float = 4.0,
) -> tuple[np.ndarray, QuantRecord]:
    """Uniform scalar quantization of complex samples under a prelog budget.

    Each sample gets ``budget_prelog * log2(P) + extra_bits`` bits, split
    evenly between real and imaginary parts; a part with a fractional
    budget of ``b`` bits uses ``floor(2**b)`` reconstruction levels over
    +-``range_sigmas`` sample standard deviations.  A zero budget passes
    nothing through: the output is zero, the full sample power is
    recorded as distortion and the record is flagged.

    ``scale`` is an optional per-sample gain known to encoder and
    decoder; samples are quantized as ``samples/scale`` and rescaled on
    reconstruction.  The campaign passes the conditional interference
    std here (the channel coefficients are shared knowledge), which
    keeps the quantizer loaded at ~unit variance: the raw interference
    is a product of Gaussians whose tail would otherwise put a
    P-growing overload error outside any fixed +-k-sigma range.
    """
    if snr <= 1.0:
        raise DomainError(f"prelog bit budgets need snr > 1, got {snr}")
    samples = np.asarray(samples, dtype=complex)
    power = float(np.mean(np.abs(samples) ** 2)) if samples.size else 0.0
    source_exp = math.log(power, snr) if power > 0.0 else float("-inf")
    bits = budget_prelog * math.log2(snr)
    if bits < 0.0:
        raise DomainError(f"negative bit budget {bits}")
    if budget_prelog == 0.0:
        record = QuantRecord(
            source_power_exp=source_exp,
            budget_prelog=budget_prelog,
            measured_distortion=power,
            passthrough=power > 0.0,
        )
        return np.zeros_like(samples), record
    if scale is None:
        gain = 1.0
        z = samples
    else:
        gain = np.where(np.asarray(scale) > 0.0, np.asarray(scale), 1.0)
        z = samples / gain
    levels = max(1, math.floor(2.0 ** ((bits + extra_bits) / 2.0)))
    re = _uniform_midrise(z.real, float(np.std(z.real)), levels, range_sigmas)
    im = _uniform_midrise(z.imag, float(np.std(z.imag)), levels, range_sigmas)
    quantized = (re + 1j * im) * gain
    distortion = float(np.mean(np.abs(samples - quantized) ** 2)) if samples.size else 0.0
    return quantized, QuantRecord(
        source_power_exp=source_exp,
        budget_prelog=budget_prelog,
        measured_distortion=distortion,
    )


def interference_scales(
    real: ChannelRealization, beams: BeamformerSet, phase: PhaseSpec, snr: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-slot conditional std of each interference term (known to all ends)."""
    var_a = 0.0
    var_b = 0.0
    a = phase.budget(Stream.A)
    if a is not None:
        var_a = var_a + np.abs(bdot(real.g_tilde, beams.u)) ** 2 * snr**a.power_exp
    a_p = phase.budget(Stream.A_P)
    if a_p is not None:
        var_a = var_a + np.abs(bdot(real.g, beams.u_p)) ** 2 * snr**a_p.power_exp
    b = phase.budget(Stream.B)
    if b is not None:
        var_b = var_b + np.abs(bdot(real.h_tilde, beams.v)) ** 2 * snr**b.power_exp
    b_p = phase.budget(Stream.B_P)
    if b_p is not None:
        var_b = var_b + np.abs(bdot(real.h, beams.v_p)) ** 2 * snr**b_p.power_exp
    return np.sqrt(var_a), np.sqrt(var_b)


def _coef(real: ChannelRealization, beams: BeamformerSet, user: int, stream: Stream) -> np.ndarray:
    ch = real.h if user == 1 else real.g
    return bdot(ch, getattr(beams, _BEAM_OF[stream]))


def annotated_received_exponent(quality: CsitQuality, stream: Stream, power_exp: float, user: int) -> float:
    """P-exponent a stream lands with at a user, zero-forcing included."""
    if user == 1 and stream is Stream.B:
        return power_exp - quality.alpha1
    if user == 2 and stream is Stream.A:
        return power_exp - quality.alpha2
    return power_exp


def received_term_powers(
    real: ChannelRealization, beams: BeamformerSet, phase: PhaseSpec, snr: float
) -> dict[tuple[int, Stream], np.ndarray]:
    """Per-trial received power of every transmitted term at both users."""
    out = {}
    for user in (1, 2):
        for budget in phase.budgets:
            coef = _coef(real, beams, user, budget.stream)
            out[(user, budget.stream)] = np.abs(coef) ** 2 * snr**budget.power_exp
    return out


def decode_c_mi(
    real: ChannelRealization,
    beams: BeamformerSet,
    plan: PhasePlan,
    phase_index: int,
    snr: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-trial MI of the common stream at each user, rest treated as noise."""
    phase = plan.phases[phase_index]
    c_budget = phase.budget(Stream.C)
    if c_budget is None:
        raise DomainError(f"phase {phase_index + 1} carries no common stream")
    mis = []
    for user in (1, 2):
        sig = np.abs(_coef(real, beams, user, Stream.C)) ** 2 * snr**c_budget.power_exp
        interf = 0.0
        for budget in phase.budgets:
            if budget.stream is Stream.C:
                continue
            interf = interf + np.abs(_coef(real, beams, user, budget.stream)) ** 2 * snr**budget.power_exp
        mis.append(np.log2(1.0 + sig / (1.0 + interf)))
    return mis[0], mis[1]


def _two_stream_mi(cols, powers, noise_vars):
    """Chain-rule MI split of a 2x2 Gaussian channel with diagonal noise.

    ``cols[k] = (row1 coef, row2 coef)`` of stream k, decoded in order:
    stream 0 first with stream 1 as noise, stream 1 after cancellation.
    Returns (mi_0, mi_1); their sum is the joint log-det rate.
    """
    (x1, x2), (y1, y2) = cols
    px, py = powers
    n1, n2 = noise_vars
    q_xx = np.abs(x1) ** 2 / n1 + np.abs(x2) ** 2 / n2
    q_yy = np.abs(y1) ** 2 / n1 + np.abs(y2) ** 2 / n2
    q_xy = np.conj(x1) * y1 / n1 + np.conj(x2) * y2 / n2
    sinr_x = px * (q_xx - py * np.abs(q_xy) ** 2 / (1.0 + py * q_yy))
    mi_x = np.log2(1.0 + sinr_x)
    mi_y = np.log2(1.0 + py * q_yy)
    return mi_x, mi_y


def mimo_backsub_mi(
    real: ChannelRealization,
    beams: BeamformerSet,
    plan: PhasePlan,
    phase_index: int,
    quant: tuple[QuantRecord | None, QuantRecord | None],
    snr: float,
) -> dict[tuple[int, Stream], np.ndarray]:
    """Per-trial private-stream MIs after the back-substitution step.

    User 1 stacks its phase observation (common stream removed, the
    quantized b-side interference subtracted) with the quantized a-side
    interference, giving a 2x2 channel on (a, a'); quantization errors
    enter as Gaussian noise at the measured distortion.  User 2 is the
    mirror image, or a plain SISO decode when it has no secondary stream.
    """
    phase = plan.phases[phase_index]
    if not phase.has(Stream.A_P):
        raise DomainError(
            f"phase {phase_index + 1} has no secondary user-1 stream; "
            "final phases decode with final_siso_mi"
        )
    rec_a, rec_b = quant
    dist_a = rec_a.measured_distortion if rec_a is not None else 0.0
    dist_b = rec_b.measured_distortion if rec_b is not None else 0.0
    out: dict[tuple[int, Stream], np.ndarray] = {}

    pow_of = {b.stream: snr**b.power_exp for b in phase.budgets}

    # User 1: observation row has unit noise plus whatever b-side power
    # was not quantized away; the extra-observation row carries the
    # a-side quantization error.
    if rec_b is not None:
        n1 = 1.0 + dist_b
    else:
        n1 = 1.0
        for stream in _USER2:
            if stream in pow_of:
                n1 = n1 + np.abs(_coef(real, beams, 1, stream)) ** 2 * pow_of[stream]
    n2 = max(dist_a, np.finfo(float).tiny)
    cols = (
        (_coef(real, beams, 1, Stream.A), _coef(real, beams, 2, Stream.A)),
        (_coef(real, beams, 1, Stream.A_P), _coef(real, beams, 2, Stream.A_P)),
    )
    mi_a, mi_ap = _two_stream_mi(cols, (pow_of[Stream.A], pow_of[Stream.A_P]), (n1, n2))
    out[(1, Stream.A)] = mi_a
    out[(1, Stream.A_P)] = mi_ap

    # User 2.
    m1 = max(dist_b, np.finfo(float).tiny)
    if rec_a is not None:
        m2 = 1.0 + dist_a
    else:
        m2 = 1.0
        for stream in _USER1:
            if stream in pow_of:
                m2 = m2 + np.abs(_coef(real, beams, 2, stream)) ** 2 * pow_of[stream]
    if phase.has(Stream.B_P):
        cols = (
            (_coef(real, beams, 1, Stream.B), _coef(real, beams, 2, Stream.B)),
            (_coef(real, beams, 1, Stream.B_P), _coef(real, beams, 2, Stream.B_P)),
        )
        mi_b, mi_bp = _two_stream_mi(cols, (pow_of[Stream.B], pow_of[Stream.B_P]), (m1, m2))
        out[(2, Stream.B)] = mi_b
        out[(2, Stream.B_P)] = mi_bp
    else:
        sig = np.abs(_coef(real, beams, 2, Stream.B)) ** 2 * pow_of[Stream.B]
        out[(2, Stream.B)] = np.log2(1.0 + sig / m2)
    return out


def final_siso_mi(
    real: ChannelRealization,
    beams: BeamformerSet,
    plan: PhasePlan,
    phase_index: int,
    snr: float,
) -> dict[tuple[int, Stream], np.ndarray]:
    """Private-stream MIs in a common-stream-removed final (or single) phase."""
    phase = plan.phases[phase_index]
    pow_of = {b.stream: snr**b.power_exp for b in phase.budgets}
    sig1 = np.abs(_coef(real, beams, 1, Stream.A)) ** 2 * pow_of[Stream.A]
    int1 = np.abs(_coef(real, beams, 1, Stream.B)) ** 2 * pow_of[Stream.B]
    sig2 = np.abs(_coef(real, beams, 2, Stream.B)) ** 2 * pow_of[Stream.B]
    int2 = np.abs(_coef(real, beams, 2, Stream.A)) ** 2 * pow_of[Stream.A]
    return {
        (1, Stream.A): np.log2(1.0 + sig1 / (1.0 + int1)),
        (2, Stream.B): np.log2(1.0 + sig2 / (1.0 + int2)),
    }


@dataclass(frozen=True)
class RoleSpec:
    """A distinct slot role and the total (real) time the plan spends in it."""

    name: str
    phase_index: int
    duration: float


def plan_roles(plan: PhasePlan) -> tuple[RoleSpec, ...]:
    """Distinct phase roles; middle phases share budgets, so one stands for all."""
    t = plan.durations_real
    if plan.num_phases == 1:
        return (RoleSpec("single", 0, t[0]),)
    roles = [RoleSpec("head", 0, t[0])]
    if plan.num_phases > 2:
        roles.append(RoleSpec("middle", 1, float(sum(t[1:-1]))))
    roles.append(RoleSpec("tail", plan.num_phases - 1, t[-1]))
    return tuple(roles)


def fit_slope(snr_grid, values) -> tuple[float, float]:
    """OLS (slope, intercept) of values against log2(P)."""
    x = np.log2(np.asarray(snr_grid, dtype=float))
    slope, intercept = np.polyfit(x, np.asarray(values, dtype=float), 1)
    return float(slope), float(intercept)


@dataclass(frozen=True)
class StreamMiRecord:
    role: str
    phase_index: int
    user: int
    stream: str
    mi: tuple[float, ...]
    slope: float
    intercept: float


@dataclass(frozen=True)
class ExponentRecord:
    role: str
    phase_index: int
    user: int
    stream: str
    annotated_exp: float
    measured_exp: float
    mean_power: tuple[float, ...]


@dataclass(frozen=True)
class QuantSeries:
    role: str
    phase_index: int
    side: str
    budget_prelog: float
    distortion: tuple[float, ...]
    source_exp: tuple[float, ...]
    slope: float
    passthrough: bool


@dataclass(frozen=True)
class LinkReport:
    """Everything the campaign measured, plus the per-user DoF estimate."""

    scheme: str
    alpha1: float
    alpha2: float
    snr_grid: tuple[float, ...]
    trials: int
    seed: int
    streams: tuple[StreamMiRecord, ...]
    exponents: tuple[ExponentRecord, ...]
    quant: tuple[QuantSeries, ...]
    role_durations: tuple[tuple[str, float], ...]
    dof_estimate: tuple[float, float]

    def stream_record(self, role: str, user: int, stream: str) -> StreamMiRecord:
        for rec in self.streams:
            if rec.role == role and rec.user == user and rec.stream == stream:
                return rec
        raise KeyError((role, user, stream))

    def to_json_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "snr_grid": list(self.snr_grid),
            "trials": self.trials,
            "seed": self.seed,
            "dof_estimate": list(self.dof_estimate),
            "role_durations": {name: t for name, t in self.role_durations},
            "streams": [
                {
                    "role": r.role, "phase_index": r.phase_index, "user": r.user,
                    "stream": r.stream, "mi": list(r.mi), "slope": r.slope,
                    "intercept": r.intercept,
                }
                for r in self.streams
            ],
            "exponents": [
                {
                    "role": r.role, "phase_index": r.phase_index, "user": r.user,
                    "stream": r.stream, "annotated_exp": r.annotated_exp,
                    "measured_exp": r.measured_exp, "mean_power": list(r.mean_power),
                }
                for r in self.exponents
            ],
            "quant": [
                {
                    "role": r.role, "phase_index": r.phase_index, "side": r.side,
                    "budget_prelog": r.budget_prelog, "distortion": list(r.distortion),
                    "source_exp": list(r.source_exp), "slope": r.slope,
                    "passthrough": r.passthrough,
                }
                for r in self.quant
            ],
        }


def run_campaign(cfg: TrialConfig) -> LinkReport:
    """Run the full measurement campaign for a plan over the SNR grid.

    Work is keyed by (grid index, role index): each such unit owns an
    independent substream of ``cfg.seed`` and draws a whole batch of
    trials, so results do not depend on evaluation order.  Aggregation is
    a fixed-order reduction; identical configs reproduce bit-identical
    reports.
    """
    plan = cfg.plan
    report = validate_plan(plan)
    if not report.valid:
        raise DomainError(f"refusing to simulate an invalid plan: {report}")
    roles = plan_roles(plan)
    quality = plan.quality

    mi_acc: dict[tuple[str, int, str], list[float]] = {}
    exp_acc: dict[tuple[str, int, Stream], list[float]] = {}
    quant_acc: dict[tuple[str, str], dict] = {}

    for p_idx, snr in enumerate(cfg.snr_grid):
        for r_idx, role in enumerate(roles):
            phase = plan.phases[role.phase_index]
            rng = substream(cfg.seed, p_idx, r_idx)
            real = sample_channel(quality, snr, rng, size=cfg.trials)
            beams = make_beamformers(real, rng)

            for (user, stream), powers in received_term_powers(real, beams, phase, snr).items():
                exp_acc.setdefault((role.name, user, stream), []).append(float(np.mean(powers)))

            rec_a = rec_b = None
            if phase.quant_prelog_a > 0.0 or phase.quant_prelog_b > 0.0:
                symbols = draw_symbols(phase, snr, rng, size=cfg.trials)
                c_bar_a, c_bar_b = interference_terms(real, beams, symbols)
                scale_a, scale_b = interference_scales(real, beams, phase, snr)
                if phase.quant_prelog_a > 0.0:
                    _, rec_a = quantize_interference(
                        c_bar_a, phase.quant_prelog_a, snr,
                        extra_bits=QUANT_EXTRA_BITS, scale=scale_a,
                        range_sigmas=QUANT_RANGE_SIGMAS,
                    )
                    _store_quant(quant_acc, role, "a", rec_a)
                if phase.quant_prelog_b > 0.0:
                    _, rec_b = quantize_interference(
                        c_bar_b, phase.quant_prelog_b, snr,
                        extra_bits=QUANT_EXTRA_BITS, scale=scale_b,
                        range_sigmas=QUANT_RANGE_SIGMAS,
                    )
                    _store_quant(quant_acc, role, "b", rec_b)

            if phase.has(Stream.C):
                mi1, mi2 = decode_c_mi(real, beams, plan, role.phase_index, snr)
                _store_mi(mi_acc, role, 1, "c", mi1)
                _store_mi(mi_acc, role, 2, "c", mi2)

            if role.name in ("tail", "single"):
                private = final_siso_mi(real, beams, plan, role.phase_index, snr)
            else:
                private = mimo_backsub_mi(
                    real, beams, plan, role.phase_index, (rec_a, rec_b), snr
                )
            totals = {1: 0.0, 2: 0.0}
            for (user, stream), mi in private.items():
                _store_mi(mi_acc, role, user, stream.value, mi)
                totals[user] = totals[user] + mi
            for user in (1, 2):
                _store_mi(mi_acc, role, user, "private_sum", totals[user])

    stream_records = []
    for (role_name, user, stream), series in mi_acc.items():
        slope, intercept = fit_slope(cfg.snr_grid, series)
        stream_records.append(
            StreamMiRecord(
                role=role_name,
                phase_index=_role_index(roles, role_name),
                user=user,
                stream=stream,
                mi=tuple(series),
                slope=slope,
                intercept=intercept,
            )
        )

    exponent_records = []
    for (role_name, user, stream), series in exp_acc.items():
        slope, _ = fit_slope(cfg.snr_grid, np.log2(np.maximum(series, 1e-300)))
        phase = plan.phases[_role_index(roles, role_name)]
        exponent_records.append(
            ExponentRecord(
                role=role_name,
                phase_index=_role_index(roles, role_name),
                user=user,
                stream=stream.value,
                annotated_exp=annotated_received_exponent(
                    quality, stream, phase.budget(stream).power_exp, user
                ),
                measured_exp=slope,
                mean_power=tuple(series),
            )
        )

    quant_records = []
    for (role_name, side), acc in quant_acc.items():
        slope, _ = fit_slope(cfg.snr_grid, np.log2(np.maximum(acc["distortion"], 1e-300)))
        quant_records.append(
            QuantSeries(
                role=role_name,
                phase_index=_role_index(roles, role_name),
                side=side,
                budget_prelog=acc["budget"],
                distortion=tuple(acc["distortion"]),
                source_exp=tuple(acc["source_exp"]),
                slope=slope,
                passthrough=acc["passthrough"],
            )
        )

    dof = _assemble_dof(plan, roles, mi_acc, cfg.snr_grid)
    return LinkReport(
        scheme=plan.scheme.value,
        alpha1=quality.alpha1,
        alpha2=quality.alpha2,
        snr_grid=tuple(cfg.snr_grid),
        trials=cfg.trials,
        seed=cfg.seed,
        streams=tuple(stream_records),
        exponents=tuple(exponent_records),
        quant=tuple(quant_records),
        role_durations=tuple((r.name, r.duration) for r in roles),
        dof_estimate=dof,
    )


def _role_index(roles, name: str) -> int:
    for r in roles:
        if r.name == name:
            return r.phase_index
    raise KeyError(name)


def _store_mi(acc, role: RoleSpec, user: int, stream: str, mi: np.ndarray) -> None:
    acc.setdefault((role.name, user, stream), []).append(float(np.mean(mi)))


def _store_quant(acc, role: RoleSpec, side: str, rec: QuantRecord) -> None:
    entry = acc.setdefault(
        (role.name, side),
        {"budget": rec.budget_prelog, "distortion": [], "source_exp": [], "passthrough": False},
    )
    entry["distortion"].append(rec.measured_distortion)
    entry["source_exp"].append(rec.source_power_exp)
    entry["passthrough"] = entry["passthrough"] or rec.passthrough


def _assemble_dof(plan, roles, mi_acc, snr_grid) -> tuple[float, float]:
    """Duration-weighted per-user slope combination, mirroring the accounting."""
    total_t = sum(r.duration for r in roles)
    d = {1: 0.0, 2: 0.0}
    for role in roles:
        for user in (1, 2):
            slope, _ = fit_slope(snr_grid, mi_acc[(role.name, user, "private_sum")])
            d[user] += role.duration * slope
        if plan.c_credit_user2 and (role.name, 1, "c") in mi_acc:
            c1, _ = fit_slope(snr_grid, mi_acc[(role.name, 1, "c")])
            c2, _ = fit_slope(snr_grid, mi_acc[(role.name, 2, "c")])
            d[2] += role.duration * min(c1, c2)
    return (d[1] / total_t, d[2] / total_t)


def supported_prelog_margins(plan: PhasePlan) -> list[tuple[int, str, float]]:
    """Exponent-arithmetic headroom of every decode step in the plan.

    Returns (phase index, step label, supported minus budgeted prelog);
    nonnegative margins mean every budgeted rate sits below what the
    power allocation can carry through its decode step.
    """
    quality = plan.quality
    margins = []
    for idx, phase in enumerate(plan.phases):
        exps = {
            (user, b.stream): annotated_received_exponent(quality, b.stream, b.power_exp, user)
            for user in (1, 2)
            for b in phase.budgets
        }
        c_budget = phase.budget(Stream.C)
        if c_budget is not None:
            gaps = []
            for user in (1, 2):
                interf = [e for (u, s), e in exps.items() if u == user and s is not Stream.C]
                gaps.append(1.0 - max([0.0] + interf))
            margins.append((idx, "c", min(gaps) - c_budget.prelog))
        is_last = idx == plan.num_phases - 1 and plan.num_phases > 1
        if plan.num_phases == 1 or is_last:
            a = phase.budget(Stream.A)
            b = phase.budget(Stream.B)
            if a is not None:
                floor1 = max(0.0, exps.get((1, Stream.B), 0.0))
                margins.append((idx, "a", a.power_exp - floor1 - a.prelog))
            if b is not None:
                floor2 = max(0.0, exps.get((2, Stream.A), 0.0))
                margins.append((idx, "b", b.power_exp - floor2 - b.prelog))
        else:
            quantized_b = phase.quant_prelog_b > 0.0
            floor1 = 0.0
            if not quantized_b:
                floor1 = max(
                    [0.0] + [exps[(1, s)] for s in _USER2 if (1, s) in exps]
                )
            supported1 = sum(
                phase.budget(s).power_exp for s in _USER1 if phase.has(s)
            ) - floor1
            budget1 = sum(phase.budget(s).prelog for s in _USER1 if phase.has(s))
            margins.append((idx, "user1_private", supported1 - budget1))

            quantized_a = phase.quant_prelog_a > 0.0
            floor2 = 0.0
            if not quantized_a:
                floor2 = max(
                    [0.0] + [exps[(2, s)] for s in _USER1 if (2, s) in exps]
                )
            supported2 = sum(
                phase.budget(s).power_exp for s in _USER2 if phase.has(s)
            ) - floor2
            budget2 = sum(phase.budget(s).prelog for s in _USER2 if phase.has(s))
            margins.append((idx, "user2_private", supported2 - budget2))
    return margins


LINK_CSV_HEADER = ["scheme", "P", "phase", "stream", "MI", "slope_so_far"]


def write_link_csv(path, report: LinkReport) -> None:
    """Flat per-(P, role, stream) rows with a running slope column."""
    log2p = np.log2(np.asarray(report.snr_grid))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LINK_CSV_HEADER)
        for rec in sorted(report.streams, key=lambda r: (r.phase_index, r.user, r.stream)):
            for i, (p, mi) in enumerate(zip(report.snr_grid, rec.mi)):
                if i >= 1:
                    slope = float(np.polyfit(log2p[: i + 1], rec.mi[: i + 1], 1)[0])
                    slope_txt = repr(slope)
                else:
                    slope_txt = ""
                writer.writerow(
                    [report.scheme, repr(float(p)), rec.role,
                     f"user{rec.user}:{rec.stream}", repr(mi), slope_txt]
                )
