"""Channel and CSIT sampling for the two-user 2x1 MISO downlink.

Conventions shared by the whole package:

* ``h``/``g`` are the length-2 channel vectors of user 1 / user 2, with
  i.i.d. unit-variance circularly-symmetric complex Gaussian entries.
* The transmitter holds current estimates ``h_hat``/``g_hat``; the
  estimation errors have per-entry power ``P**-alpha1`` / ``P**-alpha2``
  so that ``0.5 * E||h - h_hat||^2 == P**-alpha1``.
* All "inner" products in this module are bilinear (plain transpose, no
  conjugation), matching the received-signal algebra: a beamformer ``u``
  with ``g_hat @ u == 0`` leaves only the estimation error visible at
  user 2.

Everything is pure given an explicit ``numpy.random.Generator``; use
:func:`substream` to derive order-independent per-work-unit streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannelError, DomainError

# Resample policy: draws whose normalizing product |h.u| or |g.v| falls
# below this are rejected (invertibility holds with probability 1).
DENOM_GUARD = 1e-9

# Beamformer unit-norm / orthogonality tolerance.
ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class CsitQuality:
    """Current-CSIT quality exponents, ordered ``1 >= alpha1 >= alpha2 >= 0``."""

    alpha1: float
    alpha2: float

    def __post_init__(self):
        if not (0.0 <= self.alpha2 <= self.alpha1 <= 1.0):
            raise DomainError(
                f"require 1 >= alpha1 >= alpha2 >= 0, got "
                f"({self.alpha1}, {self.alpha2})"
            )

    @property
    def is_case1(self) -> bool:
        """True when ``2*alpha1 - alpha2 < 1`` (the bent-polygon case)."""
        return 2.0 * self.alpha1 - self.alpha2 < 1.0


@dataclass(frozen=True)
class ChannelRealization:
    """One timeslot's true channels, transmitter estimates and errors.

    Arrays have shape ``(2,)`` for a single draw or ``(n, 2)`` for a
    batch; ``h == h_hat + h_tilde`` and ``g == g_hat + g_tilde`` hold
    exactly by construction.
    """

    quality: CsitQuality
    snr: float
    h: np.ndarray
    g: np.ndarray
    h_hat: np.ndarray
    g_hat: np.ndarray
    h_tilde: np.ndarray
    g_tilde: np.ndarray


@dataclass(frozen=True)
class BeamformerSet:
    """Unit-norm transmit directions for one slot.

    ``u`` and ``v`` zero-force the *other* user's channel estimate
    (``g_hat @ u == 0``, ``h_hat @ v == 0``); ``u_p``, ``v_p`` and ``w``
    are isotropic random unit vectors for the secondary and common
    streams.
    """

    u: np.ndarray
    v: np.ndarray
    u_p: np.ndarray
    v_p: np.ndarray
    w: np.ndarray


@dataclass(frozen=True)
class EquivalentChannelStats:
    """Normalized cross coefficients and noises of the rotated channel.

    After zero-forcing rotation each receiver divides by its own direct
    coefficient; the resulting cross gains ``h_prime``/``g_prime`` and
    noises ``z1_prime``/``z2_prime`` must stay O(P^0) for the rotation
    to preserve the high-SNR behaviour.
    """

    h_prime: np.ndarray
    g_prime: np.ndarray
    z1_prime: np.ndarray
    z2_prime: np.ndarray


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for a (seed, index...) work unit.

    Streams derived from distinct keys are independent, so work units can
    be generated in any order (or in parallel) without changing results.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def bdot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear product ``sum_i x_i * y_i`` (no conjugation) over the last axis."""
    return np.sum(x * y, axis=-1)


def cnormal(rng: np.random.Generator, var: float, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian with per-entry variance ``var``."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channel(
    quality: CsitQuality,
    snr: float,
    rng: np.random.Generator,
    size: int | None = None,
) -> ChannelRealization:
    """Draw true channels, estimates and errors at operating power ``snr``.

    Estimate and error are independent with per-entry variances
    ``1 - P**-alpha`` and ``P**-alpha``, so the true channel keeps unit
    per-entry power at every SNR.

    Args:
        quality: CSIT exponents (alpha1 for ``h``, alpha2 for ``g``).
        snr: operating power P; must be >= 1 for a nonzero alpha, else
            the estimate variance would go negative.
        rng: source of randomness.
        size: None for one draw with shape (2,), else a batch (size, 2).
    """
    if not isinstance(quality, CsitQuality):
        quality = CsitQuality(*quality)
    if snr <= 0.0:
        raise DomainError(f"snr must be positive, got {snr}")
    err1 = snr ** (-quality.alpha1)
    err2 = snr ** (-quality.alpha2)
    if max(err1, err2) > 1.0:
        raise DomainError(
            f"snr={snr} < 1 makes the error power exceed the unit channel power"
        )
    shape = (2,) if size is None else (size, 2)
    h_hat = cnormal(rng, 1.0 - err1, shape)
    h_tilde = cnormal(rng, err1, shape)
    g_hat = cnormal(rng, 1.0 - err2, shape)
    g_tilde = cnormal(rng, err2, shape)
    return ChannelRealization(
        quality=quality,
        snr=float(snr),
        h=h_hat + h_tilde,
        g=g_hat + g_tilde,
        h_hat=h_hat,
        g_hat=g_hat,
        h_tilde=h_tilde,
        g_tilde=g_tilde,
    )


def _perp(x: np.ndarray) -> np.ndarray:
    """Unit vector p with ``x @ p == 0`` (bilinear) in dimension 2."""
    p = np.stack([-x[..., 1], x[..., 0]], axis=-1)
    norm = np.linalg.norm(p, axis=-1, keepdims=True)
    if np.any(norm < 1e-15):
        raise DegenerateChannelError("zero channel estimate, no zero-forcing direction")
    return p / norm


def _random_unit(rng: np.random.Generator, shape) -> np.ndarray:
    x = cnormal(rng, 1.0, shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def make_beamformers(real: ChannelRealization, rng: np.random.Generator) -> BeamformerSet:
    """Zero-forcing directions for the estimates plus random unit directions.

    Raises DegenerateChannelError if an estimate vector vanishes (happens
    only for alpha = 0, where the estimate carries no information).
    """
    shape = real.h.shape
    return BeamformerSet(
        u=_perp(real.g_hat),
        v=_perp(real.h_hat),
        u_p=_random_unit(rng, shape),
        v_p=_random_unit(rng, shape),
        w=_random_unit(rng, shape),
    )


def equivalent_channel_stats(
    real: ChannelRealization,
    beams: BeamformerSet,
    rng: np.random.Generator,
) -> EquivalentChannelStats:
    """Receiver-normalized cross coefficients and noises.

    User 1 divides by ``h @ u`` and is left with the cross gain
    ``sqrt(P**alpha1) * (h_tilde @ v) / (h @ u)``; user 2 symmetrically
    with ``g @ v``.  Fresh unit-variance noises are normalized the same
    way.

    Raises DegenerateChannelError when a normalizing product is below
    DENOM_GUARD; callers should resample (see sample_equivalent_stats).
    """
    den1 = bdot(real.h, beams.u)
    den2 = bdot(real.g, beams.v)
    if np.any(np.abs(den1) < DENOM_GUARD) or np.any(np.abs(den2) < DENOM_GUARD):
        raise DegenerateChannelError(
            f"normalizing product below {DENOM_GUARD}; resample the slot"
        )
    p = real.snr
    h_prime = np.sqrt(p**real.quality.alpha1) * bdot(real.h_tilde, beams.v) / den1
    g_prime = np.sqrt(p**real.quality.alpha2) * bdot(real.g_tilde, beams.u) / den2
    shape = np.shape(den1)
    z1 = cnormal(rng, 1.0, shape)
    z2 = cnormal(rng, 1.0, shape)
    return EquivalentChannelStats(
        h_prime=h_prime,
        g_prime=g_prime,
        z1_prime=z1 / den1,
        z2_prime=z2 / den2,
    )


def sample_equivalent_stats(
    quality: CsitQuality,
    snr: float,
    draws: int,
    rng: np.random.Generator,
) -> EquivalentChannelStats:
    """Batch of normalized-channel statistics with the resample policy applied.

    Slots whose normalizing products fall under DENOM_GUARD are redrawn,
    so the returned batch always holds ``draws`` usable samples.
    """
    out = None
    need = draws
    while need > 0:
        real = sample_channel(quality, snr, rng, size=need)
        beams = make_beamformers(real, rng)
        den1 = bdot(real.h, beams.u)
        den2 = bdot(real.g, beams.v)
        good = (np.abs(den1) >= DENOM_GUARD) & (np.abs(den2) >= DENOM_GUARD)
        kept = ChannelRealization(
            quality=real.quality,
            snr=real.snr,
            h=real.h[good],
            g=real.g[good],
            h_hat=real.h_hat[good],
            g_hat=real.g_hat[good],
            h_tilde=real.h_tilde[good],
            g_tilde=real.g_tilde[good],
        )
        kept_beams = BeamformerSet(
            u=beams.u[good],
            v=beams.v[good],
            u_p=beams.u_p[good],
            v_p=beams.v_p[good],
            w=beams.w[good],
        )
        stats = equivalent_channel_stats(kept, kept_beams, rng)
        if out is None:
            out = stats
        else:
            out = EquivalentChannelStats(
                h_prime=np.concatenate([out.h_prime, stats.h_prime]),
                g_prime=np.concatenate([out.g_prime, stats.g_prime]),
                z1_prime=np.concatenate([out.z1_prime, stats.z1_prime]),
                z2_prime=np.concatenate([out.z2_prime, stats.z2_prime]),
            )
        need -= int(np.count_nonzero(good))
    return out


def trimmed_power(samples: np.ndarray, trim: float = 0.005) -> float:
    """Mean |x|^2 after discarding the largest ``trim`` fraction.

    The normalized cross coefficients are ratios of complex Gaussians,
    whose raw second moment does not exist; trimming a sliver of the
    upper tail gives a finite, P-stable power proxy for slope checks.
    """
    power = np.abs(np.ravel(samples)) ** 2
    if trim > 0.0:
        cut = np.quantile(power, 1.0 - trim)
        power = power[power <= cut]
    return float(np.mean(power))
