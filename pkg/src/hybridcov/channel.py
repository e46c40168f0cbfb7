"""Antenna patterns, per-band propagation loss, fading samplers and noise."""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .network import PLANCK, THERMAL_FLOOR_DBM_HZ, Band, Tier

# k_B * T0 implied by the -174 dBm/Hz thermal floor, in W/Hz
KT0 = 10.0 ** ((THERMAL_FLOOR_DBM_HZ - 30.0) / 10.0)
JN_FLAT_LIMIT = 0.1e12  # Hz; Johnson-Nyquist PSD is flat below this


def fejer_gain(n, phi):
    """Uniform-linear-array gain sin^2(pi N phi) / (N sin^2(pi phi)).

    ``phi`` is the half-difference of direction cosines; at integer ``phi``
    the removable singularity evaluates to ``N``.
    """
    phi = np.asarray(phi, dtype=float)
    den = np.sin(np.pi * phi)
    singular = np.abs(den) < 1e-9
    safe = np.where(singular, 1.0, den)
    g = np.sin(np.pi * n * phi) ** 2 / (n * safe ** 2)
    g = np.where(singular, float(n), g)
    return float(g) if g.ndim == 0 else g


def half_power_offset(n: int) -> float:
    """Smallest positive offset where the Fejer gain drops to N/2."""
    if n < 2:
        raise ValueError("half-power offset needs at least two antennas")
    # gain falls monotonically from N at 0 to 0 at the first null 1/N
    return brentq(lambda p: fejer_gain(n, p) - n / 2.0, 1e-12, 1.0 / n,
                  xtol=1e-15, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class FlatTopPattern:
    n: int
    g_max: float
    phi_3db: float
    g_min: float
    p_max: float
    p_min: float

    @property
    def mean_gain(self) -> float:
        return self.g_max * self.p_max + self.g_min * self.p_min


@functools.lru_cache(maxsize=None)
def flat_top_pattern(n: int) -> FlatTopPattern:
    """Two-level main/side-lobe approximation with unit mean gain."""
    n = int(n)
    if n == 1:
        # isotropic element: a single lobe covering every direction
        return FlatTopPattern(1, 1.0, 0.5, 1.0, 1.0, 0.0)
    phi = half_power_offset(n)
    g_max = float(n)
    g_min = (1.0 - 2.0 * phi * g_max) / (1.0 - 2.0 * phi)
    return FlatTopPattern(n, g_max, phi, g_min, 2.0 * phi, 1.0 - 2.0 * phi)


def flat_top_gain(pattern: FlatTopPattern, phi):
    phi = np.asarray(phi, dtype=float)
    if np.any(np.abs(phi) > 0.5):
        raise ValueError("beam offset must lie in [-0.5, 0.5]")
    g = np.where(np.abs(phi) <= pattern.phi_3db, pattern.g_max, pattern.g_min)
    return float(g) if g.ndim == 0 else g


def path_loss(tier: Tier, d, absorption: float = 0.0):
    """Linear propagation gain at distance ``d`` (no fading, no antenna gain)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path loss is singular at d <= 0")
    g = tier.reference_gain * d ** (-tier.path_loss_exp)
    if tier.band is Band.THZ:
        g = g * np.exp(-absorption * d)
    return float(g) if g.ndim == 0 else g


class FadingKind(str, enum.Enum):
    RAYLEIGH = "rayleigh"
    NAKAGAMI = "nakagami"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class FadingModel:
    kind: FadingKind
    shape: int = 1

    @classmethod
    def for_tier(cls, tier: Tier) -> "FadingModel":
        if tier.band is Band.SUB6:
            return cls(FadingKind.RAYLEIGH)
        if tier.band is Band.MMWAVE:
            return cls(FadingKind.NAKAGAMI, tier.nakagami_shape)
        return cls(FadingKind.DETERMINISTIC)


def sample_fading(model: FadingModel, rng: np.random.Generator, size=None):
    """Unit-mean power gain draws."""
    if model.kind is FadingKind.RAYLEIGH:
        return rng.exponential(1.0, size)
    if model.kind is FadingKind.NAKAGAMI:
        return rng.gamma(model.shape, 1.0 / model.shape, size)
    return 1.0 if size is None else np.ones(size)


def johnson_nyquist_psd(carrier: float) -> float:
    """Thermal noise PSD in W/Hz, frequency dependent above 0.1 THz."""
    if carrier <= JN_FLAT_LIMIT:
        return KT0
    hf = carrier * PLANCK
    return hf / math.expm1(hf / KT0)


def noise_power(tier: Tier) -> float:
    """Receiver noise power in watts."""
    if tier.band is Band.THZ:
        return johnson_nyquist_psd(tier.carrier) * tier.bandwidth
    dbm = THERMAL_FLOOR_DBM_HZ + 10.0 * math.log10(tier.bandwidth) + tier.noise_figure
    return 10.0 ** ((dbm - 30.0) / 10.0)
