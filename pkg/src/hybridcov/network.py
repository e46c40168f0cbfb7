"""Scenario schema for multi-tier sub-6GHz / mmWave / THz networks.

All quantities stored here are linear SI values (watts, metres, hertz).
Conversion from dBm / dB happens when a scenario file is parsed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s
PLANCK = 6.62607015e-34  # J*s
THERMAL_FLOOR_DBM_HZ = -174.0


class Band(str, enum.Enum):
    SUB6 = "sub6"
    MMWAVE = "mmwave"
    THZ = "thz"

    @property
    def is_los_limited(self) -> bool:
        # mmWave/THz tiers only associate and interfere over LOS links
        return self is not Band.SUB6


class Direction(str, enum.Enum):
    DL = "dl"
    UL = "ul"


BAND_ORDER = {Band.SUB6: 0, Band.MMWAVE: 1, Band.THZ: 2}


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class Tier:
    """One tier of base stations sharing band, density, powers and biases.

    ``carrier`` is required for mmWave/THz tiers, ``intercept`` (path loss at
    1 m, linear) for sub-6 tiers.  ``nakagami_shape`` only matters for mmWave.
    """

    band: Band
    density: float
    power_dl: float
    power_ul: float
    path_loss_exp: float
    bandwidth: float
    antennas: int = 1
    bias_dl: float = 1.0
    bias_ul: float = 1.0
    nakagami_shape: int = 1
    noise_figure: float = 10.0  # dB
    carrier: Optional[float] = None
    intercept: Optional[float] = None

    def power(self, q: Direction) -> float:
        return self.power_dl if Direction(q) is Direction.DL else self.power_ul

    def bias(self, q: Direction) -> float:
        return self.bias_dl if Direction(q) is Direction.DL else self.bias_ul

    @property
    def reference_gain(self) -> float:
        """Distance-independent part of the path loss (1 m intercept)."""
        if self.band is Band.SUB6:
            return float(self.intercept)
        return (SPEED_OF_LIGHT / (4.0 * math.pi * self.carrier)) ** 2


@dataclass(frozen=True)
class Blockage:
    density: float
    mean_length: float
    mean_width: float

    @property
    def zeta(self) -> float:
        return 2.0 * self.density * (self.mean_length + self.mean_width) / math.pi

    @property
    def p(self) -> float:
        return self.density * self.mean_length * self.mean_width


@dataclass(frozen=True)
class NlosParams:
    """Extra NLOS mmWave paths, consumed by the Monte Carlo engine only."""

    path_loss_exp: float = 4.0
    intercept: float = 10.0 ** (-7.2)
    nakagami_shape: int = 2


@dataclass(frozen=True)
class NetworkConfig:
    tiers: tuple
    blockage: Blockage
    ue_density: float
    absorption: float = 0.01  # K_a, 1/m
    thz_shape: int = 10  # induced Nakagami shape used by the THz series
    sinr_threshold: float = 10.0  # linear
    rate_threshold: float = 1e9  # bit/s
    mmwave_nlos: Optional[NlosParams] = None

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(self.tiers))

    @property
    def n_tiers(self) -> int:
        return len(self.tiers)

    def indices(self, band: Band) -> list:
        return [k for k, t in enumerate(self.tiers) if t.band is band]

    def with_tier(self, k: int, **changes) -> "NetworkConfig":
        tiers = list(self.tiers)
        tiers[k] = replace(tiers[k], **changes)
        return replace(self, tiers=tuple(tiers))

    def absorption_of(self, k: int) -> float:
        return self.absorption if self.tiers[k].band is Band.THZ else 0.0


def los_probability(d, blockage: Blockage):
    """Probability that a link of length ``d`` is unblocked."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    out = np.exp(-(blockage.zeta * d + blockage.p))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Violation:
    code: str
    tier: Optional[int] = None  # 1-based
    message: str = ""
    severity: str = "error"

    def __str__(self):
        where = f"(tier={self.tier})" if self.tier is not None else ""
        return f"{self.code}{where}: {self.message}" if self.message else f"{self.code}{where}"


def validate(config: NetworkConfig) -> list:
    """Return every invariant violation of ``config``; an empty list means valid.

    The UE-density assumption is reported with ``severity="warning"``.
    """
    from .channel import flat_top_pattern  # avoid import cycle

    out = []
    if not config.tiers:
        out.append(Violation("NoTiers", None, "at least one tier is required"))
    last_rank = -1
    for k, t in enumerate(config.tiers, start=1):
        if not isinstance(t.band, Band):
            out.append(Violation("UnknownBand", k, repr(t.band)))
            continue
        rank = BAND_ORDER[t.band]
        if rank < last_rank:
            out.append(Violation("TierOrder", k, "tiers must be ordered sub6, mmwave, thz"))
        last_rank = max(last_rank, rank)
        if not t.density > 0:
            out.append(Violation("DensityNonPositive", k))
        if not (t.power_dl > 0 and t.power_ul > 0):
            out.append(Violation("PowerNonPositive", k))
        if not (t.bias_dl > 0 and t.bias_ul > 0):
            out.append(Violation("BiasNonPositive", k))
        if not t.path_loss_exp > 0:
            out.append(Violation("PathLossExponentNonPositive", k))
        if not t.bandwidth > 0:
            out.append(Violation("BandwidthNonPositive", k))
        if t.band is Band.SUB6:
            if t.antennas != 1:
                out.append(Violation("Sub6MustBeSingleAntenna", k))
            if t.intercept is None or not t.intercept > 0:
                out.append(Violation("MissingIntercept", k))
        else:
            if t.antennas < 2:
                out.append(Violation("ArrayNeedsTwoAntennas", k))
            elif flat_top_pattern(t.antennas).g_min < 0:
                out.append(Violation("SideLobeGainNegative", k))
            if t.carrier is None or not t.carrier > 0:
                out.append(Violation("MissingCarrier", k))
        if t.band is Band.MMWAVE and not (isinstance(t.nakagami_shape, (int, np.integer))
                                          and 1 <= t.nakagami_shape <= 64):
            out.append(Violation("NakagamiShapeInvalid", k))
    b = config.blockage
    if not (b.density >= 0 and b.mean_length > 0 and b.mean_width > 0):
        out.append(Violation("BlockageInvalid", None))
    if not config.absorption >= 0:
        out.append(Violation("AbsorptionNegative", None))
    if not (isinstance(config.thz_shape, (int, np.integer)) and 1 <= config.thz_shape <= 64):
        out.append(Violation("ThzShapeInvalid", None))
    if not config.ue_density > 0:
        out.append(Violation("UEDensityNonPositive", None))
    elif config.tiers and config.ue_density < max(t.density for t in config.tiers):
        out.append(Violation("UEDensityLow", None,
                             "UE density should greatly exceed every BS density",
                             severity="warning"))
    return out


def errors(violations) -> list:
    return [v for v in violations if v.severity == "error"]


def table2_config() -> NetworkConfig:
    """Three-tier default scenario (sub-6, mmWave at 28 GHz, THz at 340 GHz)."""
    sub6 = Tier(Band.SUB6, density=2e-6, power_dl=float(dbm_to_watts(46)),
                power_ul=float(dbm_to_watts(23)), path_loss_exp=4.0, bandwidth=10e6,
                antennas=1, intercept=float(db_to_linear(-38.5)))
    mmw = Tier(Band.MMWAVE, density=5e-5, power_dl=float(dbm_to_watts(33)),
               power_ul=float(dbm_to_watts(23)), path_loss_exp=2.0, bandwidth=1e9,
               antennas=64, nakagami_shape=3, carrier=28e9)
    thz = Tier(Band.THZ, density=5e-4, power_dl=float(dbm_to_watts(23)),
               power_ul=float(dbm_to_watts(23)), path_loss_exp=2.0, bandwidth=10e9,
               antennas=100, carrier=340e9)
    return NetworkConfig(tiers=(sub6, mmw, thz), blockage=Blockage(1e-3, 15.0, 15.0),
                         ue_density=2e-3, absorption=0.01, thz_shape=10,
                         sinr_threshold=float(db_to_linear(10.0)), rate_threshold=1e9)
