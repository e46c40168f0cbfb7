"""Decoupled DL/UL cell association under the strongest biased average power rule.

A UE at the origin associates, per direction, with the tier whose best
candidate offers the largest ``P * C * G_max * l(d)``.  Sub-6 candidates are
every BS; mmWave/THz candidates are LOS BSs only.  All association
probabilities reduce to one-dimensional integrals over the anchor tier's
nearest-candidate distance, weighted by the void probabilities of every
competitor tier inside its boundary distance.

Tier indices are 0-based in the API and 1-based in reports and CSV output.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .network import Band, Direction, NetworkConfig, Tier, Blockage
from .special import QuadratureSpec, integrate, lambert_w0_exp

ASSOC_QUAD = QuadratureSpec(rel_tol=1e-9, abs_tol=1e-13, max_subdivisions=400)
_LOG_DYNAMIC_RANGE = math.log(1e12)
_SERIES_CUTOFF = 1e-3


class NoMassInTier(ValueError):
    """The tier carries (numerically) zero association probability."""


def _los_integral_shape(zeta, beta):
    """(1 - e^{-y}(1 + y)) / zeta^2 with y = zeta*beta; the LOS mass inside beta."""
    beta = np.asarray(beta, dtype=float)
    if zeta == 0.0:
        return 0.5 * beta ** 2
    y = zeta * beta
    with np.errstate(over="ignore", invalid="ignore"):
        direct = -np.expm1(-y) - y * np.exp(-y)
        series = y * y * (0.5 - y / 3.0 + y * y / 8.0 - y ** 3 / 30.0)
    g = np.where(y < _SERIES_CUTOFF, series, direct)
    g = np.where(np.isinf(beta), 1.0, g)
    return g / zeta ** 2


def log_void(tier: Tier, blockage: Blockage, beta):
    """log P(no candidate of ``tier`` within distance ``beta``)."""
    beta = np.asarray(beta, dtype=float)
    if tier.band is Band.SUB6:
        with np.errstate(over="ignore"):
            return -math.pi * tier.density * beta ** 2
    return (-2.0 * math.pi * tier.density * math.exp(-blockage.p)
            * _los_integral_shape(blockage.zeta, beta))


def nearest_los_distance_pdf(tier: Tier, blockage: Blockage, x):
    """Density of the distance to the nearest LOS BS of ``tier``."""
    x = np.asarray(x, dtype=float)
    lam = tier.density
    z, p = blockage.zeta, blockage.p
    with np.errstate(divide="ignore"):
        logf = (np.log(2.0 * math.pi * lam * x) - (z * x + p)
                - 2.0 * math.pi * lam * math.exp(-p) * _los_integral_shape(z, x))
    out = np.where(x > 0, np.exp(logf), 0.0)
    return float(out) if out.ndim == 0 else out


def nearest_los_distance_cdf(tier: Tier, blockage: Blockage, x):
    out = -np.expm1(-2.0 * math.pi * tier.density * math.exp(-blockage.p)
                    * _los_integral_shape(blockage.zeta, x))
    return float(out) if np.ndim(out) == 0 else out


def nearest_distance_pdf(tier: Tier, x):
    """Density of the distance to the nearest BS of an unthinned HPPP."""
    x = np.asarray(x, dtype=float)
    lam = tier.density
    out = 2.0 * math.pi * lam * x * np.exp(-math.pi * lam * x * x)
    return float(out) if out.ndim == 0 else out


def _log_anchor_pdf(config: NetworkConfig, k: int, x):
    tier = config.tiers[k]
    x = np.asarray(x, dtype=float)
    lam = tier.density
    with np.errstate(divide="ignore"):
        base = np.log(2.0 * math.pi * lam * x)
    if tier.band is Band.SUB6:
        return base - math.pi * lam * x * x
    b = config.blockage
    return (base - (b.zeta * x + b.p)
            - 2.0 * math.pi * lam * math.exp(-b.p) * _los_integral_shape(b.zeta, x))


def anchor_pdf(config: NetworkConfig, k: int, x):
    """Density of the distance to tier k's nearest candidate BS."""
    out = np.exp(_log_anchor_pdf(config, k, x))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- boundaries

def log_reference_power(config: NetworkConfig, k: int, q) -> float:
    """log of P_k^q * C_k^q * N_k * l_k(1 m): biased power at unit distance."""
    t = config.tiers[k]
    q = Direction(q)
    return math.log(t.power(q) * t.bias(q) * t.antennas * t.reference_gain)


def log_biased_power(config: NetworkConfig, k: int, q, x):
    """log of the average biased received power from a tier-k BS at distance x."""
    t = config.tiers[k]
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return (log_reference_power(config, k, q) - t.path_loss_exp * np.log(x)
                - config.absorption_of(k) * x)


def boundary(config: NetworkConfig, anchor: int, competitor: int, q, x):
    """Distance inside which a ``competitor`` BS beats an ``anchor`` BS at ``x``.

    Power-law competitors invert algebraically; THz competitors (with
    absorption) invert through the Lambert W function.
    """
    x = np.asarray(x, dtype=float)
    tb = config.tiers[competitor]
    alpha = tb.path_loss_exp
    ka = config.absorption_of(competitor)
    log_s = log_biased_power(config, anchor, q, x)
    # exponent of the competitor's threshold (D^alpha e^{K D} = e^{log_rhs})
    log_rhs = log_reference_power(config, competitor, q) - log_s
    if ka == 0.0:
        with np.errstate(over="ignore"):  # inf: the competitor wins everywhere
            d = np.exp(log_rhs / alpha)
    else:
        d = (alpha / ka) * lambert_w0_exp(math.log(ka / alpha) + log_rhs / alpha)
    d = np.where(x > 0, d, 0.0)
    return float(d) if np.ndim(d) == 0 else d


def lambert_constant(config: NetworkConfig, anchor: int, competitor: int, q) -> float:
    """Constant Lambda multiplying x^{alpha_a/alpha_b} inside W for THz competitors."""
    tb = config.tiers[competitor]
    if tb.band is not Band.THZ:
        raise ValueError("Lambert-W boundaries exist only for THz competitors")
    alpha = tb.path_loss_exp
    ratio = math.exp(log_reference_power(config, competitor, q)
                     - log_reference_power(config, anchor, q))
    return config.absorption / alpha * ratio ** (1.0 / alpha)


BOUNDARY_NAMES = {
    (Band.SUB6, Band.SUB6): "varrho", (Band.SUB6, Band.MMWAVE): "varepsilon",
    (Band.SUB6, Band.THZ): "vartheta", (Band.MMWAVE, Band.SUB6): "chi",
    (Band.MMWAVE, Band.MMWAVE): "Omega", (Band.MMWAVE, Band.THZ): "Psi",
    (Band.THZ, Band.SUB6): "Upsilon", (Band.THZ, Band.MMWAVE): "Xi",
    (Band.THZ, Band.THZ): "Theta",
}


# ---------------------------------------------------------------- probabilities

def log_joint_density(config: NetworkConfig, k: int, q, x):
    """log of [anchor density at x] * P(no competitor beats the anchor at x)."""
    x = np.asarray(x, dtype=float)
    out = _log_anchor_pdf(config, k, x)
    for j, tj in enumerate(config.tiers):
        if j == k:
            continue
        out = out + log_void(tj, config.blockage, boundary(config, k, j, q, x))
    return out


def joint_density(config: NetworkConfig, k: int, q, x):
    out = np.exp(log_joint_density(config, k, q, x))
    return float(out) if np.ndim(out) == 0 else out


def no_candidate_probability(config: NetworkConfig) -> float:
    """P(no tier offers any candidate); zero whenever a sub-6 tier exists."""
    total = 0.0
    for t in config.tiers:
        if t.band is Band.SUB6:
            return 0.0
        total += float(log_void(t, config.blockage, np.inf))
    return math.exp(total)


@functools.lru_cache(maxsize=4096)
def integration_domain(config: NetworkConfig, k: int):
    """(x_max, breakpoints) covering tier k's anchor density down to 1e-12 of peak."""
    tier = config.tiers[k]
    if tier.band is Band.SUB6:
        scale = 1.0 / math.sqrt(math.pi * tier.density)
        x_max = 6.0 * scale
        peak = scale / math.sqrt(2.0)
    else:
        grid = np.logspace(-4, 8, 4801)
        logf = _log_anchor_pdf(config, k, grid)
        i_peak = int(np.argmax(logf))
        peak = grid[i_peak]
        tail = np.nonzero(logf[i_peak:] < logf[i_peak] - _LOG_DYNAMIC_RANGE)[0]
        x_max = grid[i_peak + tail[0]] if tail.size else grid[-1]
    pts = [peak / 8.0, peak / 2.0, peak]
    nxt = 2.0 * peak
    while nxt < x_max:
        pts.append(nxt)
        nxt *= 2.0
    return float(x_max), tuple(p for p in pts if 0 < p < x_max)


@functools.lru_cache(maxsize=4096)
def joint_mass(config: NetworkConfig, k: int, q) -> float:
    """Unnormalised association integral over tier k's anchor distance."""
    q = Direction(q)
    x_max, pts = integration_domain(config, k)
    return integrate(lambda x: joint_density(config, k, q, x), 0.0, x_max,
                     ASSOC_QUAD, breakpoints=pts)


def association_probability(config: NetworkConfig, k: int, q) -> float:
    """P(the direction-q decision picks tier k | some candidate exists)."""
    return joint_mass(config, k, Direction(q)) / (1.0 - no_candidate_probability(config))


def association_probabilities(config: NetworkConfig, q) -> np.ndarray:
    return np.array([association_probability(config, k, q) for k in range(config.n_tiers)])


def serving_distance_pdf(config: NetworkConfig, k: int, q, x):
    """Density of the serving distance given association with tier k."""
    mass = joint_mass(config, k, Direction(q))
    if mass < 1e-9:
        raise NoMassInTier(f"tier {k + 1} has association mass {mass:.3g}")
    out = joint_density(config, k, q, x) / mass
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class AssociationReport:
    probabilities: dict  # (k, Direction) -> probability
    grids: dict = field(default_factory=dict)  # k -> distance grid
    pdfs: dict = field(default_factory=dict)  # (k, Direction) -> tabulated pdf

    def rows(self):
        for (k, q), a in sorted(self.probabilities.items(), key=lambda kv: (kv[0][1].value, kv[0][0])):
            yield {"tier": k + 1, "direction": q.value, "probability": repr(float(a))}

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["tier", "direction", "probability"])
            w.writeheader()
            w.writerows(self.rows())


def association_report(config: NetworkConfig, n_grid: int = 512) -> AssociationReport:
    rep = AssociationReport(probabilities={})
    for k in range(config.n_tiers):
        x_max, _ = integration_domain(config, k)
        grid = np.logspace(math.log10(x_max) - 6.0, math.log10(x_max), n_grid)
        rep.grids[k] = grid
        for q in Direction:
            rep.probabilities[(k, q)] = association_probability(config, k, q)
            if joint_mass(config, k, q) >= 1e-9:
                rep.pdfs[(k, q)] = serving_distance_pdf(config, k, q, grid)
    return rep
