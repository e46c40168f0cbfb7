"""Analytical SINR and rate coverage for sub-6GHz, mmWave and THz tiers.

Conditional coverage (given the serving tier and serving distance x) follows
from the Laplace transform of the same-band interference, with the interferer
exclusion radius set by the association boundary at x.  mmWave and THz tiers
use the alternating binomial series obtained from the gamma-CDF bound
``P(h > y) ~ 1 - (1 - exp(-eta*y))^gamma``; the THz tier's deterministic
channel is modelled as a gamma variable of shape ``config.thz_shape``.

Every function here is vectorised over thresholds and serving distances:
results have shape ``(len(tau), len(x))``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import association as assoc
from .channel import flat_top_pattern, noise_power
from .network import Band, Direction, NetworkConfig
from .special import QuadratureSpec, binomial, eta, integrate

INNER_QUAD = QuadratureSpec(rel_tol=1e-8, abs_tol=1e-11, max_subdivisions=300)
OUTER_QUAD = QuadratureSpec(rel_tol=1e-7, abs_tol=1e-10, max_subdivisions=400)
CLAMP_SLACK = 1e-6
_LOG_HUGE = 700.0


@dataclass
class Diagnostics:
    """Collects numerical-safety events raised while evaluating series."""

    clamped: int = 0
    worst_excursion: float = 0.0

    def note(self, raw):
        raw = np.asarray(raw)
        excursion = np.maximum(-raw, raw - 1.0)
        bad = excursion > CLAMP_SLACK
        if np.any(bad):
            self.clamped += int(np.count_nonzero(bad))
            self.worst_excursion = max(self.worst_excursion, float(np.max(excursion)))


# ---------------------------------------------------------------- Laplace exponents

def _lobes(tier):
    """(gain, probability) pairs of the interferer beam pattern."""
    if tier.band is Band.SUB6:
        return np.array([1.0]), np.array([1.0])
    pat = flat_top_pattern(tier.antennas)
    if pat.p_min == 0.0:
        return np.array([pat.g_max]), np.array([1.0])
    return np.array([pat.g_max, pat.g_min]), np.array([pat.p_max, pat.p_min])


def _interference_exponent(config, j, q, log_s, beta):
    """-log Laplace transform of tier j's interference beyond ``beta``.

    ``log_s`` has shape (..., X) and holds log of the Laplace variable already
    divided into the receive-side normalisation; ``beta`` has shape (X,).
    Returns an array shaped like ``log_s``.
    """
    tj = config.tiers[j]
    gains, probs = _lobes(tj)
    log_amp = math.log(tj.power(q) * tj.reference_gain) + np.log(gains)  # (W,)
    alpha = tj.path_loss_exp
    los = tj.band is not Band.SUB6
    zeta, p = config.blockage.zeta, config.blockage.p
    if tj.band is Band.SUB6:
        fading = "rayleigh"
    elif tj.band is Band.MMWAVE:
        fading = "gamma"
    else:
        fading = "deterministic"
    shape = tj.nakagami_shape

    if alpha <= 2.0 and not (los and zeta > 0.0):
        # unbounded mean interference: Laplace transform is zero
        return np.full(log_s.shape, np.inf)

    # integrate over v with r = beta * e^v, v in [0, inf) mapped to t in [0, 1)
    log_beta = np.log(np.maximum(beta, 1e-300))
    la = log_s[..., None, :] + log_amp[:, None]  # (..., W, X)
    weights = 2.0 * math.pi * tj.density * probs[:, None]  # (W, 1)
    if los:
        weights = weights * math.exp(-p)

    log_w = np.log(weights)

    def kernel(t):
        one_minus = 1.0 - t
        v = t / one_minus
        log_r = log_beta[:, None] + v[None, :]  # (X, T)
        log_u = la[..., None] - alpha * log_r  # (..., W, X, T)
        with np.errstate(over="ignore", divide="ignore"):
            u = np.exp(np.minimum(log_u, _LOG_HUGE))
            if fading == "rayleigh":
                log_k = -np.log1p(1.0 / u)
            elif fading == "gamma":
                log_k = np.log(-np.expm1(-shape * np.log1p(u / shape)))
            else:
                log_k = np.log(-np.expm1(-u))
            # all three kernels behave like u for small u
            log_k = np.where(log_u < -30.0, log_u, log_k)
            # r dr with dr = r dv, times the LOS probability and the t-map Jacobian
            log_dens = 2.0 * log_r - 2.0 * np.log(one_minus)[None, :]
            if los:
                log_dens = log_dens - zeta * np.exp(np.minimum(log_r, _LOG_HUGE))
            return np.exp(log_w[..., None] + log_k + log_dens)

    # integrate() wants the node axis last; flatten the component axes
    lead = la.shape

    def flat(t):
        return kernel(t).reshape(-1, t.size)

    # tail breakpoints in t where r passes the blockage scale
    pts = (0.5, 0.75, 0.9)
    out = integrate(flat, 0.0, 1.0, INNER_QUAD, breakpoints=pts).reshape(lead)
    return out.sum(axis=-2)


def _log_tau(tau):
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau <= 0):
        raise ValueError("threshold must be positive")
    with np.errstate(over="ignore"):
        return np.log(tau)


def _boundaries(config, k, assoc_dir, x, band):
    out = []
    for j in config.indices(band):
        beta = x if j == k else assoc.boundary(config, k, j, assoc_dir, x)
        out.append((j, np.atleast_1d(np.asarray(beta, dtype=float))))
    return out


def _series(log_terms, shape, diag):
    """Sum (-1)^{n+1} C(shape, n) exp(log_terms[..., n-1, :]) over n."""
    coeffs = np.array([(-1) ** (n + 1) * binomial(shape, n) for n in range(1, shape + 1)],
                      dtype=float)
    terms = coeffs[:, None] * np.exp(log_terms)  # (..., N, X)
    moved = np.moveaxis(terms, -2, 0)
    raw = np.empty(moved.shape[1:])
    for idx in np.ndindex(raw.shape):
        raw[idx] = math.fsum(moved[(slice(None),) + idx])
    if diag is not None:
        diag.note(raw)
    return np.clip(raw, 0.0, 1.0)


# ---------------------------------------------------------------- conditional coverage

def conditional_coverage_sub6(config: NetworkConfig, s: int, q, tau, x,
                              assoc_dir=None, diag: Diagnostics | None = None):
    """P(SINR > tau | sub-6 tier s serves at distance x); shape (T, X)."""
    q = Direction(q)
    assoc_dir = Direction(assoc_dir or q)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ts = config.tiers[s]
    log_tau = _log_tau(tau)
    # s_lap = tau / (P_s g_s x^-alpha)
    log_s = (log_tau[:, None] - math.log(ts.power(q) * ts.reference_gain)
             + ts.path_loss_exp * np.log(x)[None, :])
    expo = np.exp(np.minimum(log_s, _LOG_HUGE)) * noise_power(ts)
    for j, beta in _boundaries(config, s, assoc_dir, x, Band.SUB6):
        expo = expo + _interference_exponent(config, j, q, log_s, beta)
    out = np.exp(-expo)
    out = np.where(np.isposinf(log_tau)[:, None], 0.0, out)
    return out


def conditional_coverage_mmwave(config: NetworkConfig, m: int, q, tau, x,
                                assoc_dir=None, diag: Diagnostics | None = None):
    """Gamma-bound series for an mmWave serving tier; shape (T, X)."""
    q = Direction(q)
    assoc_dir = Direction(assoc_dir or q)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tm = config.tiers[m]
    shape = int(tm.nakagami_shape)
    e = eta(shape)
    n = np.arange(1, shape + 1, dtype=float)
    log_tau = _log_tau(tau)
    log_sig = math.log(tm.power(q) * tm.antennas * tm.reference_gain)
    log_s = (log_tau[:, None, None] + np.log(n * e)[None, :, None] - log_sig
             + tm.path_loss_exp * np.log(x)[None, None, :])  # (T, N, X)
    expo = np.exp(np.minimum(log_s, _LOG_HUGE)) * noise_power(tm)
    for j, beta in _boundaries(config, m, assoc_dir, x, Band.MMWAVE):
        expo = expo + _interference_exponent(config, j, q, log_s, beta)
    out = _series(-expo, shape, diag)
    return np.where(np.isposinf(log_tau)[:, None], 0.0, out)


def conditional_coverage_thz(config: NetworkConfig, t: int, q, tau, x,
                             assoc_dir=None, diag: Diagnostics | None = None):
    """Gamma-bound series for a THz serving tier with absorption noise; shape (T, X)."""
    q = Direction(q)
    assoc_dir = Direction(assoc_dir or q)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tt = config.tiers[t]
    shape = int(config.thz_shape)
    e = eta(shape)
    n = np.arange(1, shape + 1, dtype=float)
    ka = config.absorption
    log_tau = _log_tau(tau)
    log_j = (math.log(tt.power(q) * tt.antennas * tt.reference_gain)
             - tt.path_loss_exp * np.log(x))  # (X,)
    log_s = (log_tau[:, None, None] + np.log(n * e)[None, :, None]
             + (ka * x - log_j)[None, None, :])  # (T, N, X)
    s = np.exp(np.minimum(log_s, _LOG_HUGE))
    # s * (J (1 - e^{-Kx}) + noise) = n eta tau (e^{Kx} - 1) + s * noise
    with np.errstate(over="ignore"):  # inf exponent means zero coverage
        self_abs = np.exp(np.minimum(log_tau[:, None, None] + np.log(n * e)[None, :, None],
                                     _LOG_HUGE)) * np.expm1(ka * x)[None, None, :]
    expo = s * noise_power(tt) + self_abs
    for j, beta in _boundaries(config, t, assoc_dir, x, Band.THZ):
        expo = expo + _interference_exponent(config, j, q, log_s, beta)
    out = _series(-expo, shape, diag)
    return np.where(np.isposinf(log_tau)[:, None], 0.0, out)


_CONDITIONAL = {
    Band.SUB6: conditional_coverage_sub6,
    Band.MMWAVE: conditional_coverage_mmwave,
    Band.THZ: conditional_coverage_thz,
}


def conditional_coverage(config, k, q, tau, x, assoc_dir=None, diag=None):
    return _CONDITIONAL[config.tiers[k].band](config, k, q, tau, x, assoc_dir, diag)


# ---------------------------------------------------------------- totals

def _weighted_coverage(config, k, q, taus, assoc_dir, diag):
    """Integral over x of P_cov,k(tau, x) * joint density; shape (T,)."""
    taus = np.asarray(taus, dtype=float)
    if assoc.joint_mass(config, k, assoc_dir) < 1e-12:
        return np.zeros(taus.shape)
    x_max, pts = assoc.integration_domain(config, k)

    def f(x):
        jd = assoc.joint_density(config, k, assoc_dir, x)
        return conditional_coverage(config, k, q, taus, x, assoc_dir, diag) * jd[None, :]

    return np.atleast_1d(integrate(f, 0.0, x_max, OUTER_QUAD, breakpoints=pts))


@dataclass
class LoadModel:
    """Mean number of UEs sharing a BS of each tier."""

    z: np.ndarray

    @classmethod
    def from_association(cls, config: NetworkConfig, probabilities) -> "LoadModel":
        a = np.asarray(probabilities, dtype=float)
        dens = np.array([t.density for t in config.tiers])
        return cls(1.0 + 1.28 * config.ue_density * a / dens)


def load_factor(ue_density: float, probability: float, density: float) -> float:
    return 1.0 + 1.28 * ue_density * probability / density


def rate_to_sinr_threshold(rate, bandwidth, load):
    """SINR needed for (B/Z) log2(1 + SINR) > rate; inf when it overflows."""
    expo = np.asarray(rate, dtype=float) * load / bandwidth * math.log(2.0)
    with np.errstate(over="ignore"):
        return np.where(expo > _LOG_HUGE, np.inf, np.expm1(np.minimum(expo, _LOG_HUGE)))


@dataclass
class CoverageCurve:
    direction: Direction
    kind: str  # "sinr" (thresholds in dB) or "rate" (bit/s)
    thresholds: np.ndarray
    association: np.ndarray  # (K,)
    conditional: np.ndarray  # (K, T); nan where a tier carries no mass
    weighted: np.ndarray  # (K, T)
    total: np.ndarray  # (T,)
    assoc_direction: Direction | None = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def clamped(self) -> bool:
        return self.diagnostics.clamped > 0

    def rows(self):
        for i, thr in enumerate(self.thresholds):
            for k in range(len(self.association)):
                yield (self.direction.value, thr, k + 1, "conditional", self.conditional[k, i])
                yield (self.direction.value, thr, k + 1, "weighted", self.weighted[k, i])
            yield (self.direction.value, thr, "total", "total", self.total[i])

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["direction", "threshold", "tier", "quantity", "value"])
            for d, thr, tier, qty, val in self.rows():
                w.writerow([d, repr(float(thr)), tier, qty, repr(float(val))])


def _assemble(config, q, assoc_dir, kind, thresholds, per_tier_tau):
    diag = Diagnostics()
    a = assoc.association_probabilities(config, assoc_dir)
    norm = 1.0 - assoc.no_candidate_probability(config)
    K, T = config.n_tiers, len(thresholds)
    weighted = np.zeros((K, T))
    conditional = np.full((K, T), np.nan)
    for k in range(K):
        taus = per_tier_tau(k)
        finite = np.isfinite(taus)
        if np.any(finite):
            weighted[k, finite] = _weighted_coverage(config, k, q, taus[finite], assoc_dir, diag) / norm
        if a[k] >= 1e-9:
            conditional[k] = weighted[k] / a[k]
    conditional = np.clip(conditional, 0.0, 1.0)
    return CoverageCurve(q, kind, np.asarray(thresholds, dtype=float), a, conditional,
                         weighted, weighted.sum(axis=0), assoc_dir, diag)


def sinr_coverage(config: NetworkConfig, q, tau_db, assoc_dir=None) -> CoverageCurve:
    """Total and per-tier SINR coverage over a grid of thresholds in dB.

    ``assoc_dir`` selects the decision rule (default: same as the link
    direction); a UL link with DL association gives the coupled UL.
    """
    q = Direction(q)
    assoc_dir = Direction(assoc_dir or q)
    tau_db = np.atleast_1d(np.asarray(tau_db, dtype=float))
    tau = 10.0 ** (tau_db / 10.0)
    return _assemble(config, q, assoc_dir, "sinr", tau_db, lambda k: tau)


def rate_coverage(config: NetworkConfig, q, rho, assoc_dir=None) -> CoverageCurve:
    """Total and per-tier rate coverage over a grid of rate thresholds (bit/s)."""
    q = Direction(q)
    assoc_dir = Direction(assoc_dir or q)
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho <= 0):
        raise ValueError("rate threshold must be positive")
    load = LoadModel.from_association(config, assoc.association_probabilities(config, assoc_dir))

    def per_tier(k):
        return rate_to_sinr_threshold(rho, config.tiers[k].bandwidth, load.z[k])

    return _assemble(config, q, assoc_dir, "rate", rho, per_tier)
