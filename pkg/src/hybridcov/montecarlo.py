"""Monte Carlo ground truth for association, SINR, rate and percentile metrics.

Each trial draws an independent network snapshot around a UE at the origin
from its own generator, seeded by ``SeedSequence([seed, trial])``, so results
depend only on (config, seed, trial count) and never on how trials are split
across workers.  Trials are processed in chunks with flat per-BS arrays; each
trial's BSs are stored contiguously, ordered by tier and then by distance.
Ties in biased power go to the lowest tier, then the nearest BS.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .channel import fejer_gain, flat_top_pattern, noise_power
from .network import Band, Direction, NetworkConfig, NlosParams

SERIES = ("dl", "ul", "ul-coupled")
_LOS_TAIL = 6.0 * math.log(10.0)  # P_LOS(R) = 1e-6
_SUB6_RADII = 5.0
Z95 = 1.959963984540054


class NoCandidate(RuntimeError):
    """No tier offers a candidate BS in this realization."""


@dataclass(frozen=True)
class SimOptions:
    radius: Optional[float] = None  # one radius for every tier; default per band
    blockage_mode: str = "bernoulli"  # or "rectangles"
    gain_mode: str = "flat-top"  # or "fejer"
    thz_fading: str = "deterministic"  # or "induced": Gamma(thz_shape) like the analysis
    coupled: bool = False
    chunk_size: int = 500

    def __post_init__(self):
        if self.blockage_mode not in ("bernoulli", "rectangles"):
            raise ValueError(f"unknown blockage mode {self.blockage_mode!r}")
        if self.gain_mode not in ("flat-top", "fejer"):
            raise ValueError(f"unknown gain mode {self.gain_mode!r}")
        if self.thz_fading not in ("deterministic", "induced"):
            raise ValueError(f"unknown THz fading {self.thz_fading!r}")
        if self.radius is not None and not self.radius > 0:
            raise ValueError("radius must be positive")


def simulation_radii(config: NetworkConfig, radius: Optional[float] = None) -> np.ndarray:
    """Per-tier disk radius.

    LOS-limited tiers stop where the LOS probability falls below 1e-6; sub-6
    tiers cover five mean nearest-neighbour scales of the sparsest sub-6 tier.
    """
    if radius is not None:
        return np.full(config.n_tiers, float(radius))
    b = config.blockage
    sub6 = [t.density for t in config.tiers if t.band is Band.SUB6]
    r_sub6 = _SUB6_RADII / math.sqrt(math.pi * min(sub6)) if sub6 else 0.0
    out = []
    for t in config.tiers:
        if t.band is Band.SUB6:
            out.append(r_sub6)
        elif b.zeta > 0:
            out.append(max((_LOS_TAIL - b.p) / b.zeta, 1.0))
        else:
            out.append(_SUB6_RADII / math.sqrt(math.pi * t.density * math.exp(-b.p)))
    return np.array(out)


def nlos_mmwave_toggle(config: NetworkConfig, params: Optional[NlosParams] = None) -> NetworkConfig:
    """Copy of ``config`` whose mmWave tiers also offer NLOS paths (MC only)."""
    return replace(config, mmwave_nlos=params or NlosParams())


# ---------------------------------------------------------------- realizations

@dataclass
class Realization:
    """Flat per-BS arrays for one or more trials (``trial`` gives ownership)."""

    n_trials: int
    trial: np.ndarray
    tier: np.ndarray
    distance: np.ndarray
    angle: np.ndarray
    los: np.ndarray
    fading: dict  # Direction -> per-BS power gain on the LOS (or sub-6) path
    nlos_fading: dict  # Direction -> per-BS gain on the NLOS path (zeros if unused)
    beam: dict  # Direction -> interferer beam offset phi_D in [-0.5, 0.5]
    blockage_mode: str = "bernoulli"
    first_trial: int = 0

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.trial - self.first_trial, minlength=self.n_trials)


def _segment_los(xb, yb, rects):
    """True where the segment origin->(xb, yb) misses every rectangle."""
    cx, cy, th, ln, wd = rects
    los = np.ones(xb.size, dtype=bool)
    if cx.size == 0 or xb.size == 0:
        return los
    c, s = np.cos(th), np.sin(th)
    step = max(1, 2_000_000 // cx.size)
    for lo in range(0, xb.size, step):
        bx = xb[lo:lo + step, None]
        by = yb[lo:lo + step, None]
        # origin and BS in each rectangle's frame
        ox = -cx * c - cy * s
        oy = cx * s - cy * c
        dx = bx * c + by * s
        dy = -bx * s + by * c
        hl, hw = ln / 2.0, wd / 2.0
        t0 = np.zeros(dx.shape)
        t1 = np.ones(dx.shape)
        hit = np.ones(dx.shape, dtype=bool)
        for o, d, h in ((ox, dx, hl), (oy, dy, hw)):
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (-h - o) / d
                tb = (h - o) / d
            tmin = np.minimum(ta, tb)
            tmax = np.maximum(ta, tb)
            parallel = d == 0
            inside = np.abs(o) <= h
            hit &= ~(parallel & ~inside)
            t0 = np.where(parallel, t0, np.maximum(t0, tmin))
            t1 = np.where(parallel, t1, np.minimum(t1, tmax))
        hit &= t0 <= t1
        los[lo:lo + step] = ~hit.any(axis=1)
    return los


def _draw_rectangles(rng, config, reach):
    b = config.blockage
    margin = 10.0 * max(b.mean_length, b.mean_width)
    big = reach + margin
    n = rng.poisson(b.density * math.pi * big * big)
    rad = big * np.sqrt(rng.random(n))
    ang = rng.random(n) * 2.0 * math.pi
    th = rng.random(n) * 2.0 * math.pi
    ln = rng.exponential(b.mean_length, n)
    wd = rng.exponential(b.mean_width, n)
    return rad * np.cos(ang), rad * np.sin(ang), th, ln, wd


def _draw_trial(config, radii, seed, trial, blockage_mode, thz_fading="deterministic"):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, trial])))
    dens = np.array([t.density for t in config.tiers])
    counts = rng.poisson(dens * np.pi * radii ** 2)
    parts = []
    for k, t in enumerate(config.tiers):
        n = int(counts[k])
        u = rng.random((5, n))
        d = np.sort(radii[k] * np.sqrt(u[0]))
        if t.band is Band.SUB6:
            h = rng.standard_exponential((2, n))
        elif t.band is Band.MMWAVE:
            h = rng.standard_gamma(t.nakagami_shape, (2, n)) / t.nakagami_shape
        elif thz_fading == "induced":
            h = rng.standard_gamma(config.thz_shape, (2, n)) / config.thz_shape
        else:
            h = np.ones((2, n))
        if t.band is Band.SUB6:
            los = np.ones(n, dtype=bool)
        else:
            los = u[2] < np.exp(-(config.blockage.zeta * d + config.blockage.p))
        parts.append((k, d, 2.0 * math.pi * u[1], los, h, u[3] - 0.5, u[4] - 0.5))
    nlos_h = []
    for k, t in enumerate(config.tiers):
        n = int(counts[k])
        if config.mmwave_nlos is not None and t.band is Band.MMWAVE:
            sh = config.mmwave_nlos.nakagami_shape
            nlos_h.append(rng.standard_gamma(sh, (2, n)) / sh)
        else:
            nlos_h.append(np.zeros((2, n)))
    if blockage_mode == "rectangles":
        los_tiers = [k for k, t in enumerate(config.tiers) if t.band is not Band.SUB6]
        if los_tiers:
            rects = _draw_rectangles(rng, config, max(radii[k] for k in los_tiers))
            for k in los_tiers:
                _, d, ang, _, h, bd, bu = parts[k]
                los = _segment_los(d * np.cos(ang), d * np.sin(ang), rects)
                parts[k] = (k, d, ang, los, h, bd, bu)
    return parts, nlos_h


def sample_realization(config: NetworkConfig, radius=None, seed: int = 0, trial: int = 0,
                       blockage_mode: str = "bernoulli",
                       thz_fading: str = "deterministic") -> Realization:
    """One network snapshot, fully determined by (seed, trial)."""
    return sample_batch(config, seed, trial, trial + 1, radius, blockage_mode, thz_fading)


def sample_batch(config, seed, start, stop, radius=None, blockage_mode="bernoulli",
                 thz_fading="deterministic") -> Realization:
    radii = simulation_radii(config, radius)
    cols = {name: [] for name in ("trial", "tier", "d", "ang", "los", "hd", "hu",
                                  "bd", "bu", "nd", "nu")}
    for tr in range(start, stop):
        parts, nlos_h = _draw_trial(config, radii, seed, tr, blockage_mode, thz_fading)
        for (k, d, ang, los, h, bd, bu), nh in zip(parts, nlos_h):
            n = d.size
            cols["trial"].append(np.full(n, tr, dtype=np.int64))
            cols["tier"].append(np.full(n, k, dtype=np.int64))
            cols["d"].append(d)
            cols["ang"].append(ang)
            cols["los"].append(los)
            cols["hd"].append(h[0])
            cols["hu"].append(h[1])
            cols["bd"].append(bd)
            cols["bu"].append(bu)
            cols["nd"].append(nh[0])
            cols["nu"].append(nh[1])

    def cat(name, dtype=float):
        return np.concatenate(cols[name]) if cols[name] else np.zeros(0, dtype=dtype)

    return Realization(
        n_trials=stop - start, trial=cat("trial", np.int64), tier=cat("tier", np.int64),
        distance=cat("d"), angle=cat("ang"), los=cat("los", bool),
        fading={Direction.DL: cat("hd"), Direction.UL: cat("hu")},
        nlos_fading={Direction.DL: cat("nd"), Direction.UL: cat("nu")},
        beam={Direction.DL: cat("bd"), Direction.UL: cat("bu")},
        blockage_mode=blockage_mode, first_trial=start)


# ---------------------------------------------------------------- association

def _path_tables(config):
    tiers = config.tiers
    band = np.array([{Band.SUB6: 0, Band.MMWAVE: 1, Band.THZ: 2}[t.band] for t in tiers])
    alpha = np.array([t.path_loss_exp for t in tiers])
    gref = np.array([t.reference_gain for t in tiers])
    ant = np.array([float(t.antennas) for t in tiers])
    absorb = np.array([config.absorption_of(k) for k in range(len(tiers))])
    return band, alpha, gref, ant, absorb


def _links(real: Realization, config: NetworkConfig):
    """Per-BS path parameters: (active, nlos, alpha, ref gain, absorption)."""
    band, alpha, gref, _, absorb = _path_tables(config)
    b = band[real.tier]
    nlos_on = config.mmwave_nlos is not None
    use_nlos = (b == 1) & ~real.los & nlos_on
    active = (b == 0) | real.los | use_nlos
    a = alpha[real.tier].copy()
    g = gref[real.tier].copy()
    if nlos_on:
        a[use_nlos] = config.mmwave_nlos.path_loss_exp
        g[use_nlos] = config.mmwave_nlos.intercept
    return active, use_nlos, a, g, absorb[real.tier]


@dataclass
class Association:
    """Per-trial decision: tier (-1 when discarded), BS index into the realization."""

    tier: np.ndarray
    index: np.ndarray
    distance: np.ndarray

    @property
    def discarded(self) -> np.ndarray:
        return self.tier < 0


def _first_argmax(values, owner, n, *keys):
    """Index of the maximum of ``values`` within each owner group (-1 if none).

    Ties go to the smallest ``keys`` (compared in order), then to storage order.
    """
    best = np.full(n, -np.inf)
    np.maximum.at(best, owner, values)
    hit = np.flatnonzero((values == best[owner]) & np.isfinite(values))
    idx = np.full(n, -1, dtype=np.int64)
    if hit.size:
        # lexsort keys run from least to most significant; the sort is stable
        hit = hit[np.lexsort(tuple(k[hit] for k in reversed(keys)) + (owner[hit],))]
        own, first = np.unique(owner[hit], return_index=True)
        idx[own] = hit[first]
    return idx


def associate(real: Realization, config: NetworkConfig, q) -> Association:
    """Strongest average biased received power, per trial.

    Sub-6 BSs are always candidates; mmWave/THz BSs only over LOS links
    (plus NLOS mmWave paths when enabled).  Fading is ignored here.
    """
    q = Direction(q)
    active, _, a, g, ka = _links(real, config)
    tiers = config.tiers
    lead = np.array([math.log(t.power(q) * t.bias(q) * t.antennas) for t in tiers])
    with np.errstate(divide="ignore"):
        logs = lead[real.tier] + np.log(g) - a * np.log(real.distance) - ka * real.distance
    logs = np.where(active, logs, -np.inf)
    owner = real.trial - real.first_trial
    idx = _first_argmax(logs, owner, real.n_trials, real.tier, real.distance)
    ok = idx >= 0
    tier = np.where(ok, real.tier[np.maximum(idx, 0)], -1)
    dist = np.where(ok, real.distance[np.maximum(idx, 0)], np.nan)
    if real.tier.size == 0:
        tier = np.full(real.n_trials, -1)
        dist = np.full(real.n_trials, np.nan)
    return Association(tier, idx, dist)


# ---------------------------------------------------------------- SINR

def _interferer_gain(config, real, q, gain_mode):
    out = np.ones(real.tier.size)
    phi = real.beam[q]
    for k, t in enumerate(config.tiers):
        if t.band is Band.SUB6:
            continue
        sel = real.tier == k
        if gain_mode == "fejer":
            out[sel] = fejer_gain(t.antennas, phi[sel])
        else:
            pat = flat_top_pattern(t.antennas)
            out[sel] = np.where(np.abs(phi[sel]) <= pat.phi_3db, pat.g_max, pat.g_min)
    return out


def measure_sinr(real: Realization, config: NetworkConfig, q, association: Association,
                 gain_mode: str = "flat-top") -> np.ndarray:
    """Linear SINR per trial on direction-q powers and channels (nan if discarded).

    Interference comes from every other active BS of the serving band.  For
    THz the absorbed interferer power re-enters as noise, so interferers are
    summed without absorption, and the serving link adds its own absorption
    noise ``J (1 - e^{-K x})``.
    """
    q = Direction(q)
    band, _, _, ant, _ = _path_tables(config)
    active, use_nlos, a, g, ka = _links(real, config)
    power = np.array([t.power(q) for t in config.tiers])[real.tier]
    h = np.where(use_nlos, real.nlos_fading[q], real.fading[q])
    d = real.distance
    # THz interferers stay deterministic even when the serving link draws induced fading
    h_int = np.where(band[real.tier] == 2, 1.0, h)
    with np.errstate(divide="ignore", over="ignore"):
        base = power * g * h_int * d ** (-a)
    interf = np.where(active, base * _interferer_gain(config, real, q, gain_mode), 0.0)

    n = real.n_trials
    owner = real.trial - real.first_trial
    ok = association.index >= 0
    srv = association.index[ok]
    interf[srv] = 0.0
    bsband = band[real.tier]
    totals = np.bincount(owner * 3 + bsband, weights=interf, minlength=3 * n).reshape(n, 3)

    sinr = np.full(n, np.nan)
    if not np.any(ok):
        return sinr
    tiers = real.tier[srv]
    x = d[srv]
    j_avg = power[srv] * ant[tiers] * g[srv] * x ** (-a[srv])
    absorb = np.exp(-ka[srv] * x)
    sig = j_avg * h[srv] * absorb
    self_noise = j_avg * (1.0 - absorb)  # absorbed signal re-radiated as noise; zero outside THz
    noise = np.array([noise_power(t) for t in config.tiers])[tiers]
    i_tot = totals[np.flatnonzero(ok), band[tiers]]
    sinr[ok] = sig / (i_tot + self_noise + noise)
    return sinr


# ---------------------------------------------------------------- estimation

@dataclass
class SimEstimate:
    metric: str
    direction: str
    tier: object  # 1-based tier or "total"
    threshold: float
    estimate: float
    ci_halfwidth: float
    n: int


def proportion_halfwidth(p: float, n: int) -> float:
    if n <= 0:
        return float("nan")
    return Z95 * math.sqrt(max(p * (1.0 - p), 0.0) / n)


def percentile_with_ci(samples, pct: float):
    """Empirical percentile and order-statistic 95% CI half-width."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        return float("nan"), float("nan")
    p = pct / 100.0
    est = float(np.quantile(x, p, method="inverted_cdf"))
    spread = Z95 * math.sqrt(n * p * (1.0 - p))
    lo = int(min(max(math.floor(n * p - spread), 1), n)) - 1
    hi = int(min(max(math.ceil(n * p + spread), 1), n)) - 1
    return est, 0.5 * float(x[hi] - x[lo])


def _run_chunk(args):
    config, seed, start, stop, options = args
    real = sample_batch(config, seed, start, stop, options.radius, options.blockage_mode,
                        options.thz_fading)
    out = {}
    decisions = {}
    for q in Direction:
        decisions[q] = associate(real, config, q)
        out[q.value] = (decisions[q].tier, decisions[q].distance,
                        measure_sinr(real, config, q, decisions[q], options.gain_mode))
    if options.coupled:
        dl = decisions[Direction.DL]
        out["ul-coupled"] = (dl.tier, dl.distance,
                             measure_sinr(real, config, Direction.UL, dl, options.gain_mode))
    return out


@dataclass
class SimRun:
    """Per-trial outcomes of a Monte Carlo run, in trial order."""

    config: NetworkConfig
    seed: int
    n_trials: int
    options: SimOptions
    tier: dict = field(default_factory=dict)  # series -> int array (-1 discarded)
    distance: dict = field(default_factory=dict)
    sinr: dict = field(default_factory=dict)

    def series(self):
        return [s for s in SERIES if s in self.tier]

    def valid(self, series) -> np.ndarray:
        return self.tier[series] >= 0

    def discarded(self, series) -> int:
        return int(np.count_nonzero(~self.valid(series)))

    def association_frequencies(self, series) -> np.ndarray:
        t = self.tier[series]
        t = t[t >= 0]
        return np.bincount(t, minlength=self.config.n_tiers) / max(t.size, 1)

    def load(self, series) -> np.ndarray:
        a = self.association_frequencies("dl" if series == "ul-coupled" else series)
        dens = np.array([t.density for t in self.config.tiers])
        return 1.0 + 1.28 * self.config.ue_density * a / dens

    def rates(self, series) -> np.ndarray:
        """Per-trial rate (B/Z) log2(1 + SINR) in bit/s for valid trials."""
        ok = self.valid(series)
        t = self.tier[series][ok]
        bw = np.array([x.bandwidth for x in self.config.tiers])
        return bw[t] / self.load(series)[t] * np.log2(1.0 + self.sinr[series][ok])

    def association_estimates(self, series):
        n = int(np.count_nonzero(self.valid(series)))
        freq = self.association_frequencies(series)
        return [SimEstimate("association", series, k + 1, float("nan"), float(f),
                            proportion_halfwidth(f, n), n) for k, f in enumerate(freq)]

    def _coverage(self, metric, series, values, thresholds, per_tier=True):
        ok = self.valid(series)
        n = int(np.count_nonzero(ok))
        t = self.tier[series][ok]
        out = []
        for thr in np.atleast_1d(thresholds):
            hit = values > thr
            p = float(np.count_nonzero(hit)) / max(n, 1)
            out.append(SimEstimate(metric, series, "total", float(thr), p,
                                   proportion_halfwidth(p, n), n))
            if per_tier:
                for k in range(self.config.n_tiers):
                    pk = float(np.count_nonzero(hit & (t == k))) / max(n, 1)
                    out.append(SimEstimate(metric, series, k + 1, float(thr), pk,
                                           proportion_halfwidth(pk, n), n))
        return out

    def sinr_coverage(self, series, tau_db, per_tier=True):
        """P(SINR > tau); per-tier rows are joint P(tier k serves and covers)."""
        with np.errstate(divide="ignore"):
            sinr_db = 10.0 * np.log10(self.sinr[series][self.valid(series)])
        return self._coverage("sinr_coverage", series, sinr_db, tau_db, per_tier)

    def rate_coverage(self, series, rho, per_tier=True):
        return self._coverage("rate_coverage", series, self.rates(series), rho, per_tier)

    def conditional_sinr_coverage(self, series, k, tau_db) -> SimEstimate:
        ok = self.valid(series) & (self.tier[series] == k)
        n = int(np.count_nonzero(ok))
        p = float(np.mean(self.sinr[series][ok] > 10.0 ** (tau_db / 10.0))) if n else float("nan")
        return SimEstimate("conditional_sinr_coverage", series, k + 1, float(tau_db), p,
                           proportion_halfwidth(p, n), n)

    def percentile(self, series, metric="rate", pct=5.0) -> SimEstimate:
        if metric == "rate":
            vals = self.rates(series)
        else:
            with np.errstate(divide="ignore"):
                vals = 10.0 * np.log10(self.sinr[series][self.valid(series)])
        est, hw = percentile_with_ci(vals, pct)
        return SimEstimate(f"p{pct:g}_{metric}", series, "total", float(pct), est, hw, vals.size)

    def write_records(self, path):
        """Raw per-trial rows: trial, direction, tier (1-based, 0 = discarded), distance, SINR dB."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "direction", "tier", "serving_distance", "sinr_db"])
            for s in self.series():
                with np.errstate(divide="ignore"):
                    sdb = 10.0 * np.log10(self.sinr[s])
                for i in range(self.n_trials):
                    w.writerow([i, s, int(self.tier[s][i]) + 1, repr(float(self.distance[s][i])),
                                repr(float(sdb[i]))])


def simulate(config: NetworkConfig, n_trials: int, seed: int = 0,
             options: SimOptions = SimOptions(), workers: int = 1) -> SimRun:
    """Run ``n_trials`` snapshots; identical output for any ``workers``."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    size = max(1, int(options.chunk_size))
    jobs = [(config, int(seed), lo, min(lo + size, n_trials), options)
            for lo in range(0, n_trials, size)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]
    run = SimRun(config, int(seed), n_trials, options)
    for s in results[0]:
        run.tier[s] = np.concatenate([r[s][0] for r in results])
        run.distance[s] = np.concatenate([r[s][1] for r in results])
        run.sinr[s] = np.concatenate([r[s][2] for r in results])
    return run


def estimate(config: NetworkConfig, n_trials: int, seed: int = 0, tau_db=(), rates=(),
             percentiles=(5.0,), options: SimOptions = SimOptions(), workers: int = 1):
    """Association, coverage and percentile estimates for every simulated series."""
    run = simulate(config, n_trials, seed, options, workers)
    out = []
    for s in run.series():
        out += run.association_estimates(s)
        if len(tau_db):
            out += run.sinr_coverage(s, tau_db)
        if len(rates):
            out += run.rate_coverage(s, rates)
        for pct in percentiles:
            out.append(run.percentile(s, "sinr", pct))
            out.append(run.percentile(s, "rate", pct))
    return out
