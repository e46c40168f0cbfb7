"""Named parameter sweeps producing figure-ready CSV from both engines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import association as assoc
from . import coverage as cov
from . import montecarlo as mc
from .network import Direction, NetworkConfig, errors, linear_to_db, validate
from .scenario import ScenarioError, config_from_document, csv_text, override

HEADER = ["point", "parameter", "value", "direction", "tier", "engine", "metric",
          "threshold", "estimate", "ci_halfwidth", "n"]
SUMMARY_HEADER = ["metric", "direction", "tier", "max_abs_gap", "points"]

# sweep id -> (default swept parameter, metrics)
SWEEPS = {
    "assoc-vs-density": ("derived.thz_mmwave_density_ratio", ("association",)),
    "assoc-vs-bias": ("tier.3.bias", ("association",)),
    "cov-vs-threshold": ("global.sinr_threshold", ("sinr_coverage",)),
    "cov-vs-density": ("derived.thz_mmwave_density_ratio", ("association", "sinr_coverage")),
    "cov-vs-ka": ("global.absorption", ("association", "sinr_coverage")),
    "cov-vs-antennas": ("tier.3.antennas", ("sinr_coverage",)),
    "rate-vs-threshold": ("global.rate_threshold", ("rate_coverage",)),
    "cov-vs-bias": ("tier.3.bias_ul", ("sinr_coverage", "rate_coverage")),
    "percentile-vs-bias": ("tier.3.bias", ("p5_sinr", "p5_rate")),
}
THRESHOLD_PARAMS = {"global.sinr_threshold": "sinr_coverage",
                    "global.rate_threshold": "rate_coverage"}
ENGINES = ("analytical", "mc", "both")


@dataclass
class SweepSpec:
    id: str
    grid: list
    parameter: str = ""
    engines: str = "both"
    directions: tuple = ("dl", "ul")
    coupled: bool = False
    trials: int = 50_000
    seed: int = 0
    workers: int = 1
    metrics: tuple = field(default=())

    def __post_init__(self):
        if self.id not in SWEEPS:
            raise ScenarioError(f"unknown sweep id {self.id!r}")
        default_param, default_metrics = SWEEPS[self.id]
        self.parameter = self.parameter or default_param
        self.metrics = tuple(self.metrics) or default_metrics
        self.directions = tuple(Direction(d).value for d in self.directions)
        self.grid = [float(v) if not isinstance(v, int) else v for v in self.grid]

    def problems(self) -> list:
        out = []
        if not self.grid:
            out.append("grid is empty")
        elif any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            out.append("grid must be strictly increasing")
        if self.engines not in ENGINES:
            out.append(f"engines must be one of {', '.join(ENGINES)}")
        if self.id == "percentile-vs-bias" and self.engines == "analytical":
            out.append("percentile sweeps need the mc engine")
        if self.trials < 1:
            out.append("trials must be >= 1")
        if self.seed < 0:
            out.append("seed must be non-negative")
        return out

    @property
    def threshold_sweep(self) -> bool:
        return self.parameter in THRESHOLD_PARAMS

    @property
    def run_analytical(self) -> bool:
        return self.engines in ("analytical", "both")

    @property
    def run_mc(self) -> bool:
        return self.engines in ("mc", "both")


def sweep_from_document(doc: dict) -> SweepSpec:
    raw = dict(doc.get("sweep", doc))
    known = {"id", "grid", "parameter", "engines", "directions", "coupled", "trials", "seed",
             "workers", "metrics"}
    unknown = set(raw) - known
    if unknown:
        raise ScenarioError(f"unknown sweep keys: {', '.join(sorted(unknown))}")
    if "id" not in raw:
        raise ScenarioError("sweep needs an id")
    return SweepSpec(**{k: (tuple(v) if isinstance(v, list) and k != "grid" else v)
                        for k, v in raw.items()})


def _series(spec):
    out = [d for d in spec.directions]
    if spec.coupled and "ul" in out:
        out.append("ul-coupled")
    return out


def _series_dirs(series):
    """(link direction, association direction) of a series name."""
    if series == "ul-coupled":
        return Direction.UL, Direction.DL
    d = Direction(series)
    return d, d


def _row(point, spec, value, series, tier, engine, metric, thr, est, hw=None, n=None):
    return {"point": point, "parameter": spec.parameter, "value": value, "direction": series,
            "tier": tier, "engine": engine, "metric": metric, "threshold": thr,
            "estimate": est, "ci_halfwidth": hw, "n": n}


def _analytical_rows(config, spec, point, value, thresholds):
    rows = []
    for series in _series(spec):
        q, qa = _series_dirs(series)
        for metric in spec.metrics:
            if metric == "association":
                for k, a in enumerate(assoc.association_probabilities(config, qa)):
                    rows.append(_row(point, spec, value, series, k + 1, "analytical",
                                     metric, None, a))
            elif metric in ("sinr_coverage", "rate_coverage"):
                thr = thresholds.get(metric)
                if metric == "sinr_coverage":
                    curve = cov.sinr_coverage(config, q, thr, assoc_dir=qa)
                else:
                    curve = cov.rate_coverage(config, q, thr, assoc_dir=qa)
                for i, t in enumerate(curve.thresholds):
                    rows.append(_row(point, spec, value, series, "total", "analytical",
                                     metric, t, curve.total[i]))
                    for k in range(config.n_tiers):
                        rows.append(_row(point, spec, value, series, k + 1, "analytical",
                                         metric, t, curve.weighted[k, i]))
    return rows


def _mc_rows(config, spec, point, value, thresholds):
    options = mc.SimOptions(coupled="ul-coupled" in _series(spec))
    run = mc.simulate(config, spec.trials, spec.seed, options, spec.workers)
    rows = []
    for series in _series(spec):
        for metric in spec.metrics:
            if metric == "association":
                ests = run.association_estimates(series)
            elif metric == "sinr_coverage":
                ests = run.sinr_coverage(series, thresholds[metric])
            elif metric == "rate_coverage":
                ests = run.rate_coverage(series, thresholds[metric])
            elif metric.startswith("p5_"):
                ests = [run.percentile(series, metric[3:], 5.0)]
            else:
                raise ScenarioError(f"unknown metric {metric!r}")
            for e in ests:
                thr = None if metric == "association" else e.threshold
                rows.append(_row(point, spec, value, series, e.tier, "mc", metric, thr,
                                 e.estimate, e.ci_halfwidth, e.n))
    return rows


def _thresholds(config: NetworkConfig, spec: SweepSpec, value):
    sinr_db = float(linear_to_db(config.sinr_threshold))
    out = {"sinr_coverage": [sinr_db], "rate_coverage": [config.rate_threshold]}
    if spec.threshold_sweep:
        out[THRESHOLD_PARAMS[spec.parameter]] = list(value)
    return out


def points(spec: SweepSpec, base_doc: dict):
    """(point index, value, config, thresholds) per grid point."""
    if spec.threshold_sweep:
        cfg = config_from_document(base_doc)
        yield 0, None, cfg, _thresholds(cfg, spec, spec.grid)
        return
    for i, v in enumerate(spec.grid):
        cfg = config_from_document(override(base_doc, spec.parameter, v))
        yield i, v, cfg, _thresholds(cfg, spec, None)


@dataclass
class SweepResult:
    rows: list
    summary: list
    failed: str = ""


def summarize(rows) -> list:
    """Max |analytical - mc| per (metric, direction, tier) over matching rows."""
    an = {}
    for r in rows:
        if r["engine"] == "analytical":
            an[(r["point"], r["direction"], r["tier"], r["metric"], r["threshold"])] = r["estimate"]
    gaps = {}
    for r in rows:
        if r["engine"] != "mc":
            continue
        key = (r["point"], r["direction"], r["tier"], r["metric"], r["threshold"])
        if key not in an:
            continue
        g = abs(float(an[key]) - float(r["estimate"]))
        sk = (r["metric"], r["direction"], str(r["tier"]))
        worst, count = gaps.get(sk, (0.0, 0))
        gaps[sk] = (max(worst, g), count + 1)
    return [{"metric": m, "direction": d, "tier": t, "max_abs_gap": g, "points": n}
            for (m, d, t), (g, n) in sorted(gaps.items())]


def run_sweep(spec: SweepSpec, base_doc: dict, out_dir=None, log=None) -> SweepResult:
    """Evaluate every grid point; rows flushed to disk after each point."""
    problems = spec.problems()
    if problems:
        raise ScenarioError("; ".join(problems))
    rows = []
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    failed = ""
    try:
        for i, value, cfg, thr in points(spec, base_doc):
            bad = errors(validate(cfg))
            if bad:
                raise ScenarioError(f"point {i}: " + "; ".join(str(v) for v in bad))
            if spec.run_analytical and spec.id != "percentile-vs-bias":
                rows += _analytical_rows(cfg, spec, i, value, thr)
            if spec.run_mc:
                rows += _mc_rows(cfg, spec, i, value, thr)
            if log:
                log(f"{spec.id}: point {i + 1}/{1 if spec.threshold_sweep else len(spec.grid)} done")
            if out is not None:
                (out / f"{spec.id}.csv").write_text(csv_text(HEADER, rows), encoding="utf-8")
    except (ScenarioError, ArithmeticError, RuntimeError, ValueError) as exc:
        failed = f"{type(exc).__name__}: {exc}"
    summary = summarize(rows) if spec.engines == "both" else []
    if out is not None:
        (out / f"{spec.id}.csv").write_text(csv_text(HEADER, rows), encoding="utf-8")
        if spec.engines == "both":
            (out / f"{spec.id}-summary.csv").write_text(csv_text(SUMMARY_HEADER, summary),
                                                        encoding="utf-8")
    return SweepResult(rows, summary, failed)


# ---------------------------------------------------------------- coupled vs decoupled

COMPARE_METRICS = ("sinr_coverage", "rate_coverage", "p5_sinr", "p5_rate")


def parse_grid(text: str) -> list:
    """'start:stop:step' (inclusive stop) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ScenarioError(f"grid {text!r} must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ScenarioError(f"grid {text!r} is empty")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ScenarioError("grid is empty")
    return vals


def compare_coupled(base_doc: dict, bias_grid_db, trials=50_000, seed=0, workers=1,
                    analytical=False, tier=None, out_dir=None, log=None) -> SweepResult:
    """DL, decoupled-UL and coupled-UL metrics over a THz bias grid (dB).

    The bias is applied to both directions of the THz tier(s), so the DL
    decision (and hence the coupled UL decision) moves with it too.
    """
    tiers = base_doc.get("tier", [])
    targets = [tier] if tier else [i + 1 for i, t in enumerate(tiers)
                                   if str(t.get("band")).lower() == "thz"]
    if not targets:
        raise ScenarioError("no THz tier to bias")
    spec = SweepSpec(id="percentile-vs-bias", grid=list(bias_grid_db),
                     parameter=".".join(["tier", str(targets[0]), "bias"]),
                     engines="both" if analytical else "mc", coupled=True, trials=trials,
                     seed=seed, workers=workers, metrics=COMPARE_METRICS)
    problems = spec.problems()
    if problems:
        raise ScenarioError("; ".join(problems))
    rows = []
    failed = ""
    try:
        for i, v in enumerate(spec.grid):
            doc = base_doc
            for t in targets:
                doc = override(doc, f"tier.{t}.bias", v)
            cfg = config_from_document(doc)
            bad = errors(validate(cfg))
            if bad:
                raise ScenarioError(f"point {i}: " + "; ".join(str(x) for x in bad))
            thr = _thresholds(cfg, spec, None)
            if analytical:
                an_spec = SweepSpec(id="cov-vs-bias", grid=spec.grid, parameter=spec.parameter,
                                    coupled=True)
                rows += _analytical_rows(cfg, an_spec, i, v, thr)
            rows += _mc_rows(cfg, spec, i, v, thr)
            if log:
                log(f"compare: point {i + 1}/{len(spec.grid)} done")
    except (ScenarioError, ArithmeticError, RuntimeError, ValueError) as exc:
        failed = f"{type(exc).__name__}: {exc}"
    summary = summarize(rows) if analytical else []
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare-coupled.csv").write_text(csv_text(HEADER, rows), encoding="utf-8")
        if analytical:
            (out / "compare-coupled-summary.csv").write_text(csv_text(SUMMARY_HEADER, summary),
                                                             encoding="utf-8")
    return SweepResult(rows, summary, failed)
