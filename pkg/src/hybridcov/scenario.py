"""Scenario and sweep files (TOML) and deterministic CSV writing.

Scenario files carry powers in dBm, biases and the sub-6 intercept in dB,
densities in m^-2, frequencies and bandwidths in Hz.  Everything is converted
to linear SI units here, so the engines never see decibels.

    [global]   ue_density, absorption, thz_shape, sinr_threshold (dB), rate_threshold (bit/s)
    [blockage] density, mean_length, mean_width
    [[tier]]   band, density, antennas, power_dl, power_ul, bias_dl, bias_ul,
               path_loss_exp, bandwidth, nakagami_shape, noise_figure, carrier, intercept
    [mmwave_nlos] (optional, Monte Carlo only) path_loss_exp, intercept (dB), nakagami_shape
"""

from __future__ import annotations

import copy
import csv
import io
from importlib import resources
from pathlib import Path

import tomli

from .network import (Band, Blockage, NetworkConfig, NlosParams, Tier, db_to_linear,
                      dbm_to_watts)

TIER_KEYS = {"band", "density", "antennas", "power_dl", "power_ul", "bias_dl", "bias_ul",
             "path_loss_exp", "bandwidth", "nakagami_shape", "noise_figure", "carrier",
             "intercept"}
GLOBAL_KEYS = {"ue_density", "absorption", "thz_shape", "sinr_threshold", "rate_threshold"}
BLOCKAGE_KEYS = {"density", "mean_length", "mean_width"}
NLOS_KEYS = {"path_loss_exp", "intercept", "nakagami_shape"}


class ScenarioError(ValueError):
    """Malformed scenario or sweep document."""


def load_document(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc


def default_document() -> dict:
    """The bundled three-tier default scenario as a raw document."""
    text = resources.files("hybridcov").joinpath("data/table2.toml").read_text(encoding="utf-8")
    return tomli.loads(text)


def _check_keys(section, allowed, where):
    unknown = set(section) - allowed
    if unknown:
        raise ScenarioError(f"unknown keys in {where}: {', '.join(sorted(unknown))}")


def _tier(raw: dict, idx: int) -> Tier:
    _check_keys(raw, TIER_KEYS, f"tier {idx}")
    try:
        band = Band(str(raw["band"]).lower())
    except (KeyError, ValueError) as exc:
        raise ScenarioError(f"tier {idx}: band must be one of sub6, mmwave, thz") from exc
    for key in ("density", "power_dl", "path_loss_exp", "bandwidth"):
        if key not in raw:
            raise ScenarioError(f"tier {idx}: missing {key}")
    power_dl = float(dbm_to_watts(raw["power_dl"]))
    return Tier(
        band=band,
        density=float(raw["density"]),
        power_dl=power_dl,
        power_ul=float(dbm_to_watts(raw["power_ul"])) if "power_ul" in raw else power_dl,
        path_loss_exp=float(raw["path_loss_exp"]),
        bandwidth=float(raw["bandwidth"]),
        antennas=int(raw.get("antennas", 1)),
        bias_dl=float(db_to_linear(raw.get("bias_dl", 0.0))),
        bias_ul=float(db_to_linear(raw.get("bias_ul", 0.0))),
        nakagami_shape=int(raw.get("nakagami_shape", 1)),
        noise_figure=float(raw.get("noise_figure", 10.0)),
        carrier=float(raw["carrier"]) if "carrier" in raw else None,
        intercept=float(db_to_linear(raw["intercept"])) if "intercept" in raw else None,
    )


def config_from_document(doc: dict) -> NetworkConfig:
    _check_keys(doc, {"global", "blockage", "tier", "mmwave_nlos"}, "scenario")
    glob = doc.get("global", {})
    _check_keys(glob, GLOBAL_KEYS, "[global]")
    blk = doc.get("blockage", {})
    _check_keys(blk, BLOCKAGE_KEYS, "[blockage]")
    tiers = doc.get("tier", [])
    if not isinstance(tiers, list):
        raise ScenarioError("[[tier]] must be an array of tables")
    nlos = None
    if "mmwave_nlos" in doc:
        raw = doc["mmwave_nlos"]
        _check_keys(raw, NLOS_KEYS, "[mmwave_nlos]")
        base = NlosParams()
        nlos = NlosParams(
            path_loss_exp=float(raw.get("path_loss_exp", base.path_loss_exp)),
            intercept=float(db_to_linear(raw["intercept"])) if "intercept" in raw else base.intercept,
            nakagami_shape=int(raw.get("nakagami_shape", base.nakagami_shape)))
    try:
        blockage = Blockage(float(blk["density"]), float(blk["mean_length"]),
                            float(blk["mean_width"]))
    except KeyError as exc:
        raise ScenarioError(f"[blockage]: missing {exc.args[0]}") from exc
    if "ue_density" not in glob:
        raise ScenarioError("[global]: missing ue_density")
    return NetworkConfig(
        tiers=tuple(_tier(t, i) for i, t in enumerate(tiers, start=1)),
        blockage=blockage,
        ue_density=float(glob["ue_density"]),
        absorption=float(glob.get("absorption", 0.01)),
        thz_shape=int(glob.get("thz_shape", 10)),
        sinr_threshold=float(db_to_linear(glob.get("sinr_threshold", 10.0))),
        rate_threshold=float(glob.get("rate_threshold", 1e9)),
        mmwave_nlos=nlos,
    )


def load_config(path) -> NetworkConfig:
    return config_from_document(load_document(path))


def override(doc: dict, path: str, value) -> dict:
    """Copy of ``doc`` with a dotted-path field replaced, in file units.

    ``tier.N.field`` addresses the N-th tier (1-based); ``tier.N.bias`` sets
    both bias_dl and bias_ul; ``global.*`` and ``blockage.*`` address their
    sections; ``derived.thz_mmwave_density_ratio`` sets every THz density to
    the ratio times the first mmWave tier's density.
    """
    out = copy.deepcopy(doc)
    parts = path.split(".")
    if parts[0] == "tier" and len(parts) == 3:
        try:
            tier = out["tier"][int(parts[1]) - 1]
        except (ValueError, IndexError, KeyError) as exc:
            raise ScenarioError(f"no tier addressed by {path!r}") from exc
        if int(parts[1]) < 1:
            raise ScenarioError(f"tier indices start at 1 in {path!r}")
        fields = ["bias_dl", "bias_ul"] if parts[2] == "bias" else [parts[2]]
        for f in fields:
            if f not in TIER_KEYS:
                raise ScenarioError(f"unknown tier field in {path!r}")
            tier[f] = value
    elif parts[0] in ("global", "blockage") and len(parts) == 2:
        allowed = GLOBAL_KEYS if parts[0] == "global" else BLOCKAGE_KEYS
        if parts[1] not in allowed:
            raise ScenarioError(f"unknown field in {path!r}")
        out.setdefault(parts[0], {})[parts[1]] = value
    elif path == "derived.thz_mmwave_density_ratio":
        mm = [t for t in out.get("tier", []) if str(t.get("band")).lower() == "mmwave"]
        if not mm:
            raise ScenarioError("density ratio needs an mmWave tier")
        for t in out["tier"]:
            if str(t.get("band")).lower() == "thz":
                t["density"] = float(value) * float(mm[0]["density"])
    else:
        raise ScenarioError(f"cannot address {path!r}")
    return out


def format_value(x) -> str:
    """Shortest round-trip text for floats; stable across runs and platforms."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(row.get(h)) for h in header])
    return buf.getvalue()


def write_csv(path, header, rows):
    Path(path).write_text(csv_text(header, rows), encoding="utf-8")
