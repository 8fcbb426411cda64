"""Batch command-line front end.

JSON configuration in, CSV/JSON artifacts out. All physical-unit handling
lives here: lengths may carry nm/um/m suffixes and the diffusion coefficient
is given in m²/s; everything is normalized to d = 1, T_D = 1 before the
library is called and the normalization is echoed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .estimation import (FisherSetup, fisher_direct, fisher_evap_closed,
                         fit_simple_model, measure_crossing, volume_time)
from .evaporating import (SimpleModelParams, build_mode_table, evaporating_series,
                          g_simple_model, mode_dominance, solve_beta, solve_eta,
                          tau_dominant_approx)
from .freediff import g_free
from .geometry import b_rms_squared, make_geometry
from .montecarlo import MCConfig, simulate_correlation
from .series import CorrelationSeries, log_time_grid
from .sticky import plateau_ideal, plateau_ratio, plateau_sticky, sticky_series

_COMMANDS = ("correlate", "eigen", "plateau-map", "dominance-map", "fisher",
             "fit", "mc", "compare")

_LENGTH_UNITS = {"nm": 1e-9, "um": 1e-6, "m": 1.0}

_KNOWN_KEYS = {
    "command", "model", "R", "L", "d", "D", "tau_ev", "seed", "out", "format",
    "t_min", "t_max", "points_per_decade", "grid_min", "grid_max", "grid_points",
    "particles", "realizations", "dt", "threads", "delta", "total_time",
    "shot_time", "phi_rms", "input", "m_count", "p_count", "b_rms_sq", "tau_v",
    "plateau", "tau_ev_eff",
}


class ConfigError(ValueError):
    """Semantic configuration error naming the offending key."""


def _parse_length(value, key):
    """Length value, optionally '15 nm' style; returns meters or raw number."""
    if isinstance(value, (int, float)):
        return float(value), None
    if isinstance(value, str):
        parts = value.split()
        if len(parts) == 2 and parts[1] in _LENGTH_UNITS:
            return float(parts[0]) * _LENGTH_UNITS[parts[1]], "m"
    raise ConfigError(f"cannot parse length for key {key!r}: {value!r}")


class RunConfig:
    """Validated, normalized run configuration."""

    def __init__(self, raw: dict):
        unknown = set(raw) - _KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "command" not in raw:
            raise ConfigError("missing required key 'command'")
        self.command = raw["command"]
        if self.command not in _COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        self.raw = dict(raw)

        units = set()
        vals = {}
        for key, default in (("R", 5.0), ("L", 5.0), ("d", 1.0)):
            v, unit = _parse_length(raw.get(key, default), key)
            if v <= 0 or not math.isfinite(v):
                raise ConfigError(f"key {key!r} must be a positive length")
            vals[key], _ = v, units.add(unit)
            units.add(unit)
        if len(units - {None}) > 1:
            raise ConfigError("inconsistent length units")

        d_phys = vals["d"]
        diffusion = raw.get("D")
        if diffusion is not None:
            if not (isinstance(diffusion, (int, float)) and diffusion > 0):
                raise ConfigError("key 'D' must be a positive number (m²/s)")
            self.t_d_seconds = d_phys ** 2 / float(diffusion)
        else:
            self.t_d_seconds = None  # already normalized input
        self.depth_phys = d_phys
        self.geom = make_geometry(vals["R"] / d_phys, vals["L"] / d_phys, 1.0)

        self.model = raw.get("model", "sticky")
        self.tau_ev = raw.get("tau_ev")  # T_D units
        if self.tau_ev is not None and self.tau_ev <= 0:
            raise ConfigError("key 'tau_ev' must be positive")
        self.seed = int(raw.get("seed", 0))
        self.out = raw.get("out")
        self.format = raw.get("format", "csv")
        if self.format not in ("csv", "json"):
            raise ConfigError("key 'format' must be 'csv' or 'json'")
        self.t_min = float(raw.get("t_min", 1e-2))
        self.t_max = float(raw.get("t_max", 1e3))
        self.points_per_decade = int(raw.get("points_per_decade", 20))
        if not (0 < self.t_min < self.t_max):
            raise ConfigError("need 0 < t_min < t_max")

    def times(self):
        return log_time_grid(self.t_min, self.t_max, self.points_per_decade)


def parse_config(text: str) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"configuration syntax error at line {exc.lineno}, "
            f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    return RunConfig(raw)


def _provenance(config: RunConfig) -> dict:
    digest = hashlib.sha256(
        json.dumps(config.raw, sort_keys=True).encode()).hexdigest()[:16]
    return {"config_hash": digest, "seed": config.seed,
            "version": __version__}


def write_series(series: CorrelationSeries, path: str, fmt: str = "csv"):
    """Emit a correlation series; CSV rows keep 12 significant digits."""
    if len(series) == 0:
        raise ValueError("refusing to write an empty series")
    meta = series.meta
    header = ("# model={model} R={R} L={L} d={d} tau_ev={tau_ev} seed={seed}"
              .format(model=series.model,
                      R=meta.get("R", ""), L=meta.get("L", ""),
                      d=meta.get("d", ""), tau_ev=meta.get("tau_ev", ""),
                      seed=meta.get("seed", "")))
    if fmt == "csv":
        lines = [header, "t_over_TD,G,err"]
        for t, v, e in zip(series.times, series.values, series.errors):
            lines.append(f"{t:.12g},{v:.12g},{e:.12g}")
        body = "\n".join(lines) + "\n"
    elif fmt == "json":
        body = json.dumps({
            "model": series.model, "meta": meta,
            "t_over_TD": [float(f"{t:.12g}") for t in series.times],
            "G": [float(f"{v:.12g}") for v in series.values],
            "err": [float(f"{e:.12g}") for e in series.errors],
        }, indent=1) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    try:
        with open(path, "w") as fh:
            fh.write(body)
    except OSError as exc:
        raise OSError(f"cannot write series to {path}: {exc}") from exc


def read_series(path: str) -> CorrelationSeries:
    """Round-trip reader for both write_series formats."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return CorrelationSeries(doc["model"], np.asarray(doc["t_over_TD"]),
                                 np.asarray(doc["G"]), np.asarray(doc["err"]),
                                 doc.get("meta", {}))
    lines = [ln for ln in text.splitlines() if ln.strip()]
    meta = {}
    model = "fitted"
    if lines[0].startswith("#"):
        for token in lines[0][1:].split():
            key, _, val = token.partition("=")
            if key == "model":
                model = val
            elif val not in ("", "None"):
                meta[key] = float(val)
        lines = lines[1:]
    if lines and lines[0].startswith("t_over_TD"):
        lines = lines[1:]
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines])
    return CorrelationSeries(model, rows[:, 0], rows[:, 1], rows[:, 2], meta)


def _series_for_model(config: RunConfig, model: str) -> CorrelationSeries:
    geom, times = config.geom, config.times()
    if model == "free":
        amp = b_rms_squared(geom)
        vals = amp * g_free(times)
        return CorrelationSeries("free", times, vals, np.zeros_like(vals),
                                 {"R": geom.radius, "L": geom.height, "d": 1.0})
    if model == "sticky":
        return sticky_series(geom, times)
    if model in ("evaporating", "reflective"):
        tau_ev = config.tau_ev if model == "evaporating" else 1e9
        if model == "evaporating" and tau_ev is None:
            raise ConfigError("evaporating correlate requires 'tau_ev'")
        series = evaporating_series(geom, tau_ev, times)
        if model == "reflective":
            series = CorrelationSeries("reflective", times, series.values,
                                       series.errors, series.meta)
        return series
    raise ConfigError(f"cannot correlate model {model!r}")


def _cmd_correlate(config: RunConfig):
    series = _series_for_model(config, config.model)
    return {"series": series}


def _cmd_eigen(config: RunConfig):
    if config.tau_ev is None:
        raise ConfigError("eigen requires 'tau_ev'")
    table = build_mode_table(config.geom, config.tau_ev,
                             config.raw.get("m_count"), config.raw.get("p_count"))
    sp = table.spectrum
    return {"report": {
        "eta0": sp.eta0,
        "eta_plus": sp.eta_plus.tolist(), "eta_minus": sp.eta_minus.tolist(),
        "beta": sp.beta.tolist(),
        "tau": table.tau.tolist(), "weight": table.weight.tolist(),
        "truncation": list(table.truncation),
        "tau_slowest": table.tau_slowest,
        "tau_dominant_approx": tau_dominant_approx(config.geom, config.tau_ev),
    }}


def _map_grid(config: RunConfig):
    lo = float(config.raw.get("grid_min", 0.2))
    hi = float(config.raw.get("grid_max", 10.0))
    n = int(config.raw.get("grid_points", 25))
    if not (0 < lo < hi and n >= 2):
        raise ConfigError("invalid grid_min/grid_max/grid_points")
    return np.geomspace(lo, hi, n)


def _cmd_plateau_map(config: RunConfig):
    grid = _map_grid(config)
    ratio = [[plateau_ratio(make_geometry(r, length, 1.0)) for r in grid]
             for length in grid]
    return {"report": {"R_over_d": grid.tolist(), "L_over_d": grid.tolist(),
                       "ratio": ratio}}


def _cmd_dominance_map(config: RunConfig):
    if config.tau_ev is None:
        raise ConfigError("dominance-map requires 'tau_ev'")
    grid = _map_grid(config)
    gaps, labels = [], []
    for length in grid:
        row_g, row_l = [], []
        for r in grid:
            gap, label = mode_dominance(make_geometry(r, length, 1.0),
                                        config.tau_ev)
            row_g.append(gap)
            row_l.append(label)
        gaps.append(row_g)
        labels.append(row_l)
    return {"report": {"R_over_d": grid.tolist(), "L_over_d": grid.tolist(),
                       "gap": gaps, "runner_up": labels}}


def _cmd_fisher(config: RunConfig):
    raw = config.raw
    for key in ("delta", "total_time", "shot_time"):
        if key not in raw:
            raise ConfigError(f"fisher requires {key!r}")
    setup = FisherSetup(float(raw["delta"]), float(raw["total_time"]),
                        float(raw["shot_time"]), float(raw.get("phi_rms", 1.0)))
    series = _series_for_model(config, config.model)
    direct = fisher_direct(setup, series)
    report = {"direct": direct, "setup": {
        "delta": setup.delta, "total_time": setup.total_time,
        "shot_time": setup.shot_time, "phi_rms": setup.phi_rms}}
    if config.tau_ev is not None:
        geom = config.geom
        params = SimpleModelParams(
            b_rms_squared(geom), volume_time(plateau_ideal(geom)),
            plateau_ideal(geom), tau_dominant_approx(geom, config.tau_ev))
        closed = fisher_evap_closed(setup, params)
        report["closed_total"] = closed.total
        report["closed_dominant"] = closed.dominant
    return {"report": report}


def _cmd_fit(config: RunConfig):
    path = config.raw.get("input")
    if not path:
        raise ConfigError("fit requires 'input' (a series file)")
    series = read_series(path)
    result = fit_simple_model(series)
    p = result.params
    return {"report": {
        "b_rms_sq": p.b_rms_sq, "tau_v": p.tau_v, "plateau": p.plateau,
        "tau_ev_eff": p.tau_ev_eff, "residual_norm": result.residual_norm,
        "sensitivity": result.sensitivity.tolist(),
        "n_points": result.n_points}}


def _mc_config(config: RunConfig) -> MCConfig:
    raw = config.raw
    return MCConfig(
        particles=int(raw.get("particles", 2000)),
        realizations=int(raw.get("realizations", 32)),
        dt=float(raw.get("dt", 1e-3)),
        times=config.times(),
        model=config.model if config.model in
        ("reflective", "sticky", "evaporating", "free") else "reflective",
        seed=config.seed,
        tau_ev=config.tau_ev,
        threads=raw.get("threads"))


def _cmd_mc(config: RunConfig):
    result = simulate_correlation(_mc_config(config), config.geom)
    return {"series": result.correlation,
            "report": {"survival": result.survival.tolist(),
                       "survival_err": result.survival_err.tolist()}}


def _cmd_compare(config: RunConfig):
    result = simulate_correlation(_mc_config(config), config.geom)
    mc = result.correlation
    analytic = _series_for_model(config, config.model)
    ana_vals = analytic.interpolate(
        np.clip(mc.times, analytic.times[0], analytic.times[-1]))
    sigma = np.sqrt(mc.errors ** 2 + np.interp(mc.times, analytic.times,
                                               analytic.errors) ** 2)
    z = (mc.values - ana_vals) / np.maximum(sigma, 1e-30)
    return {"report": {
        "t_over_TD": mc.times.tolist(), "mc": mc.values.tolist(),
        "analytic": ana_vals.tolist(), "z": z.tolist(),
        "max_abs_z": float(np.max(np.abs(z)))}}


_DISPATCH = {
    "correlate": _cmd_correlate, "eigen": _cmd_eigen,
    "plateau-map": _cmd_plateau_map, "dominance-map": _cmd_dominance_map,
    "fisher": _cmd_fisher, "fit": _cmd_fit, "mc": _cmd_mc,
    "compare": _cmd_compare,
}


def run_command(config: RunConfig) -> int:
    """Execute one command; returns the process exit status."""
    try:
        result = _DISPATCH[config.command](config)
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        report = {"error": type(exc).__name__, "message": str(exc),
                  "command": config.command}
        print(json.dumps(report), file=sys.stderr)
        return 1

    prov = _provenance(config)
    if config.t_d_seconds is not None:
        prov["T_D_seconds"] = config.t_d_seconds
        print(f"# T_D = {config.t_d_seconds:.6g} s (d = {config.depth_phys:g} m)")
    if "series" in result:
        out = config.out or f"{config.command}-{config.model}.{config.format}"
        write_series(result["series"], out, config.format)
        print(f"# wrote {out} ({prov['config_hash']})")
    if "report" in result:
        doc = {"provenance": prov, **result["report"]}
        if config.out and "series" not in result:
            with open(config.out, "w") as fh:
                json.dump(doc, fh, indent=1)
            print(f"# wrote {config.out} ({prov['config_hash']})")
        else:
            print(json.dumps(doc, indent=1))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nanonmr",
        description="Correlation functions and experiment design for "
                    "nano-NMR samples in cylindrical confinement.")
    parser.add_argument("command", choices=_COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", help="output path override")
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("NANONMR_THREADS", "0")) or None)
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            config = parse_config(fh.read())
    except (OSError, ConfigError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    if config.command != args.command:
        config.command = args.command
    if args.out:
        config.out = args.out
    if args.format:
        config.format = args.format
    if args.seed is not None:
        config.seed = args.seed
        config.raw["seed"] = args.seed
    if args.threads:
        config.raw["threads"] = args.threads
    return run_command(config)


if __name__ == "__main__":
    sys.exit(main())
