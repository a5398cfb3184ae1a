"""Command-line driver: config parsing, the five workflows, CSV/JSON emission.

Exit codes: 0 success, 1 config/validation error, 2 runtime estimation failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .estimators import EstimationError, UnidentifiableError
from .fisher import NumericFisherError, fisher_displacement, fisher_numeric
from .gaussian_core import ProcessParams
from .harness import (
    CalibrationError,
    ESTIMATOR_PARAMS,
    MonteCarloConfig,
    _estimate_one,
    _resolve_assumed,
    _simulate_realization,
    _THREE_PROBE,
    base_name,
    calibrate,
    run_mc,
    sweep,
)
from .interferometer import SetupConfig, Topology, forward
from .measurement import MeasurementPlan, Scheme, sample
from .noise import NoiseParams

SWEEP_CSV_HEADER = ["axis", "value", "estimator", "parameter",
                    "mse", "bias", "variance", "n_samples", "m_reps", "seed"]


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config parsing / validation


def _require(mapping, path, allowed, required):
    unknown = set(mapping) - set(allowed)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key: {path}{key}")
    for key in required:
        if key not in mapping:
            raise ConfigError(f"missing key: {path}{key}")


def _number(mapping, path, key, default=None):
    if key not in mapping:
        if default is None:
            raise ConfigError(f"missing key: {path}{key}")
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}{key}: expected a number, got {value!r}")
    return float(value)


def _parse_setup(raw) -> SetupConfig:
    _require(raw, "setup.", {"topology", "t1", "t2", "v_thermal", "r_amp", "probe_phase"},
             {"topology", "t2", "v_thermal", "r_amp"})
    try:
        topology = Topology(raw["topology"])
    except ValueError:
        raise ConfigError(f"setup.topology: unknown topology {raw['topology']!r}") from None
    try:
        return SetupConfig(
            topology=topology,
            t1=_number(raw, "setup.", "t1", 0.0),
            t2=_number(raw, "setup.", "t2"),
            v_thermal=_number(raw, "setup.", "v_thermal"),
            r_amp=_number(raw, "setup.", "r_amp"),
            probe_phase=_number(raw, "setup.", "probe_phase", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"setup: {exc}") from None


def _parse_process(raw) -> ProcessParams:
    _require(raw, "process.", {"phi", "q", "w", "alpha", "d", "beta"}, set())
    if "q" in raw and "w" in raw:
        raise ConfigError("process: give either q or w, not both")
    w = math.log(_number(raw, "process.", "q", 1.0)) if "q" in raw \
        else _number(raw, "process.", "w", 0.0)
    try:
        return ProcessParams.folded(
            phi=_number(raw, "process.", "phi", 0.0),
            w=w,
            alpha=_number(raw, "process.", "alpha", 0.0),
            d=_number(raw, "process.", "d", 0.0),
            beta=_number(raw, "process.", "beta", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"process: {exc}") from None


def _parse_noise(raw) -> NoiseParams:
    _require(raw, "noise.", {"t_c", "v_c"}, set())
    try:
        return NoiseParams(t_c=_number(raw, "noise.", "t_c", 1.0),
                           v_c=_number(raw, "noise.", "v_c", 1.0))
    except ValueError as exc:
        raise ConfigError(f"noise: {exc}") from None


def _parse_plan(raw) -> MeasurementPlan:
    _require(raw, "plan.", {"scheme", "n_samples", "seed"}, {"scheme", "n_samples"})
    try:
        scheme = Scheme(raw["scheme"])
    except ValueError:
        raise ConfigError(f"plan.scheme: unknown scheme {raw['scheme']!r}") from None
    n = raw["n_samples"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigError(f"plan.n_samples: expected an integer, got {n!r}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"plan.seed: expected an integer, got {seed!r}")
    try:
        return MeasurementPlan(scheme=scheme, n_samples=n, seed=seed)
    except ValueError as exc:
        raise ConfigError(f"plan: {exc}") from None


def parse_grid(spec) -> list:
    """Grid given either as a list of numbers or 'log:lo:hi:n' / 'lin:lo:hi:n'."""
    if isinstance(spec, list):
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in spec):
            raise ConfigError("sweep.grid: expected numbers")
        return [float(v) for v in spec]
    if isinstance(spec, str):
        parts = spec.split(":")
        if len(parts) != 4 or parts[0] not in ("log", "lin"):
            raise ConfigError(f"sweep.grid: malformed grid spec {spec!r}")
        try:
            lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError:
            raise ConfigError(f"sweep.grid: malformed grid spec {spec!r}") from None
        if n < 1:
            raise ConfigError("sweep.grid: need at least one point")
        if parts[0] == "log":
            if lo <= 0 or hi <= 0:
                raise ConfigError("sweep.grid: log grid needs positive bounds")
            return list(np.geomspace(lo, hi, n))
        return list(np.linspace(lo, hi, n))
    raise ConfigError(f"sweep.grid: expected a list or a grid spec string, got {spec!r}")


_TOP_KEYS = {"setup", "process", "noise", "plan", "m_reps", "base_seed",
             "estimators", "calibration", "calibration_samples", "sweep", "out"}


def load_config(path: str, overrides) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    _require(raw, "", _TOP_KEYS, {"setup", "plan"})
    if overrides.n_samples is not None:
        raw.setdefault("plan", {})["n_samples"] = overrides.n_samples
    if overrides.seed is not None:
        raw["base_seed"] = overrides.seed
        raw.setdefault("plan", {})["seed"] = overrides.seed
    if overrides.m_reps is not None:
        raw["m_reps"] = overrides.m_reps
    if overrides.out is not None:
        raw["out"] = overrides.out
    cfg = {
        "setup": _parse_setup(raw.get("setup", {})),
        "process": _parse_process(raw.get("process", {})),
        "noise": _parse_noise(raw["noise"]) if "noise" in raw else None,
        "plan": _parse_plan(raw.get("plan", {})),
        "m_reps": raw.get("m_reps", 500),
        "base_seed": raw.get("base_seed", 0),
        "estimators": raw.get("estimators", []),
        "calibration": raw.get("calibration", "true"),
        "calibration_samples": raw.get("calibration_samples"),
        "out": raw.get("out"),
    }
    if not isinstance(cfg["m_reps"], int) or isinstance(cfg["m_reps"], bool):
        raise ConfigError("m_reps: expected an integer")
    if cfg["calibration_samples"] is not None and (
            not isinstance(cfg["calibration_samples"], int)
            or isinstance(cfg["calibration_samples"], bool)):
        raise ConfigError("calibration_samples: expected an integer")
    if not isinstance(cfg["base_seed"], int) or isinstance(cfg["base_seed"], bool):
        raise ConfigError("base_seed: expected an integer")
    if not isinstance(cfg["estimators"], list) or not all(
            isinstance(e, str) for e in cfg["estimators"]):
        raise ConfigError("estimators: expected a list of names")
    if "sweep" in raw:
        sw = raw["sweep"]
        if not isinstance(sw, dict):
            raise ConfigError("sweep: expected an object")
        _require(sw, "sweep.", {"axis", "grid"}, {"axis", "grid"})
        cfg["sweep"] = {"axis": sw["axis"], "grid": parse_grid(sw["grid"])}
    return cfg


def _mc_config(cfg) -> MonteCarloConfig:
    try:
        return MonteCarloConfig(
            setup=cfg["setup"], process=cfg["process"], plan=cfg["plan"],
            estimators=tuple(cfg["estimators"]), noise=cfg["noise"],
            calibration=cfg["calibration"], m_reps=cfg["m_reps"],
            calibration_samples=cfg["calibration_samples"],
            base_seed=cfg["base_seed"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _preset_path(name: str) -> str:
    candidate = resources.files("lmint").joinpath("presets", f"{name}.json")
    if not candidate.is_file():
        raise ConfigError(f"unknown preset {name!r}")
    return str(candidate)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _csv_text(header, rows) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Commands


def cmd_simulate(cfg, args) -> int:
    state = forward(cfg["setup"], cfg["process"], cfg["noise"])
    payload = {"mean": list(state.mean), "cov": [list(row) for row in state.cov]}
    if args.samples:
        records = sample(state, cfg["plan"])
        rows = []
        if records.quad is not None:
            idx = 0
            for theta, values in records.quad.items():
                for v in values:
                    rows.append([idx, repr(float(theta)), repr(float(v)), ""])
                    idx += 1
        else:
            tag = "het" if cfg["plan"].scheme is Scheme.HETERODYNE else "joint"
            for idx, (x, p) in enumerate(records.pairs):
                rows.append([idx, tag, repr(float(x)), repr(float(p))])
        _write_text(cfg["out"], _csv_text(
            ["shot_index", "angle_rad_or_het", "value_x", "value_p"], rows))
    else:
        _write_text(cfg["out"], json.dumps(payload, indent=2) + "\n")
    return 0


def report_to_dict(name, values) -> dict:
    return {"estimator": name, "params": values}


def cmd_estimate(cfg, args) -> int:
    mc = _mc_config(cfg)
    if not mc.estimators:
        raise ConfigError("estimators: at least one estimator is required")
    need_single = any(base_name(n) not in _THREE_PROBE or base_name(n) == "combined"
                      for n in mc.estimators)
    need_probes = any(base_name(n) in _THREE_PROBE for n in mc.estimators)
    data = _simulate_realization(mc, 1, need_single, need_probes)
    reports = []
    for name in mc.estimators:
        assumed = _resolve_assumed(mc, name, None)
        values = _estimate_one(name, data, mc, assumed, {})
        reports.append(report_to_dict(name, values))
    _write_text(cfg["out"], json.dumps(reports, indent=2) + "\n")
    return 0


def cmd_fisher(cfg, args) -> int:
    setup = cfg["setup"]
    rows = []
    for topology in (Topology.SIMPLISTIC, Topology.BLOCKED_BEAM, Topology.INTERFEROMETRIC):
        s = dataclasses.replace(setup, topology=topology)
        fi = fisher_displacement(s)
        rows.append([topology.value, fi.parameter, fi.method.value, fi.value])
    for parameter in ("phi", "w", "alpha", "d", "beta"):
        try:
            fi = fisher_numeric(setup, cfg["process"], cfg["noise"], parameter)
        except NumericFisherError:
            continue
        rows.append([setup.topology.value, parameter, fi.method.value, fi.value])
    _write_text(cfg["out"], _csv_text(["topology", "parameter", "method", "value"], rows))
    return 0


def sweep_csv(axis, table, plan, m_reps, base_seed) -> str:
    rows = []
    for value, report in table:
        for (estimator, parameter), cell in report.cells.items():
            rows.append([axis, value, estimator, parameter,
                         cell.mse, cell.bias, cell.variance,
                         plan.n_samples, m_reps, base_seed])
    return _csv_text(SWEEP_CSV_HEADER, rows)


def cmd_sweep(cfg, args) -> int:
    if "sweep" not in cfg:
        raise ConfigError("missing key: sweep")
    mc = _mc_config(cfg)
    if not mc.estimators:
        raise ConfigError("estimators: at least one estimator is required")
    axis, grid = cfg["sweep"]["axis"], cfg["sweep"]["grid"]
    table = sweep(mc, axis, grid)
    _write_text(cfg["out"], sweep_csv(axis, table, mc.plan, mc.m_reps, mc.base_seed))
    return 0


def cmd_calibrate(cfg, args) -> int:
    est = calibrate(cfg["setup"], cfg["plan"], cfg["noise"])
    _write_text(cfg["out"], json.dumps({"t_c": est.t_c, "v_c": est.v_c}, indent=2) + "\n")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "fisher": cmd_fisher,
    "sweep": cmd_sweep,
    "calibrate": cmd_calibrate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmint",
        description="Gaussian light-matter interferometry simulation and estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="path to a JSON run config")
        src.add_argument("--preset", help="name of a shipped figure preset")
        p.add_argument("--seed", type=int, default=None, help="override base seed")
        p.add_argument("--m-reps", type=int, default=None, help="override repetition count")
        p.add_argument("--n-samples", type=int, default=None, help="override sample count")
        p.add_argument("--out", default=None, help="output path ('-' for stdout)")
        p.add_argument("--axis", default=None, help="sweep axis override")
        p.add_argument("--grid", default=None, help="sweep grid override, e.g. log:1:300:15")
        if name == "simulate":
            p.add_argument("--samples", action="store_true",
                           help="dump sample records as CSV instead of the state")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = args.config if args.config else _preset_path(args.preset)
        cfg = load_config(path, args)
        if args.axis is not None or args.grid is not None:
            sw = cfg.get("sweep", {"axis": None, "grid": None})
            if args.axis is not None:
                sw["axis"] = args.axis
            if args.grid is not None:
                sw["grid"] = parse_grid(args.grid)
            if sw["axis"] is None or sw["grid"] is None:
                raise ConfigError("sweep needs both an axis and a grid")
            cfg["sweep"] = sw
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EstimationError, UnidentifiableError, CalibrationError, NumericFisherError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
