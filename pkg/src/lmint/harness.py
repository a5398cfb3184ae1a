"""Monte-Carlo MSE benchmarking, parameter sweeps, scaling fits, the
phase-estimator crossover locator, and the two-step noise calibration.

Realizations are independent: realization k draws from a stream keyed by
base_seed XOR k, so results are order-independent and reproducible.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from .estimators import (
    EstimationError,
    PROBE_PHASES,
    UnidentifiableError,
    est_combined,
    est_displacement,
    est_general_cov,
    est_general_mean,
    est_phase_mean,
    est_phase_ml,
    est_phase_var,
)
from .gaussian_core import ProcessParams, circular_diff
from .interferometer import SetupConfig, forward, mean_map
from .measurement import (
    InsufficientDataError,
    MeasurementPlan,
    MomentEstimate,
    SampleSet,
    Scheme,
    estimate_moments,
    sample,
)
from .gaussian_core import IDENTITY_PROCESS
from .noise import IDEAL_NOISE, NoiseParams

_MASK64 = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15
_CAL_SALT = 0xC0FFEE5EED


class CalibrationError(RuntimeError):
    """The calibration run produced an unphysical channel estimate."""


_ESTIMATOR_FAILURES = (EstimationError, UnidentifiableError, InsufficientDataError, ValueError)

#: Parameters reported by each estimator.
ESTIMATOR_PARAMS = {
    "displacement": ("d", "beta"),
    "phase_var": ("phi",),
    "phase_mean": ("phi",),
    "phase_ml": ("phi",),
    "cov_method": ("phi", "q", "alpha", "d", "beta"),
    "mean_method": ("phi", "q", "alpha", "d", "beta"),
    "combined": ("phi", "q", "alpha", "d", "beta"),
}

_PARAM_PERIODS = {"phi": 2 * math.pi, "beta": 2 * math.pi, "alpha": math.pi}

#: Estimators that consume the three-probe mean protocol.
_THREE_PROBE = {"mean_method", "combined"}


def base_name(estimator: str) -> str:
    return estimator[6:] if estimator.startswith("naive_") else estimator


@dataclass(frozen=True)
class MonteCarloConfig:
    setup: SetupConfig
    process: ProcessParams
    plan: MeasurementPlan
    estimators: tuple
    noise: NoiseParams | None = None           # true channel used in simulation
    assumed_noise: NoiseParams | None = None   # channel handed to the estimators
    calibration: str = "true"                  # "true" | "auto" | "ideal"
    calibration_samples: int | None = None     # probe shots for "auto"; defaults to plan.n_samples
    m_reps: int = 10_000
    base_seed: int = 0
    jackknife_blocks: int = 20

    def __post_init__(self):
        if self.m_reps < 2:
            raise ValueError(f"m_reps must be >= 2, got {self.m_reps}")
        if self.calibration_samples is not None and self.calibration_samples < 2:
            raise ValueError(
                f"calibration_samples must be >= 2, got {self.calibration_samples}")
        if self.calibration not in ("true", "auto", "ideal"):
            raise ValueError(f"unknown calibration mode {self.calibration!r}")
        object.__setattr__(self, "estimators", tuple(self.estimators))
        for name in self.estimators:
            if base_name(name) not in ESTIMATOR_PARAMS:
                raise ValueError(f"unknown estimator {name!r}")


@dataclass(frozen=True)
class CellStats:
    mse: float
    bias: float
    variance: float
    n_ok: int
    n_failed: int
    n_clamped: int
    unreliable: bool


@dataclass(frozen=True)
class MSEReport:
    cells: dict  # (estimator, parameter) -> CellStats
    config: MonteCarloConfig
    wall_time: float

    def mse(self, estimator: str, parameter: str) -> float:
        return self.cells[(estimator, parameter)].mse


def _truth_value(process: ProcessParams, parameter: str) -> float:
    if parameter == "q":
        return process.q
    return getattr(process, parameter)


def param_error(estimate: float, truth: float, parameter: str) -> float:
    """Signed error, on the circle for angular parameters."""
    period = _PARAM_PERIODS.get(parameter)
    if period is None:
        return estimate - truth
    return circular_diff(estimate, truth, period)


def _probe_plan(plan: MeasurementPlan, n: int, seed: int) -> MeasurementPlan:
    return MeasurementPlan(scheme=plan.scheme, n_samples=n, seed=seed & _MASK64)


def _report_values(report) -> dict:
    p = report.params
    return {"phi": p.phi, "q": p.q, "alpha": p.alpha, "d": p.d, "beta": p.beta}


# ---------------------------------------------------------------------------
# Jackknife over blocks


def _split_blocks(samples: SampleSet, n_blocks: int):
    """Leave-one-block-out sample subsets (list of SampleSet)."""
    subsets = []
    for b in range(n_blocks):
        if samples.quad is not None:
            quad = {}
            for theta, g in samples.quad.items():
                edges = np.linspace(0, g.size, n_blocks + 1).astype(int)
                quad[theta] = np.concatenate([g[: edges[b]], g[edges[b + 1]:]])
            subsets.append(SampleSet(plan=samples.plan, quad=quad))
        else:
            g = samples.pairs
            edges = np.linspace(0, g.shape[0], n_blocks + 1).astype(int)
            pairs = np.concatenate([g[: edges[b]], g[edges[b + 1]:]], axis=0)
            subsets.append(SampleSet(plan=samples.plan, pairs=pairs))
    return subsets


def _jackknife_vars(estimate_fn, sample_groups, n_blocks: int) -> dict:
    """Per-parameter jackknife variances of an estimator over data blocks.

    sample_groups is a list of SampleSet (one per probe); block b is removed
    from each probe simultaneously.
    """
    per_probe_subsets = [_split_blocks(s, n_blocks) for s in sample_groups]
    values = []
    for b in range(n_blocks):
        try:
            values.append(estimate_fn([subs[b] for subs in per_probe_subsets]))
        except _ESTIMATOR_FAILURES:
            continue
    if len(values) < 2:
        return {}
    out = {}
    for name in values[0]:
        ref = values[0][name]
        errs = np.array([param_error(v[name], ref, name) for v in values])
        m = len(errs)
        out[f"jk_var_{name}"] = float((m - 1) / m * ((errs - errs.mean()) ** 2).sum())
    return out


# ---------------------------------------------------------------------------
# Single-realization pipeline


@dataclass
class _RealizationData:
    setup: SetupConfig
    single_samples: SampleSet | None = None
    single_moments: MomentEstimate | None = None
    probe_samples: list | None = None
    probe_moments: list | None = None


def _simulate_realization(cfg: MonteCarloConfig, k: int, need_single: bool,
                          need_probes: bool) -> _RealizationData:
    seed = (cfg.base_seed ^ k) & _MASK64
    data = _RealizationData(setup=cfg.setup)
    if need_single:
        state = forward(cfg.setup, cfg.process, cfg.noise)
        plan = _probe_plan(cfg.plan, cfg.plan.n_samples, seed)
        data.single_samples = sample(state, plan)
        data.single_moments = estimate_moments(data.single_samples)
    if need_probes:
        n_each = cfg.plan.n_samples // len(PROBE_PHASES)
        data.probe_samples = []
        data.probe_moments = []
        for j, phase in enumerate(PROBE_PHASES):
            setup_j = dc_replace(cfg.setup, probe_phase=phase)
            state = forward(setup_j, cfg.process, cfg.noise)
            plan = _probe_plan(cfg.plan, n_each, seed ^ ((j + 1) * _GOLD))
            s = sample(state, plan)
            data.probe_samples.append(s)
            data.probe_moments.append(estimate_moments(s))
    return data


def _estimate_one(name: str, data: _RealizationData, cfg: MonteCarloConfig,
                  assumed: NoiseParams, diagnostics: dict) -> dict:
    base = base_name(name)
    setup = data.setup
    if base == "displacement":
        d, beta = est_displacement(data.single_moments, setup, assumed)
        return {"d": d, "beta": beta}
    if base == "phase_var":
        return {"phi": est_phase_var(data.single_moments, setup, diagnostics)}
    if base == "phase_mean":
        return {"phi": est_phase_mean(data.single_moments, setup)}
    if base == "phase_ml":
        return {"phi": est_phase_ml(data.single_samples, setup, assumed)}
    if base == "cov_method":
        return _report_values(est_general_cov(data.single_moments, setup, assumed))
    if base == "mean_method":
        return _report_values(est_general_mean(data.probe_moments, setup, assumed))
    if base == "combined":
        report_i = est_general_cov(data.single_moments, setup, assumed)
        report_ii = est_general_mean(data.probe_moments, setup, assumed)
        jk_i = _jackknife_vars(
            lambda subs: _report_values(est_general_cov(estimate_moments_of(subs[0]), setup, assumed)),
            [data.single_samples], cfg.jackknife_blocks,
        )
        jk_ii = _jackknife_vars(
            lambda subs: _report_values(
                est_general_mean([estimate_moments_of(s) for s in subs], setup, assumed)
            ),
            data.probe_samples, cfg.jackknife_blocks,
        )
        report_i = dc_replace(report_i, diagnostics={**report_i.diagnostics, **jk_i})
        report_ii = dc_replace(report_ii, diagnostics={**report_ii.diagnostics, **jk_ii})
        return _report_values(est_combined(report_i, report_ii))
    raise ValueError(f"unknown estimator {name!r}")


def estimate_moments_of(samples: SampleSet) -> MomentEstimate:
    return estimate_moments(samples)


def _resolve_assumed(cfg: MonteCarloConfig, name: str,
                     calibrated: NoiseParams | None) -> NoiseParams:
    if name.startswith("naive_") or cfg.calibration == "ideal":
        return IDEAL_NOISE
    if cfg.assumed_noise is not None:
        return cfg.assumed_noise
    if cfg.calibration == "auto":
        return calibrated if calibrated is not None else IDEAL_NOISE
    return cfg.noise if cfg.noise is not None else IDEAL_NOISE


def _mc_chunk(cfg: MonteCarloConfig, k_lo: int, k_hi: int,
              calibrated: NoiseParams | None):
    need_single = any(base_name(n) not in _THREE_PROBE or base_name(n) == "combined"
                      for n in cfg.estimators)
    need_probes = any(base_name(n) in _THREE_PROBE for n in cfg.estimators)
    rows = []
    for k in range(k_lo, k_hi):
        data = _simulate_realization(cfg, k, need_single, need_probes)
        row = {}
        diagnostics = {}
        for name in cfg.estimators:
            assumed = _resolve_assumed(cfg, name, calibrated)
            try:
                row[name] = _estimate_one(name, data, cfg, assumed, diagnostics)
            except _ESTIMATOR_FAILURES:
                row[name] = None
        rows.append((row, diagnostics.get("clamped", 0)))
    return rows


def _n_workers() -> int:
    try:
        return max(1, int(os.environ.get("LMI_THREADS", "1")))
    except ValueError:
        return 1


def run_mc(cfg: MonteCarloConfig) -> MSEReport:
    """Estimate MSE/bias tables over cfg.m_reps independent realizations."""
    t0 = time.perf_counter()
    calibrated = None
    if cfg.calibration == "auto":
        n_cal = cfg.calibration_samples or cfg.plan.n_samples
        cal_plan = _probe_plan(cfg.plan, n_cal, cfg.base_seed ^ _CAL_SALT)
        calibrated = calibrate(cfg.setup, cal_plan, cfg.noise)
    workers = _n_workers()
    if workers > 1 and cfg.m_reps >= 4 * workers:
        bounds = np.linspace(1, cfg.m_reps + 1, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_mc_chunk, cfg, int(lo), int(hi), calibrated)
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            rows = [r for f in futures for r in f.result()]
    else:
        rows = _mc_chunk(cfg, 1, cfg.m_reps + 1, calibrated)

    cells = {}
    n_clamped_total = sum(c for _, c in rows)
    for name in cfg.estimators:
        params = ESTIMATOR_PARAMS[base_name(name)]
        errors = {p: [] for p in params}
        n_failed = 0
        for row, _ in rows:
            values = row[name]
            if values is None:
                n_failed += 1
                continue
            for p in params:
                errors[p].append(param_error(values[p], _truth_value(cfg.process, p), p))
        n_ok = cfg.m_reps - n_failed
        unreliable = n_failed > 0.05 * cfg.m_reps
        for p in params:
            errs = np.asarray(errors[p])
            if errs.size == 0:
                cells[(name, p)] = CellStats(math.nan, math.nan, math.nan,
                                             0, n_failed, n_clamped_total, True)
                continue
            mse = float((errs ** 2).mean())
            bias = float(errs.mean())
            variance = float(((errs - bias) ** 2).mean())
            cells[(name, p)] = CellStats(mse=mse, bias=bias, variance=variance,
                                         n_ok=n_ok, n_failed=n_failed,
                                         n_clamped=n_clamped_total,
                                         unreliable=unreliable)
    return MSEReport(cells=cells, config=cfg, wall_time=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Sweeps and fits

_AXES = ("r", "V", "T", "loss", "Phi")


def _apply_axis(cfg: MonteCarloConfig, axis: str, value: float) -> MonteCarloConfig:
    if axis == "r":
        return dc_replace(cfg, setup=dc_replace(cfg.setup, r_amp=float(value)))
    if axis == "V":
        return dc_replace(cfg, setup=dc_replace(cfg.setup, v_thermal=float(value)))
    if axis == "T":
        return dc_replace(cfg, setup=dc_replace(cfg.setup, t1=float(value), t2=float(value)))
    if axis == "loss":
        v_c = cfg.noise.v_c if cfg.noise is not None else 1.0
        t_c = 1.0 - float(value)
        noise = None if t_c >= 1.0 and v_c == 1.0 else NoiseParams(t_c=t_c, v_c=v_c)
        return dc_replace(cfg, noise=noise)
    if axis == "Phi":
        return dc_replace(cfg, process=ProcessParams.folded(
            phi=float(value), w=cfg.process.w, alpha=cfg.process.alpha,
            d=cfg.process.d, beta=cfg.process.beta))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {_AXES}")


def sweep(cfg: MonteCarloConfig, axis: str, grid) -> list:
    """One MSEReport per grid value; deterministic under a fixed base_seed."""
    table = []
    for idx, value in enumerate(grid):
        point = _apply_axis(cfg, axis, value)
        point = dc_replace(point, base_seed=(cfg.base_seed ^ ((idx + 1) * _GOLD)) & _MASK64)
        table.append((float(value), run_mc(point)))
    return table


@dataclass(frozen=True)
class ExponentFit:
    c: float        # MSE ~ axis^(-c)
    r_squared: float
    reliable: bool  # False when r_squared < 0.9


def fit_exponent(table, r2_threshold: float = 0.9) -> dict:
    """Least-squares power-law exponents of log MSE vs log axis value.

    Returns (estimator, parameter) -> ExponentFit for every cell in the table.
    """
    if len(table) < 4:
        raise ValueError(f"need at least 4 grid points for an exponent fit, got {len(table)}")
    xs = np.log([v for v, _ in table])
    out = {}
    for key in table[0][1].cells:
        ys = np.log([rep.cells[key].mse for _, rep in table])
        slope, intercept = np.polyfit(xs, ys, 1)
        resid = ys - (slope * xs + intercept)
        ss_tot = float(((ys - ys.mean()) ** 2).sum())
        r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 0.0
        out[key] = ExponentFit(c=-float(slope), r_squared=r2, reliable=r2 >= r2_threshold)
    return out


@dataclass(frozen=True)
class RCritResult:
    r_crit: float
    bracket_low: float
    bracket_high: float


def find_r_crit(cfg: MonteCarloConfig, r_range, tol_log: float = 0.02,
                max_iter: int = 40) -> RCritResult | None:
    """Locate the probe amplitude where the variance- and mean-based phase
    estimators have equal MSE; None when there is no crossing in range."""
    cfg = dc_replace(cfg, estimators=("phase_var", "phase_mean"))

    def diff(log_r):
        point = _apply_axis(cfg, "r", math.exp(log_r))
        rep = run_mc(point)
        return rep.mse("phase_var", "phi") - rep.mse("phase_mean", "phi")

    lo, hi = math.log(r_range[0]), math.log(r_range[1])
    d_lo, d_hi = diff(lo), diff(hi)
    if d_lo == 0.0:
        return RCritResult(math.exp(lo), math.exp(lo), math.exp(lo))
    if d_hi == 0.0:
        return RCritResult(math.exp(hi), math.exp(hi), math.exp(hi))
    if d_lo * d_hi > 0.0:
        return None
    for _ in range(max_iter):
        if hi - lo < tol_log:
            break
        mid = 0.5 * (lo + hi)
        d_mid = diff(mid)
        if d_mid == 0.0:
            lo = hi = mid
            break
        if d_lo * d_mid < 0.0:
            hi, d_hi = mid, d_mid
        else:
            lo, d_lo = mid, d_mid
    return RCritResult(r_crit=math.exp(0.5 * (lo + hi)),
                       bracket_low=math.exp(lo), bracket_high=math.exp(hi))


# ---------------------------------------------------------------------------
# Calibration


def calibrate(setup: SetupConfig, plan: MeasurementPlan,
              true_noise: NoiseParams | None, margin: float = 0.10) -> NoiseParams:
    """Estimate the decoherence channel with the unknown process switched off.

    Runs the three-probe mean protocol against the identity process: the mean
    gain pins t_c, the variance residual pins v_c.  Estimates are clamped to
    the physical ranges; a gain beyond the clamping margin raises
    CalibrationError.
    """
    r = setup.r_amp
    if r <= 0.0:
        raise CalibrationError("calibration needs a bright probe (r > 0)")
    mm_ideal = mean_map(setup, IDEAL_NOISE)
    n_each = plan.n_samples // len(PROBE_PHASES)
    moments = []
    for j, phase in enumerate(PROBE_PHASES):
        setup_j = dc_replace(setup, probe_phase=phase)
        state = forward(setup_j, IDENTITY_PROCESS, true_noise)
        s = sample(state, _probe_plan(plan, n_each, plan.seed ^ ((j + 1) * _GOLD)))
        moments.append(estimate_moments(s))
    m_a, m_b, m_c = (m.mean for m in moments)
    k_hat = 0.5 * (m_a + m_b)
    col1 = (m_a - m_b) / (2.0 * r)
    col2 = (m_c - k_hat) / r
    gain = 0.5 * (col1[0] + col2[1])
    through_part = (gain - mm_ideal.direct) / math.sqrt(setup.t1 * setup.t2)
    t_c_hat = through_part * through_part if through_part > 0.0 else 0.0
    if t_c_hat > (1.0 + margin) ** 2 or t_c_hat <= 0.0:
        raise CalibrationError(f"estimated gain implies t_c = {t_c_hat:.4g}, outside (0, 1]")
    t_c_hat = min(t_c_hat, 1.0)
    if 1.0 - t_c_hat < 1e-9:
        return NoiseParams(t_c=1.0, v_c=1.0)
    var_meas = float(np.mean([(m.cov[0, 0] + m.cov[1, 1]) / 2.0 for m in moments]))
    model = forward(setup, IDENTITY_PROCESS, NoiseParams(t_c=t_c_hat, v_c=1.0))
    var_model = float((model.cov[0, 0] + model.cov[1, 1]) / 2.0)
    # Output variance is affine in v_c with slope (1 - t_c) t2.
    v_c_hat = 1.0 + (var_meas - var_model) / ((1.0 - t_c_hat) * setup.t2)
    return NoiseParams(t_c=t_c_hat, v_c=max(v_c_hat, 1.0))
