"""Parameter estimators: displacement-only, phase-only, and the two
general-process methods (covariance-based and mean-based), with naive and
calibrated variants selected through the assumed NoiseParams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .gaussian_core import (
    DecompositionError,
    IDENTITY_PROCESS,
    ProcessParams,
    circular_diff,
    fold_angle,
    polar_decompose_2x2,
    rotation,
    squeeze_matrix,
)
from .interferometer import SetupConfig, Topology, forward, mean_map
from .measurement import (
    InsufficientDataError,
    MomentEstimate,
    SampleSet,
    Scheme,
    _ANGLES,
)
from .noise import IDEAL_NOISE, NoiseParams

__all__ = [
    "NoiseParams",
    "IDEAL_NOISE",
    "UVCoefficients",
    "EstimateReport",
    "UnidentifiableError",
    "EstimationError",
    "FitRejectedError",
    "est_displacement",
    "phase_uv",
    "est_phase_var",
    "est_phase_mean",
    "est_phase_ml",
    "est_general_cov",
    "est_general_mean",
    "est_combined",
    "PROBE_PHASES",
]


class UnidentifiableError(ValueError):
    """The requested parameter carries no signal in this configuration."""


class EstimationError(RuntimeError):
    """An estimator failed to converge or produce a usable value."""


class FitRejectedError(EstimationError):
    """Model-vs-data residual too large: likely model mismatch."""


#: Absolute probe phases of the three-input mean protocol: two opposite
#: phases isolate the displacement, the quarter-turn input separates the
#: linear part.
PROBE_PHASES = (0.0, math.pi, math.pi / 2)

#: Below this squeezing exponent the squeeze axis is treated as undefined.
AXIS_UNDEFINED_W = 1e-4


@dataclass(frozen=True)
class UVCoefficients:
    """Variance model of the interferometric output: Var = u + v cos(phi)."""

    u: float
    v: float


@dataclass(frozen=True)
class EstimateReport:
    params: ProcessParams
    method: str
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Displacement-only estimation


def _gain_d(setup: SetupConfig, noise: NoiseParams) -> float:
    return math.sqrt(setup.t2 * noise.t_c)


def est_displacement(moments: MomentEstimate, setup: SetupConfig,
                     noise: NoiseParams = IDEAL_NOISE) -> tuple[float, float]:
    """Invert the measured mean for (d, beta), assuming a displacement-only process.

    The baseline is the model mean with the process switched off; the gain is
    sqrt(t2 t_c) for every topology.
    """
    g_d = _gain_d(setup, noise)
    if g_d == 0.0:
        raise UnidentifiableError("t2 = 0: displacement does not reach the detector")
    baseline = forward(setup, IDENTITY_PROCESS, noise).mean
    dx, dp = (moments.mean - baseline) / g_d
    return math.hypot(dx, dp), math.atan2(dp, dx)


# ---------------------------------------------------------------------------
# Phase-only estimation


def phase_uv(setup: SetupConfig) -> UVCoefficients:
    """Closed-form (u, v) of the interferometric output variance."""
    if setup.topology is not Topology.INTERFEROMETRIC:
        raise ValueError("the u + v cos(phi) variance model is interferometric-only")
    t1, t2, v_th = setup.t1, setup.t2, setup.v_thermal
    u = 1 - t1 - t2 + 2 * t1 * t2 + t1 * v_th + t2 * v_th - 2 * t1 * t2 * v_th
    v = 2 * (1 - v_th) * math.sqrt((1 - t1) * (1 - t2) * t1 * t2)
    return UVCoefficients(u=u, v=v)


def _frame_mean(moments: MomentEstimate, setup: SetupConfig) -> np.ndarray:
    """Measured mean rotated into the probe frame (probe phase -> 0)."""
    return rotation(-setup.probe_phase) @ moments.mean


def est_phase_var(moments: MomentEstimate, setup: SetupConfig,
                  diagnostics: dict | None = None) -> float:
    """Variance-based phase estimator: arccos of the centered mean variance.

    The arccos argument is clamped to [-1, 1] (clamp events are counted in
    the diagnostics dict when given); the sign is resolved through the mean's
    p-component when the probe is bright, otherwise the magnitude is returned.
    """
    uv = phase_uv(setup)
    if uv.v == 0.0:
        raise UnidentifiableError("v = 0: the output variance carries no phase signal")
    arg = ((moments.cov[0, 0] + moments.cov[1, 1]) / 2.0 - uv.u) / uv.v
    if abs(arg) > 1.0:
        if diagnostics is not None:
            diagnostics["clamped"] = diagnostics.get("clamped", 0) + 1
        arg = max(-1.0, min(1.0, arg))
    phi = math.acos(arg)
    if setup.r_amp > 0.0 and _frame_mean(moments, setup)[1] < 0.0:
        phi = -phi
    return fold_angle(phi)


def est_phase_mean(moments: MomentEstimate, setup: SetupConfig) -> float:
    """Mean-based phase estimator: two-argument arctangent of the displaced mean."""
    if setup.r_amp <= 0.0:
        raise UnidentifiableError("r = 0: the output mean carries no phase signal")
    r, t1, t2 = setup.r_amp, setup.t1, setup.t2
    mx, mp = _frame_mean(moments, setup)
    return math.atan2(mp, mx - r * math.sqrt((1 - t1) * (1 - t2)))


def _group_stats(samples: SampleSet):
    """Per-group sufficient statistics for the Gaussian log-likelihood."""
    if samples.quad is not None:
        out = []
        for theta in _ANGLES[samples.plan.scheme]:
            g = samples.quad[theta]
            out.append((theta, g.size, float(g.mean()), float(g.var())))
        return out, None
    pairs = samples.pairs
    zbar = pairs.mean(axis=0)
    dev = pairs - zbar
    scatter = dev.T @ dev / pairs.shape[0]
    return None, (pairs.shape[0], zbar, scatter)


def _loglik(state_mean, state_cov, groups, joint, extra_cov):
    ll = 0.0
    if groups is not None:
        for theta, n, m, s2 in groups:
            v = np.array([math.cos(theta), math.sin(theta)])
            mu = float(v @ state_mean)
            var = float(v @ state_cov @ v) + extra_cov
            ll += -0.5 * n * (math.log(var) + (s2 + (m - mu) ** 2) / var)
    if joint is not None:
        n, zbar, scatter = joint
        sig = state_cov + extra_cov * np.eye(2)
        det = sig[0, 0] * sig[1, 1] - sig[0, 1] * sig[1, 0]
        inv = np.array([[sig[1, 1], -sig[0, 1]], [-sig[1, 0], sig[0, 0]]]) / det
        delta = zbar - state_mean
        ll += -0.5 * n * (
            math.log(det)
            + float(np.trace(inv @ scatter))
            + float(delta @ inv @ delta)
        )
    return ll


def _golden_max(f, a, b, tol=1e-8, max_iter=200):
    """Golden-section maximization on [a, b]; returns the abscissa."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a < tol:
            return 0.5 * (a + b)
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
    raise EstimationError(f"golden-section search did not converge within {max_iter} iterations")


def est_phase_ml(samples: SampleSet, setup: SetupConfig,
                 noise: NoiseParams = IDEAL_NOISE) -> float:
    """Maximum-likelihood phase estimate over (-pi, pi].

    Coarse 64-point scan of the Gaussian log-likelihood (mean and variance
    both phase-dependent) followed by golden-section refinement.
    """
    groups, joint = _group_stats(samples)
    extra = 1.0 if samples.plan.scheme is Scheme.HETERODYNE else 0.0

    def ll(phi):
        state = forward(setup, ProcessParams.folded(phi=phi), noise)
        return _loglik(state.mean, state.cov, groups, joint, extra)

    grid = np.linspace(-math.pi, math.pi, 65)[1:]
    values = [ll(p) for p in grid]
    k = int(np.argmax(values))
    step = grid[1] - grid[0]
    return fold_angle(_golden_max(ll, grid[k] - step, grid[k] + step, tol=1e-8))


# ---------------------------------------------------------------------------
# General-process estimation


def _fold_x(x):
    return ProcessParams.folded(phi=x[0], w=max(x[1], 0.0), alpha=x[2])


def _recover_displacement(mean_emp, setup, noise, linear_part):
    mm = mean_map(setup, noise)
    d_vec = (mean_emp - linear_part @ setup.light_mean) / mm.g_d
    return math.hypot(d_vec[0], d_vec[1]), math.atan2(d_vec[1], d_vec[0])


def _cov_response(setup, noise):
    """Scalars (a, b, e) such that the output covariance of the read-out mode
    is a * A A^T + b * (A + A^T) + e * I for process matrix A.

    The input covariances and the coupler blocks are all proportional to the
    2x2 identity, so the quadratic response collapses to three scalars; they
    are recovered exactly from three forward evaluations.
    """
    c_rot = forward(setup, ProcessParams.folded(phi=math.pi / 2.0), noise).cov[0, 0]
    c_id = forward(setup, IDENTITY_PROCESS, noise).cov[0, 0]
    c_sq = forward(setup, ProcessParams.folded(w=math.log(2.0)), noise).cov[0, 0]
    b = (c_id - c_rot) / 2.0
    a = (c_sq - c_rot - 4.0 * b) / 3.0
    return a, b, c_rot - a


def _cov_preimages(cov_model, a, b, e):
    """All process matrices A with a A A^T + b (A + A^T) + e I = cov_model.

    Writing A = P O + lam I with lam = -b/a, the lam cross term cancels, so
    cov_model pins only P P^T; O runs over the orthogonal matrices satisfying
    det A = 1.  That leaves up to four discrete solutions (two proper, two
    improper), so the covariance alone cannot identify the process.
    """
    lam = -b / a
    if abs(lam) < 1e-12:
        return []  # no linear term: the rotation part is unidentifiable
    ppt = (cov_model - (e - b * b / a) * np.eye(2)) / a
    det_p2 = float(np.linalg.det(ppt))
    if det_p2 <= 0.0 or ppt[0, 0] <= 0.0:
        return []
    s = math.sqrt(det_p2)
    p = (ppt + s * np.eye(2)) / math.sqrt(ppt[0, 0] + ppt[1, 1] + 2.0 * s)
    det_p = float(np.linalg.det(p))
    tr_p = float(np.trace(p))
    out = []
    # Proper branch: det(P R(th) + lam I) = 1 fixes cos(th).
    c = (1.0 - lam * lam - det_p) / (lam * tr_p)
    if abs(c) <= 1.0:
        th = math.acos(c)
        for sign in (1.0, -1.0):
            out.append(p @ rotation(sign * th) + lam * np.eye(2))
    # Improper branch: reflections F(psi) with tr(P F(psi)) on target.
    target = (1.0 - lam * lam + det_p) / lam
    fx = p[0, 0] - p[1, 1]
    fy = 2.0 * p[0, 1]
    amp = math.hypot(fx, fy)
    if amp >= abs(target) > 0.0 or (target == 0.0 and amp > 0.0):
        delta = math.acos(max(-1.0, min(1.0, target / amp)))
        base = math.atan2(fy, fx)
        for sign in (1.0, -1.0):
            psi = base + sign * delta
            f = np.array([[math.cos(psi), math.sin(psi)],
                          [math.sin(psi), -math.cos(psi)]])
            out.append(p @ f + lam * np.eye(2))
    return out


def est_general_cov(moments: MomentEstimate, setup: SetupConfig,
                    noise: NoiseParams = IDEAL_NOISE, *,
                    w_max: float = 3.0,
                    residual_rel_tol: float = 0.5) -> EstimateReport:
    """Method (i): fit (phi, w, alpha) to the empirical covariance, then read
    the displacement off the residual mean.

    Multi-start downhill simplex on the squared Frobenius distance between
    the model output covariance and the measured one.  The covariance only
    determines the process matrix up to a discrete set of alternatives (see
    _cov_preimages), which a single read-out cannot distinguish; the reported
    solution is the canonical one (least squeezing, then most axis-aligned,
    then largest rotation), and the rivals are listed in the diagnostics.
    """
    if not moments.has_full_cov:
        raise InsufficientDataError(
            "covariance-based estimation needs the full covariance "
            "(homodyne 3-angle split, heterodyne or joint read-out)"
        )
    cov_emp = moments.cov
    a, b, e = _cov_response(setup, noise)
    eye2 = np.eye(2)
    exx = float(cov_emp[0, 0])
    epp = float(cov_emp[1, 1])
    exp_ = float(cov_emp[0, 1])

    def model_cov(phi, w, alpha):
        m = rotation(phi) @ squeeze_matrix(w, alpha)
        return a * (m @ m.T) + b * (m + m.T) + e * eye2

    def objective(x):
        # Scalar form of ||model_cov - cov_emp||_F^2; hot path for the simplex.
        phi, w, alpha = x[0], x[1], x[2]
        penalty = 0.0
        if w < 0.0 or w > w_max:
            penalty = 1e3 * (w - min(max(w, 0.0), w_max)) ** 2
            w = min(max(w, 0.0), w_max)
        ch, sh = math.cosh(2.0 * w), math.sinh(2.0 * w)
        chw, shw = math.cosh(w), math.sinh(w)
        c2, s2 = math.cos(2.0 * alpha), math.sin(2.0 * alpha)
        cf, sf = math.cos(phi), math.sin(phi)
        c2f = math.cos(2.0 * (alpha + phi))
        s2f = math.sin(2.0 * (alpha + phi))
        # a * A A^T: cosh(2w) I + sinh(2w) * traceless(2 alpha + 2 phi)
        # b * (A + A^T): 2 cos(phi) Sq + 2 sin(phi) sinh(w) * swapped traceless
        mxx = a * (ch + sh * c2f) + b * (2.0 * cf * (chw + shw * c2) - 2.0 * sf * shw * s2) + e
        mpp = a * (ch - sh * c2f) + b * (2.0 * cf * (chw - shw * c2) + 2.0 * sf * shw * s2) + e
        mxp = a * sh * s2f + b * 2.0 * shw * (cf * s2 + sf * c2)
        dxx = mxx - exx
        dpp = mpp - epp
        dxp = mxp - exp_
        return dxx * dxx + dpp * dpp + 2.0 * dxp * dxp + penalty

    starts = [
        (phi0, w0, 0.0)
        for phi0 in (-2.35, -0.8, 0.8, 2.35)
        for w0 in (0.35, 1.5)
    ]
    best = None
    nfev = 0
    scale = exx * exx + epp * epp + 2.0 * exp_ * exp_
    for x0 in starts:
        # Coarse pass only has to land in the right basin; the restart below
        # polishes to full precision.
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-4, "fatol": 1e-10 * scale,
                                "maxiter": 250})
        nfev += res.nfev
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.all(np.isfinite(best.x)):
        raise EstimationError("covariance fit failed to converge")
    # Direct inversion of the measured covariance seeds the exact solutions
    # when the data sit on the model manifold; under sampling noise it still
    # lands near the optimum where the grid seeds can miss a narrow basin.
    for mat in _cov_preimages(cov_emp, a, b, e):
        try:
            x0 = polar_decompose_2x2(mat)
        except DecompositionError:
            continue
        if not -0.5 <= x0[1] <= w_max + 0.5:
            continue
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-6, "fatol": 1e-10 * scale,
                                "maxiter": 250})
        nfev += res.nfev
        if res.fun < best.fun:
            best = res
    # One restart from the best point tightens the simplex around the optimum.
    res = minimize(objective, best.x, method="Nelder-Mead",
                   options={"xatol": 1e-13, "fatol": 1e-26, "maxiter": 2000})
    nfev += res.nfev
    if res.fun <= best.fun:
        best = res
    residual = math.sqrt(best.fun)
    rel = residual / max(float(np.linalg.norm(cov_emp)), 1e-300)
    if rel > residual_rel_tol:
        raise FitRejectedError(
            f"covariance residual {rel:.3g} exceeds tolerance {residual_rel_tol}"
        )

    # Enumerate every process matrix consistent with the fitted covariance
    # and pick the canonical representative.
    fitted = _fold_x(best.x)
    tie_tol = best.fun + 1e-9 * (1.0 + best.fun)
    candidates = [(fitted.phi, fitted.w, fitted.alpha)]
    for mat in _cov_preimages(model_cov(fitted.phi, fitted.w, fitted.alpha), a, b, e):
        try:
            phi_c, w_c, alpha_c = polar_decompose_2x2(mat)
        except DecompositionError:
            continue
        if not 0.0 <= w_c <= w_max:
            continue
        if objective((phi_c, w_c, alpha_c)) > tie_tol:
            continue
        if any(abs(w_c - wk) < 1e-9 and abs(circular_diff(phi_c, pk, 2 * math.pi)) < 1e-6
               for pk, wk, _ in candidates):
            continue
        candidates.append((phi_c, w_c, alpha_c))
    w_min = min(w for _, w, _ in candidates)
    short = [c for c in candidates if c[1] <= w_min + 1e-3]
    a_min = min(abs(al) for _, _, al in short)
    short = [c for c in short if abs(c[2]) <= a_min + 1e-3]
    pick = max(short, key=lambda c: c[0])
    rivals = [c for c in candidates if c is not pick]

    fitted = ProcessParams.folded(phi=pick[0], w=pick[1], alpha=pick[2])
    diagnostics = {"residual": residual, "residual_rel": rel, "nfev": nfev,
                   "ambiguity_order": len(candidates)}
    if rivals:
        diagnostics["rival_fits"] = rivals
    if fitted.w < AXIS_UNDEFINED_W:
        fitted = ProcessParams.folded(phi=fitted.phi, w=fitted.w, alpha=0.0)
        diagnostics["axis_undefined"] = True
    mm = mean_map(setup, noise)
    d, beta = _recover_displacement(moments.mean, setup, noise, mm.linear(fitted))
    params = ProcessParams.folded(phi=fitted.phi, w=fitted.w, alpha=fitted.alpha,
                                  d=d, beta=beta)
    return EstimateReport(params=params, method="cov_method", diagnostics=diagnostics)


def est_general_mean(probe_moments, setup: SetupConfig,
                     noise: NoiseParams = IDEAL_NOISE) -> EstimateReport:
    """Method (ii): three coherent probes (phases 0, pi, pi/2) expose the full
    affine response; opposite phases cancel the linear part and isolate the
    displacement, the quarter-turn probe fills the second column.
    """
    r = setup.r_amp
    if r <= 0.0:
        raise UnidentifiableError("r = 0: mean-based estimation needs a bright probe")
    m_a, m_b, m_c = (np.asarray(m.mean, dtype=float) for m in probe_moments)
    mm = mean_map(setup, noise)
    k_hat = 0.5 * (m_a + m_b)
    d_vec = k_hat / mm.g_d
    col1 = (m_a - m_b) / (2.0 * r)
    col2 = (m_c - k_hat) / r
    m_lin = np.column_stack([col1, col2])
    b = (m_lin - mm.direct * np.eye(2)) / mm.through
    phi, w, alpha = polar_decompose_2x2(b)
    diagnostics = {"det_b": float(np.linalg.det(b)), "w_raw": w}
    if w < AXIS_UNDEFINED_W:
        alpha = 0.0
        if abs(w) < AXIS_UNDEFINED_W:
            diagnostics["axis_undefined"] = True
    params = ProcessParams.folded(
        phi=phi, w=w, alpha=alpha,
        d=math.hypot(d_vec[0], d_vec[1]), beta=math.atan2(d_vec[1], d_vec[0]),
    )
    return EstimateReport(params=params, method="mean_method", diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# Combination

_PARAM_PERIODS = {"phi": 2 * math.pi, "alpha": math.pi, "beta": 2 * math.pi}
_PARAM_NAMES = ("phi", "w", "alpha", "d", "beta")


def _combine_one(name, v1, x1, v2, x2):
    if name in _PARAM_PERIODS:
        delta = circular_diff(x2, x1, _PARAM_PERIODS[name])
    else:
        delta = x2 - x1
    weight2 = v1 / (v1 + v2)
    out = x1 + weight2 * delta
    return out, abs(delta) / math.sqrt(v1 + v2) if v1 + v2 > 0 else 0.0


def est_combined(report_i: EstimateReport, report_ii: EstimateReport,
                 discrepancy_sigma: float = 5.0) -> EstimateReport:
    """Inverse-variance weighted combination of the two general-process methods.

    Per-parameter weights come from jackknife variances stored in each
    report's diagnostics under 'jk_var_<name>'.  A normalized discrepancy
    above discrepancy_sigma raises a model-inconsistency flag (reported, not
    fatal): a large gap between two asymptotically unbiased estimators means
    something in the model has been neglected.
    """
    combined = {}
    max_discrepancy = 0.0
    for name in _PARAM_NAMES:
        x1 = getattr(report_i.params, name)
        x2 = getattr(report_ii.params, name)
        v1 = report_i.diagnostics.get(f"jk_var_{name}", math.inf)
        v2 = report_ii.diagnostics.get(f"jk_var_{name}", math.inf)
        if not math.isfinite(v1) and not math.isfinite(v2):
            v1 = v2 = 1.0
        elif not math.isfinite(v1):
            v1 = 1e12 * v2 if v2 > 0 else 1.0
        elif not math.isfinite(v2):
            v2 = 1e12 * v1 if v1 > 0 else 1.0
        v1 = max(v1, 1e-300)
        v2 = max(v2, 1e-300)
        value, disc = _combine_one(name, v1, x1, v2, x2)
        combined[name] = value
        max_discrepancy = max(max_discrepancy, disc)
    diagnostics = {
        "max_discrepancy_sigma": max_discrepancy,
        "model_inconsistent": max_discrepancy > discrepancy_sigma,
    }
    params = ProcessParams.folded(**combined)
    return EstimateReport(params=params, method="combined", diagnostics=diagnostics)
