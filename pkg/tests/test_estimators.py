import dataclasses
import math

import numpy as np
import pytest

from lmint import (
    NoiseParams,
    ProcessParams,
    SetupConfig,
    Topology,
    est_combined,
    est_displacement,
    est_general_cov,
    est_general_mean,
    est_phase_mean,
    est_phase_ml,
    est_phase_var,
    forward,
    phase_uv,
)
from lmint.estimators import (
    EstimateReport,
    FitRejectedError,
    UnidentifiableError,
)
from lmint.gaussian_core import circular_diff, rotation, squeeze_matrix
from lmint.measurement import (
    InsufficientDataError,
    MeasurementPlan,
    MomentEstimate,
    SampleSet,
    Scheme,
    estimate_moments,
    sample,
)

from conftest import exact_moments, exact_probe_moments, noiseless_pairs


def assert_params_close(got, want, tol):
    assert abs(circular_diff(got.phi, want.phi)) < tol
    assert abs(got.w - want.w) < tol
    assert abs(circular_diff(got.alpha, want.alpha, math.pi)) < tol
    assert abs(got.d - want.d) < tol
    assert abs(circular_diff(got.beta, want.beta)) < tol


# ---------------------------------------------------------------------------
# Displacement-only


def test_displacement_exact_inversion_simplistic():
    setup = SetupConfig(Topology.SIMPLISTIC, t1=0.0, t2=0.1, v_thermal=100.0, r_amp=0.0)
    truth = ProcessParams.folded(d=4.0, beta=0.5)
    d, beta = est_displacement(exact_moments(forward(setup, truth)), setup)
    assert (d, beta) == pytest.approx((4.0, 0.5), abs=1e-12)


def test_displacement_exact_inversion_every_topology(bench_setup):
    truth = ProcessParams.folded(d=4.0, beta=0.5)
    for topology in Topology:
        setup = dataclasses.replace(bench_setup, topology=topology)
        d, beta = est_displacement(exact_moments(forward(setup, truth)), setup)
        assert (d, beta) == pytest.approx((4.0, 0.5), abs=1e-9)


def test_displacement_calibrated_inversion(bench_setup):
    truth = ProcessParams.folded(d=4.0, beta=0.5)
    noise = NoiseParams(t_c=0.7, v_c=1.2)
    moments = exact_moments(forward(bench_setup, truth, noise))
    d, beta = est_displacement(moments, bench_setup, noise)
    assert (d, beta) == pytest.approx((4.0, 0.5), abs=1e-9)


def test_displacement_unidentifiable_without_coupling(bench_setup):
    setup = dataclasses.replace(bench_setup, t2=0.0)
    moments = exact_moments(forward(setup, ProcessParams.folded(d=4.0)))
    with pytest.raises(UnidentifiableError):
        est_displacement(moments, setup)


# ---------------------------------------------------------------------------
# Phase-only


def test_phase_uv_reference_values(bench_setup):
    uv = phase_uv(bench_setup)
    assert uv.u == pytest.approx(18.82)
    assert uv.v == pytest.approx(-17.82)


def test_phase_uv_no_signal_cases(bench_setup):
    assert phase_uv(dataclasses.replace(bench_setup, v_thermal=1.0)).v == 0.0
    uv = phase_uv(dataclasses.replace(bench_setup, t1=0.0))
    assert uv.v == 0.0
    assert uv.u == pytest.approx(1.0 - 0.1 + 0.1 * 100.0)
    with pytest.raises(ValueError):
        phase_uv(dataclasses.replace(bench_setup, topology=Topology.SIMPLISTIC))


def test_phase_var_exact(bench_setup):
    moments = exact_moments(forward(bench_setup, ProcessParams.folded(phi=0.7)))
    assert est_phase_var(moments, bench_setup) == pytest.approx(0.7, abs=1e-9)


def test_phase_var_sign_from_mean(bench_setup):
    moments = exact_moments(forward(bench_setup, ProcessParams.folded(phi=-0.7)))
    assert est_phase_var(moments, bench_setup) == pytest.approx(-0.7, abs=1e-9)


def test_phase_var_clamps_out_of_range_argument(bench_setup):
    uv = phase_uv(bench_setup)
    bad = MomentEstimate(mean=np.array([100.0, 1.0]),
                         cov=(uv.u + 1.02 * uv.v) * np.eye(2))
    diagnostics = {}
    assert est_phase_var(bad, bench_setup, diagnostics) == pytest.approx(0.0)
    assert diagnostics["clamped"] == 1


def test_phase_var_unidentifiable_cold_matter(bench_setup):
    cold = dataclasses.replace(bench_setup, v_thermal=1.0)
    with pytest.raises(UnidentifiableError):
        est_phase_var(exact_moments(forward(cold, ProcessParams.folded(phi=0.7))), cold)


def test_phase_mean_exact(bench_setup):
    moments = exact_moments(forward(bench_setup, ProcessParams.folded(phi=0.7)))
    assert est_phase_mean(moments, bench_setup) == pytest.approx(0.7, abs=1e-9)


def test_phase_mean_near_pi_keeps_sign(bench_setup):
    moments = exact_moments(forward(bench_setup, ProcessParams.folded(phi=3.0)))
    assert est_phase_mean(moments, bench_setup) == pytest.approx(3.0, abs=1e-9)


def test_phase_mean_unidentifiable_dark_probe(bench_setup):
    dark = dataclasses.replace(bench_setup, r_amp=0.0)
    with pytest.raises(UnidentifiableError):
        est_phase_mean(exact_moments(forward(dark, ProcessParams.folded(phi=0.7))), dark)


def test_phase_ml_noise_free_records(bench_setup):
    state = forward(bench_setup, ProcessParams.folded(phi=0.7))
    records = SampleSet(plan=MeasurementPlan(Scheme.JOINT, 4, 0),
                        pairs=noiseless_pairs(state))
    assert est_phase_ml(records, bench_setup) == pytest.approx(0.7, abs=1e-6)


def test_phase_ml_on_sampled_records(bench_setup):
    state = forward(bench_setup, ProcessParams.folded(phi=-2.5))
    records = sample(state, MeasurementPlan(Scheme.JOINT, 20_000, seed=4))
    assert est_phase_ml(records, bench_setup) == pytest.approx(-2.5, abs=0.02)


# ---------------------------------------------------------------------------
# Covariance-based general method


def test_cov_method_exact_recovery(bench_setup, bench_process):
    report = est_general_cov(exact_moments(forward(bench_setup, bench_process)), bench_setup)
    assert_params_close(report.params, bench_process, 1e-6)
    assert report.diagnostics["residual_rel"] < 1e-9


def test_cov_method_rivals_reproduce_the_covariance(bench_setup, bench_process):
    state = forward(bench_setup, bench_process)
    report = est_general_cov(exact_moments(state), bench_setup)
    rivals = report.diagnostics.get("rival_fits", [])
    assert rivals, "the covariance map admits discrete rival processes"
    assert report.diagnostics["ambiguity_order"] == 1 + len(rivals)
    for phi, w, alpha in rivals:
        rival = ProcessParams.folded(phi=phi, w=w, alpha=alpha,
                                     d=bench_process.d, beta=bench_process.beta)
        # Every rival is observationally equivalent at the covariance level.
        assert np.abs(forward(bench_setup, rival).cov - state.cov).max() < 1e-6
        assert w >= report.params.w - 1e-3


def test_cov_method_canonical_pick_is_deterministic(bench_setup, bench_process):
    moments = exact_moments(forward(bench_setup, bench_process))
    a = est_general_cov(moments, bench_setup)
    b = est_general_cov(moments, bench_setup)
    assert a.params == b.params


def test_cov_method_needs_full_covariance(bench_setup, bench_process):
    state = forward(bench_setup, bench_process)
    split2 = estimate_moments(sample(state, MeasurementPlan(Scheme.HOMODYNE_SPLIT2, 1000, 0)))
    with pytest.raises(InsufficientDataError):
        est_general_cov(split2, bench_setup)


def test_cov_method_rejects_off_manifold_data(bench_setup):
    bad = MomentEstimate(mean=np.zeros(2), cov=np.diag([1e6, 1.0]),
                         n_effective={"cov_xp": 1})
    with pytest.raises(FitRejectedError):
        est_general_cov(bad, bench_setup)


def test_cov_method_axis_undefined_for_pure_phase(bench_setup):
    truth = ProcessParams.folded(phi=0.7, d=2.0, beta=1.0)
    report = est_general_cov(exact_moments(forward(bench_setup, truth)), bench_setup)
    assert report.diagnostics.get("axis_undefined")
    assert report.params.alpha == 0.0
    assert abs(report.params.w) < 1e-4


def test_cov_method_calibrated_exact(bench_setup, bench_process):
    noise = NoiseParams(t_c=0.7, v_c=1.2)
    moments = exact_moments(forward(bench_setup, bench_process, noise))
    report = est_general_cov(moments, bench_setup, noise)
    assert_params_close(report.params, bench_process, 1e-5)


def test_cov_method_exact_on_random_points(bench_setup):
    rng = np.random.default_rng(2)
    for _ in range(10):
        truth = ProcessParams.folded(
            phi=rng.uniform(-3.1, 3.1), w=rng.uniform(0.05, 1.5),
            alpha=rng.uniform(-1.5, 1.5), d=rng.uniform(0.0, 8.0),
            beta=rng.uniform(-3.1, 3.1),
        )
        report = est_general_cov(exact_moments(forward(bench_setup, truth)), bench_setup)
        assert report.diagnostics["residual_rel"] < 1e-9
        # The canonical pick never squeezes more than the truth.
        assert report.params.w <= truth.w + 1e-3


# ---------------------------------------------------------------------------
# Mean-based general method


def test_mean_method_exact_recovery(bench_setup, bench_process):
    report = est_general_mean(exact_probe_moments(bench_setup, bench_process), bench_setup)
    assert_params_close(report.params, bench_process, 1e-12)


def test_mean_method_opposite_probes_isolate_displacement(bench_setup):
    rng = np.random.default_rng(5)
    for _ in range(10):
        truth = ProcessParams.folded(
            phi=rng.uniform(-3.1, 3.1), w=rng.uniform(0.0, 1.5),
            alpha=rng.uniform(-1.5, 1.5), d=4.0, beta=0.5,
        )
        probes = exact_probe_moments(bench_setup, truth)
        k_hat = 0.5 * (probes[0].mean + probes[1].mean)
        d_vec = k_hat / math.sqrt(bench_setup.t2)
        assert math.hypot(*d_vec) == pytest.approx(4.0, abs=1e-9)


def test_mean_method_calibrated_exact(bench_setup, bench_process):
    noise = NoiseParams(t_c=0.7, v_c=1.2)
    probes = exact_probe_moments(bench_setup, bench_process, noise)
    report = est_general_mean(probes, bench_setup, noise)
    assert_params_close(report.params, bench_process, 1e-9)


def test_mean_method_naive_under_loss_mixes_up_gain(bench_setup, bench_process):
    noise = NoiseParams(t_c=0.5, v_c=1.2)
    probes = exact_probe_moments(bench_setup, bench_process, noise)
    naive = est_general_mean(probes, bench_setup)  # assumes the ideal channel
    assert naive.params.d < bench_process.d  # gain sqrt(t_c) eats the signal
    assert naive.params.q < bench_process.q


def test_mean_method_needs_bright_probe(bench_setup, bench_process):
    dark = dataclasses.replace(bench_setup, r_amp=0.0)
    with pytest.raises(UnidentifiableError):
        est_general_mean(exact_probe_moments(dark, bench_process), dark)


def test_mean_method_axis_undefined_for_pure_phase(bench_setup):
    truth = ProcessParams.folded(phi=0.7, d=2.0, beta=1.0)
    report = est_general_mean(exact_probe_moments(bench_setup, truth), bench_setup)
    assert report.diagnostics.get("axis_undefined")
    assert report.params.alpha == 0.0


# ---------------------------------------------------------------------------
# Combination


def _report(method, params, jk):
    diagnostics = {f"jk_var_{k}": v for k, v in jk.items()}
    return EstimateReport(params=params, method=method, diagnostics=diagnostics)


def test_combined_identical_inputs(bench_process):
    jk = {n: 1.0 for n in ("phi", "w", "alpha", "d", "beta")}
    out = est_combined(_report("cov_method", bench_process, jk),
                       _report("mean_method", bench_process, jk))
    assert_params_close(out.params, bench_process, 1e-12)
    assert not out.diagnostics["model_inconsistent"]


def test_combined_weights_follow_jackknife_variance():
    p1 = ProcessParams.folded(phi=0.5, w=0.3, d=2.0)
    p2 = ProcessParams.folded(phi=0.6, w=0.4, d=2.2)
    small = {n: 1e-4 for n in ("phi", "w", "alpha", "d", "beta")}
    big = {n: 1e-2 for n in ("phi", "w", "alpha", "d", "beta")}
    out = est_combined(_report("cov_method", p1, big), _report("mean_method", p2, small))
    # 100x larger variance on the first report pulls the result to the second.
    assert abs(out.params.phi - p2.phi) < 0.01 * abs(p2.phi - p1.phi) / 0.5
    assert abs(out.params.d - p2.d) < 0.01


def test_combined_flags_model_inconsistency():
    p1 = ProcessParams.folded(phi=0.5)
    p2 = ProcessParams.folded(phi=1.5)
    jk = {n: 1e-6 for n in ("phi", "w", "alpha", "d", "beta")}
    out = est_combined(_report("cov_method", p1, jk), _report("mean_method", p2, jk))
    assert out.diagnostics["model_inconsistent"]
    assert out.diagnostics["max_discrepancy_sigma"] > 5.0


def test_combined_missing_variances_fall_back_to_equal_weights(bench_process):
    out = est_combined(EstimateReport(params=bench_process, method="cov_method"),
                       EstimateReport(params=bench_process, method="mean_method"))
    assert_params_close(out.params, bench_process, 1e-12)
