"""Shared fixtures: the benchmark working point used throughout the paper-style
figures (interferometric coupling T=0.1, hot matter V=100, bright probe r=100)
and helpers to turn exact forward moments into MomentEstimate objects.
"""
import dataclasses

import numpy as np
import pytest

from lmint import ProcessParams, SetupConfig, Topology, forward
from lmint.estimators import PROBE_PHASES
from lmint.measurement import MomentEstimate

FULL_N_EFF = {"mean_x": 1, "mean_p": 1, "var_x": 1, "var_p": 1, "cov_xp": 1}


@pytest.fixture
def bench_setup():
    return SetupConfig(topology=Topology.INTERFEROMETRIC, t1=0.1, t2=0.1,
                       v_thermal=100.0, r_amp=100.0)


@pytest.fixture
def bench_process():
    return ProcessParams.from_q(phi=0.7, q=2.0, alpha=-0.3, d=4.0, beta=0.5)


def exact_moments(state) -> MomentEstimate:
    """Wrap noise-free forward moments as a full-covariance estimate."""
    return MomentEstimate(mean=state.mean, cov=state.cov, n_effective=FULL_N_EFF)


def exact_probe_moments(setup, process, noise=None):
    """Noise-free moments for the three-probe protocol."""
    out = []
    for phase in PROBE_PHASES:
        st = forward(dataclasses.replace(setup, probe_phase=phase), process, noise)
        out.append(exact_moments(st))
    return out


def noiseless_pairs(state, n=4):
    """Paired records whose sample mean and covariance equal the state moments.

    Rows come in +/- pairs along scaled Cholesky columns, so the empirical
    mean is exact and the ddof=0 scatter reproduces the covariance.
    """
    assert n % 4 == 0
    chol = np.linalg.cholesky(state.cov)
    block = np.vstack([chol[:, 0], -chol[:, 0], chol[:, 1], -chol[:, 1]])
    dev = np.tile(np.sqrt(2.0) * block, (n // 4, 1))
    return state.mean + dev
