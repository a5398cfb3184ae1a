"""End-to-end Gaussian forward models for the three read-out topologies.

The measured object is always the light mode leaving the final beam
splitter; the matter mode is never measured.  Internally two-mode states are
ordered (matter, light).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .gaussian_core import (
    GaussianState,
    ProcessParams,
    SymplecticOp,
    apply,
    bs_symplectic,
    embed,
    loss_channel,
    make_coherent,
    make_thermal,
    marginal,
    process_symplectic,
    rotation,
    squeeze_matrix,
    tensor,
    vacuum,
)
from .noise import NoiseParams


class Topology(Enum):
    INTERFEROMETRIC = "interferometric"
    SIMPLISTIC = "simplistic"
    BLOCKED_BEAM = "blocked_beam"


@dataclass(frozen=True)
class SetupConfig:
    """Interface and source parameters of the read-out scheme.

    t1, t2 are the light-matter transmittances of the two couplings,
    v_thermal the matter variance V, r_amp the coherent amplitude r,
    probe_phase the phase of the coherent input.  t1 is ignored for the
    simplistic topology.
    """

    topology: Topology
    t1: float
    t2: float
    v_thermal: float
    r_amp: float
    probe_phase: float = 0.0

    def __post_init__(self):
        for name, t in (("t1", self.t1), ("t2", self.t2)):
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {t}")
        if self.v_thermal < 1.0:
            raise ValueError(f"v_thermal must be >= 1, got {self.v_thermal}")
        if self.r_amp < 0.0:
            raise ValueError(f"r_amp must be >= 0, got {self.r_amp}")

    @property
    def light_mean(self) -> np.ndarray:
        """Input mean of the coherent probe."""
        return np.array(
            [self.r_amp * math.cos(self.probe_phase), self.r_amp * math.sin(self.probe_phase)]
        )


_MODE_SWAP = np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), np.eye(2))


def _coupler(t: float) -> SymplecticOp:
    """Light-matter coupling on a (matter, light) pair.

    matter_out = sqrt(1-t) matter + sqrt(t) light
    light_out  = sqrt(t) matter  - sqrt(1-t) light

    This is bs_symplectic(t) called with (in1, in2) = (light, matter) and
    outputs read back as (matter, light); an involution, so two equal
    couplings cancel (Mach-Zehnder identity).
    """
    return SymplecticOp(bs_symplectic(t).matrix @ _MODE_SWAP, np.zeros(4))


def _apply_process(state: GaussianState, process: ProcessParams,
                   noise: NoiseParams | None, mode: int) -> GaussianState:
    out = apply(embed(process_symplectic(process), state.n_modes, mode), state)
    if noise is not None:
        out = loss_channel(out, mode, noise.t_c, noise.v_c)
    return out


def forward(setup: SetupConfig, process: ProcessParams,
            noise: NoiseParams | None = None) -> GaussianState:
    """Propagate probe and matter through the setup; return the measured light mode."""
    if setup.topology is Topology.SIMPLISTIC:
        m = _apply_process(make_thermal(setup.v_thermal), process, noise, 0)
        joint = tensor(m, make_coherent(setup.r_amp, setup.probe_phase))
        # Eq.-style wiring: x_o = sqrt(t2) x_matter + sqrt(1-t2) x_light.
        return marginal(apply(bs_symplectic(setup.t2), joint), 0)

    joint = tensor(make_thermal(setup.v_thermal), make_coherent(setup.r_amp, setup.probe_phase))
    joint = apply(_coupler(setup.t1), joint)
    if setup.topology is Topology.BLOCKED_BEAM:
        joint = tensor(marginal(joint, 0), vacuum())
    joint = _apply_process(joint, process, noise, 0)
    joint = apply(_coupler(setup.t2), joint)
    return marginal(joint, 1)


@dataclass(frozen=True)
class MeanMap:
    """Affine response of the measured mean: m_out = M_lin(p) m_in + g_d d_vec.

    M_lin(p) = through * R(phi) Sq(w, alpha) + direct * I, with the input
    mean m_in that of the coherent probe.
    """

    g_d: float
    through: float
    direct: float

    def linear(self, process: ProcessParams) -> np.ndarray:
        a = rotation(process.phi) @ squeeze_matrix(process.w, process.alpha)
        return self.through * a + self.direct * np.eye(2)

    def predict(self, process: ProcessParams, m_in: np.ndarray) -> np.ndarray:
        return self.linear(process) @ np.asarray(m_in, dtype=float) + self.g_d * process.d_vec


def mean_map(setup: SetupConfig, noise: NoiseParams | None = None) -> MeanMap:
    """Linear-response decomposition of the measured mean.

    Supported for the interferometric and blocked-beam topologies; the
    simplistic scheme has no light path through the first coupler.
    """
    t_c = 1.0 if noise is None else noise.t_c
    g_d = math.sqrt(setup.t2 * t_c)
    through = math.sqrt(setup.t1 * setup.t2 * t_c)
    if setup.topology is Topology.INTERFEROMETRIC:
        direct = math.sqrt((1.0 - setup.t1) * (1.0 - setup.t2))
    elif setup.topology is Topology.BLOCKED_BEAM:
        direct = 0.0
    else:
        raise ValueError("mean_map is unsupported for the simplistic topology")
    return MeanMap(g_d=g_d, through=through, direct=direct)
