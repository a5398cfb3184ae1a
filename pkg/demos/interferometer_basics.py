"""Walk through the basic phase-space machinery: states, couplers, topologies.

The light probe is a coherent state with amplitude r, the matter mode is
thermal with variance V.  Both interfaces are beam-splitter couplings; only
the optical output is read out.
"""
import numpy as np

from lmint import (
    IDENTITY_PROCESS,
    ProcessParams,
    SetupConfig,
    Topology,
    bs_symplectic,
    forward,
    loss_channel,
    make_coherent,
    make_thermal,
)
from lmint.gaussian_core import is_physical, symplectic_eigenvalues, tensor

setup = SetupConfig(
    topology=Topology.INTERFEROMETRIC,
    t1=0.1, t2=0.1, v_thermal=100.0, r_amp=100.0,
)

print("== input states ==")
light = make_coherent(setup.r_amp, 0.0)
matter = make_thermal(setup.v_thermal)
print("light mean:", light.mean, " cov diag:", np.diag(light.cov))
print("matter mean:", matter.mean, " cov diag:", np.diag(matter.cov))

joint = tensor(matter, light)
print("joint symplectic eigenvalues:", symplectic_eigenvalues(joint.cov))

print("\n== identity process: Mach-Zehnder cancellation ==")
# With no process the two couplers undo each other, whatever T is.
for t in (0.05, 0.1, 0.5, 0.9):
    s = SetupConfig(topology=Topology.INTERFEROMETRIC, t1=t, t2=t,
                    v_thermal=100.0, r_amp=100.0)
    out = forward(s, IDENTITY_PROCESS)
    drift = np.abs(out.mean - light.mean).max()
    excess = np.abs(out.cov - light.cov).max()
    print(f"T={t:4.2f}: |mean drift| = {drift:.2e}, |cov excess| = {excess:.2e}")

print("\n== a phase shift breaks the cancellation ==")
process = ProcessParams.folded(phi=0.7)
for topology in Topology:
    s = SetupConfig(topology=topology, t1=0.1, t2=0.1,
                    v_thermal=100.0, r_amp=100.0)
    out = forward(s, process)
    print(f"{topology.value:16s} mean = ({out.mean[0]:9.3f}, {out.mean[1]:7.3f})"
          f"  var = ({out.cov[0, 0]:7.3f}, {out.cov[1, 1]:7.3f})")

print("\n== decoherence keeps the state physical ==")
state = forward(setup, ProcessParams.from_q(phi=0.7, q=2.0, alpha=-0.3))
for t_c in (1.0, 0.7, 0.3):
    noisy = loss_channel(state, 0, t_c, 1.2)
    nu = symplectic_eigenvalues(noisy.cov)[0]
    print(f"t_c={t_c:3.1f}: symplectic eigenvalue {nu:8.3f}, physical: {is_physical(noisy)}")

print("\n== beam-splitter convention ==")
print(bs_symplectic(0.1).matrix.round(4))
