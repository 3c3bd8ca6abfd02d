"""Future boundary of the development past the first shock.

Continues a perturbed run beyond the first singularity (freezing nodes where
mu has collapsed), extracts the zero set of mu* on a halving ladder and
classifies the boundary points. Writes ``boundary_<system>.csv``.

    python demos/development_boundary.py [burgers|synthetic3]
"""
import sys

import numpy as np

from shockform.eikonal import SolverConfig, default_perturbation, evolve_to_stop, initialize
from shockform.mghd import (CausalConfig, classify_boundary, extract_boundary, lipschitz_ok,
                            speed_spread)
from shockform.simplewave import bump_profile, build_simple_wave, integrate_state_curve
from shockform.systems import builtin_system

which = sys.argv[1] if len(sys.argv) > 1 else "burgers"
if which == "burgers":
    system = builtin_system("burgers_transport")
    curve = integrate_state_curve(system, [1.2, 0.0], 1.1)
    wave = build_simple_wave(system, curve, bump_profile(2.0))
    pert, band = default_perturbation(2), None
else:
    system = builtin_system("synthetic3_intermediate")
    curve = integrate_state_curve(system, [0.0, 0.0, 0.0], 0.5)
    wave = build_simple_wave(system, curve, bump_profile(2.0, amplitude=0.4))
    pert, band = default_perturbation(3), (-0.3, 0.3)

cfg = SolverConfig(n_u=512, dtau=2e-3, tau_max=1.1, mu_stop=1e-3, margin=1.5)
traj = evolve_to_stop(initialize(system, wave, pert, 1e-3, cfg), cfg, continuation=True,
                      tau_end=1.1)
causal = CausalConfig(base=0.85, lam_star=speed_spread(traj), t_box=1.1, n_columns=121,
                      n_levels=201, mu_zero_factor=0.1, band=band)
poly = classify_boundary(extract_boundary(traj, causal), traj, causal)

print(f"{system.name}: {poly.counts()}  ({int(poly.ambiguous.sum())} flagged ambiguous)")
print(f"cone constant {poly.c_cone:.3f}, Lipschitz {poly.lipschitz:.3f}, "
      f"within 1.1/c: {lipschitz_ok(poly)}")
k = np.nonzero(poly.classes == "preshock")[0]
if k.size:
    k = int(k[0])
    print(f"preshock at t = {poly.t[k]:.5f}, x = {poly.x[k]:.5f}")
print("\n      u        t         x     class")
for i in range(0, poly.t.size, 8):
    flag = " ?" if poly.ambiguous[i] else ""
    print(f"  {poly.u[i]:+.3f}  {poly.t[i]:.5f}  {poly.x[i]:+.5f}  {poly.classes[i]}{flag}")
poly.to_csv(f"boundary_{which}.csv")
