"""Fitting the differential-inequality systems along simulated trajectories.

A small-data run is measured, time derivatives of the squared functionals
are estimated by centered differences, and a Chebyshev linear program finds
nonnegative constants certifying each inequality.  Damping-like constants
are pushed as high as the data allows (on a pure decay trajectory the fit
recovers the exact rate), source-like constants as low as possible.
"""

import numpy as np

from thinflow import diagnostics as dg
from thinflow import solver as sv
from thinflow import spectral as sp

domain = sp.DomainSpec(l1=1.0, l2=1.0, eps=0.125, nu=1.0, n1=8, n2=8, n3=2)
u0 = sv.make_initial(domain, "q-perturbed", u_target=0.08, seed=13, q_fraction=0.2)
profile = sv.make_initial(domain, "z-independent", u_target=1.0, seed=12)
forcing = sv.ForcingSpec.steady(profile, amplitude=0.05)
print(f"small data: U = {sp.h1_norm(u0):.3f}, F = {forcing.f_bound:.4f}, "
      f"M = {max(sp.h1_norm(u0), forcing.f_bound):.3f}")

cfg = sv.SolverConfig(dt=1e-3, t_end=0.5, scheme="etd-rk2", diag_stride=2)
series = sv.run(u0, forcing, cfg).series
print(f"sampled {len(series)} diagnostics rows on [0, {series.times[-1]:.1f}]\n")

for regime, label in [
    ("planar", "z-independent system (2D + transported component)"),
    ("full", "combined system with the shear terms"),
    ("full-split", "per-quantity inequalities the combined system sums"),
]:
    print(f"--- {label} ---")
    for rep in dg.check_diff_inequalities(series, eps=domain.eps, regime=regime):
        consts = ", ".join(f"{k}={v:.3g}" for k, v in rep.fitted_constants.items())
        print(f"  {rep.name:18s} {rep.verdict:4s}  max residual {rep.residual_max:9.2e} "
              f"(slack {rep.slack:.1e})")
        print(f"  {'':18s}       {consts}")
    print()

# the same machinery can fit one constant set across several trajectories
others = [
    sv.run(
        sv.make_initial(domain, "z-independent", u_target=0.05 + 0.01 * k, seed=60 + k),
        None, cfg,
    ).series
    for k in range(3)
]
shared = dg.fit_shared_constants([series] + others, eps=domain.eps, regime="planar")
print("--- one constant set for four trajectories ---")
for rep in shared:
    print(f"  {rep.name:18s} {rep.verdict:4s}  "
          + ", ".join(f"{k}={v:.3g}" for k, v in rep.fitted_constants.items()))
