"""
Hertz-type contact: how the Robin subarea changes the iteration count
=====================================================================

Two transversely isotropic blocks touch over a parabolic gap.  The Robin
term is switched on over different parts of the possible contact zone
``[0, 2b]``; the iteration count at the best relaxation parameter shows that
covering the real contact zone ``[0, b]`` works best.

Run with ``python gallery/hertz_schemes.py [outdir]``.
"""

import sys

import numpy as np

from penaltydd import experiments as ex

out = sys.argv[1] if len(sys.argv) > 1 else None

spec = ex.ExperimentSpec()
setup = ex.prepare(spec)
print(f"Hertz problem: {spec.density} quadratic elements on [0, 2b], theta = {setup.theta:.3f}")

# iterations for every scheme on a grid of relaxation parameters
sweep = ex.sweep_gamma(spec, setup=setup, out=out)
print(f"\n{'scheme':16s} {'gamma_opt':>9s} {'iterations':>10s}")
for name, (gamma, m) in sweep.best.items():
    print(f"{name:16s} {gamma:9.2f} {m:10d}")

# each scheme at its own gamma, tightening the stopping tolerance
rows, summary = ex.compare_schemes(spec, sweep.best, setup=setup, out=out)
print("\niterations grow linearly in -log10(eps_u):")
for name, fit in summary.items():
    its = [r["iterations"] for r in rows if r["scheme"] == name]
    print(f"{name:16s} {its}  slope {fit['slope']:.2f}  R2 {fit['r2']:.3f}")

# the converged contact stress against a finer, stiffer reference
state, _ = ex.solve_tight(setup)
s, sigma = ex.stress_profile(setup, state)
sn = ex.normalized_stress(spec, sigma)
oracle = ex.reference_oracle(spec)
print(f"\ncontact zone ends at x1 = {ex.contact_zone_end(s, sigma):.3f} b "
      f"(reference: {ex.contact_zone_end(oracle.s, oracle.sigma):.3f} b)")
print(f"{'x1/b':>6s} {'sigma/|sigma0|':>15s} {'reference':>10s}")
for x, v in zip(s[::2], sn[::2]):
    print(f"{x:6.2f} {v:15.4f} {oracle.at(np.array([x]))[0]:10.4f}")
