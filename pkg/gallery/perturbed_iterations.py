"""
Perturbed iterations do not accumulate errors
=============================================

A perturbation of fixed energy norm ``eps`` is added to every iterate of
the Neumann-Neumann scheme.  The error to the converged solution first
decays at the clean rate ``q`` and then stagnates at a level proportional
to ``eps`` and below ``eps / (1 - q)``.

Run with ``python gallery/perturbed_iterations.py``.
"""

import numpy as np

from penaltydd import experiments as ex
from penaltydd.contact import SubareaPolicy
from penaltydd.ddm import SchemeConfig, fit_rate, run_with_injected_errors

setup = ex.prepare(ex.ExperimentSpec())
reference, _ = ex.solve_tight(setup)
cfg = SchemeConfig(theta=setup.theta, gamma=0.16, policy=SubareaPolicy.none(), max_iter=200, check_stop=False)

_, clean = run_with_injected_errors(setup.problems, setup.pairs, cfg, setup.initial, 0.0, seed=1,
                                    reference=reference)
e = np.array(clean.energy_error)
q = fit_rate(e[: int(np.argmax(e < 1e-10 * e[0]))]).q
print(f"clean run: rate q = {q:.3f}")

print(f"\n{'eps':>8s} {'stagnation':>11s} {'eps/(1-q)':>10s}")
for eps in (1e-7, 1e-6, 1e-5):
    _, report = run_with_injected_errors(setup.problems, setup.pairs, cfg, setup.initial, eps, seed=1,
                                         reference=reference)
    err = np.array(report.energy_error)
    print(f"{eps:8.0e} {err[len(err) // 2:].max():11.3e} {eps / (1 - q):10.3e}")
