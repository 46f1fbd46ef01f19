"""The two benchmark problems, their parameter formulas, and parameter studies.

Hertz-type problem: two transversely isotropic ``4b x 4b`` blocks pressed
together over a parabolic gap.  Only the half ``x1 >= 0`` is modelled, with
a symmetry roller on ``x1 = 0``; the upper block's top face is moved down by
``Delta`` while the lower block's bottom face is clamped.

Groove problem: two isotropic ``l x h`` blocks, one with a shallow groove of
half-width ``b`` centred on ``x1 = l``, pressed by a uniform normal traction
``q`` on the upper face.  Both lateral faces carry rollers.

All studies return plain row dicts and can write them to CSV.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .contact import GAP_FUNCTIONS, SubareaPolicy, build_pair, contact_stress, groove, neg, parabolic, penetration
from .ddm import DivergenceError, SchemeConfig, TraceEngine, fit_rate, make_state, solve_penalty_equation
from .fem import ConfigError, SolverError, SubdomainProblem
from .material import PLANE_STRAIN, Material
from .mesh import BoundaryTag, generate_rect_mesh, tag_boundary, tag_remaining

log = logging.getLogger(__name__)

HERTZ = "hertz"
GROOVE = "groove"
PAIR = "12"


class OracleError(RuntimeError):
    pass


@dataclass
class ExperimentSpec:
    """Parameters of one benchmark problem.

    Fields left as ``None`` take the problem's default when the object is
    created.  Lengths are in units of ``b``; ``density`` is the number of
    elements on the possible contact part.  ``theta`` overrides the penalty
    formula, ``gap = (name, params)`` the built-in gap function and
    ``body_materials`` the default materials of the two bodies.  For the groove problem
    ``setup="square"`` gives ``h = 8b, q = 0.01 E`` and ``setup="strip"``
    gives ``h = 2b, q = 0.0075 E``.
    """

    problem: str = HERTZ
    setup: str = "square"
    b: float = 1.0
    E: float | None = None
    nu: float = 0.3
    E_t: float | None = None
    nu_t: float = 0.3
    G_t: float | None = None
    hypothesis: str = PLANE_STRAIN
    r: float | None = None
    delta_factor: float = 2.154434
    l: float | None = None
    h: float | None = None
    q: float | None = None
    density: int | None = None
    order: int | None = None
    c: float | None = None
    theta: float | None = None
    gap: tuple | None = None
    body_materials: tuple | None = None
    gammas: tuple = ()
    eps_u: float = 1e-3
    max_iter: int = 200
    seed: int = 0

    def __post_init__(self):
        b = self.b
        if self.problem == HERTZ:
            defaults = dict(E=2.0, E_t=1.0, r=1e-3 * b, l=2.0 * b, h=4.0 * b, q=0.0,
                            density=15, order=2, c=0.05)
        elif self.problem == GROOVE:
            if self.setup not in ("square", "strip"):
                raise ConfigError(f"unknown groove setup {self.setup!r}")
            E = self.E if self.E is not None else 1.0
            h, q = (8.0 * b, 0.01 * E) if self.setup == "square" else (2.0 * b, 0.0075 * E)
            defaults = dict(E=1.0, E_t=None, r=0.05 * b, l=8.0 * b, h=h, q=q,
                            density=32, order=1, c=0.1)
        else:
            raise ConfigError(f"unknown problem {self.problem!r}")
        for key, val in defaults.items():
            if getattr(self, key) is None:
                setattr(self, key, val)
        if self.G_t is None and self.problem == HERTZ:
            self.G_t = self.E / (2.0 * (1.0 + self.nu)) / 2.0
        if self.density < 4:
            raise ConfigError("density must be at least 4 elements per contact side")
        if self.c <= 0:
            raise ConfigError("penalty coefficient c must be positive")
        if self.b <= 0 or self.l <= 0 or self.h <= 0:
            raise ConfigError("lengths must be positive")
        if self.order not in (1, 2):
            raise ConfigError("order must be 1 or 2")
        if self.theta is not None and self.theta <= 0:
            raise ConfigError("theta must be positive")
        if self.gap is not None and self.gap[0] not in GAP_FUNCTIONS:
            raise ConfigError(f"unknown gap function {self.gap[0]!r}")
        if self.eps_u <= 0 or self.max_iter < 1:
            raise ConfigError("eps_u must be positive and max_iter at least 1")
        self.gammas = tuple(float(g) for g in self.gammas)

    @property
    def delta(self):
        """Approach of the outer faces: configured for Hertz, computed for the groove."""
        if self.problem == HERTZ:
            return self.delta_factor * self.r
        return self.q * penalty_theta(self) * (1.0 + self.c) / self.c

    def materials(self):
        if self.body_materials is not None:
            return tuple(self.body_materials)
        if self.problem == HERTZ:
            m = Material.transversely_isotropic(self.E, self.E_t, self.nu, self.nu_t, self.G_t,
                                               hypothesis=self.hypothesis)
        else:
            m = Material.isotropic(self.E, self.nu, hypothesis=self.hypothesis)
        return m, m

    def element_size(self):
        return self.l / self.density


def penalty_theta(spec):
    """Penalty parameter from the bar-compliance formulas.

    Hertz: ``4 b c (1/E'_1 + 1/E'_2)``.  Groove: ``c h sum (1 - nu)^2 / E``.
    """
    if spec.theta is not None:
        return float(spec.theta)
    m1, m2 = spec.materials()
    if spec.problem == HERTZ:
        return 4.0 * spec.b * spec.c * (1.0 / m1.transverse_modulus + 1.0 / m2.transverse_modulus)
    return spec.c * spec.h * sum((1.0 - m.nu) ** 2 / m.E for m in (m1, m2))


def gap_function(spec):
    """The configured gap override, or ``None`` for the problem's own gap."""
    if spec.gap is None:
        return None
    name, params = spec.gap
    try:
        return GAP_FUNCTIONS[name](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for gap {name!r}: {exc}") from exc


def _hertz(spec):
    b, n = spec.b, spec.density
    side = 4.0 * b
    nx = ny = 2 * n  # the contact part [0, 2b] gets n elements
    m1, m2 = spec.materials()
    roller = BoundaryTag.dirichlet("symmetry", components=(0,))

    lower = generate_rect_mesh((0.0, 0.0), side, side, nx, ny, spec.order)
    lower = tag_boundary(lower, ((0.0, 0.0), (0.0, side)), roller)
    lower = tag_boundary(lower, ((0.0, 0.0), (side, 0.0)), BoundaryTag.dirichlet("fixed"))
    lower = tag_boundary(lower, ((0.0, side), (2.0 * b, side)), BoundaryTag.contact(PAIR))
    lower = tag_remaining(lower, BoundaryTag.neumann())

    upper = generate_rect_mesh((0.0, side), side, side, nx, ny, spec.order)
    upper = tag_boundary(upper, ((0.0, side), (0.0, 2 * side)), roller)
    upper = tag_boundary(upper, ((0.0, 2 * side), (side, 2 * side)), BoundaryTag.dirichlet("press"))
    upper = tag_boundary(upper, ((0.0, side), (2.0 * b, side)), BoundaryTag.contact(PAIR))
    upper = tag_remaining(upper, BoundaryTag.neumann())

    p1 = SubdomainProblem(lower, m1, name="lower")
    p2 = SubdomainProblem(upper, m2, dirichlet={"press": (0.0, -spec.delta)}, name="upper")
    pair = build_pair(p1, p2, PAIR, gap_function(spec) or parabolic(spec.r, b))
    return [p1, p2], [pair]


def _groove(spec):
    l, h, n = spec.l, spec.h, spec.density
    ny = max(1, int(round(n * h / l)))
    m1, m2 = spec.materials()
    roller = BoundaryTag.dirichlet("sides", components=(0,))

    def lateral(mesh, y0):
        mesh = tag_boundary(mesh, ((0.0, y0), (0.0, y0 + h)), roller)
        return tag_boundary(mesh, ((l, y0), (l, y0 + h)), roller)

    lower = lateral(generate_rect_mesh((0.0, 0.0), l, h, n, ny, spec.order), 0.0)
    lower = tag_boundary(lower, ((0.0, 0.0), (l, 0.0)), BoundaryTag.dirichlet("fixed"))
    lower = tag_boundary(lower, ((0.0, h), (l, h)), BoundaryTag.contact(PAIR))
    lower = tag_remaining(lower, BoundaryTag.neumann())

    upper = lateral(generate_rect_mesh((0.0, h), l, h, n, ny, spec.order), h)
    upper = tag_boundary(upper, ((0.0, 2 * h), (l, 2 * h)), BoundaryTag.neumann("load"))
    upper = tag_boundary(upper, ((0.0, h), (l, h)), BoundaryTag.contact(PAIR))
    upper = tag_remaining(upper, BoundaryTag.neumann())

    p1 = SubdomainProblem(lower, m1, name="lower")
    p2 = SubdomainProblem(upper, m2, tractions={"load": (0.0, -spec.q)}, name="upper")
    pair = build_pair(p1, p2, PAIR, gap_function(spec) or groove(spec.r, spec.b, l))
    return [p1, p2], [pair]


def problem_hertz_transversal(spec=None):
    spec = spec or ExperimentSpec(HERTZ)
    if spec.problem != HERTZ:
        raise ConfigError("spec is not a Hertz problem")
    return _hertz(spec)


def problem_groove(spec=None):
    spec = spec or ExperimentSpec(GROOVE)
    if spec.problem != GROOVE:
        raise ConfigError("spec is not a groove problem")
    return _groove(spec)


def build_problem(spec):
    return _hertz(spec) if spec.problem == HERTZ else _groove(spec)


def _bar_compliance(spec, material):
    """Factor in front of ``[d - Delta]^- / (theta (1 + c))`` for one body."""
    if spec.problem == HERTZ:
        return 4.0 * spec.b * spec.c / material.transverse_modulus
    return spec.c * spec.h * (1.0 - material.nu ** 2) / material.E


def bar_model_initial_guess(spec, theta, problems=None, pairs=None):
    """Initial iterate from the one-dimensional bar model.

    Each body gets the normal trace ``k_a [d - Delta]^- / (theta (1 + c))``
    with the body's bar compliance ``k_a``; the upper body is additionally
    shifted by ``Delta``.  All other free dofs are zero.
    """
    if problems is None or pairs is None:
        problems, pairs = build_problem(spec)
    mats = spec.materials()
    u = [np.zeros(p.n_free) for p in problems]
    for pair in pairs:
        bracket = neg(pair.gap - spec.delta)
        for body, trace, shift in ((pair.body_a, pair.trace_a, 0.0), (pair.body_b, pair.trace_b, spec.delta)):
            un = _bar_compliance(spec, mats[body]) * bracket / (theta * (1.0 + spec.c)) + shift
            if trace is pair.trace_b:
                un = pair.to_b(un)
            rows, cols = trace.N.nonzero()
            vals = np.asarray(trace.N[rows, cols]).ravel()
            u[body][cols] = (un[rows] - trace.offset[rows]) / vals
    return make_state(problems, pairs, u)


# ---------------------------------------------------------------------------
# schemes and runs

def default_schemes(b=1.0):
    """The named subarea choices compared in the parameter studies."""
    return {
        "neumann-neumann": SubareaPolicy.none(),
        "robin-0-0.5b": SubareaPolicy.segment(0.0, 0.5 * b),
        "robin-0-1b": SubareaPolicy.segment(0.0, 1.0 * b),
        "robin-0-1.5b": SubareaPolicy.segment(0.0, 1.5 * b),
        "robin-all": SubareaPolicy.all(),
        "active-set": SubareaPolicy.active(),
    }


def default_gamma_grid(step=0.02):
    return np.round(np.arange(step, 2.0 - 1e-9, step), 10)


@dataclass
class Setup:
    """Problem, penalty, initial iterate and a reusable trace engine."""

    spec: ExperimentSpec
    problems: list
    pairs: list
    theta: float
    initial: object
    engine: TraceEngine = field(repr=False)


def prepare(spec, theta=None):
    problems, pairs = build_problem(spec)
    theta = penalty_theta(spec) if theta is None else float(theta)
    initial = bar_model_initial_guess(spec, theta, problems, pairs)
    return Setup(spec, problems, pairs, theta, initial, TraceEngine(problems, pairs, theta))


def run(setup, policy, gamma, eps_u=None, max_iter=None, reference=None, record_traces=False):
    """One scheme run on the trace engine; returns ``(state, report)``."""
    spec = setup.spec
    cfg = SchemeConfig(theta=setup.theta, gamma=gamma, policy=policy,
                       eps_u=spec.eps_u if eps_u is None else eps_u,
                       max_iter=spec.max_iter if max_iter is None else max_iter)
    return setup.engine.run(cfg, setup.initial, reference=reference, record_traces=record_traces)


def _iterations(setup, policy, gamma, eps_u=None, max_iter=None):
    max_iter = setup.spec.max_iter if max_iter is None else max_iter
    try:
        _, report = run(setup, policy, gamma, eps_u=eps_u, max_iter=max_iter)
    except (DivergenceError, SolverError, FloatingPointError):
        return max_iter, False
    if not report.converged:
        return max_iter, False
    return report.iterations, True


def stress_profile(setup, state, pair_index=0):
    """Arclength and nodal normal contact stress of a converged state."""
    pair = setup.pairs[pair_index]
    un_a, un_b = pair.traces(state.u)
    return pair.trace_a.s.copy(), contact_stress(pair, un_a, un_b, setup.theta)


def normalized_stress(spec, sigma):
    """Hertz: ``sigma / |sigma(0)|``.  Groove: ``sigma / E``."""
    if spec.problem == HERTZ:
        s0 = abs(sigma[0])
        if s0 == 0.0:
            raise ValueError("no contact stress at x1 = 0")
        return sigma / s0
    return sigma / spec.E


def contact_zone_end(s, sigma):
    """Arclength of the last node carrying compressive stress (``nan`` if none)."""
    idx = np.flatnonzero(sigma < 0.0)
    return float(s[idx[-1]]) if len(idx) else float("nan")


def max_penetration(setup, state):
    out = 0.0
    for pair in setup.pairs:
        out = max(out, float(np.max(-penetration(pair, *pair.traces(state.u)))))
    return out


# ---------------------------------------------------------------------------
# oracle

@dataclass
class Oracle:
    """Fine, tightly converged stand-in for the exact contact stress."""

    spec: ExperimentSpec
    theta: float
    s: np.ndarray
    sigma: np.ndarray
    sigma_norm: np.ndarray
    iterations: int
    mass: object = field(default=None, repr=False)

    def at(self, s):
        """Normalised stress interpolated to arclength positions ``s``."""
        return np.interp(s, self.s, self.sigma_norm)

    def rows(self):
        return [{"s": float(a), "sigma": float(b), "sigma_norm": float(c)}
                for a, b, c in zip(self.s, self.sigma, self.sigma_norm)]


def warm_start(setup, max_iter=1000):
    """Starting iterate for the active-set scheme.

    When the bar-model guess leaves some contact part without penetration,
    the active-set indicator is empty and a body held only through contact
    would have a singular matrix.  Full-Robin steps (same fixed point) are
    then taken until every contact part penetrates.  Returns
    ``(state, steps)``.
    """
    def empty(state):
        return any(not np.any(pair.residual(*pair.traces(state.u)) < 0.0) for pair in setup.pairs)

    state, steps = setup.initial, 0
    cfg = SchemeConfig(theta=setup.theta, gamma=1.0, policy=SubareaPolicy.all(), max_iter=1,
                       check_stop=False)
    while empty(state):
        if steps >= max_iter:
            raise SolverError(f"no penetration after {max_iter} full-Robin steps")
        state, _ = setup.engine.run(cfg, state)
        steps += 1
    return state, steps


def solve_tight(setup, eps_u=1e-10, gamma=0.5):
    """Discrete penalty solution of ``setup``, confirmed by the active-set scheme.

    The penalty equation is solved directly on the contact traces; one
    active-set run from that state must then meet ``eps_u`` at once.
    Returns ``(state, report)`` of the confirming run.
    """
    start, _ = warm_start(setup)
    if start is not setup.initial:
        # a nearly empty indicator can send Newton to an unsupported state
        cfg = SchemeConfig(theta=setup.theta, gamma=1.0, policy=SubareaPolicy.all(), eps_u=1e-4,
                           max_iter=20000)
        start, _ = setup.engine.run(cfg, start)
    try:
        state = solve_penalty_equation(setup.engine, start)
    except SolverError as exc:
        raise OracleError(f"penalty equation solve failed: {exc}") from exc
    cfg = SchemeConfig(theta=setup.theta, gamma=gamma, policy=SubareaPolicy.active(), eps_u=eps_u,
                       max_iter=1)
    state, report = setup.engine.run(cfg, state)
    if not report.converged:
        raise OracleError(f"solution is not a fixed point of the active-set scheme at eps_u={eps_u}: "
                          f"relative change {max(report.rel_change[-1]):.3e}")
    return state, report


def reference_oracle(spec, refine=4, theta_factor=0.25, eps_u=1e-8):
    """Solution at ``refine`` x the density and ``theta_factor`` x theta.

    ``theta`` is linear in ``c``, so the oracle scales ``c``; the initial
    guess then stays consistent with the smaller penalty.
    """
    fine = replace(spec, density=spec.density * refine, c=spec.c * theta_factor,
                   theta=None if spec.theta is None else spec.theta * theta_factor)
    setup = prepare(fine)
    state, report = solve_tight(setup, eps_u)
    s, sigma = stress_profile(setup, state)
    return Oracle(fine, setup.theta, s, sigma, normalized_stress(spec, sigma), report.iterations,
                  setup.pairs[0].trace_a.mass())


# ---------------------------------------------------------------------------
# studies

def write_csv(rows, path, fields=None):
    """Write row dicts with a fixed column order; creates parent directories."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fields = fields or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


GAMMA_FIELDS = ["scheme", "gamma", "iterations", "converged"]
BEST_FIELDS = ["scheme", "gamma_opt", "iterations"]
PENALTY_FIELDS = ["c", "density", "theta", "max_penetration", "l2_distance", "iterations", "converged"]
COMPARE_FIELDS = ["scheme", "gamma", "eps_u", "iterations", "converged"]


@dataclass
class GammaSweep:
    rows: list
    best: dict  # scheme -> (gamma_opt, iterations)

    def best_rows(self):
        return [{"scheme": k, "gamma_opt": g, "iterations": m} for k, (g, m) in self.best.items()]


def optimal_gamma(gammas, iterations, converged):
    """Median of the grid points attaining the fewest iterations among converged runs."""
    m = np.array([it if ok else np.inf for it, ok in zip(iterations, converged)], dtype=float)
    if not np.isfinite(m).any():
        return float("nan"), None
    best = m.min()
    ties = np.asarray(gammas)[m == best]
    return float(ties[(len(ties) - 1) // 2]), int(best)


def sweep_gamma(spec, schemes=None, gammas=None, setup=None, out=None):
    """Iteration count for every scheme and grid value of gamma."""
    setup = setup or prepare(spec)
    schemes = schemes or default_schemes(spec.b)
    gammas = np.asarray(gammas if gammas is not None else (spec.gammas or default_gamma_grid()))
    if np.any(gammas <= 0) or np.any(gammas >= 2):
        raise ConfigError("gamma grid must lie in (0, 2)")
    rows, best = [], {}
    for name, policy in schemes.items():
        its, oks = [], []
        for g in gammas:
            m, ok = _iterations(setup, policy, float(g))
            rows.append({"scheme": name, "gamma": float(g), "iterations": m, "converged": ok})
            its.append(m)
            oks.append(ok)
        best[name] = optimal_gamma(gammas, its, oks)
        log.info("%s: gamma_opt=%s iterations=%s", name, *best[name])
    result = GammaSweep(rows, best)
    if out:
        write_csv(rows, os.path.join(out, "sweep_gamma.csv"), GAMMA_FIELDS)
        write_csv(result.best_rows(), os.path.join(out, "gamma_opt.csv"), BEST_FIELDS)
    return result


def l2_distance(setup, sigma_norm, oracle):
    """``||sigma - sigma_oracle||_L2`` over the contact part.

    Both profiles are piecewise linear in ``s``; the coarse one is
    interpolated to the oracle nodes and the difference integrated with the
    oracle's trace mass, so oscillations between coarse nodes count.
    """
    s = setup.pairs[0].trace_a.s
    e = np.interp(oracle.s, s, sigma_norm) - oracle.sigma_norm
    return float(np.sqrt(e @ (oracle.mass @ e)))


def sweep_penalty(spec, cs, densities, gamma=0.9, oracle=None, max_iter=5000, out=None, policy=None):
    """Penetration and distance to the oracle for each ``(c, density)``.

    Penetration and distance describe the discrete penalty solution (see
    :func:`solve_tight`), not an unfinished iterate.  ``iterations`` counts
    the steps of ``policy`` (default: full Robin) from the bar-model guess
    to ``spec.eps_u``.  Full Robin is the default because the groove's upper
    body is held only through contact: an active set that empties during the
    iteration leaves it without support.  The oracle is shared: four times
    the largest density and a quarter of the smallest ``theta``.
    """
    cs, densities = list(cs), list(densities)
    if not cs or not densities:
        raise ConfigError("sweep_penalty needs non-empty c and density lists")
    policy = policy or SubareaPolicy.all()
    if oracle is None:
        base = replace(spec, density=max(densities), c=min(cs))
        oracle = reference_oracle(base)
    rows = []
    for n in densities:
        for c in cs:
            sub = replace(spec, density=n, c=c, theta=None)
            setup = prepare(sub)
            row = {"c": c, "density": n, "theta": setup.theta}
            state, _ = solve_tight(setup)
            _, sigma = stress_profile(setup, state)
            row.update(max_penetration=max_penetration(setup, state),
                       l2_distance=l2_distance(setup, normalized_stress(sub, sigma), oracle))
            cfg = SchemeConfig(theta=setup.theta, gamma=gamma, policy=policy, eps_u=sub.eps_u, max_iter=max_iter)
            try:
                start, steps = warm_start(setup) if policy.kind == "active" else (setup.initial, 0)
                _, report = setup.engine.run(cfg, start)
                row.update(iterations=steps + report.iterations, converged=report.converged)
            except (DivergenceError, SolverError):
                row.update(iterations=max_iter, converged=False)
            rows.append(row)
    if out:
        write_csv(rows, os.path.join(out, "sweep_penalty.csv"), PENALTY_FIELDS)
        write_csv(oracle.rows(), os.path.join(out, "oracle.csv"), ["s", "sigma", "sigma_norm"])
    return rows


def compare_schemes(spec, gammas, schemes=None, eps_list=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6), setup=None,
                    max_iter=1000, out=None):
    """Iterations versus stopping tolerance, each scheme at its own gamma.

    ``gammas`` maps scheme name to gamma (e.g. ``GammaSweep.best`` values).
    Returns ``(rows, summary)`` where the summary holds the slope and R^2 of
    iterations against ``-log10(eps_u)`` per scheme.
    """
    setup = setup or prepare(spec)
    schemes = schemes or default_schemes(spec.b)
    rows, summary = [], {}
    for name, policy in schemes.items():
        g = gammas[name][0] if isinstance(gammas[name], tuple) else gammas[name]
        if g is None or not np.isfinite(g):
            continue
        its = []
        for eps in eps_list:
            m, ok = _iterations(setup, policy, g, eps_u=eps, max_iter=max_iter)
            rows.append({"scheme": name, "gamma": g, "eps_u": eps, "iterations": m, "converged": ok})
            its.append(m)
        x = -np.log10(np.asarray(eps_list))
        A = np.column_stack([x, np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(A, np.asarray(its, dtype=float), rcond=None)
        res = np.asarray(its) - A @ coef
        tot = np.sum((np.asarray(its) - np.mean(its)) ** 2)
        summary[name] = {"slope": float(coef[0]), "r2": float(1 - res @ res / tot) if tot > 0 else 1.0}
    if out:
        write_csv(rows, os.path.join(out, "compare_schemes.csv"), COMPARE_FIELDS)
    return rows, summary


def rate_study(setup, policy, gamma, reference, eps_u=1e-9, max_iter=2000):
    """Energy-error history against ``reference`` and its tail fit."""
    _, report = run(setup, policy, gamma, eps_u=eps_u, max_iter=max_iter, reference=reference)
    return report, fit_rate(report.energy_error)
