"""Parallel penalty Robin-Robin iteration for multibody contact.

Each iteration solves, for every body independently,

    (K_a + X_a(psi)) u~ = F_a + X_a(psi) u^k + r_a(u^k)

where ``X_a(psi) = (1/theta) N^T M_psi N`` is the Robin term on the
body's contact parts and ``r_a`` the penalty load from the previous
iterate, then relaxes ``u^{k+1} = gamma u~ + (1 - gamma) u^k``.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .contact import SubareaPolicy, penalty_rhs, policy_weights
from .fem import SolverError, SPDFactor, assemble_load, assemble_stiffness

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    def __init__(self, iteration, message, report=None):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration
        self.report = report


class InsufficientHistory(ValueError):
    pass


@dataclass
class SchemeConfig:
    """Parameters of one run.

    ``policy`` is a :class:`SubareaPolicy` applied to every pair, or a dict
    ``pair_id -> SubareaPolicy``.  ``error_injection`` is ``(epsilon, seed)``.
    With ``check_stop=False`` the run always performs ``max_iter`` steps.
    """

    theta: float
    gamma: float
    policy: object = field(default_factory=SubareaPolicy.none)
    eps_u: float = 1e-3
    max_iter: int = 200
    error_injection: tuple | None = None
    divergence_window: int = 10
    check_stop: bool = True
    parallel: bool = False

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.eps_u <= 0:
            raise ValueError("eps_u must be positive")

    def policy_for(self, pair):
        if isinstance(self.policy, dict):
            return self.policy[pair.pair_id]
        return self.policy

    def stationary(self, pairs):
        return all(self.policy_for(p).stationary for p in pairs)


@dataclass
class IterationState:
    """Free-dof displacement of every body and its contact normal traces.

    ``un[a]`` concatenates the normal displacements of body ``a`` over the
    contact parts it belongs to, in pair order.
    """

    u: list
    un: list
    k: int = 0


def make_state(problems, pairs, u, k=0):
    u = [np.asarray(v, dtype=float) for v in u]
    un = [[] for _ in problems]
    for pair in pairs:
        a, b = pair.traces(u)
        un[pair.body_a].append(a)
        un[pair.body_b].append(b)
    un = [np.concatenate(v) if v else np.zeros(0) for v in un]
    return IterationState(u, un, k)


def zero_state(problems, pairs):
    return make_state(problems, pairs, [np.zeros(p.n_free) for p in problems])


@dataclass
class ConvergenceReport:
    iterations: int = 0
    converged: bool = False
    rel_change: list = field(default_factory=list)
    abs_change: list = field(default_factory=list)
    energy_error: list = field(default_factory=list)
    active_count: list = field(default_factory=list)
    monotone_violations: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    injected: list = field(default_factory=list)

    @property
    def final_change(self):
        return self.rel_change[-1] if self.rel_change else None

    def rows(self):
        """One dict per iteration ``k = 1..m``."""
        out = []
        for k, rc in enumerate(self.rel_change, start=1):
            row = {"k": k}
            for a, v in enumerate(rc):
                row[f"rel_change_{a}"] = v
            if len(self.energy_error) > k:
                row["energy_error"] = self.energy_error[k]
            for pid, n in self.active_count[k - 1].items():
                row[f"psi_active_{pid}"] = n
            out.append(row)
        return out

    def to_csv(self, path):
        rows = self.rows()
        if not rows:
            fields = ["k"]
        else:
            fields = list(rows[0])
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            w.writerows(rows)


def operators(problem):
    """Stiffness and load of a body, assembled once and cached on it."""
    ops = getattr(problem, "_ops", None)
    if ops is None:
        ops = (assemble_stiffness(problem), assemble_load(problem))
        problem._ops = ops
    return ops


class _Body:
    def __init__(self, index, problem, pairs):
        self.index = index
        self.problem = problem
        self.K, self.F = operators(problem)
        # (pair position, trace) for every contact part of this body
        self.sides = []
        for j, pair in enumerate(pairs):
            if pair.body_a == index:
                self.sides.append((j, pair.trace_a, False))
            if pair.body_b == index:
                self.sides.append((j, pair.trace_b, True))
        self._factors = {}

    def robin(self, psi, theta):
        X = sp.csr_matrix(self.K.shape)
        for j, tr, _ in self.sides:
            if psi[j].any():
                X = X + (tr.N.T @ tr.mass(psi[j]) @ tr.N) / theta
        return X.tocsr()

    def factor(self, psi, theta):
        key = b"".join(psi[j].astype(np.uint8).tobytes() for j, _, _ in self.sides)
        hit = self._factors.get(key)
        if hit is None:
            X = self.robin(psi, theta)
            hit = (X, SPDFactor(self.K + X))
            if len(self._factors) > 64:
                self._factors.clear()
            self._factors[key] = hit
        return hit


def _psi(pairs, config, state):
    out = []
    for pair in pairs:
        un_a, un_b = pair.traces(state.u)
        out.append(policy_weights(config.policy_for(pair), pair, un_a, un_b))
    return out


def _g_matrices(bodies, psi, theta):
    return [b.K + b.robin(psi, theta) for b in bodies]


def _g_norm(G, du):
    return float(np.sqrt(max(sum(float(d @ (g @ d)) for g, d in zip(G, du)), 0.0)))


def energy_norm(problems, pairs, config, u, v, at=None):
    """``||u - v||_G`` with ``G = A + X(psi)`` summed over bodies.

    Stationary policies fix ``psi``.  For the active-set policy ``psi`` is
    taken at the state ``at`` (default: ``v``); a run measures against the
    indicator of its initial iterate.
    """
    u = u.u if isinstance(u, IterationState) else u
    v = v.u if isinstance(v, IterationState) else v
    if len(u) != len(v) or any(np.shape(a) != np.shape(b) for a, b in zip(u, v)):
        raise ValueError("states have different shapes")
    bodies = [_Body(i, p, pairs) for i, p in enumerate(problems)]
    ref = at if at is not None else make_state(problems, pairs, v)
    psi = _psi(pairs, config, ref)
    G = _g_matrices(bodies, psi, config.theta)
    return _g_norm(G, [np.asarray(a) - np.asarray(b) for a, b in zip(u, v)])


def relative_changes(prev, nxt):
    out = []
    if len(prev.un) != len(nxt.un):
        raise ValueError("states have different numbers of bodies")
    for a, b in zip(prev.un, nxt.un):
        if a.shape != b.shape:
            raise ValueError("trace shapes differ")
        num = np.linalg.norm(b - a)
        den = np.linalg.norm(b)
        if den == 0.0:
            out.append(0.0 if num == 0.0 else np.inf)
        else:
            out.append(num / den)
    return out


def stopping_criterion(prev, nxt, eps_u):
    """True when the relative change of every body's normal trace is ``<= eps_u``."""
    return all(r <= eps_u for r in relative_changes(prev, nxt))


def run_scheme(problems, pairs, config, initial, reference=None, record_traces=False):
    """Iterate until the stopping criterion holds or ``max_iter`` is reached.

    ``reference`` (an :class:`IterationState`) enables the energy-error
    history.  Returns ``(state, report)``.  Raises :class:`DivergenceError`
    on non-finite iterates or on ``divergence_window`` consecutive increases
    of the trace change.
    """
    bodies = [_Body(i, p, pairs) for i, p in enumerate(problems)]
    theta, gamma = config.theta, config.gamma
    stationary = config.stationary(pairs)
    state = initial
    report = ConvergenceReport()

    psi = _psi(pairs, config, state)
    G = None
    if reference is not None or config.error_injection:
        G = _g_matrices(bodies, psi, theta)
    if reference is not None:
        report.energy_error.append(_g_norm(G, [a - b for a, b in zip(state.u, reference.u)]))
    rng = None
    eps_inj = 0.0
    if config.error_injection:
        eps_inj, seed = config.error_injection
        if eps_inj > 0:
            rng = np.random.default_rng(seed)
    if record_traces:
        report.traces.append([pair.traces(state.u) for pair in pairs])

    pool = ThreadPoolExecutor(len(bodies)) if config.parallel and len(bodies) > 1 else None
    growth = 0
    try:
        for k in range(config.max_iter):
            if k > 0 and not stationary:
                new_psi = _psi(pairs, config, state)
                for p_old, p_new in zip(psi, new_psi):
                    if np.any(p_new > p_old):
                        report.monotone_violations.append(k)
                        break
                psi = new_psi
            report.active_count.append({pair.pair_id: int(pair.trace_a.integrate(w).astype(bool).sum())
                                        for pair, w in zip(pairs, psi)})

            loads = [np.zeros(b.problem.n_free) for b in bodies]
            for pair in pairs:
                un_a, un_b = pair.traces(state.u)
                r_a, r_b = penalty_rhs(pair, un_a, un_b, theta)
                loads[pair.body_a] += pair.trace_a.N.T @ r_a
                loads[pair.body_b] += pair.trace_b.N.T @ r_b

            def solve(body):
                X, fac = body.factor(psi, theta)
                u = state.u[body.index]
                rhs = body.F + X @ u + loads[body.index]
                return fac.solve(rhs)

            tilde = list(pool.map(solve, bodies)) if pool else [solve(b) for b in bodies]
            u_new = [gamma * t + (1.0 - gamma) * u for t, u in zip(tilde, state.u)]
            if rng is not None:
                e = [rng.standard_normal(len(v)) for v in u_new]
                scale = eps_inj / _g_norm(G, e)
                e = [scale * v for v in e]
                u_new = [v + w for v, w in zip(u_new, e)]
                report.injected.append(eps_inj)
            if not all(np.all(np.isfinite(v)) for v in u_new):
                report.iterations = k + 1
                raise DivergenceError(k + 1, "non-finite iterate", report)

            nxt = make_state(problems, pairs, u_new, k + 1)
            rel = relative_changes(state, nxt)
            ab = float(np.sqrt(sum(np.sum((b - a) ** 2) for a, b in zip(state.un, nxt.un))))
            report.rel_change.append(rel)
            report.abs_change.append(ab)
            if reference is not None:
                report.energy_error.append(_g_norm(G, [a - b for a, b in zip(u_new, reference.u)]))
            if record_traces:
                report.traces.append([pair.traces(u_new) for pair in pairs])
            report.iterations = k + 1
            state = nxt

            if config.check_stop and all(r <= config.eps_u for r in rel):
                report.converged = True
                break
            if len(report.abs_change) > 1 and ab > report.abs_change[-2]:
                growth += 1
                if growth >= config.divergence_window and rng is None:
                    raise DivergenceError(k + 1, f"trace change grew for {growth} consecutive iterations",
                                          report)
            else:
                growth = 0
    finally:
        if pool:
            pool.shutdown()
    return state, report


class TraceEngine:
    """Condensed form of :func:`run_scheme` that iterates on contact traces only.

    The trace iterates obey a closed recursion, because a body's solve only
    sees the previous iterate through its contact traces.  Every body is
    factored once with the Robin term on all its contact parts (``A0``);
    other indicators are low-rank updates on the trace dofs handled by the
    Woodbury identity.  Full displacements are rebuilt exactly as
    ``u^k = a_k u^0 + b_k A0^{-1} F + Z B_k`` with trace-sized ``B_k``.
    """

    def __init__(self, problems, pairs, theta):
        self.problems, self.pairs, self.theta = problems, pairs, float(theta)
        self.bodies = [_Body(i, p, pairs) for i, p in enumerate(problems)]
        ones = [np.ones_like(p.trace_a.qp_weight) for p in pairs]
        self._base = []
        for body in self.bodies:
            if not body.sides:
                X = sp.csr_matrix(body.K.shape)
                fac = SPDFactor(body.K)
                N = sp.csr_matrix((0, body.K.shape[0]))
                c = np.zeros(0)
            else:
                X = body.robin(ones, self.theta)
                fac = SPDFactor(body.K + X)
                N = sp.vstack([tr.N for _, tr, _ in body.sides]).tocsr()
                c = np.concatenate([tr.offset for _, tr, _ in body.sides])
            y0 = fac.solve(body.F)
            Z = fac.solve(N.T.toarray()) if N.shape[0] else np.zeros((body.K.shape[0], 0))
            Z = Z.reshape(body.K.shape[0], N.shape[0])
            S = N @ Z
            S = 0.5 * (S + S.T)
            M1 = [tr.mass(None).toarray() / self.theta for _, tr, _ in body.sides]
            self._base.append(dict(fac=fac, N=N, c=c, y0=y0, Z=Z, S=S, s0=N @ y0, M1=M1))
        self._cache = [{} for _ in self.bodies]

    def _slices(self, body):
        out, start = [], 0
        for _, tr, _ in body.sides:
            out.append(slice(start, start + tr.n))
            start += tr.n
        return out

    def _update(self, i, psi):
        """``(Mpsi, C)`` for body ``i``: Robin block and Woodbury correction."""
        body = self.bodies[i]
        key = b"".join(psi[j].astype(np.uint8).tobytes() for j, _, _ in body.sides)
        hit = self._cache[i].get(key)
        if hit is not None:
            return hit
        base = self._base[i]
        n = base["N"].shape[0]
        Mpsi = np.zeros((n, n))
        for sl, (j, tr, _), M1 in zip(self._slices(body), body.sides, base["M1"]):
            Mpsi[sl, sl] = tr.mass(psi[j]).toarray() / self.theta
        W = Mpsi - sp.block_diag(base["M1"]).toarray() if n else Mpsi
        if n:
            I_SW = np.eye(n) + base["S"] @ W
            if np.linalg.cond(I_SW) > 1e13:
                raise SolverError(f"body {i}: subdomain matrix is singular for this subarea indicator")
            C = W @ np.linalg.inv(I_SW)
        else:
            C = W
        if len(self._cache[i]) > 256:
            self._cache[i].clear()
        self._cache[i][key] = hit = (Mpsi, C)
        return hit

    def full(self, i, coeffs):
        """Full free-dof vector of body ``i`` from ``(a, b, B)``."""
        a, b, B, u0 = coeffs
        base = self._base[i]
        return a * u0 + b * base["y0"] + base["Z"] @ B

    def run(self, config, initial, reference=None, record_traces=False):
        theta, gamma = self.theta, config.gamma
        if abs(config.theta - theta) > 1e-15 * theta:
            raise ValueError("engine was built for a different theta")
        if config.error_injection:
            raise ValueError("error injection needs the direct engine")
        pairs, bodies = self.pairs, self.bodies
        stationary = config.stationary(pairs)
        report = ConvergenceReport()

        # per body: stacked trace of the current iterate and the rebuild coefficients
        un = [self._base[i]["N"] @ initial.u[i] + self._base[i]["c"] for i in range(len(bodies))]
        coeffs = [[1.0, 0.0, np.zeros(len(c)), initial.u[i]] for i, c in enumerate(un)]
        slices = [self._slices(b) for b in bodies]

        def side_traces(vals):
            out = []
            for pair in pairs:
                ta = tb = None
                for i, b in enumerate(bodies):
                    for sl, (j, _, is_b) in zip(slices[i], b.sides):
                        if j == pairs.index(pair):
                            if is_b:
                                tb = vals[i][sl]
                            else:
                                ta = vals[i][sl]
                out.append((ta, tb))
            return out

        def state_of(vals, k):
            return IterationState(None, [v.copy() for v in vals], k)

        def psi_of(tr):
            return [policy_weights(config.policy_for(p), p, a, b) for p, (a, b) in zip(pairs, tr)]

        tr = side_traces(un)
        psi = psi_of(tr)
        G = None
        if reference is not None:
            G = _g_matrices(bodies, psi, theta)
            report.energy_error.append(_g_norm(G, [a - b for a, b in zip(initial.u, reference.u)]))
        if record_traces:
            report.traces.append([(a.copy(), b.copy()) for a, b in tr])
        growth = 0
        state = state_of(un, 0)
        for k in range(config.max_iter):
            if k > 0 and not stationary:
                new_psi = psi_of(tr)
                for p_old, p_new in zip(psi, new_psi):
                    if np.any(p_new > p_old):
                        report.monotone_violations.append(k)
                        break
                psi = new_psi
            report.active_count.append({pair.pair_id: int(pair.trace_a.integrate(w).astype(bool).sum())
                                        for pair, w in zip(pairs, psi)})
            loads = [np.zeros(len(v)) for v in un]
            for j, (pair, (a, b)) in enumerate(zip(pairs, tr)):
                r_a, r_b = penalty_rhs(pair, a, b, theta)
                for i, body in enumerate(bodies):
                    for sl, (jj, _, is_b) in zip(slices[i], body.sides):
                        if jj == j:
                            loads[i][sl] += r_b if is_b else r_a
            new_un = []
            for i in range(len(bodies)):
                base = self._base[i]
                Mpsi, C = self._update(i, psi)
                L = Mpsi @ (un[i] - base["c"]) + loads[i]
                beta = L - C @ (base["s0"] + base["S"] @ L)
                tilde_n = base["s0"] + base["S"] @ beta + base["c"]
                new_un.append(gamma * tilde_n + (1.0 - gamma) * un[i])
                a, b, B, u0 = coeffs[i]
                coeffs[i] = [(1.0 - gamma) * a, (1.0 - gamma) * b + gamma, (1.0 - gamma) * B + gamma * beta, u0]
            if not all(np.all(np.isfinite(v)) for v in new_un):
                report.iterations = k + 1
                raise DivergenceError(k + 1, "non-finite iterate", report)
            nxt = state_of(new_un, k + 1)
            rel = relative_changes(state, nxt)
            ab = float(np.sqrt(sum(np.sum((b - a) ** 2) for a, b in zip(un, new_un))))
            report.rel_change.append(rel)
            report.abs_change.append(ab)
            un, state = new_un, nxt
            tr = side_traces(un)
            if reference is not None:
                u_full = [self.full(i, c) for i, c in enumerate(coeffs)]
                report.energy_error.append(_g_norm(G, [a - b for a, b in zip(u_full, reference.u)]))
            if record_traces:
                report.traces.append([(a.copy(), b.copy()) for a, b in tr])
            report.iterations = k + 1
            if config.check_stop and all(r <= config.eps_u for r in rel):
                report.converged = True
                break
            if len(report.abs_change) > 1 and ab > report.abs_change[-2]:
                growth += 1
                if growth >= config.divergence_window:
                    raise DivergenceError(k + 1, f"trace change grew for {growth} consecutive iterations",
                                          report)
            else:
                growth = 0
        u_full = [self.full(i, c) for i, c in enumerate(coeffs)]
        return make_state(self.problems, pairs, u_full, report.iterations), report


def solve_penalty_equation(engine, initial, max_iter=100):
    """Solve ``K u = F + r(u)`` directly on the condensed contact traces.

    ``r`` is the penalty load, linear once the penetration indicator at the
    quadrature points is fixed, so a semismooth Newton iteration that
    re-solves for the traces with the current indicator terminates when the
    indicator repeats.  Used to produce reference solutions; it is not a
    decomposition scheme.
    """
    theta, pairs, bodies = engine.theta, engine.pairs, engine.bodies
    starts = np.cumsum([0] + [len(engine._base[i]["c"]) for i in range(len(bodies))])
    n = int(starts[-1])
    where = {}
    for i, body in enumerate(bodies):
        for sl, (j, _, is_b) in zip(engine._slices(body), body.sides):
            where[(j, is_b)] = slice(starts[i] + sl.start, starts[i] + sl.stop)
    S = np.zeros((n, n))
    SM1 = np.zeros((n, n))
    rhs0 = np.zeros(n)
    for i in range(len(bodies)):
        base, blk = engine._base[i], slice(starts[i], starts[i + 1])
        M1 = sp.block_diag(base["M1"]).toarray() if base["M1"] else np.zeros((0, 0))
        S[blk, blk] = base["S"]
        SM1[blk, blk] = base["S"] @ M1
        rhs0[blk] = base["c"] + base["s0"] - base["S"] @ (M1 @ base["c"])
    un = np.concatenate([engine._base[i]["N"] @ initial.u[i] + engine._base[i]["c"]
                         for i in range(len(bodies))])
    seen, prev = set(), None
    for it in range(max_iter):
        # r_all = R0 + Rlin @ un for the current indicator
        R0 = np.zeros(n)
        Rlin = np.zeros((n, n))
        key = []
        for j, pair in enumerate(pairs):
            sa, sb = where[(j, False)], where[(j, True)]
            chi = (pair.residual_qp(un[sa], un[sb]) < 0.0).astype(float)
            key.append(chi.tobytes())
            Mc = pair.trace_a.mass(chi).toarray() / theta
            P = np.zeros((pair.n, pair.n))
            P[np.arange(pair.n), pair.pairing] = 1.0
            ra0, ra_a, ra_b = Mc @ pair.gap, -Mc, -Mc @ P
            R0[sa] += ra0
            R0[sb] += P.T @ ra0
            Rlin[sa, sa] += ra_a
            Rlin[sa, sb] += ra_b
            Rlin[sb, sa] += P.T @ ra_a
            Rlin[sb, sb] += P.T @ ra_b
        key = b"".join(key)
        if key == prev:
            break
        if key in seen:
            raise SolverError("penetration indicator cycles in the Newton iteration")
        seen.add(key)
        prev = key
        J = np.eye(n) - SM1 - S @ Rlin
        if np.linalg.cond(J) > 1e13:
            raise SolverError("singular Newton matrix: a body is left without support")
        un = np.linalg.solve(J, rhs0 + S @ R0)
    else:
        raise SolverError(f"penetration indicator did not settle in {max_iter} Newton steps")
    u = []
    for i, body in enumerate(bodies):
        base, blk = engine._base[i], slice(starts[i], starts[i + 1])
        M1 = sp.block_diag(base["M1"]).toarray() if base["M1"] else np.zeros((0, 0))
        L = M1 @ (un[blk] - base["c"]) + R0[blk] + Rlin[blk] @ un
        u.append(base["y0"] + base["Z"] @ L)
    return make_state(engine.problems, pairs, u, it)


def neumann_neumann(problems, pairs, config, initial, **kw):
    return run_scheme(problems, pairs, replace(config, policy=SubareaPolicy.none()), initial, **kw)


def full_robin(problems, pairs, config, initial, **kw):
    return run_scheme(problems, pairs, replace(config, policy=SubareaPolicy.all()), initial, **kw)


def dirichlet_dirichlet_active_set(problems, pairs, config, initial, **kw):
    return run_scheme(problems, pairs, replace(config, policy=SubareaPolicy.active()), initial, **kw)


def run_with_injected_errors(problems, pairs, config, initial, epsilon, seed, reference=None):
    """Run with a perturbation of energy norm ``epsilon`` added after each relaxation.

    Perturbations are uniformly distributed directions in the free dofs of
    all bodies.  ``epsilon = 0`` reproduces :func:`run_scheme` exactly.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    cfg = replace(config, error_injection=(float(epsilon), seed) if epsilon > 0 else None)
    return run_scheme(problems, pairs, cfg, initial, reference=reference)


def solve_reference(problems, pairs, theta, initial, gamma=0.5, eps_u=1e-10, max_iter=5000):
    """Tightly converged solution of the discrete penalty problem (active-set scheme)."""
    cfg = SchemeConfig(theta=theta, gamma=gamma, policy=SubareaPolicy.active(),
                       eps_u=eps_u, max_iter=max_iter)
    state, report = run_scheme(problems, pairs, cfg, initial)
    if not report.converged:
        raise DivergenceError(report.iterations, "reference solve did not converge", report)
    return state


@dataclass
class RateFit:
    q: float
    r2: float
    n: int


def fit_rate(errors):
    """Least-squares fit of ``log(error)`` vs ``k`` over the last half of ``errors``."""
    e = np.asarray(errors, dtype=float)
    if len(e) < 4:
        raise InsufficientHistory("need at least 4 recorded errors")
    k = np.arange(len(e))
    start = len(e) // 2
    k, e = k[start:], e[start:]
    ok = e > 0
    k, e = k[ok], e[ok]
    if len(e) < 2:
        raise InsufficientHistory("tail has fewer than 2 positive errors")
    y = np.log(e)
    A = np.column_stack([k, np.ones_like(k, dtype=float)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(np.exp(coef[0])), r2, len(e))


def estimate_rate(report):
    """Empirical linear rate ``q`` from the energy-error history of a report."""
    errors = report.energy_error if isinstance(report, ConvergenceReport) else report
    return fit_rate(errors).q
