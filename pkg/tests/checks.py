"""Property checks shared by the unit tests and the acceptance run.

Each function returns a measured quantity so callers can both assert on it
and print it.
"""

from dataclasses import replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from penaltydd import experiments as ex
from penaltydd.contact import SubareaPolicy, neg, penalty_rhs, policy_weights
from penaltydd.ddm import SchemeConfig, make_state, run_scheme, solve_penalty_equation
from penaltydd.fem import SubdomainProblem, assemble_contact_edge_mass, assemble_load, assemble_stiffness, solve_spd
from penaltydd.material import Material
from penaltydd.mesh import BoundaryTag, generate_rect_mesh, tag_boundary, tag_remaining


def scalar_lemma_violations(rng, n=10_000, m=7):
    """Counts of samples violating each scalar lemma (all should be 0)."""
    y, z = 10 * rng.standard_normal(n), 10 * rng.standard_normal(n)
    c = rng.standard_normal((n, m))
    return {
        "sum_square": int(np.sum(c.sum(axis=1) ** 2 > m * (c ** 2).sum(axis=1) * (1 + 1e-12))),
        "monotone_neg": int(np.sum((neg(y - z) - neg(y)) * z > 0.0)),
        "lipschitz_neg": int(np.sum(np.abs(neg(y) - neg(z)) > np.abs(y - z))),
    }


def _block(order, material, dirichlet=None, clamp_all=False):
    m = generate_rect_mesh((0.0, 0.0), 1.5, 1.0, 3, 3, order)
    sides = (((0, 0), (1.5, 0)), ((1.5, 0), (1.5, 1)), ((0, 1), (1.5, 1)), ((0, 0), (0, 1)))
    for seg in sides if clamp_all else sides[:1]:
        m = tag_boundary(m, seg, BoundaryTag.dirichlet())
    m = tag_remaining(m, BoundaryTag.neumann())
    return SubdomainProblem(m, material, dirichlet=dirichlet or {})


def stiffness_defects(order):
    """``(asymmetry, min eigenvalue after elimination, rigid-mode residual)``."""
    mat = Material.transversely_isotropic(2.0, 1.0, 0.3, 0.3, 0.4)
    p = _block(order, mat)
    K = assemble_stiffness(p)
    asym = float(abs(K - K.T).max())
    lam = float(np.linalg.eigvalsh(K.toarray()).min())
    Kf = assemble_stiffness(p, eliminate=False)
    x, y = p.mesh.nodes[:, 0], p.mesh.nodes[:, 1]
    modes = [np.column_stack([np.ones_like(x), 0 * x]), np.column_stack([0 * x, np.ones_like(x)]),
             np.column_stack([-y, x])]
    rigid = max(float(abs(Kf @ v.ravel()).max()) for v in modes) / float(abs(Kf).max())
    return asym, lam, rigid


def galerkin_error(order, coef):
    """Nodal error of the FE solution for linear boundary data (exact: 0)."""
    a = np.asarray(coef, dtype=float)

    def field(x):
        return np.column_stack([a[0] + a[1] * x[:, 0] + a[2] * x[:, 1], a[3] + a[4] * x[:, 0] + a[5] * x[:, 1]])

    p = _block(order, Material.isotropic(2.0, 0.3), dirichlet={"fixed": field}, clamp_all=True)
    u = solve_spd(assemble_stiffness(p), assemble_load(p))
    return float(np.abs(p.nodal(u) - field(p.mesh.nodes)).max())


def perturbed_state(setup, rng, scale=0.05):
    u = [v + scale * rng.standard_normal(len(v)) for v in setup.initial.u]
    return make_state(setup.problems, setup.pairs, u)


def coupled_vs_decomposed(setup, policy, state):
    """Max difference between one decomposed step and the monolithic coupled solve.

    The coupled system stacks every body's ``K + X(psi)`` block-diagonally;
    its right-hand side carries ``F + X(psi) u^k + r(u^k)`` for all bodies at
    once.  The Robin terms are assembled independently of the engine.
    """
    problems, pairs, theta = setup.problems, setup.pairs, setup.theta
    cfg = SchemeConfig(theta=theta, gamma=1.0, policy=policy, max_iter=1, check_stop=False)
    nxt, _ = run_scheme(problems, pairs, cfg, state)

    blocks, rhs = [], []
    for i, p in enumerate(problems):
        K, F = assemble_stiffness(p), assemble_load(p)
        X = sp.csr_matrix(K.shape)
        f = F.copy()
        for pair in pairs:
            un_a, un_b = pair.traces(state.u)
            psi = policy_weights(policy, pair, un_a, un_b)
            r_a, r_b = penalty_rhs(pair, un_a, un_b, theta)
            if pair.body_a == i:
                X = X + assemble_contact_edge_mass(p, pair.pair_id, psi, theta)
                f += p.trace(pair.pair_id).N.T @ r_a
            if pair.body_b == i:
                # edge k of trace_b faces edge k of trace_a, so the point values carry over
                X = X + assemble_contact_edge_mass(p, pair.pair_id, psi, theta)
                f += p.trace(pair.pair_id).N.T @ r_b
        blocks.append(K + X)
        rhs.append(f + X @ state.u[i])
    big = sp.block_diag(blocks).tocsc()
    u = spla.spsolve(big, np.concatenate(rhs))
    split = np.cumsum([p.n_free for p in problems])[:-1]
    return max(float(np.abs(a - b).max()) for a, b in zip(np.split(u, split), nxt.u))


def fixed_point_defect(setup, policies, gammas):
    """Largest change of one scheme step started at the discrete penalty solution."""
    sol = solve_penalty_equation(setup.engine, setup.initial)
    worst = 0.0
    scale = max(float(np.abs(v).max()) for v in sol.u)
    for policy in policies:
        for gamma in gammas:
            cfg = SchemeConfig(theta=setup.theta, gamma=gamma, policy=policy, max_iter=1, check_stop=False)
            nxt, _ = run_scheme(setup.problems, setup.pairs, cfg, sol)
            worst = max(worst, max(float(np.abs(a - b).max()) for a, b in zip(nxt.u, sol.u)) / scale)
    return worst


def theta_refinement(spec, factors=(1.0, 0.25, 1.0 / 16)):
    """Converged max penetration for ``theta0 * f`` on a fixed mesh."""
    out = []
    for f in factors:
        setup = ex.prepare(replace(spec, c=spec.c * f, theta=None))
        state, _ = ex.solve_tight(setup, eps_u=1e-10)
        out.append((setup.theta, ex.max_penetration(setup, state)))
    return out


ROBIN_POLICIES = (SubareaPolicy.none(), SubareaPolicy.segment(0.0, 1.0), SubareaPolicy.all(), SubareaPolicy.active())
