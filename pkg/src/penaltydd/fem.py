"""Finite element operators for one elastic body.

Displacement dofs are numbered ``2*node + component``.  Dirichlet dofs are
eliminated; every operator returned here acts on the free dofs only.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .material import constitutive_matrix
from .mesh import CONTACT, DIRICHLET, NEUMANN, MeshError, contact_edge_indices, contact_trace_nodes


class ConfigError(ValueError):
    """Loads or boundary data inconsistent with the mesh tags."""


class SolverError(RuntimeError):
    """Linear solve failed (singular or indefinite system)."""


# symmetric triangle rules on the reference triangle (0,0),(1,0),(0,1); weights sum to 1/2
_TRI3 = (np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]]), np.full(3, 1 / 6))


def _tri7():
    a1, b1 = 0.059715871789770, 0.470142064105115
    a2, b2 = 0.797426985353087, 0.101286507323456
    pts = [(1 / 3, 1 / 3),
           (b1, b1), (a1, b1), (b1, a1),
           (b2, b2), (a2, b2), (b2, a2)]
    w = [0.225, *[0.132394152788506] * 3, *[0.125939180544827] * 3]
    return np.array(pts), 0.5 * np.array(w)


_TRI7 = _tri7()


def triangle_rule(order):
    return _TRI3 if order == 1 else _TRI7


def edge_rule(order):
    """Gauss points on ``[-1, 1]``: 2 for linear traces, 3 for quadratic."""
    return np.polynomial.legendre.leggauss(order + 1)


def shape_triangle(order, xi, eta):
    """Shape values ``(n,)`` and reference gradients ``(n, 2)`` at one point."""
    l1, l2, l3 = 1.0 - xi - eta, xi, eta
    if order == 1:
        N = np.array([l1, l2, l3])
        dN = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return N, dN
    N = np.array([l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), l3 * (2 * l3 - 1),
                  4 * l1 * l2, 4 * l2 * l3, 4 * l3 * l1])
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    dN = np.array([
        (4 * l1 - 1) * dl[0],
        (4 * l2 - 1) * dl[1],
        (4 * l3 - 1) * dl[2],
        4 * (l1 * dl[1] + l2 * dl[0]),
        4 * (l2 * dl[2] + l3 * dl[1]),
        4 * (l3 * dl[0] + l1 * dl[2]),
    ])
    return N, dN


def shape_edge(order, t):
    """1D shape functions on ``[-1, 1]`` ordered (start, end[, mid])."""
    t = np.asarray(t, dtype=float)
    if order == 1:
        return np.stack([(1 - t) / 2, (1 + t) / 2], axis=-1)
    return np.stack([t * (t - 1) / 2, t * (t + 1) / 2, 1 - t * t], axis=-1)


def _as_field(value, x):
    """Evaluate a constant 2-vector or callable at points ``x`` -> ``(n, 2)``."""
    if callable(value):
        out = np.asarray(value(x), dtype=float)
    else:
        out = np.broadcast_to(np.asarray(value, dtype=float), (len(x), 2))
    return np.broadcast_to(out, (len(x), 2))


@dataclass
class SubdomainProblem:
    """One body: mesh, material and boundary data.

    ``dirichlet`` and ``tractions`` map tag names to a constant 2-vector or a
    callable ``x -> (n, 2)``.  Dirichlet parts without an entry are clamped.
    """

    mesh: object
    material: object
    body_force: object = None
    tractions: dict = field(default_factory=dict)
    dirichlet: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        mesh = self.mesh
        mesh.validate()
        if mesh.untagged_edges():
            raise ConfigError(f"{len(mesh.untagged_edges())} boundary edges carry no tag")
        if not mesh.edges_with(lambda t: t.kind == DIRICHLET):
            raise ConfigError("a body needs a non-empty Dirichlet part")
        names = {t.name for t in mesh.tags() if t.kind == NEUMANN}
        for key in self.tractions:
            if key not in names:
                raise ConfigError(f"traction given for {key!r}, which is not a Neumann part")
        dnames = {t.name for t in mesh.tags() if t.kind == DIRICHLET}
        for key in self.dirichlet:
            if key not in dnames:
                raise ConfigError(f"displacement given for {key!r}, which is not a Dirichlet part")

        ndof = 2 * mesh.n_nodes
        fixed = np.zeros(ndof, dtype=bool)
        values = np.zeros(ndof)
        for i in mesh.edges_with(lambda t: t.kind == DIRICHLET):
            tag = mesh.edge_tags[i]
            ids = mesh.edges[i]
            val = _as_field(self.dirichlet.get(tag.name, (0.0, 0.0)), mesh.nodes[ids])
            for c in tag.components:
                fixed[2 * ids + c] = True
                values[2 * ids + c] = val[:, c]
        self.ndof = ndof
        self.fixed = np.flatnonzero(fixed)
        self.free = np.flatnonzero(~fixed)
        self.prescribed = values
        self.free_index = np.full(ndof, -1, dtype=np.int64)
        self.free_index[self.free] = np.arange(len(self.free))
        self.D = constitutive_matrix(self.material)
        self._traces = {}

    @property
    def n_free(self):
        return len(self.free)

    def to_full(self, u_free):
        u = self.prescribed.copy()
        u[self.free] = u_free
        return u

    def nodal(self, u_free):
        """Displacements as ``(n_nodes, 2)``."""
        return self.to_full(u_free).reshape(-1, 2)

    def trace(self, pair_id):
        key = str(pair_id)
        if key not in self._traces:
            self._traces[key] = ContactTrace(self, key)
        return self._traces[key]


def element_stiffness(coords, D, order):
    """Element matrices for a stack of triangles ``coords (ne, 3, 2)``."""
    pts, wts = triangle_rule(order)
    ne = len(coords)
    nn = 3 if order == 1 else 6
    J = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if np.any(det <= 0.0):
        raise MeshError("element with non-positive Jacobian")
    Jinv = np.linalg.inv(J)
    Ke = np.zeros((ne, 2 * nn, 2 * nn))
    for (xi, eta), w in zip(pts, wts):
        _, dN = shape_triangle(order, xi, eta)
        g = np.einsum("ak,ekj->eaj", dN, Jinv)
        B = np.zeros((ne, 3, 2 * nn))
        B[:, 0, 0::2] = g[:, :, 0]
        B[:, 1, 1::2] = g[:, :, 1]
        B[:, 2, 0::2] = g[:, :, 1]
        B[:, 2, 1::2] = g[:, :, 0]
        Ke += (w * det)[:, None, None] * np.einsum("eia,ij,ejb->eab", B, D, B)
    return Ke


def _element_dofs(elements):
    return np.stack([2 * elements, 2 * elements + 1], axis=2).reshape(len(elements), -1)


def assemble_stiffness(problem, eliminate=True):
    """Sparse stiffness of ``a_alpha``; restricted to free dofs by default."""
    mesh = problem.mesh
    coords = mesh.nodes[mesh.elements[:, :3]]
    Ke = element_stiffness(coords, problem.D, mesh.order)
    dofs = _element_dofs(mesh.elements)
    rows = np.repeat(dofs, dofs.shape[1], axis=1).ravel()
    cols = np.tile(dofs, (1, dofs.shape[1])).ravel()
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(problem.ndof, problem.ndof)).tocsr()
    K = 0.5 * (K + K.T)
    K.sum_duplicates()
    if not eliminate:
        return K
    return K[problem.free][:, problem.free].tocsr()


def _edge_geometry(mesh, idx, order):
    ids = mesh.edges[idx]
    a, b = mesh.nodes[ids[:, 0]], mesh.nodes[ids[:, 1]]
    length = np.hypot(*(b - a).T)
    return ids, a, b, length


def assemble_load(problem):
    """Free-dof load vector of ``l_alpha``.

    Body force and Neumann tractions are integrated exactly for constant
    data; prescribed Dirichlet displacements enter as the usual lifting
    term ``-K_fd @ u_d``.
    """
    mesh = problem.mesh
    F = np.zeros(problem.ndof)
    if problem.body_force is not None:
        pts, wts = triangle_rule(mesh.order)
        corners = mesh.nodes[mesh.elements[:, :3]]
        J = np.stack([corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]], axis=2)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        dofs = _element_dofs(mesh.elements)
        for (xi, eta), w in zip(pts, wts):
            N, _ = shape_triangle(mesh.order, xi, eta)
            x = corners[:, 0] + J @ np.array([xi, eta])
            f = _as_field(problem.body_force, x)
            contrib = (w * det)[:, None, None] * N[None, :, None] * f[:, None, :]
            np.add.at(F, dofs.ravel(), contrib.reshape(len(dofs), -1).ravel())

    t, w = edge_rule(mesh.order)
    S = shape_edge(mesh.order, t)
    for name, value in problem.tractions.items():
        idx = mesh.edges_with(lambda tag: tag.kind == NEUMANN and tag.name == name)
        ids, a, b, length = _edge_geometry(mesh, idx, mesh.order)
        for q in range(len(t)):
            x = a + (b - a) * (1 + t[q]) / 2
            p = _as_field(value, x)
            for k in range(ids.shape[1]):
                for c in range(2):
                    np.add.at(F, 2 * ids[:, k] + c, w[q] * length / 2 * S[q, k] * p[:, c])

    if problem.prescribed.any():
        K = assemble_stiffness(problem, eliminate=False)
        F -= K @ problem.prescribed
    return F[problem.free]


class ContactTrace:
    """Normal-displacement trace of one body on one contact part.

    ``nodes`` are sorted by the arclength coordinate ``s``; ``edges`` hold
    indices into ``nodes`` ordered (start, end[, mid]).  ``N`` maps free dofs
    to the per-node outward normal displacement; ``offset`` holds the part
    coming from prescribed Dirichlet values.
    """

    def __init__(self, problem, pair_id):
        mesh = problem.mesh
        self.pair_id = pair_id
        self.order = mesh.order
        idx = contact_edge_indices(mesh, pair_id)
        self.nodes, self.s = contact_trace_nodes(mesh, pair_id)
        self.x = mesh.nodes[self.nodes]
        normals = np.array([mesh.edge_normal(i) for i in idx])
        if np.abs(normals - normals[0]).max() > 1e-9:
            raise MeshError(f"contact part {pair_id!r} is not straight")
        self.normal = normals[0]
        local = np.full(mesh.n_nodes, -1, dtype=np.int64)
        local[self.nodes] = np.arange(len(self.nodes))
        edges = local[mesh.edges[idx]]
        # orient every edge along increasing s
        flip = self.s[edges[:, 0]] > self.s[edges[:, 1]]
        edges[flip, 0], edges[flip, 1] = edges[flip, 1], edges[flip, 0].copy()
        self.edges = edges[np.argsort(self.s[edges[:, 0]])]
        self.length = self.s[self.edges[:, 1]] - self.s[self.edges[:, 0]]

        n_t = len(self.nodes)
        rows, cols, vals = [], [], []
        offset = np.zeros(n_t)
        for c in range(2):
            if abs(self.normal[c]) < 1e-14:
                continue
            g = 2 * self.nodes + c
            fi = problem.free_index[g]
            ok = fi >= 0
            rows.append(np.flatnonzero(ok))
            cols.append(fi[ok])
            vals.append(np.full(ok.sum(), self.normal[c]))
            offset[~ok] += self.normal[c] * problem.prescribed[g[~ok]]
        self.N = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(n_t, problem.n_free))
        self.offset = offset

        t, w = edge_rule(self.order)
        self.qp_t = t
        self.qp_shape = shape_edge(self.order, t)  # (nq, nloc)
        self.qp_weight = w[None, :] * self.length[:, None] / 2  # (ne, nq)
        self.qp_s = (self.s[self.edges[:, 0]][:, None]
                     + (1 + t[None, :]) / 2 * self.length[:, None])

    @property
    def n(self):
        return len(self.nodes)

    def normal_displacement(self, u_free):
        return self.N @ u_free + self.offset

    def at_qp(self, nodal):
        """Interpolate a per-node field to quadrature points -> ``(ne, nq)``."""
        return np.asarray(nodal)[self.edges] @ self.qp_shape.T

    def integrate(self, qp_values):
        """Vector ``int f phi_i dS`` for ``f`` given at quadrature points."""
        local = (qp_values * self.qp_weight) @ self.qp_shape  # (ne, nloc)
        out = np.zeros(self.n)
        np.add.at(out, self.edges, local)
        return out

    def mass(self, weight=None):
        """Trace-space matrix ``int w phi_i phi_j dS``.

        ``weight`` is ``None`` (unit), a per-node array interpolated to the
        quadrature points, or an ``(n_edges, n_qp)`` array of point values.
        """
        if weight is None:
            wq = np.ones_like(self.qp_weight)
        else:
            weight = np.asarray(weight, dtype=float)
            if weight.shape == self.qp_weight.shape:
                wq = weight
            elif weight.shape == (self.n,):
                wq = self.at_qp(weight)
            else:
                raise ValueError(f"weight shape {weight.shape} matches neither nodes nor quadrature points")
        local = np.einsum("eq,qa,qb->eab", wq * self.qp_weight, self.qp_shape, self.qp_shape)
        nloc = self.edges.shape[1]
        rows = np.repeat(self.edges, nloc, axis=1).ravel()
        cols = np.tile(self.edges, (1, nloc)).ravel()
        return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(self.n, self.n)).tocsr()


def trace_normal(problem, pair_id, u):
    """Outward normal displacement at the contact trace nodes."""
    return problem.trace(pair_id).normal_displacement(u)


def assemble_contact_edge_mass(problem, pair_id, weight, theta=1.0):
    """Free-dof matrix of ``(1/theta) int psi u_n v_n dS`` on one contact part."""
    tr = problem.trace(pair_id)
    M = tr.mass(weight)
    return (tr.N.T @ M @ tr.N).tocsr() / theta


class SPDFactor:
    """Sparse direct factorization reused across right-hand sides."""

    def __init__(self, K):
        K = sp.csc_matrix(K)
        self.K = K
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", sp.linalg.MatrixRankWarning)
                self._lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                     options={"SymmetricMode": True})
        except (RuntimeError, sp.linalg.MatrixRankWarning) as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
        d = self._lu.U.diagonal()
        if np.any(d <= 0.0) or not np.all(np.isfinite(d)):
            raise SolverError("matrix is not positive definite")

    def solve(self, F):
        return self._lu.solve(np.asarray(F, dtype=float))


def solve_spd(K, F, tol=1e-12):
    """Solve ``K u = F`` for sparse SPD ``K`` with relative residual ``<= tol``.

    A direct factorization is tried first, followed by iterative refinement
    and, if that stalls, preconditioned conjugate gradients.
    """
    F = np.asarray(F, dtype=float)
    nf = np.linalg.norm(F)
    if nf == 0.0:
        return np.zeros_like(F)
    K = sp.csr_matrix(K)
    fac = SPDFactor(K)
    u = fac.solve(F)
    for _ in range(3):
        r = F - K @ u
        if np.linalg.norm(r) <= tol * nf:
            return u
        u = u + fac.solve(r)
    if np.linalg.norm(F - K @ u) <= tol * nf:
        return u
    M = sp.diags(1.0 / K.diagonal())
    u, info = spla.cg(K, F, x0=u, rtol=tol, atol=0.0, M=M, maxiter=10 * K.shape[0])
    if info != 0 or np.linalg.norm(F - K @ u) > tol * nf * 10:
        raise SolverError("solve did not reach the requested residual")
    return u
