"""Penalty coupling of two bodies across a flat, node-matching contact part.

The normal-gap residual ``g = d - u_an - u_bn`` is formed at the trace
nodes and interpolated to edge quadrature points; the kink of ``min(0, g)``
is evaluated there without sub-cell splitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import MeshError


class GeometryError(MeshError):
    pass


def neg(y):
    """``y^- = min(0, y)``."""
    return np.minimum(0.0, y)


# gap functions, keyed by the names used in config files

def parabolic(r, b):
    """``d(x) = r * x1^2 / b^2``."""
    return lambda x: r * np.asarray(x)[..., 0] ** 2 / b ** 2


def groove(r, b, l):
    """``d(x) = r * ([1 - (x1 - l)^2 / b^2]^+)^(3/2)``."""
    def d(x):
        s = 1.0 - (np.asarray(x)[..., 0] - l) ** 2 / b ** 2
        return r * np.maximum(s, 0.0) ** 1.5
    return d


def constant(d0):
    return lambda x: np.full(np.asarray(x).shape[:-1], float(d0))


GAP_FUNCTIONS = {"parabolic": parabolic, "groove": groove, "constant": constant}


@dataclass
class ContactPair:
    """Matched contact parts ``S_ab`` (body a) and ``S_ba`` (body b).

    ``pairing[i]`` is the index in ``trace_b`` of the node paired with node
    ``i`` of ``trace_a``; ``gap`` is sampled at the ``trace_a`` nodes.
    """

    pair_id: str
    body_a: int
    body_b: int
    trace_a: object
    trace_b: object
    pairing: np.ndarray
    gap: np.ndarray

    @property
    def n(self):
        return len(self.gap)

    @property
    def x(self):
        return self.trace_a.x

    def traces(self, u):
        """Normal displacements ``(un_a, un_b)`` of a list of free-dof vectors."""
        return (self.trace_a.normal_displacement(u[self.body_a]),
                self.trace_b.normal_displacement(u[self.body_b]))

    def residual(self, un_a, un_b):
        """``d - un_a - un_b o P`` at the trace_a nodes."""
        un_a, un_b = np.asarray(un_a), np.asarray(un_b)
        if un_a.shape != (self.n,) or un_b.shape != (self.n,):
            raise ValueError("trace arrays do not match the contact part")
        return self.gap - un_a - un_b[self.pairing]

    def residual_qp(self, un_a, un_b):
        return self.trace_a.at_qp(self.residual(un_a, un_b))

    def to_b(self, values_a):
        """Reorder a per-node array from trace_a to trace_b numbering."""
        out = np.empty_like(values_a)
        out[self.pairing] = values_a
        return out


def build_pair(problem_a, problem_b, pair_id, gap_fn, body_a=0, body_b=1):
    """Pair the contact parts tagged ``pair_id`` on two bodies node by node."""
    ta, tb = problem_a.trace(pair_id), problem_b.trace(pair_id)
    if ta.n != tb.n:
        raise GeometryError(f"nonmatching contact meshes: {ta.n} vs {tb.n} nodes")
    if ta.order != tb.order:
        raise GeometryError("contact parts use different element orders")
    diam = max(problem_a.mesh.diameter, problem_b.mesh.diameter)
    tol = 1e-9 * diam
    if np.dot(ta.normal, tb.normal) > -1 + 1e-9:
        raise GeometryError("contact normals are not opposite")
    tangent = np.array([-ta.normal[1], ta.normal[0]])
    pa, pb = ta.x @ tangent, tb.x @ tangent
    ia, ib = np.argsort(pa, kind="stable"), np.argsort(pb, kind="stable")
    pairing = np.empty(ta.n, dtype=np.int64)
    pairing[ia] = ib
    if np.abs(pa - pb[pairing]).max() > tol:
        raise GeometryError("paired contact nodes are not aligned")
    if not np.array_equal(pairing[ta.edges], tb.edges):
        raise GeometryError("contact edges do not correspond one to one")
    gap = np.asarray(gap_fn(ta.x), dtype=float)
    if gap.shape != (ta.n,) or not np.all(np.isfinite(gap)):
        raise GeometryError("gap function must give finite values on the contact part")
    return ContactPair(str(pair_id), body_a, body_b, ta, tb, pairing, gap)


def penetration(pair, un_a, un_b):
    """Per-node ``(d - un_a - un_b)^-``."""
    return neg(pair.residual(un_a, un_b))


def penalty_energy(pair, un_a, un_b, theta):
    """``(1/(2 theta)) int [(d - un_a - un_b)^-]^2 dS``."""
    if theta <= 0:
        raise ValueError("penalty parameter must be positive")
    g = neg(pair.residual_qp(un_a, un_b))
    return float(np.sum(pair.trace_a.qp_weight * g * g) / (2.0 * theta))


def penalty_rhs(pair, un_a, un_b, theta):
    """Consistent contact loads on the normal trace dofs of both bodies.

    Returns ``(r_a, r_b)`` with ``r[i] = (1/theta) int g^- phi_i dS``, in
    trace_a and trace_b numbering.  These are ``-J'`` split by body and push
    each body back along its inward normal: the total load is non-positive,
    and so is every entry for linear traces (quadratic shape functions take
    negative values, so single entries may be slightly positive).
    """
    if theta <= 0:
        raise ValueError("penalty parameter must be positive")
    g = neg(pair.residual_qp(un_a, un_b))
    r_a = pair.trace_a.integrate(g) / theta
    return r_a, pair.to_b(r_a)


def contact_stress(pair, un_a, un_b, theta):
    """Nodal normal contact stress ``(d - un_a - un_b)^- / theta`` (<= 0)."""
    return penetration(pair, un_a, un_b) / theta


@dataclass(frozen=True)
class SubareaPolicy:
    """Choice of the Robin subarea indicator on a contact part.

    ``none``: Neumann coupling; ``all``: Robin on the whole part;
    ``segment``: Robin on ``lo <= s <= hi`` (arclength along the part);
    ``active``: Robin on the current penetration set, recomputed every
    iteration.
    """

    kind: str
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "all", "segment", "active"):
            raise ValueError(f"unknown subarea policy {self.kind!r}")
        if self.kind == "segment" and self.hi < self.lo:
            raise ValueError("segment must have lo <= hi")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def all(cls):
        return cls("all")

    @classmethod
    def segment(cls, lo, hi):
        return cls("segment", float(lo), float(hi))

    @classmethod
    def active(cls):
        return cls("active")

    @property
    def stationary(self):
        return self.kind != "active"

    def label(self):
        if self.kind == "segment":
            return f"segment[{self.lo:g},{self.hi:g}]"
        return self.kind


def _check_segment(policy, pair):
    tr = pair.trace_a
    if policy.kind == "segment" and (policy.lo < -1e-12 or policy.hi > tr.s[-1] + 1e-9 * max(tr.s[-1], 1.0)):
        raise ValueError(f"segment [{policy.lo}, {policy.hi}] leaves the contact part [0, {tr.s[-1]}]")


def evaluate_policy(policy, pair, un_a=None, un_b=None):
    """Per-node indicator in trace_a numbering."""
    s = pair.trace_a.s
    _check_segment(policy, pair)
    if policy.kind == "none":
        return np.zeros(pair.n)
    if policy.kind == "all":
        return np.ones(pair.n)
    if policy.kind == "segment":
        tol = 1e-12 * max(s[-1], 1.0)
        return ((s >= policy.lo - tol) & (s <= policy.hi + tol)).astype(float)
    if un_a is None or un_b is None:
        raise ValueError("the active-set policy needs the current traces")
    return (pair.residual(un_a, un_b) < 0.0).astype(float)


def policy_weights(policy, pair, un_a=None, un_b=None):
    """Indicator evaluated at the edge quadrature points, ``(n_edges, n_qp)``.

    This is what enters the Robin term; with ``active`` it equals the set
    where the interpolated gap residual is negative, so that
    ``g^- = g * chi`` holds point by point.
    """
    tr = pair.trace_a
    _check_segment(policy, pair)
    if policy.kind == "none":
        return np.zeros_like(tr.qp_weight)
    if policy.kind == "all":
        return np.ones_like(tr.qp_weight)
    if policy.kind == "segment":
        return ((tr.qp_s >= policy.lo) & (tr.qp_s <= policy.hi)).astype(float)
    if un_a is None or un_b is None:
        raise ValueError("the active-set policy needs the current traces")
    return (pair.residual_qp(un_a, un_b) < 0.0).astype(float)
