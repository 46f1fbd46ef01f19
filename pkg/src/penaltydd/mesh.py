"""Structured triangular meshes of rectangular bodies with tagged boundary parts."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


class MeshError(ValueError):
    """Invalid mesh geometry or tagging request."""


DIRICHLET = "dirichlet"
NEUMANN = "neumann"
CONTACT = "contact"


@dataclass(frozen=True)
class BoundaryTag:
    """Label of a boundary part.

    ``name`` keys the Dirichlet values / tractions attached to the part.
    ``components`` lists the constrained displacement components of a
    Dirichlet part; ``(0,)`` is a roller that only fixes ``u_1``.
    """

    kind: str
    pair_id: str | None = None
    name: str | None = None
    components: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        if self.kind not in (DIRICHLET, NEUMANN, CONTACT):
            raise MeshError(f"unknown boundary kind {self.kind!r}")
        if self.kind == CONTACT and self.pair_id is None:
            raise MeshError("contact tag needs a pair_id")
        if not self.components or not set(self.components) <= {0, 1}:
            raise MeshError(f"bad components {self.components!r}")

    @classmethod
    def dirichlet(cls, name="fixed", components=(0, 1)):
        return cls(DIRICHLET, name=name, components=tuple(components))

    @classmethod
    def neumann(cls, name="free"):
        return cls(NEUMANN, name=name)

    @classmethod
    def contact(cls, pair_id):
        return cls(CONTACT, pair_id=str(pair_id), name=str(pair_id))


@dataclass
class Mesh:
    """Triangulation of a rectangle.

    Elements list corner nodes counter-clockwise, followed (for ``order=2``)
    by the midside nodes of edges (0,1), (1,2), (2,0).  Boundary edges are
    stored as node tuples ``(a, b)`` or ``(a, b, mid)`` oriented so that the
    owning element lies to the left, which makes ``(dy, -dx)`` the outward
    normal.
    """

    nodes: np.ndarray
    elements: np.ndarray
    order: int
    edges: np.ndarray
    edge_elements: np.ndarray
    edge_local: np.ndarray
    edge_tags: list = field(default_factory=list)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def diameter(self):
        lo, hi = self.nodes.min(axis=0), self.nodes.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def element_areas(self):
        p = self.nodes[self.elements[:, :3]]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges_with(self, predicate):
        return [i for i, t in enumerate(self.edge_tags) if t is not None and predicate(t)]

    def tags(self):
        return {t for t in self.edge_tags if t is not None}

    def untagged_edges(self):
        return [i for i, t in enumerate(self.edge_tags) if t is None]

    def edge_normal(self, i):
        a, b = self.nodes[self.edges[i, 0]], self.nodes[self.edges[i, 1]]
        d = b - a
        return np.array([d[1], -d[0]]) / np.hypot(*d)

    def validate(self):
        """Raise :class:`MeshError` when a structural invariant is violated."""
        if self.elements.min() < 0 or self.elements.max() >= self.n_nodes:
            raise MeshError("element references a missing node")
        if np.any(self.element_areas() <= 0.0):
            raise MeshError("degenerate or clockwise element")
        tol = 1e-12 * self.diameter
        key = np.round(self.nodes / max(tol, 1e-300)).astype(np.int64)
        if len(np.unique(key, axis=0)) != self.n_nodes:
            raise MeshError("duplicate nodes")
        if len(self.edge_tags) != len(self.edges):
            raise MeshError("tag table does not match boundary edges")


_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def generate_rect_mesh(origin, width, height, nx, ny, order=1):
    """Structured mesh of ``2*nx*ny`` triangles on an axis-aligned rectangle.

    Boundary edges are present but untagged.
    """
    if width <= 0 or height <= 0:
        raise MeshError("rectangle extent must be positive")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError("nx and ny must be positive integers")
    if order not in (1, 2):
        raise MeshError("order must be 1 or 2")
    nx, ny = int(nx), int(ny)
    x0, y0 = float(origin[0]), float(origin[1])
    mx, my = order * nx, order * ny
    xs = x0 + width * np.arange(mx + 1) / mx
    ys = y0 + height * np.arange(my + 1) / my
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (mx + 1) + i

    elements = []
    s = order
    for j in range(ny):
        for i in range(nx):
            i0, j0 = s * i, s * j
            # lower-left to upper-right diagonal
            sw, se = nid(i0, j0), nid(i0 + s, j0)
            nw, ne = nid(i0, j0 + s), nid(i0 + s, j0 + s)
            if order == 1:
                elements.append((sw, se, ne))
                elements.append((sw, ne, nw))
            else:
                c = nid(i0 + 1, j0 + 1)
                elements.append((sw, se, ne, nid(i0 + 1, j0), nid(i0 + 2, j0 + 1), c))
                elements.append((sw, ne, nw, c, nid(i0 + 1, j0 + 2), nid(i0, j0 + 1)))
    elements = np.array(elements, dtype=np.int64)
    edges, owners, local = _boundary_edges(elements, order)
    return Mesh(nodes=nodes, elements=elements, order=order, edges=edges,
                edge_elements=owners, edge_local=local, edge_tags=[None] * len(edges))


def _boundary_edges(elements, order):
    count = {}
    for e, el in enumerate(elements):
        for k, (a, b) in enumerate(_LOCAL_EDGES):
            key = frozenset((el[a], el[b]))
            count.setdefault(key, []).append((e, k))
    edges, owners, local = [], [], []
    for key, uses in count.items():
        if len(uses) != 1:
            continue
        e, k = uses[0]
        a, b = _LOCAL_EDGES[k]
        row = [elements[e, a], elements[e, b]]
        if order == 2:
            row.append(elements[e, 3 + k])
        edges.append(row)
        owners.append(e)
        local.append(k)
    order_idx = np.lexsort((local, owners))
    return (np.array(edges, dtype=np.int64)[order_idx],
            np.array(owners, dtype=np.int64)[order_idx],
            np.array(local, dtype=np.int64)[order_idx])


def tag_boundary(mesh, selector, tag):
    """Return a copy of ``mesh`` with every boundary edge on ``selector`` tagged.

    ``selector`` is an axis-aligned segment ``((xa, ya), (xb, yb))``.
    """
    (xa, ya), (xb, yb) = selector
    tol = 1e-9 * mesh.diameter
    if abs(xa - xb) > tol and abs(ya - yb) > tol:
        raise MeshError("selector must be axis-aligned")
    lo = np.array([min(xa, xb), min(ya, yb)]) - tol
    hi = np.array([max(xa, xb), max(ya, yb)]) + tol
    ends = mesh.nodes[mesh.edges[:, :2]]
    inside = np.all((ends >= lo) & (ends <= hi), axis=(1, 2))
    hits = np.flatnonzero(inside)
    if len(hits) == 0:
        raise MeshError(f"selector {selector!r} matches no boundary edge")
    tags = list(mesh.edge_tags)
    clash = {DIRICHLET, CONTACT}
    for i in hits:
        old = tags[i]
        if old is not None and {old.kind, tag.kind} == clash:
            raise MeshError(f"edge {i} already tagged {old.kind}; cannot tag {tag.kind}")
        tags[i] = tag
    return replace(mesh, edge_tags=tags)


def tag_remaining(mesh, tag):
    """Tag every still-untagged boundary edge (typically traction-free Neumann)."""
    tags = [tag if t is None else t for t in mesh.edge_tags]
    return replace(mesh, edge_tags=tags)


def contact_edge_indices(mesh, pair_id):
    idx = mesh.edges_with(lambda t: t.kind == CONTACT and t.pair_id == str(pair_id))
    if not idx:
        raise MeshError(f"no boundary edge tagged with contact pair {pair_id!r}")
    return idx


def contact_trace_nodes(mesh, pair_id):
    """Node indices on contact part ``pair_id`` sorted by arclength.

    Returns ``(nodes, s)`` with the arclength coordinate ``s`` measured from
    the first node along the (straight) contact segment.
    """
    idx = contact_edge_indices(mesh, pair_id)
    ids = np.unique(mesh.edges[idx].ravel())
    pts = mesh.nodes[ids]
    span = pts.max(axis=0) - pts.min(axis=0)
    axis = int(np.argmax(span))
    s = pts[:, axis] - pts[:, axis].min()
    perm = np.argsort(s, kind="stable")
    return ids[perm], s[perm]


def write_text(mesh, path):
    """Dump nodes, elements and the tag table as plain text (debugging aid)."""
    with open(path, "w") as fh:
        fh.write(f"order {mesh.order}\nnodes {mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"elements {mesh.n_elements}\n")
        for el in mesh.elements:
            fh.write(" ".join(map(str, el)) + "\n")
        fh.write(f"edges {len(mesh.edges)}\n")
        for row, e, k, t in zip(mesh.edges, mesh.edge_elements, mesh.edge_local, mesh.edge_tags):
            label = "-" if t is None else f"{t.kind}:{t.pair_id or ''}:{t.name or ''}:{''.join(map(str, t.components))}"
            fh.write(" ".join(map(str, row)) + f" {e} {k} {label}\n")


def read_text(path):
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    order = int(lines[0][1])
    n = int(lines[1][1])
    nodes = np.array(lines[2:2 + n], dtype=float)
    pos = 2 + n
    m = int(lines[pos][1])
    elements = np.array(lines[pos + 1:pos + 1 + m], dtype=np.int64)
    pos += 1 + m
    k = int(lines[pos][1])
    width = 2 if order == 1 else 3
    edges, owners, local, tags = [], [], [], []
    for row in lines[pos + 1:pos + 1 + k]:
        edges.append([int(v) for v in row[:width]])
        owners.append(int(row[width]))
        local.append(int(row[width + 1]))
        label = row[width + 2]
        if label == "-":
            tags.append(None)
        else:
            kind, pair, name, comps = label.split(":")
            tags.append(BoundaryTag(kind, pair_id=pair or None, name=name or None,
                                    components=tuple(int(c) for c in comps)))
    return Mesh(nodes=nodes, elements=elements, order=order,
                edges=np.array(edges, dtype=np.int64),
                edge_elements=np.array(owners, dtype=np.int64),
                edge_local=np.array(local, dtype=np.int64), edge_tags=tags)
