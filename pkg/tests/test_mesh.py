import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from penaltydd.mesh import (BoundaryTag, MeshError, contact_trace_nodes, generate_rect_mesh, read_text,
                            tag_boundary, tag_remaining, write_text)


def test_minimal_square_linear():
    m = generate_rect_mesh((0, 0), 1, 1, 1, 1, order=1)
    assert m.n_elements == 2
    assert m.n_nodes == 4
    assert all(t is None for t in m.edge_tags)
    assert len(m.edges) == 4


def test_minimal_square_quadratic():
    m = generate_rect_mesh((0, 0), 1, 1, 1, 1, order=2)
    assert m.n_elements == 2
    assert m.n_nodes == 9
    assert m.elements.shape == (2, 6)
    # midside nodes sit at edge midpoints
    for el in m.elements:
        p = m.nodes[el]
        for k, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            np.testing.assert_allclose(p[3 + k], 0.5 * (p[a] + p[b]))


@pytest.mark.parametrize("order", [1, 2])
def test_node_counts(order):
    m = generate_rect_mesh((1.0, -2.0), 3.0, 2.0, 5, 4, order)
    assert m.n_elements == 2 * 5 * 4
    assert m.n_nodes == (order * 5 + 1) * (order * 4 + 1)
    m.validate()


@pytest.mark.parametrize("args", [(0, 1, 1, 1), (1, -1, 1, 1), (1, 1, 0, 1), (1, 1, 2, 0), (1, 1, 1.5, 1)])
def test_invalid_arguments(args):
    w, h, nx, ny = args
    with pytest.raises(MeshError):
        generate_rect_mesh((0, 0), w, h, nx, ny)


def test_invalid_order():
    with pytest.raises(MeshError):
        generate_rect_mesh((0, 0), 1, 1, 1, 1, order=3)


def test_hertz_mesh_contact_side():
    # 4b x 4b with 15 quadratic sides on [0, 2b]; the uniform grading used
    # here has 1800 triangles instead of the 1595 of a graded mesh
    m = generate_rect_mesh((0, 0), 4, 4, 30, 30, 2)
    m = tag_boundary(m, ((0, 4), (2, 4)), BoundaryTag.contact("12"))
    assert len(m.edges_with(lambda t: t.kind == "contact")) == 15
    assert m.n_elements == 1800


def test_tag_bottom_and_top():
    m = generate_rect_mesh((0, 0), 4, 4, 4, 4, 1)
    m = tag_boundary(m, ((0, 0), (4, 0)), BoundaryTag.dirichlet())
    m = tag_boundary(m, ((0, 4), (2, 4)), BoundaryTag.contact("12"))
    d = m.edges_with(lambda t: t.kind == "dirichlet")
    c = m.edges_with(lambda t: t.kind == "contact")
    assert np.allclose(m.nodes[m.edges[d][:, :2]][..., 1], 0.0)
    assert np.allclose(m.nodes[m.edges[c][:, :2]][..., 1], 4.0)
    assert m.nodes[m.edges[c][:, :2]][..., 0].max() <= 2.0 + 1e-12
    m = tag_remaining(m, BoundaryTag.neumann())
    assert not m.untagged_edges()


def test_retag_replaces():
    m = generate_rect_mesh((0, 0), 1, 1, 2, 2, 1)
    m = tag_boundary(m, ((0, 1), (1, 1)), BoundaryTag.neumann("a"))
    m = tag_boundary(m, ((0, 1), (1, 1)), BoundaryTag.neumann("b"))
    names = {m.edge_tags[i].name for i in m.edges_with(lambda t: True)}
    assert names == {"b"}


def test_interior_selector_matches_nothing():
    m = generate_rect_mesh((0, 0), 1, 1, 2, 2, 1)
    with pytest.raises(MeshError, match="no boundary edge"):
        tag_boundary(m, ((0, 0.5), (1, 0.5)), BoundaryTag.neumann())


def test_contact_dirichlet_conflict():
    m = generate_rect_mesh((0, 0), 1, 1, 2, 2, 1)
    m = tag_boundary(m, ((0, 0), (1, 0)), BoundaryTag.dirichlet())
    with pytest.raises(MeshError, match="cannot tag"):
        tag_boundary(m, ((0, 0), (1, 0)), BoundaryTag.contact("x"))


def test_contact_tag_needs_pair():
    with pytest.raises(MeshError):
        BoundaryTag("contact")


@pytest.mark.parametrize("order,expected", [(1, 16), (2, 31)])
def test_contact_trace_node_counts(order, expected):
    m = generate_rect_mesh((0, 0), 4, 4, 30, 2, order)
    m = tag_boundary(m, ((0, 4), (2, 4)), BoundaryTag.contact("12"))
    ids, s = contact_trace_nodes(m, "12")
    assert len(ids) == expected
    assert np.all(np.diff(s) > 0)
    np.testing.assert_allclose(s[-1], 2.0)


def test_contact_trace_unknown_pair():
    m = generate_rect_mesh((0, 0), 1, 1, 2, 2, 1)
    with pytest.raises(MeshError):
        contact_trace_nodes(m, "12")


@given(w=st.floats(0.1, 10), h=st.floats(0.1, 10), nx=st.integers(1, 8), ny=st.integers(1, 8),
       order=st.sampled_from([1, 2]))
def test_area_conservation_and_orientation(w, h, nx, ny, order):
    m = generate_rect_mesh((0.3, -1.2), w, h, nx, ny, order)
    a = m.element_areas()
    assert np.all(a > 0)
    assert abs(a.sum() - w * h) <= 1e-12 * w * h
    # boundary edges have the element on the left: outward normals point away from the centre
    centre = np.array([0.3 + w / 2, -1.2 + h / 2])
    for i in range(len(m.edges)):
        mid = m.nodes[m.edges[i, :2]].mean(axis=0)
        assert np.dot(m.edge_normal(i), mid - centre) > 0


@given(nx=st.integers(1, 6), ny=st.integers(1, 6))
def test_refinement_nesting(nx, ny):
    coarse = generate_rect_mesh((0, 0), 2, 3, nx, ny, 1)
    fine = generate_rect_mesh((0, 0), 2, 3, 2 * nx, 2 * ny, 1)
    key = {tuple(np.round(p, 12)) for p in fine.nodes}
    assert all(tuple(np.round(p, 12)) in key for p in coarse.nodes)


def test_boundary_edges_cover_perimeter():
    m = generate_rect_mesh((0, 0), 2, 1, 3, 5, 2)
    lengths = np.linalg.norm(np.diff(m.nodes[m.edges[:, :2]], axis=1)[:, 0], axis=1)
    assert abs(lengths.sum() - 6.0) < 1e-12


def test_text_roundtrip(tmp_path):
    m = generate_rect_mesh((0, 0), 2, 1, 3, 2, 2)
    m = tag_boundary(m, ((0, 0), (2, 0)), BoundaryTag.dirichlet("fixed", components=(1,)))
    m = tag_boundary(m, ((0, 1), (2, 1)), BoundaryTag.contact("12"))
    m = tag_remaining(m, BoundaryTag.neumann())
    path = tmp_path / "mesh.txt"
    write_text(m, path)
    back = read_text(path)
    np.testing.assert_array_equal(back.elements, m.elements)
    np.testing.assert_allclose(back.nodes, m.nodes, rtol=0, atol=0)
    assert back.edge_tags == m.edge_tags


def test_validate_detects_duplicates():
    m = generate_rect_mesh((0, 0), 1, 1, 1, 1, 1)
    m.nodes[1] = m.nodes[0]
    with pytest.raises(MeshError):
        m.validate()
