import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cutfrac.cases import case_example1, case_example3
from cutfrac.errors import (
    DanglingEndpoint,
    EdgeCrossing,
    GeometryError,
    MultipleCrossings,
    NotIncident,
    OnInterface,
)
from cutfrac.geometry import Edge, build_fracture_graph, classify_point, edge_tangent_at_node, intersect_triangle

from conftest import straight_graph


def test_single_edge_graph():
    g = straight_graph(0.5)
    assert len(g.nodes) == 2 and len(g.edges) == 1
    assert g.node_incidence == ((0,), (0,))
    assert g.bifurcation_nodes == []


def test_example3_has_two_three_way_junctions():
    g = case_example3().graph
    sizes = sorted(len(s) for s in g.node_incidence)
    assert sizes == [1, 1, 1, 1, 3, 3]
    assert g.subdomains.n_subdomains == 4


def test_incidence_is_recomputable():
    g = case_example3().graph
    again = [tuple(j for j, e in enumerate(g.edges) if i in e.endpoint_node_ids) for i in range(len(g.nodes))]
    assert list(g.node_incidence) == again


def test_crossing_edges_rejected():
    nodes = [(0, 0.5), (1, 0.5), (0.5, 0), (0.5, 1)]
    with pytest.raises(EdgeCrossing):
        build_fracture_graph(nodes, [([(0, 0.5), (1, 0.5)], 0.0), ([(0.5, 0), (0.5, 1)], 0.0)], domain=(0, 0, 1, 1))


def test_overlapping_edges_rejected():
    nodes = [(0, 0.5), (1, 0.5), (0.2, 0.5), (0.8, 0.5)]
    with pytest.raises(EdgeCrossing):
        build_fracture_graph(nodes, [([(0, 0.5), (1, 0.5)], 0.0), ([(0.2, 0.5), (0.8, 0.5)], 0.0)])


def test_dangling_endpoint_rejected():
    with pytest.raises(DanglingEndpoint):
        build_fracture_graph([(0, 0.5)], [([(0, 0.5), (1, 0.5)], 0.0)])


def test_endpoints_snapped_bitwise():
    g = build_fracture_graph([(0, 0.5), (1, 0.5)], [([(1e-14, 0.5), (1 - 1e-14, 0.5)], 0.0)])
    assert np.array_equal(g.edges[0].polyline[0], g.nodes[0])
    assert np.array_equal(g.edges[0].polyline[-1], g.nodes[1])


def test_explicit_endpoint_ids_checked():
    with pytest.raises(DanglingEndpoint):
        build_fracture_graph([(0, 0.5), (1, 0.5)], [{"points": [(0, 0.5), (1, 0.5)], "a_gamma": 0, "endpoints": [1, 0]}])


def test_edge_validation():
    with pytest.raises(GeometryError):
        Edge(np.array([[0.0, 0.0]]))
    with pytest.raises(GeometryError):
        Edge(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(GeometryError):
        Edge(np.array([[0.0, 0.0], [1.0, 0.0]]), a_gamma=-1.0)


def test_loop_edge_rejected():
    with pytest.raises(GeometryError):
        build_fracture_graph([(0.5, 0.5)], [([(0.5, 0.5), (0.6, 0.6), (0.5, 0.7), (0.5, 0.5)], 0.0)])


def test_classify_circle():
    g = case_example1().graph
    assert classify_point(g, (0.1, 0.1)) == 1
    assert classify_point(g, (0.9, 0.9)) == 2
    assert g.subdomains.n_subdomains == 2


def test_classify_on_interface_raises():
    g = case_example1().graph
    p = g.edges[0].polyline[100]
    with pytest.raises(OnInterface):
        classify_point(g, p)


def test_dangling_tip_does_not_split_domain():
    g = build_fracture_graph([(0, 0.5), (0.6, 0.5)], [([(0, 0.5), (0.6, 0.5)], 1.0)], domain=(0, 0, 1, 1))
    assert g.subdomains.n_subdomains == 1
    assert classify_point(g, (0.3, 0.2)) == classify_point(g, (0.3, 0.8)) == 1


@settings(max_examples=30, deadline=None)
@given(st.floats(0.02, 0.98), st.floats(0.02, 0.98))
def test_classification_invariant_under_resampling(x, y):
    coarse = case_example1().graph
    fine_pts = np.vstack([np.linspace(a, b, 11)[:-1] for a, b in zip(coarse.edges[0].polyline[:-1], coarse.edges[0].polyline[1:])]
                         + [coarse.edges[0].polyline[-1:]])
    fine = build_fracture_graph(coarse.nodes, [(fine_pts, 0.0)], domain=coarse.domain)
    if abs(np.hypot(x, y) - 0.75) < 1e-4:
        return
    assert classify_point(coarse, (x, y)) == classify_point(fine, (x, y))


def test_intersect_vertical_line():
    e = Edge(np.array([[0.5, -1.0], [0.5, 2.0]]))
    cut = intersect_triangle(e, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    assert cut.length == pytest.approx(0.5, abs=1e-14)
    ends = sorted([tuple(cut.entry), tuple(cut.exit)])
    assert np.allclose(ends, [(0.5, 0.0), (0.5, 0.5)], atol=1e-12)


def test_intersect_miss():
    e = Edge(np.array([[2.0, 2.0], [3.0, 3.0]]))
    assert intersect_triangle(e, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])) is None


def test_intersect_vertex_touch_is_empty():
    e = Edge(np.array([[1.0, -1.0], [1.0, 1.0]]))
    assert intersect_triangle(e, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])) is None


def test_intersect_s_shape_rejected():
    e = Edge(np.array([[0.2, -0.5], [0.2, 0.5], [0.3, 0.5], [0.3, -0.5], [0.4, -0.5], [0.4, 0.5]]))
    with pytest.raises(MultipleCrossings):
        intersect_triangle(e, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))


def test_intersect_lengths_sum_to_edge_length():
    from cutfrac.mesh import build_structured_mesh

    g = case_example1().graph
    m = build_structured_mesh((0, 0, 1, 1), 16)
    total = 0.0
    for tri in m.vertices[m.triangles]:
        c = intersect_triangle(g.edges[0], tri)
        if c is not None:
            assert c.length <= g.edges[0].length
            total += c.length
    assert total == pytest.approx(g.edges[0].length, rel=1e-10)


def test_tangents_at_ends():
    g = straight_graph(0.5)
    assert np.allclose(edge_tangent_at_node(g, 0, 1), [1, 0])
    assert np.allclose(edge_tangent_at_node(g, 0, 0), [-1, 0])
    with pytest.raises(NotIncident):
        edge_tangent_at_node(case_example3().graph, 0, 1)


def test_tangents_anti_parallel_at_smooth_joint():
    g = case_example1(extra_fracture=True).graph
    i = g.bifurcation_nodes[0]
    t0 = edge_tangent_at_node(g, 0, i)
    t1 = edge_tangent_at_node(g, 1, i)
    assert float(t0 @ t1) == pytest.approx(-1.0, abs=1e-4)
