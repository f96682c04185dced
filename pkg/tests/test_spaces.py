import numpy as np
import pytest

from cutfrac.errors import OutsideCoverage
from cutfrac.mesh import build_structured_mesh, compute_cut_topology
from cutfrac.spaces import SolutionField, build_dof_space, eval_basis, evaluate_solution
from cutfrac.geometry import build_fracture_graph

from conftest import cached_discretization, straight_graph


def test_no_fracture_single_copy():
    m = build_structured_mesh((0, 0, 1, 1), 4)
    g = build_fracture_graph([], [], domain=(0, 0, 1, 1))
    topo = compute_cut_topology(m, g)
    space = build_dof_space(m, topo)
    assert space.ndof == len(m.vertices)


def test_one_cut_row_duplicates_strip():
    m = build_structured_mesh((0, 0, 1, 1), 4)
    topo = compute_cut_topology(m, straight_graph(0.6))
    space = build_dof_space(m, topo)
    strip = np.unique(m.triangles[topo.cut_elements])
    assert len(strip) == 10  # vertices of the row 0.5 <= y <= 0.75
    assert space.ndof == 25 + len(strip)


@pytest.mark.parametrize("name", ["example1", "example3", "example1-extra"])
def test_dof_invariants(name):
    mesh, topo, space = cached_discretization(name, 16)
    expected = sum(len(np.unique(mesh.triangles[topo.active(k)])) for k in range(1, topo.n_subdomains + 1))
    assert space.ndof == expected
    d = space.dof_of[space.dof_of >= 0]
    assert len(np.unique(d)) == len(d) == space.ndof
    copies = (space.element_dofs[:, :, 0] >= 0).sum(axis=0)
    assert np.all(copies[topo.element_class > 0] == 1)
    for t in topo.cut_elements:
        assert copies[t] == len({k for (e, k) in topo.piece_area if e == t})


def test_example3_junction_elements_carry_three_copies():
    mesh, topo, space = cached_discretization("example3", 16)
    for i in topo.graph.bifurcation_nodes:
        v = np.flatnonzero(np.all(mesh.vertices == topo.graph.nodes[i], axis=1))[0]
        assert (space.dof_of[:, v] >= 0).sum() == 3
        star = np.flatnonzero(np.any(mesh.triangles == v, axis=1))
        assert max(len(space.copies_of_element(t)) for t in star) >= 2


def test_eval_basis():
    m = build_structured_mesh((0, 0, 1, 1), 1 + 1)
    vals, _ = eval_basis(m, 0, [1 / 3, 1 / 3, 1 / 3])
    assert np.allclose(vals, 1 / 3)
    vals, _ = eval_basis(m, 0, [1, 0, 0])
    assert np.array_equal(vals, [1, 0, 0])


def test_unit_right_triangle_gradients():
    from cutfrac.mesh import Mesh

    m = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]), (0, 0, 1, 1))
    _, grads = eval_basis(m, 0, [1 / 3, 1 / 3, 1 / 3])
    assert np.allclose(grads, [[-1, -1], [1, 0], [0, 1]], atol=1e-15)


@pytest.mark.parametrize("name", ["example1", "example2", "example3"])
@pytest.mark.parametrize("n", [8, 16, 32])
def test_partition_of_unity_at_quadrature_points(name, n):
    mesh, topo, space = cached_discretization(name, n)
    for k in range(1, topo.n_subdomains + 1):
        e, p, _ = topo.bulk_quadrature(k)
        lam = mesh.barycentric(e, p)
        assert np.abs(lam.sum(axis=1) - 1).max() <= 1e-14
    iq = topo.interface
    assert np.abs(mesh.barycentric(iq.elem, iq.points).sum(axis=1) - 1).max() <= 1e-14


def test_constant_and_linear_fields():
    mesh, topo, space = cached_discretization("example1", 16)
    ones = SolutionField(space, np.ones(space.ndof))
    assert evaluate_solution(ones, (0.2, 0.3)) == pytest.approx(1.0, abs=1e-15)
    xs = mesh.vertices[space.dof_vertex(), 0]
    lin = SolutionField(space, xs)
    assert evaluate_solution(lin, (0.3, 0.7)) == pytest.approx(0.3, abs=1e-14)


def test_side_evaluation_shows_jump():
    mesh, topo, space = cached_discretization("example1", 16)
    coef = (space.dof_subdomain() == 2).astype(float)
    f = SolutionField(space, coef)
    p = topo.interface.points[5]
    assert evaluate_solution(f, p, side=1) == pytest.approx(0.0)
    assert evaluate_solution(f, p, side=2) == pytest.approx(1.0)
    with pytest.raises(OutsideCoverage):
        f.evaluate(topo.graph.edges[0].polyline[3][None, :])


def test_outside_copy_raises():
    mesh, topo, space = cached_discretization("example1", 16)
    f = SolutionField(space, np.zeros(space.ndof))
    with pytest.raises(OutsideCoverage):
        evaluate_solution(f, (0.05, 0.05), side=2)


def test_copies_conforming_across_faces(rng):
    mesh, topo, space = cached_discretization("example3", 16)
    f = SolutionField(space, rng.standard_normal(space.ndof))
    fe = mesh.face_elements
    for k in range(1, topo.n_subdomains + 1):
        act = topo.active_mask[k - 1]
        faces = np.flatnonzero((fe[:, 1] >= 0) & act[fe[:, 0]] & act[np.maximum(fe[:, 1], 0)])
        mid = mesh.vertices[mesh.faces[faces]].mean(axis=1)
        a = f.copy_values(fe[faces, 0], mid, k)
        b = f.copy_values(fe[faces, 1], mid, k)
        assert np.abs(a - b).max() <= 1e-13 * max(1.0, np.abs(a).max())
