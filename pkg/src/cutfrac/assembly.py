"""Assembly of the cut Nitsche system for fractured Darcy flow.

The global bilinear form is the sum of

* bulk stiffness on each subdomain piece,
* Nitsche coupling across separating fracture edges (consistency,
  symmetry and jump penalty),
* ghost penalty on the faces of cut elements, per subdomain copy,
* in-fracture tangential stiffness acting on the conjugate average
  ``<v>_* = k2 v1 + k1 v2``,
* junction terms at fracture nodes (weak continuity and Kirchhoff
  balance) with a point stabilization of tangential-gradient jumps.

Local blocks are symmetric; only their upper-triangle entries are
scattered and the strict upper part is mirrored, which makes the global
matrix exactly symmetric regardless of summation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import NodeNotVertex
from .mesh import SIDES, CutTopology
from .spaces import DofSpace


@dataclass(frozen=True)
class Dirichlet:
    """Dirichlet data: a constant, or ``value(points, k)`` for copy ``k``."""

    value: float | Callable = 0.0

    def __call__(self, points, k):
        if callable(self.value):
            return np.asarray(self.value(points, k), dtype=float)
        return np.full(len(points), float(self.value))


NEUMANN = "neumann"


@dataclass(frozen=True)
class ModelSpec:
    a: tuple
    f: float | Callable = 0.0
    f_gamma: float | Callable | dict = 0.0
    beta: float | None = None
    gamma: float = 0.1
    beta_gamma: float | None = None
    gamma_point: float | None = None
    kappa: dict | None = None
    kappa_node: dict | None = None
    bc: dict = field(default_factory=lambda: {s: Dirichlet(0.0) for s in SIDES})

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        if not a or min(a) <= 0:
            raise ValueError("bulk permeabilities must be positive")
        object.__setattr__(self, "a", a)
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.beta_gamma is not None and self.beta_gamma <= 0:
            raise ValueError("beta_gamma must be positive")
        for j, (k1, k2) in (self.kappa or {}).items():
            if not (0 <= k1 <= 1 and 0 <= k2 <= 1 and abs(k1 + k2 - 1) < 1e-14):
                raise ValueError(f"edge {j}: kappa weights must be in [0, 1] and sum to 1")
        for i, w in (self.kappa_node or {}).items():
            if min(w.values()) <= 0 or abs(sum(w.values()) - 1) > 1e-14:
                raise ValueError(f"node {i}: nodal weights must be positive and sum to 1")
        for side, cond in self.bc.items():
            if side not in SIDES:
                raise ValueError(f"unknown boundary side {side!r}")
            if not (cond == NEUMANN or isinstance(cond, Dirichlet)):
                raise ValueError(f"bad boundary condition on {side}")

    def edge_beta(self, topo: CutTopology, j):
        """Nitsche penalty on edge j; default 10 x harmonic mean of the adjacent permeabilities."""
        if self.beta is not None:
            return float(self.beta)
        s1, s2 = topo.edge_sides[j]
        a1, a2 = self.a[s1 - 1], self.a[s2 - 1]
        return 10.0 * 2.0 * a1 * a2 / (a1 + a2)

    def beta_array(self, topo: CutTopology, edges):
        table = np.array([self.edge_beta(topo, j) for j in range(len(topo.graph.edges))])
        return table[np.asarray(edges, dtype=int)] if len(table) else np.zeros(len(edges))

    def beta_gamma_value(self, graph):
        if self.beta_gamma is not None:
            return self.beta_gamma
        a_frac = max((e.a_gamma for e in graph.edges), default=0.0)
        return 10.0 * a_frac if a_frac > 0 else 10.0 * min(self.a)

    def edge_kappa(self, topo: CutTopology, j):
        """(k1, k2) for edge j; default k1 = a2 / (a1 + a2)."""
        if self.kappa and j in self.kappa:
            return tuple(self.kappa[j])
        s1, s2 = topo.edge_sides[j]
        if s1 == s2:
            return (0.5, 0.5)
        a1, a2 = self.a[s1 - 1], self.a[s2 - 1]
        return (a2 / (a1 + a2), a1 / (a1 + a2))

    def node_weights(self, graph, i):
        inc = graph.node_incidence[i]
        if self.kappa_node and i in self.kappa_node:
            return {j: float(self.kappa_node[i][j]) for j in inc}
        return {j: 1.0 / len(inc) for j in inc}


def _eval(fn, points):
    if callable(fn):
        return np.asarray(fn(points), dtype=float)
    return np.full(len(points), float(fn))


def _edge_source(fg, edges, points):
    """Fracture source: a scalar, a callable of points, or a per-edge dict of either."""
    if not isinstance(fg, dict):
        return _eval(fg, points)
    out = np.zeros(len(points))
    for j, val in fg.items():
        sel = edges == j
        if sel.any():
            out[sel] = _eval(val, points[sel])
    return out


def _scatter(ndof, dofs, local):
    """Sparse matrix from per-item dof lists (m, L) and local matrices (m, L, L)."""
    L = dofs.shape[1]
    rows = np.repeat(dofs, L, axis=1).ravel()
    cols = np.tile(dofs, (1, L)).ravel()
    return _symmetric_coo(ndof, rows, cols, local.ravel())


def _symmetric_coo(ndof, rows, cols, vals):
    """Global matrix from the upper-triangle contributions of symmetric local blocks.

    The lower triangle is the transpose of the strict upper one, so each
    pair (i, j), (j, i) holds the same floating-point sum.
    """
    keep = rows <= cols
    upper = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(ndof, ndof)).tocsr()
    return (upper + sp.triu(upper, k=1).T).tocsr()


def _kappa_arrays(model, topo, edges):
    table = np.array([model.edge_kappa(topo, j) for j in range(len(topo.graph.edges))]).reshape(-1, 2)
    return table[edges, 0], table[edges, 1]


def assemble_bulk(model: ModelSpec, topo: CutTopology, space: DofSpace):
    mesh = topo.mesh
    G = mesh.gradients
    dofs, local = [], []
    for k in range(1, topo.n_subdomains + 1):
        inside = np.flatnonzero(topo.element_class == k)
        coef = model.a[k - 1] * mesh.areas[inside]
        local.append(coef[:, None, None] * np.einsum("eid,ejd->eij", G[inside], G[inside]))
        dofs.append(space.element_dofs[k - 1, inside])
    if topo.piece_area:
        keys = sorted(topo.piece_area)
        t = np.array([e for e, _ in keys])
        k = np.array([kk for _, kk in keys])
        area = np.array([topo.piece_area[key] for key in keys])
        coef = np.array(model.a)[k - 1] * area
        local.append(coef[:, None, None] * np.einsum("eid,ejd->eij", G[t], G[t]))
        dofs.append(space.element_dofs[k - 1, t])
    return _scatter(space.ndof, np.concatenate(dofs), np.concatenate(local))


def assemble_nitsche_interface(model: ModelSpec, topo: CutTopology, space: DofSpace):
    mesh = topo.mesh
    iq = topo.interface
    iq = iq.select(iq.side1 != iq.side2)
    if len(iq) == 0:
        return sp.csr_matrix((space.ndof, space.ndof))
    a = np.array(model.a)
    k1, k2 = _kappa_arrays(model, topo, iq.edge)
    lam = mesh.barycentric(iq.elem, iq.points)
    dn = np.einsum("qid,qd->qi", mesh.gradients[iq.elem], iq.normals)
    jump = np.hstack([lam, -lam])
    flux = np.hstack([(k1 * a[iq.side1 - 1])[:, None] * dn, (k2 * a[iq.side2 - 1])[:, None] * dn])
    pen = model.beta_array(topo, iq.edge) / mesh.h
    local = (pen[:, None, None] * np.einsum("qi,qj->qij", jump, jump)
             - (np.einsum("qi,qj->qij", jump, flux) + np.einsum("qi,qj->qij", flux, jump)))
    local *= iq.weights[:, None, None]
    dofs = np.hstack([space.element_dofs[iq.side1 - 1, iq.elem], space.element_dofs[iq.side2 - 1, iq.elem]])
    return _scatter(space.ndof, dofs, local)


def assemble_ghost_penalty(model: ModelSpec, topo: CutTopology, space: DofSpace):
    mesh = topo.mesh
    dofs, local = [], []
    for k, faces in topo.cut_faces.items():
        if len(faces) == 0 or model.gamma == 0:
            continue
        va, vb = mesh.vertices[mesh.faces[faces, 0]], mesh.vertices[mesh.faces[faces, 1]]
        tvec = vb - va
        length = np.hypot(tvec[:, 0], tvec[:, 1])
        n = np.column_stack([tvec[:, 1], -tvec[:, 0]]) / length[:, None]
        ep, em = mesh.face_elements[faces, 0], mesh.face_elements[faces, 1]
        ak = model.a[k - 1]
        jump = np.hstack([ak * np.einsum("fid,fd->fi", mesh.gradients[ep], n),
                          -ak * np.einsum("fid,fd->fi", mesh.gradients[em], n)])
        coef = model.gamma * mesh.h * length
        local.append(coef[:, None, None] * np.einsum("fi,fj->fij", jump, jump))
        dofs.append(np.hstack([space.element_dofs[k - 1, ep], space.element_dofs[k - 1, em]]))
    if not local:
        return sp.csr_matrix((space.ndof, space.ndof))
    return _scatter(space.ndof, np.concatenate(dofs), np.concatenate(local))


def assemble_fracture_lb(model: ModelSpec, topo: CutTopology, space: DofSpace):
    """Tangential stiffness of the conjugate average along every edge."""
    mesh = topo.mesh
    iq = topo.interface
    a_gam = np.array([e.a_gamma for e in topo.graph.edges])
    iq = iq.select(a_gam[iq.edge] > 0) if len(iq) else iq
    if len(iq) == 0:
        return sp.csr_matrix((space.ndof, space.ndof))
    k1, k2 = _kappa_arrays(model, topo, iq.edge)
    dt = np.einsum("qid,qd->qi", mesh.gradients[iq.elem], iq.tangents)
    vec = np.hstack([k2[:, None] * dt, k1[:, None] * dt])
    coef = iq.weights * a_gam[iq.edge]
    local = coef[:, None, None] * np.einsum("qi,qj->qij", vec, vec)
    dofs = np.hstack([space.element_dofs[iq.side1 - 1, iq.elem], space.element_dofs[iq.side2 - 1, iq.elem]])
    return _scatter(space.ndof, dofs, local)


def _node_element(topo, j, i):
    """Element holding the end segment of edge j at node i, and whether it is the start."""
    e = topo.graph.edges[j]
    start = i == e.endpoint_node_ids[0]
    node = topo.graph.nodes[i]
    for t, entries in topo.cuts.items():
        for jj, desc in entries:
            if jj != j:
                continue
            p = desc.points[0] if start else desc.points[-1]
            if np.array_equal(p, node):
                return t, desc, start
    raise NodeNotVertex(f"no element carries the end of edge {j} at node {i}")


def _average_coeffs(model, topo, space, t, j, weights):
    """DOFs and coefficients of <v>_* for edge j on element t, given per-vertex weights."""
    s1, s2 = topo.edge_sides[j]
    k1, k2 = model.edge_kappa(topo, j)
    d1 = space.element_dofs[s1 - 1, t]
    d2 = space.element_dofs[s2 - 1, t]
    if d1[0] < 0:
        d1 = d2
    if d2[0] < 0:
        d2 = d1
    return np.concatenate([d1, d2]), np.concatenate([k2 * weights, k1 * weights])


def _add(acc, dofs, coeffs, scale=1.0):
    for d, c in zip(dofs, coeffs):
        acc[d] = acc.get(d, 0.0) + scale * c


def node_block(model: ModelSpec, topo: CutTopology, space: DofSpace, i: int):
    """Junction consistency + penalty terms at node i: (dofs, dense matrix)."""
    from .geometry import edge_tangent_at_node

    graph = topo.graph
    mesh = topo.mesh
    h = mesh.h
    inc = graph.node_incidence[i]
    weights = model.node_weights(graph, i)
    x = graph.nodes[i]
    values, fluxes = {}, {}
    for j in inc:
        t, _desc, _start = _node_element(topo, j, i)
        lam = mesh.barycentric(np.array([t]), x[None, :])[0]
        tang = edge_tangent_at_node(graph, j, i)
        dt = mesh.gradients[t] @ tang
        values[j] = _average_coeffs(model, topo, space, t, j, lam)
        d, c = _average_coeffs(model, topo, space, t, j, dt)
        fluxes[j] = (d, graph.edges[j].a_gamma * c)

    devs = {}
    for j in inc:
        dev = {}
        _add(dev, *values[j])
        for k in inc:
            _add(dev, *values[k], scale=-weights[k])
        devs[j] = dev
    dofs = sorted({d for j in inc for d in list(devs[j]) + list(fluxes[j][0])})
    pos = {d: n for n, d in enumerate(dofs)}
    M = np.zeros((len(dofs), len(dofs)))
    pen = model.beta_gamma_value(graph) / h
    for j in inc:
        D = np.zeros(len(dofs))
        for d, c in devs[j].items():
            D[pos[d]] += c
        F = np.zeros(len(dofs))
        for d, c in zip(*fluxes[j]):
            F[pos[d]] += c
        M += pen * np.outer(D, D) - (np.outer(F, D) + np.outer(D, F))
    return np.array(dofs, dtype=int), M


def _node_vertex(mesh, x):
    hit = np.flatnonzero(np.all(mesh.vertices == x, axis=1))
    return int(hit[0]) if len(hit) else None


def point_stabilization_block(model: ModelSpec, topo: CutTopology, space: DofSpace, i: int):
    """Jumps of the tangential derivative of <v>_* where incident edges cross
    interior faces of the element patch around node i."""
    graph, mesh = topo.graph, topo.mesh
    v = _node_vertex(mesh, graph.nodes[i])
    star = np.flatnonzero(np.any(mesh.triangles == v, axis=1))
    nbrs = mesh.face_elements[mesh.element_faces[star].ravel()].ravel()
    patch = np.union1d(star, nbrs[nbrs >= 0])
    in_patch = np.zeros(len(mesh.triangles), dtype=bool)
    in_patch[patch] = True
    tol = 1e-10 * mesh.h
    rows = []
    for j in graph.node_incidence[i]:
        a_gam = graph.edges[j].a_gamma
        scale = model.gamma_point if model.gamma_point is not None else model.gamma * mesh.h * a_gam
        if scale == 0:
            continue
        pl = graph.edges[j].polyline
        for t in patch:
            for jj, desc in topo.cuts.get(int(t), []):
                if jj != j:
                    continue
                for p, seg in ((desc.points[0], desc.segment_ids[0]), (desc.points[-1], desc.segment_ids[-1])):
                    if np.hypot(*(p - graph.nodes[i])) <= tol:
                        continue
                    f = _face_through(mesh, t, p, tol)
                    if f is None:
                        continue
                    a, b = mesh.face_elements[f]
                    other = b if a == t else a
                    if other < 0 or other < t or not in_patch[other]:
                        continue
                    tang = pl[seg + 1] - pl[seg]
                    tang = tang / np.hypot(*tang)
                    d_in, c_in = _average_coeffs(model, topo, space, t, j, mesh.gradients[t] @ tang)
                    d_out, c_out = _average_coeffs(model, topo, space, other, j, mesh.gradients[other] @ tang)
                    rows.append((np.concatenate([d_in, d_out]), np.concatenate([c_in, -c_out]), scale))
    if not rows:
        return np.zeros(0, dtype=int), np.zeros((0, 0))
    dofs = np.unique(np.concatenate([r[0] for r in rows]))
    pos = {d: n for n, d in enumerate(dofs)}
    M = np.zeros((len(dofs), len(dofs)))
    for d, c, scale in rows:
        J = np.zeros(len(dofs))
        for dd, cc in zip(d, c):
            J[pos[dd]] += cc
        M += scale * np.outer(J, J)
    return dofs, M


def _face_through(mesh, t, p, tol):
    """Face of element t whose relative interior contains p, or None."""
    for f in mesh.element_faces[t]:
        a, b = mesh.vertices[mesh.faces[f]]
        d = b - a
        L = np.hypot(*d)
        s = np.dot(p - a, d) / L
        dist = abs(d[0] * (p - a)[1] - d[1] * (p - a)[0]) / L
        if dist <= tol and tol < s < L - tol:
            return f
    return None


def assemble_bifurcation_terms(model: ModelSpec, topo: CutTopology, space: DofSpace):
    """Junction terms for every node shared by two or more edges.

    Nodes on a single edge contribute nothing (their deviation from the
    nodal average vanishes identically), which gives the weak homogeneous
    Neumann end condition.
    """
    graph, mesh = topo.graph, topo.mesh
    rows, cols, vals = [], [], []
    for i in graph.bifurcation_nodes:
        if _node_vertex(mesh, graph.nodes[i]) is None:
            raise NodeNotVertex(f"bifurcation node {i} is not a mesh vertex")
        for dofs, M in (node_block(model, topo, space, i), point_stabilization_block(model, topo, space, i)):
            if len(dofs):
                rows.append(np.repeat(dofs, len(dofs)))
                cols.append(np.tile(dofs, len(dofs)))
                vals.append(M.ravel())
    if not rows:
        return sp.csr_matrix((space.ndof, space.ndof))
    return _symmetric_coo(space.ndof, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


def assemble_load(model: ModelSpec, topo: CutTopology, space: DofSpace):
    mesh = topo.mesh
    rhs = np.zeros(space.ndof)
    for k in range(1, topo.n_subdomains + 1):
        e, p, w = topo.bulk_quadrature(k)
        fv = _eval(model.f, p)
        if not np.any(fv):
            continue
        lam = mesh.barycentric(e, p)
        dofs = space.element_dofs[k - 1, e]
        rhs += np.bincount(dofs.ravel(), weights=((w * fv)[:, None] * lam).ravel(), minlength=space.ndof)
    iq = topo.interface
    if len(iq):
        fg = _edge_source(model.f_gamma, iq.edge, iq.points)
        if np.any(fg):
            k1, k2 = _kappa_arrays(model, topo, iq.edge)
            lam = mesh.barycentric(iq.elem, iq.points)
            wf = iq.weights * fg
            vec = np.hstack([(wf * k2)[:, None] * lam, (wf * k1)[:, None] * lam])
            dofs = np.hstack([space.element_dofs[iq.side1 - 1, iq.elem], space.element_dofs[iq.side2 - 1, iq.elem]])
            rhs += np.bincount(dofs.ravel(), weights=vec.ravel(), minlength=space.ndof)
    return rhs


@dataclass(eq=False)
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def ndof(self):
        return self.matrix.shape[0]

    @property
    def free(self):
        mask = np.ones(self.ndof, dtype=bool)
        mask[self.constrained] = False
        return np.flatnonzero(mask)

    def reduced(self):
        """Matrix and right-hand side on the free DOFs after eliminating Dirichlet values."""
        free = self.free
        A = self.matrix.tocsr()
        A_ff = A[free][:, free]
        b = self.rhs[free]
        if len(self.constrained):
            b = b - A[free][:, self.constrained] @ self.values
        return A_ff.tocsr(), b

    def expand(self, x_free):
        x = np.zeros(self.ndof)
        x[self.free] = x_free
        x[self.constrained] = self.values
        return x


def assemble_matrix(model: ModelSpec, topo: CutTopology, space: DofSpace, parts=False):
    terms = {
        "bulk": assemble_bulk(model, topo, space),
        "nitsche": assemble_nitsche_interface(model, topo, space),
        "ghost": assemble_ghost_penalty(model, topo, space),
        "fracture": assemble_fracture_lb(model, topo, space),
        "junction": assemble_bifurcation_terms(model, topo, space),
    }
    A = (terms["bulk"] + terms["nitsche"] + terms["ghost"] + terms["fracture"] + terms["junction"]).tocsr()
    return (A, terms) if parts else A


def assemble_system(model: ModelSpec, topo: CutTopology, space: DofSpace) -> LinearSystem:
    return LinearSystem(assemble_matrix(model, topo, space), assemble_load(model, topo, space))


def apply_boundary_conditions(system: LinearSystem, model: ModelSpec, space: DofSpace) -> LinearSystem:
    """Strong Dirichlet data on boundary DOFs of every copy; Neumann sides are natural.

    Where two Dirichlet sides meet, the later side in (left, right, bottom,
    top) order sets the corner value.
    """
    mesh = space.mesh
    fixed = {}
    for side in SIDES:
        cond = model.bc.get(side, NEUMANN)
        if cond == NEUMANN:
            continue
        verts = mesh.side_vertices(side)
        for k in range(1, space.n_subdomains + 1):
            dofs = space.dof_of[k - 1, verts]
            sel = dofs >= 0
            if not sel.any():
                continue
            vals = cond(mesh.vertices[verts[sel]], k)
            fixed.update(zip(dofs[sel].tolist(), vals.tolist()))
    dofs = np.array(sorted(fixed), dtype=int)
    vals = np.array([fixed[d] for d in dofs], dtype=float)
    return LinearSystem(system.matrix, system.rhs, dofs, vals)
