"""The doubled-element P1 space: one continuous P1 copy per subdomain,
living on that subdomain's active mesh."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutsideCoverage
from .mesh import CutTopology, Mesh


@dataclass(frozen=True, eq=False)
class DofSpace:
    mesh: Mesh
    topo: CutTopology
    dof_of: np.ndarray  # (N, nv), -1 where vertex is not in copy k
    element_dofs: np.ndarray  # (N, nt, 3), -1 where copy k is absent

    @property
    def ndof(self):
        return int(self.dof_of.max()) + 1 if self.dof_of.size else 0

    @property
    def n_subdomains(self):
        return self.dof_of.shape[0]

    def copies_of_element(self, t):
        """Subdomain indices (1-based) that carry a copy of element t."""
        return [k + 1 for k in np.flatnonzero(self.element_dofs[:, t, 0] >= 0)]

    def dof_subdomain(self):
        """Subdomain owning each DOF."""
        out = np.empty(self.ndof, dtype=int)
        for k in range(self.n_subdomains):
            d = self.dof_of[k]
            out[d[d >= 0]] = k + 1
        return out

    def dof_vertex(self):
        out = np.empty(self.ndof, dtype=int)
        for k in range(self.n_subdomains):
            v = np.flatnonzero(self.dof_of[k] >= 0)
            out[self.dof_of[k, v]] = v
        return out

    def boundary_dofs(self, side=None):
        """DOFs on the outer boundary (or on one side), all copies."""
        verts = self.mesh.boundary_vertices if side is None else self.mesh.side_vertices(side)
        d = self.dof_of[:, verts].ravel()
        return np.sort(d[d >= 0])


def build_dof_space(mesh: Mesh, topo: CutTopology) -> DofSpace:
    N = topo.n_subdomains
    nv = len(mesh.vertices)
    dof_of = -np.ones((N, nv), dtype=int)
    edofs = -np.ones((N, len(mesh.triangles), 3), dtype=int)
    offset = 0
    for k in range(N):
        elems = np.flatnonzero(topo.active_mask[k])
        verts = np.unique(mesh.triangles[elems])
        dof_of[k, verts] = offset + np.arange(len(verts))
        offset += len(verts)
        edofs[k, elems] = dof_of[k, mesh.triangles[elems]]
    return DofSpace(mesh, topo, dof_of, edofs)


def eval_basis(mesh: Mesh, element: int, bary):
    """P1 hat values and gradients on one element at a barycentric point."""
    bary = np.asarray(bary, dtype=float)
    return bary.copy(), mesh.gradients[element].copy()


@dataclass(frozen=True, eq=False)
class SolutionField:
    space: DofSpace
    coefficients: np.ndarray

    def copy_values(self, elems, points, k):
        """Copy-k values at points lying in the given elements (NaN where the copy is absent)."""
        mesh = self.space.mesh
        dofs = self.space.element_dofs[k - 1, elems]
        lam = mesh.barycentric(elems, points)
        vals = np.einsum("ij,ij->i", lam, self.coefficients[np.maximum(dofs, 0)])
        return np.where(dofs[:, 0] >= 0, vals, np.nan)

    def copy_gradients(self, elems, k):
        mesh = self.space.mesh
        dofs = self.space.element_dofs[k - 1, elems]
        g = np.einsum("eij,ei->ej", mesh.gradients[elems], self.coefficients[np.maximum(dofs, 0)])
        g[dofs[:, 0] < 0] = np.nan
        return g

    def evaluate(self, points, side=None):
        """Values at points; ``side=None`` picks the subdomain containing each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if side is None:
            sides = self.space.topo.subdomains.locate(pts)
            if np.any(sides == 0):
                raise OutsideCoverage("point on a fracture or outside the domain; pass side explicitly")
        else:
            sides = np.full(len(pts), int(side))
        pi, ei = self.space.mesh.candidates(pts)
        ok = self.space.element_dofs[sides[pi] - 1, ei, 0] >= 0
        pi, ei = pi[ok], ei[ok]
        first = np.ones(len(pi), dtype=bool)
        first[1:] = pi[1:] != pi[:-1]
        elems = -np.ones(len(pts), dtype=int)
        elems[pi[first]] = ei[first]
        if np.any(elems < 0):
            raise OutsideCoverage("requested copy is not active at the point")
        out = np.empty(len(pts))
        for k in np.unique(sides):
            sel = sides == k
            out[sel] = self.copy_values(elems[sel], pts[sel], k)
        return out


def evaluate_solution(field: SolutionField, p, side=None):
    return float(field.evaluate(np.asarray(p, dtype=float)[None, :], side)[0])
