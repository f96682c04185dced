"""Background triangulation and its classification against a fracture graph.

The cut topology carries everything the assembly needs about the
geometry: which elements are cut, the active element set of every
subdomain, quadrature on each side of a cut element, quadrature along the
fracture pieces inside each element, and the faces used by the ghost
penalty.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import shapely
from shapely.ops import polygonize, unary_union

from .errors import EmptyCut, GeometryError, MultipleCrossings, NodeNotVertex, SnapTooFar
from .geometry import FractureGraph, SubdomainMap, intersect_triangle
from .quadrature import TRI_WEIGHTS, segment_rule, triangle_rule

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    domain: tuple

    @cached_property
    def _face_data(self):
        tri = self.triangles
        local = np.stack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]], axis=1)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        faces, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        elem_faces = inverse.reshape(-1, 3)
        nbr = -np.ones((len(faces), 2), dtype=int)
        owner = np.repeat(np.arange(len(tri)), 3)
        order = np.argsort(inverse, kind="stable")
        first = np.ones(len(order), dtype=bool)
        first[1:] = inverse[order][1:] != inverse[order][:-1]
        nbr[inverse[order][first], 0] = owner[order][first]
        nbr[inverse[order][~first], 1] = owner[order][~first]
        return faces, nbr, elem_faces

    @property
    def faces(self):
        return self._face_data[0]

    @property
    def face_elements(self):
        """Neighbouring elements per face; second entry is -1 on the boundary."""
        return self._face_data[1]

    @property
    def element_faces(self):
        return self._face_data[2]

    @cached_property
    def interior_faces(self):
        return np.flatnonzero(self.face_elements[:, 1] >= 0)

    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def gradients(self):
        """Gradients of the P1 hat functions, shape (nt, 3, 2)."""
        p = self.vertices[self.triangles]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=1)
        inv = np.linalg.inv(jac)
        g12 = np.transpose(inv, (0, 2, 1))
        return np.concatenate([-(g12[:, 0] + g12[:, 1])[:, None], g12], axis=1)

    @cached_property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def diameters(self):
        p = self.vertices[self.triangles]
        d = p - np.roll(p, 1, axis=1)
        return np.hypot(d[..., 0], d[..., 1]).max(axis=1)

    @property
    def h(self):
        return float(self.diameters.max())

    def barycentric(self, elems, points):
        elems = np.asarray(elems)
        x = np.asarray(points, dtype=float) - self.centroids[elems]
        return 1.0 / 3.0 + np.einsum("...ij,...j->...i", self.gradients[elems], x)

    @cached_property
    def _tree(self):
        return shapely.STRtree(shapely.polygons(self.vertices[self.triangles]))

    def candidates(self, points):
        """(point index, element index) pairs for every closed element containing a point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        pi, ei = self._tree.query(shapely.points(pts), predicate="intersects")
        order = np.lexsort((ei, pi))
        return pi[order], ei[order]

    def locate(self, points):
        """Containing element per point (-1 outside). Points on shared faces go to the lowest index."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = -np.ones(len(pts), dtype=int)
        pi, ei = self.candidates(pts)
        first = np.ones(len(pi), dtype=bool)
        first[1:] = pi[1:] != pi[:-1]
        out[pi[first]] = ei[first]
        return out

    def side_vertices(self, side):
        x0, y0, x1, y1 = self.domain
        col, val = {"left": (0, x0), "right": (0, x1), "bottom": (1, y0), "top": (1, y1)}[side]
        return np.flatnonzero(self.vertices[:, col] == val)

    @cached_property
    def boundary_vertices(self):
        return np.unique(np.concatenate([self.side_vertices(s) for s in SIDES]))


def build_structured_mesh(domain, n, snap_nodes=()) -> Mesh:
    """n x n grid of squares, each split along its (i, j)-(i+1, j+1) diagonal.

    The vertex nearest to each snap node is moved onto it. Vertices on a
    boundary side only move to nodes on that same side.
    """
    if n < 2:
        raise GeometryError("need at least 2 subdivisions per axis")
    x0, y0, x1, y1 = map(float, domain)
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (j * (n + 1) + i).ravel()
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    tris = np.concatenate([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])
    h0 = float(np.hypot(xs[1] - xs[0], ys[1] - ys[0]))

    taken = set()
    for p in np.asarray(snap_nodes, dtype=float).reshape(-1, 2):
        ok = np.ones(len(verts), dtype=bool)
        for col, lo, hi in ((0, x0, x1), (1, y0, y1)):
            for val in (lo, hi):
                on_side = verts[:, col] == val
                if p[col] != val:
                    ok &= ~on_side
        d = np.hypot(*(verts - p).T)
        d[~ok] = np.inf
        v = int(np.argmin(d))
        if d[v] > h0 / 2 or v in taken:
            raise SnapTooFar(f"node ({p[0]:.6g}, {p[1]:.6g}) has no free vertex within h/2")
        taken.add(v)
        verts[v] = p

    mesh = Mesh(verts, tris, (x0, y0, x1, y1))
    if np.any(mesh.areas <= 0):
        raise GeometryError("snapping inverted an element")
    diam = mesh.diameters
    if diam.max() / diam.min() > 4.0:
        raise GeometryError("mesh fails the quasi-uniformity bound")
    return mesh


def write_mesh(mesh: Mesh, path):
    """Plain-text dump: vertex count and coordinates, then triangle count and indices."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"vertices {len(mesh.vertices)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x!r} {y!r}\n")
        fh.write(f"triangles {len(mesh.triangles)}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")


@dataclass(frozen=True, eq=False)
class InterfaceQuadrature:
    """Flat arrays over all interface quadrature points.

    ``normals`` point from ``side1`` towards ``side2`` (the exterior normal
    of side 1). On edges that do not separate two subdomains side1 == side2.
    """

    elem: np.ndarray
    edge: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    side1: np.ndarray
    side2: np.ndarray

    def select(self, mask):
        return InterfaceQuadrature(*(getattr(self, f)[mask] for f in self.__dataclass_fields__))

    def of(self, elem, edge=None):
        mask = self.elem == elem
        if edge is not None:
            mask &= self.edge == edge
        return self.select(mask)

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True, eq=False)
class CutTopology:
    mesh: Mesh
    graph: FractureGraph
    subdomains: SubdomainMap
    element_class: np.ndarray  # 0 = cut, k >= 1 = inside subdomain k
    active_mask: np.ndarray  # (N, nt)
    cuts: dict  # elem -> list of (edge id, CutDescription)
    piece_area: dict  # (elem, k) -> area of T ∩ Ω_k
    cut_bulk: tuple  # (elem, side, points, weights) over cut pieces
    interface: InterfaceQuadrature
    edge_sides: tuple  # per edge (side1, side2)
    edge_normal_sign: tuple
    cut_faces: dict  # k -> face ids

    @property
    def n_subdomains(self):
        return self.active_mask.shape[0]

    @property
    def cut_elements(self):
        return np.flatnonzero(self.element_class == 0)

    def active(self, k):
        return np.flatnonzero(self.active_mask[k - 1])

    def bulk_quadrature(self, k):
        """Quadrature on Ω_k: (elements, points (m, 2), weights (m,))."""
        mesh = self.mesh
        inside = np.flatnonzero(self.element_class == k)
        pts, w = triangle_rule(mesh.vertices[mesh.triangles[inside]])
        e_in = np.repeat(inside, len(TRI_WEIGHTS))
        elem, side, cpts, cw = self.cut_bulk
        sel = side == k
        return (np.concatenate([e_in, elem[sel]]),
                np.concatenate([pts.reshape(-1, 2), cpts[sel]]),
                np.concatenate([w.ravel(), cw[sel]]))

    def side_area(self, k):
        inside = self.element_class == k
        return float(self.mesh.areas[inside].sum()
                     + sum(a for (e, kk), a in self.piece_area.items() if kk == k))


def edge_sides(graph: FractureGraph, subdomains: SubdomainMap):
    """Subdomains left/right of each edge, as (side1, side2, sign).

    side1 <= side2; the interface normal from side1 towards side2 is
    ``sign`` times the left normal of the edge's direction.
    """
    out = []
    for j, e in enumerate(graph.edges):
        pts = e.polyline
        m = (len(pts) - 1) // 2
        d = pts[m + 1] - pts[m]
        seg = np.hypot(*d)
        t = d / seg
        left_n = np.array([-t[1], t[0]])
        mid = 0.5 * (pts[m] + pts[m + 1])
        eps = 1e-4 * seg
        left, right = subdomains.locate(np.array([mid + eps * left_n, mid - eps * left_n]))
        if left == 0 or right == 0:
            raise GeometryError(f"cannot resolve the subdomains beside edge {j}")
        s1, s2 = min(left, right), max(left, right)
        sign = -1.0 if left == s1 else 1.0
        out.append((int(s1), int(s2), sign))
    return out


def compute_cut_topology(mesh: Mesh, graph: FractureGraph, subdomains: SubdomainMap | None = None) -> CutTopology:
    if subdomains is None:
        subdomains = graph.subdomains
    nt = len(mesh.triangles)
    N = subdomains.n_subdomains
    tri_xy = mesh.vertices[mesh.triangles]
    sides = edge_sides(graph, subdomains)

    cuts = {}
    tree = mesh._tree
    for j, e in enumerate(graph.edges):
        for t in np.sort(tree.query(e.line, predicate="intersects")):
            desc = intersect_triangle(e, tri_xy[t])
            if desc is not None:
                cuts.setdefault(int(t), []).append((j, desc))

    element_class = subdomains.locate(mesh.centroids)
    cut_ids = np.array(sorted(cuts), dtype=int)
    element_class[cut_ids] = 0
    if np.any(element_class < 0) or np.any(element_class[np.setdiff1d(np.arange(nt), cut_ids)] == 0):
        raise GeometryError("uncut element centroid outside every subdomain")

    piece_area = {}
    cb_elem, cb_side, cb_pts, cb_w = [], [], [], []
    iq = {k: [] for k in ("elem", "edge", "points", "weights", "tangents", "normals", "side1", "side2")}
    for t in cut_ids:
        entries = cuts[t]
        _check_multi_edge(graph, mesh, t, entries)
        tri_poly = shapely.Polygon(tri_xy[t])
        splitters = [_splitter(graph.edges[j].polyline, d, mesh.diameters[t]) for j, d in entries]
        noded = unary_union([tri_poly.exterior] + splitters)
        pieces = [p for p in polygonize(noded) if p.area > 0 and tri_poly.covers(p.representative_point())]
        labels = subdomains.locate(np.array([p.representative_point().coords[0] for p in pieces]))
        if np.any(labels == 0):
            raise GeometryError(f"unlabelled cut piece in element {t}")
        present = set(labels.tolist())
        for j, _ in entries:
            s1, s2, _sign = sides[j]
            if s1 != s2 and not {s1, s2} <= present:
                raise EmptyCut(f"element {t} is crossed by edge {j} but lacks a piece on one side; "
                               "the fracture probably runs along a mesh face")
        for piece, k in zip(pieces, labels):
            k = int(k)
            piece_area[(t, k)] = piece_area.get((t, k), 0.0) + piece.area
            sub = shapely.get_parts(shapely.constrained_delaunay_triangles(piece))
            subtri = shapely.get_coordinates(sub).reshape(-1, 4, 2)[:, :3]
            pts, w = triangle_rule(subtri)
            cb_elem.append(np.full(w.size, t))
            cb_side.append(np.full(w.size, k))
            cb_pts.append(pts.reshape(-1, 2))
            cb_w.append(w.ravel())
        for j, desc in entries:
            s1, s2, sign = sides[j]
            a, b = desc.points[:-1], desc.points[1:]
            pts, w = segment_rule(a, b)
            tan = (b - a) / np.hypot(*(b - a).T)[:, None]
            nrm = sign * np.column_stack([-tan[:, 1], tan[:, 0]])
            m = w.size
            iq["elem"].append(np.full(m, t))
            iq["edge"].append(np.full(m, j))
            iq["points"].append(pts.reshape(-1, 2))
            iq["weights"].append(w.ravel())
            iq["tangents"].append(np.repeat(tan, 3, axis=0))
            iq["normals"].append(np.repeat(nrm, 3, axis=0))
            iq["side1"].append(np.full(m, s1))
            iq["side2"].append(np.full(m, s2))

    def cat(xs, shape):
        return np.concatenate(xs) if xs else np.zeros(shape)

    interface = InterfaceQuadrature(
        cat(iq["elem"], 0).astype(int), cat(iq["edge"], 0).astype(int),
        cat(iq["points"], (0, 2)), cat(iq["weights"], 0),
        cat(iq["tangents"], (0, 2)), cat(iq["normals"], (0, 2)),
        cat(iq["side1"], 0).astype(int), cat(iq["side2"], 0).astype(int))
    cut_bulk = (cat(cb_elem, 0).astype(int), cat(cb_side, 0).astype(int), cat(cb_pts, (0, 2)), cat(cb_w, 0))

    active = np.zeros((N, nt), dtype=bool)
    for k in range(1, N + 1):
        active[k - 1, element_class == k] = True
    for (t, k) in piece_area:
        active[k - 1, t] = True

    is_cut = element_class == 0
    fe = mesh.face_elements
    inner = mesh.interior_faces
    cut_faces = {}
    for k in range(1, N + 1):
        a, b = fe[inner, 0], fe[inner, 1]
        sel = active[k - 1, a] & active[k - 1, b] & (is_cut[a] | is_cut[b])
        cut_faces[k] = inner[sel]

    return CutTopology(
        mesh=mesh, graph=graph, subdomains=subdomains, element_class=element_class,
        active_mask=active, cuts=cuts, piece_area=piece_area, cut_bulk=cut_bulk,
        interface=interface, edge_sides=tuple((s1, s2) for s1, s2, _ in sides),
        edge_normal_sign=tuple(s for _, _, s in sides), cut_faces=cut_faces)


def _splitter(polyline, desc, hT):
    """Polyline stretch that crosses the triangle boundary robustly.

    One extra segment on each side, plus a short extrapolation, so chain
    ends lying on a face up to rounding still cut the triangle.
    """
    lo = max(desc.segment_ids[0] - 1, 0)
    hi = min(desc.segment_ids[-1] + 2, len(polyline) - 1)
    pts = polyline[lo:hi + 1].copy()
    for end, nxt in ((0, 1), (-1, -2)):
        d = pts[end] - pts[nxt]
        pts[end] = pts[end] + 1e-6 * hT * d / np.hypot(*d)
    return shapely.LineString(pts)


def _check_multi_edge(graph, mesh, t, entries):
    """An element may carry several edges only if they share a node at one of its vertices."""
    if len(entries) < 2:
        return
    tv = mesh.vertices[mesh.triangles[t]]
    common = None
    for j, _ in entries:
        ids = set(graph.edges[j].endpoint_node_ids)
        common = ids if common is None else common & ids
    ok = any(np.any(np.all(tv == graph.nodes[i], axis=1)) for i in (common or ()))
    if not ok and common:
        raise NodeNotVertex(f"element {t} holds node(s) {sorted(common)} shared by its edges, "
                            "but no mesh vertex sits on them")
    if not ok:
        raise MultipleCrossings(f"element {t} is crossed by several edges away from a mesh-vertex node")
