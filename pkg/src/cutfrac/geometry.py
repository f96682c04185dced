"""Fracture networks as planar graphs of polylines, and the geometric
queries the cut discretization needs.

Curves are stored as polylines. A network splits the (rectangular) domain
into connected components; those are found by polygonizing the fracture
lines together with the domain boundary, so edges that end inside the
domain (dangling tips) do not create extra subdomains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely
from shapely.geometry import LineString, Point, box
from shapely.ops import polygonize, unary_union

from .errors import (
    DanglingEndpoint,
    EdgeCrossing,
    GeometryError,
    MultipleCrossings,
    NotIncident,
    OnInterface,
)

SNAP_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Edge:
    polyline: np.ndarray
    a_gamma: float = 0.0
    endpoint_node_ids: tuple = (0, 1)

    def __post_init__(self):
        pts = np.array(self.polyline, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise GeometryError("edge polyline needs at least two 2D points")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("edge polyline has non-finite coordinates")
        seg = np.diff(pts, axis=0)
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) == 0.0):
            raise GeometryError("edge polyline has repeated consecutive points")
        if not self.a_gamma >= 0.0:
            raise GeometryError(f"fracture permeability must be >= 0, got {self.a_gamma}")
        pts.setflags(write=False)
        object.__setattr__(self, "polyline", pts)
        object.__setattr__(self, "a_gamma", float(self.a_gamma))
        object.__setattr__(self, "endpoint_node_ids", tuple(int(i) for i in self.endpoint_node_ids))

    @property
    def length(self):
        seg = np.diff(self.polyline, axis=0)
        return float(np.hypot(seg[:, 0], seg[:, 1]).sum())

    @cached_property
    def line(self):
        return LineString(self.polyline)

    def with_permeability(self, a_gamma):
        return Edge(self.polyline, a_gamma, self.endpoint_node_ids)


@dataclass(frozen=True, eq=False)
class CutDescription:
    """Part of one edge inside one triangle: an ordered chain of points.

    ``segment_ids[k]`` is the polyline segment that carries the piece
    ``points[k] -> points[k+1]``.
    """

    points: np.ndarray
    segment_ids: np.ndarray

    @property
    def entry(self):
        return self.points[0]

    @property
    def exit(self):
        return self.points[-1]

    @property
    def length(self):
        d = np.diff(self.points, axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())


@dataclass(frozen=True, eq=False)
class FractureGraph:
    nodes: np.ndarray
    edges: tuple
    domain: tuple | None = None
    node_incidence: tuple = field(init=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).reshape(-1, 2)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "node_incidence", _incidence(len(nodes), self.edges))

    @property
    def diameter(self):
        if self.domain is not None:
            x0, y0, x1, y1 = self.domain
            return float(np.hypot(x1 - x0, y1 - y0))
        pts = np.vstack([self.nodes] + [e.polyline for e in self.edges])
        span = pts.max(axis=0) - pts.min(axis=0)
        return float(np.hypot(*span)) or 1.0

    @property
    def bifurcation_nodes(self):
        return [i for i, inc in enumerate(self.node_incidence) if len(inc) >= 2]

    @cached_property
    def lines(self):
        return unary_union([e.line for e in self.edges]) if self.edges else shapely.GeometryCollection()

    @cached_property
    def subdomains(self) -> "SubdomainMap":
        if self.domain is None:
            raise GeometryError("graph has no domain; subdomains are undefined")
        return SubdomainMap.from_graph(self)

    def with_permeabilities(self, a_gamma):
        """Copy of the graph with new per-edge permeabilities."""
        a_gamma = np.broadcast_to(np.asarray(a_gamma, dtype=float), (len(self.edges),))
        edges = [e.with_permeability(a) for e, a in zip(self.edges, a_gamma)]
        return FractureGraph(self.nodes, edges, self.domain)


def _incidence(n_nodes, edges):
    inc = [[] for _ in range(n_nodes)]
    for j, e in enumerate(edges):
        for i in sorted(set(e.endpoint_node_ids)):
            if not 0 <= i < n_nodes:
                raise GeometryError(f"edge {j} references missing node {i}")
            inc[i].append(j)
    return tuple(tuple(s) for s in inc)


def build_fracture_graph(raw_nodes, raw_edges, domain=None) -> FractureGraph:
    """Validate and assemble a fracture graph.

    ``raw_edges`` items are ``(polyline, a_gamma)`` pairs, or dicts with
    keys ``points``, ``a_gamma`` and optionally ``endpoints``. Polyline ends
    are snapped onto the node coordinates they match.
    """
    nodes = np.array(raw_nodes, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(nodes)):
        raise GeometryError("non-finite node coordinates")
    if domain is not None:
        x0, y0, x1, y1 = map(float, domain)
        if not (x1 > x0 and y1 > y0):
            raise GeometryError(f"degenerate domain {domain}")
        domain = (x0, y0, x1, y1)
        diam = float(np.hypot(x1 - x0, y1 - y0))
        # nodes within snapping distance of the boundary are put exactly on it
        for col, lo, hi in ((0, x0, x1), (1, y0, y1)):
            c = nodes[:, col]
            c[np.abs(c - lo) <= SNAP_RTOL * diam] = lo
            c[np.abs(c - hi) <= SNAP_RTOL * diam] = hi
    else:
        allpts = [nodes] + [np.asarray(_edge_points(e), dtype=float) for e in raw_edges]
        allpts = np.vstack(allpts)
        diam = float(np.hypot(*(allpts.max(0) - allpts.min(0)))) or 1.0
    tol = SNAP_RTOL * diam

    edges = []
    for j, raw in enumerate(raw_edges):
        pts = np.array(_edge_points(raw), dtype=float)
        a_gamma = raw["a_gamma"] if isinstance(raw, dict) else raw[1]
        given = raw.get("endpoints") if isinstance(raw, dict) else None
        ends = []
        for k, p in ((0, pts[0]), (1, pts[-1])):
            d = np.hypot(*(nodes - p).T) if len(nodes) else np.array([])
            if given is not None:
                i = int(given[k])
                if not 0 <= i < len(nodes) or d[i] > tol:
                    raise DanglingEndpoint(f"edge {j} endpoint {k} does not match node {i}")
            else:
                if len(d) == 0 or d.min() > tol:
                    raise DanglingEndpoint(f"edge {j} endpoint {tuple(p)} matches no node")
                i = int(np.argmin(d))
            ends.append(i)
        if ends[0] == ends[1]:
            raise GeometryError(f"edge {j} is a loop; split closed curves into two edges")
        pts[0] = nodes[ends[0]]
        pts[-1] = nodes[ends[-1]]
        edges.append(Edge(pts, a_gamma, tuple(ends)))

    for j, e in enumerate(edges):
        if not e.line.is_simple:
            raise GeometryError(f"edge {j} self-intersects")
    _check_crossings(nodes, edges, tol)
    return FractureGraph(nodes, edges, domain)


def _edge_points(raw):
    return raw["points"] if isinstance(raw, dict) else raw[0]


def _check_crossings(nodes, edges, tol):
    for a in range(len(edges)):
        for b in range(a + 1, len(edges)):
            inter = edges[a].line.intersection(edges[b].line)
            if inter.is_empty:
                continue
            if inter.length > 0:
                raise EdgeCrossing(f"edges {a} and {b} overlap")
            shared = set(edges[a].endpoint_node_ids) & set(edges[b].endpoint_node_ids)
            for p in shapely.get_coordinates(inter):
                if not any(np.hypot(*(nodes[i] - p)) <= tol for i in shared):
                    raise EdgeCrossing(f"edges {a} and {b} cross at ({p[0]:.6g}, {p[1]:.6g})")


class SubdomainMap:
    """Connected components of the domain minus the fracture lines.

    Subdomains are numbered 1..N, ordered by distance from the lower-left
    corner of the domain (ties broken by a representative point), so a
    region touching that corner is always subdomain 1.
    """

    def __init__(self, polygons, lines, domain):
        self.polygons = list(polygons)
        self.lines = lines
        self.domain = domain
        for poly in self.polygons:
            shapely.prepare(poly)

    @classmethod
    def from_graph(cls, graph: FractureGraph):
        x0, y0, x1, y1 = graph.domain
        rect = box(x0, y0, x1, y1)
        noded = unary_union([rect.exterior] + [e.line for e in graph.edges])
        polys = [p for p in polygonize(noded) if rect.covers(p.representative_point())]
        corner = Point(x0, y0)

        def key(p):
            rp = p.representative_point()
            return (round(p.distance(corner), 12), round(rp.y, 12), round(rp.x, 12))

        return cls(sorted(polys, key=key), graph.lines, graph.domain)

    @property
    def n_subdomains(self):
        return len(self.polygons)

    def locate(self, points):
        """Subdomain index per point (0 where no component contains it). No tolerance."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts), dtype=int)
        for k, poly in enumerate(self.polygons, start=1):
            todo = out == 0
            if not todo.any():
                break
            hit = shapely.contains_xy(poly, pts[todo, 0], pts[todo, 1])
            out[np.flatnonzero(todo)[hit]] = k
        return out

    def classify(self, p, tol=None):
        p = np.asarray(p, dtype=float)
        if tol is None:
            tol = 1e-10 * _diam(self.domain)
        if not self.lines.is_empty and self.lines.distance(Point(p)) <= tol:
            raise OnInterface(f"point ({p[0]:.6g}, {p[1]:.6g}) lies on a fracture")
        k = int(self.locate(p[None, :])[0])
        if k == 0:
            raise GeometryError(f"point ({p[0]:.6g}, {p[1]:.6g}) is outside the domain")
        return k

    def __call__(self, p):
        return self.classify(p)


def _diam(domain):
    x0, y0, x1, y1 = domain
    return float(np.hypot(x1 - x0, y1 - y0))


def classify_point(graph: FractureGraph, p, tol=None) -> int:
    return graph.subdomains.classify(p, tol)


def _ccw(tri):
    tri = np.asarray(tri, dtype=float)
    e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
    area2 = e1[0] * e2[1] - e1[1] * e2[0]
    if area2 == 0:
        raise GeometryError("degenerate triangle")
    return tri if area2 > 0 else tri[[0, 2, 1]]


def _clip_segments(p0, d, tri):
    """Cyrus-Beck clip of segments p0 + t d, t in [0, 1], against a ccw triangle.

    Returns the indices and parameter windows [t0, t1] of surviving pieces
    (zero-length touches removed).
    """
    lo = np.zeros(len(d))
    hi = np.ones(len(d))
    alive = np.ones(len(d), dtype=bool)
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        inward = np.array([a[1] - b[1], b[0] - a[0]])
        num = (p0 - a) @ inward
        den = d @ inward
        alive &= ~((den == 0) & (num < 0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -num / den
        lo = np.where(den > 0, np.maximum(lo, t), lo)
        hi = np.where(den < 0, np.minimum(hi, t), hi)
    seglen = np.hypot(d[:, 0], d[:, 1])
    scale = np.abs(tri).max() + 1.0
    keep = alive & ((hi - lo) * seglen > 1e-14 * scale)
    idx = np.flatnonzero(keep)
    return idx, lo[idx], hi[idx]


def intersect_triangle(edge: Edge, tri) -> CutDescription | None:
    """The part of ``edge`` inside the closed triangle, or None.

    Raises MultipleCrossings when the edge enters the triangle more than once.
    """
    tri = _ccw(tri)
    pts = edge.polyline
    lo_b, hi_b = tri.min(axis=0), tri.max(axis=0)
    smin = np.minimum(pts[:-1], pts[1:])
    smax = np.maximum(pts[:-1], pts[1:])
    near = np.flatnonzero(np.all(smax >= lo_b, axis=1) & np.all(smin <= hi_b, axis=1))
    if len(near) == 0:
        return None
    k, t0, t1 = _clip_segments(pts[near], pts[near + 1] - pts[near], tri)
    if len(k) == 0:
        return None
    idx = near[k]
    eps = 1e-12
    breaks = [k for k in range(1, len(idx))
              if not (idx[k] == idx[k - 1] + 1 and t1[k - 1] >= 1 - eps and t0[k] <= eps)]
    if breaks:
        raise MultipleCrossings("edge crosses the same triangle more than once; refine the mesh")
    p0 = pts[idx]
    d = pts[idx + 1] - p0
    starts = p0 + t0[:, None] * d
    ends = p0 + t1[:, None] * d
    # reuse exact polyline vertices where the chain passes through them
    starts[t0 == 0] = pts[idx[t0 == 0]]
    ends[t1 == 1] = pts[idx[t1 == 1] + 1]
    chain = np.vstack([starts, ends[-1:]])
    return CutDescription(chain, idx)


def edge_tangent_at_node(graph: FractureGraph, j: int, i: int) -> np.ndarray:
    """Exterior unit tangent of edge ``j`` at its end node ``i``."""
    e = graph.edges[j]
    pts = e.polyline
    if i == e.endpoint_node_ids[0]:
        t = pts[0] - pts[1]
    elif i == e.endpoint_node_ids[1]:
        t = pts[-1] - pts[-2]
    else:
        raise NotIncident(f"node {i} is not an endpoint of edge {j}")
    return t / np.hypot(*t)
