"""Benchmark problems: two circular-interface cases with closed-form
solutions and a bifurcating five-edge network without one.

Curved fractures are polylines whose resolution follows the mesh, so the
geometric error stays well below the discretization error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .assembly import NEUMANN, Dirichlet, ModelSpec
from .geometry import FractureGraph, build_fracture_graph

MIN_SEGMENTS = 512


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Closed-form solution as one (value, gradient) branch per subdomain.

    Each branch is the formula of its subdomain, defined (and smooth)
    across the fractures, so it can be evaluated at any point.
    """

    branches: dict

    def value(self, points, k):
        return np.asarray(self.branches[int(k)][0](np.atleast_2d(points)), dtype=float)

    def gradient(self, points, k):
        return np.asarray(self.branches[int(k)][1](np.atleast_2d(points)), dtype=float)

    def dirichlet(self):
        return Dirichlet(lambda p, k: self.value(p, k))


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    name: str
    domain: tuple
    model: ModelSpec
    build_graph: Callable  # n (or None) -> FractureGraph
    exact: ExactSolution | None = None
    curves: tuple = ()  # per edge: t in [0, 1] -> exact points, for the oracle
    a_gamma: tuple | None = None
    info: dict = field(default_factory=dict)

    def graph_for(self, n=None) -> FractureGraph:
        g = self.build_graph(n)
        return g if self.a_gamma is None else g.with_permeabilities(self.a_gamma)

    @property
    def graph(self) -> FractureGraph:
        return self.graph_for(None)

    def with_overrides(self, beta=None, gamma=None, beta_gamma=None, a_gamma=None, f_gamma=None):
        """Copy with solver parameters or fracture permeabilities replaced."""
        changes = {k: v for k, v in (("beta", beta), ("gamma", gamma), ("beta_gamma", beta_gamma),
                                     ("f_gamma", f_gamma)) if v is not None}
        case = replace(self, model=replace(self.model, **changes)) if changes else self
        if a_gamma is not None:
            a_gamma = tuple(float(x) for x in np.broadcast_to(a_gamma, (len(self.graph.edges),)))
            case = replace(case, a_gamma=a_gamma)
        return case


def _segments(length, n, width):
    if n is None:
        return MIN_SEGMENTS
    return max(MIN_SEGMENTS, math.ceil(16 * length * n / width))


def arc_points(center, radius, theta0, theta1, count):
    th = np.linspace(theta0, theta1, count + 1)
    pts = np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)])
    return pts


def bezier_points(p0, c, p1, count):
    t = np.linspace(0.0, 1.0, count + 1)[:, None]
    p0, c, p1 = (np.asarray(v, dtype=float) for v in (p0, c, p1))
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * c + t**2 * p1


def _arc_curve(radius, theta0, theta1):
    def curve(t):
        th = theta0 + (theta1 - theta0) * np.asarray(t, dtype=float)
        return radius * np.column_stack([np.cos(th), np.sin(th)])

    return curve


def _line_curve(p0, p1):
    p0, p1 = np.asarray(p0, dtype=float), np.asarray(p1, dtype=float)
    return lambda t: p0 + np.asarray(t)[:, None] * (p1 - p0)


def _bezier_curve(p0, c, p1):
    p0, c, p1 = (np.asarray(v, dtype=float) for v in (p0, c, p1))
    return lambda t: (lambda s: (1 - s) ** 2 * p0 + 2 * (1 - s) * s * c + s**2 * p1)(np.asarray(t)[:, None])


def _circle_network(domain, radius, a_arc, extra_end, a_extra):
    """Quarter circle about the origin across the domain, optionally split at
    45 degrees with a straight branch from there to ``extra_end``."""
    x0, y0, x1, y1 = domain
    t0 = math.asin(y0 / radius) if y0 > 0 else 0.0
    t1 = math.acos(x0 / radius) if x0 > 0 else math.pi / 2
    width = x1 - x0
    start = (radius * math.cos(t0), radius * math.sin(t0))
    stop = (radius * math.cos(t1), radius * math.sin(t1))
    if extra_end is None:
        curves = (_arc_curve(radius, t0, t1),)

        def build(n):
            L = radius * (t1 - t0)
            pts = arc_points((0, 0), radius, t0, t1, _segments(L, n, width))
            return build_fracture_graph([start, stop], [(pts, a_arc)], domain=domain)

        return build, curves
    tm = math.pi / 4
    mid = (radius * math.cos(tm), radius * math.sin(tm))
    curves = (_arc_curve(radius, t0, tm), _arc_curve(radius, tm, t1), _line_curve(mid, extra_end))

    def build(n):
        la, lb = radius * (tm - t0), radius * (t1 - tm)
        pa = arc_points((0, 0), radius, t0, tm, _segments(la, n, width))
        pb = arc_points((0, 0), radius, tm, t1, _segments(lb, n, width))
        pc = np.linspace(mid, extra_end, 2)
        return build_fracture_graph([start, mid, stop, extra_end],
                                    [(pa, a_arc), (pb, a_arc), (pc, a_extra)], domain=domain)

    return build, curves


def _inside_flags(graph, radius):
    """Per subdomain: does it lie inside the circle?"""
    return [np.hypot(*np.asarray(p.representative_point().coords[0])) < radius
            for p in graph.subdomains.polygons]


def case_example1(extra_fracture=False) -> ManufacturedCase:
    """Circular interface r = 3/4 in the unit square, permeability contrast 1:1000."""
    domain = (0.0, 0.0, 1.0, 1.0)
    r0, a_in, a_out = 0.75, 1.0, 1000.0
    build, curves = _circle_network(domain, r0, 0.0, (1.0, 0.75) if extra_fracture else None, 0.0)
    inside = _inside_flags(build(None), r0)

    def branch(a):
        shift = 0.0 if a == a_in else r0**2 / a_in - r0**2 / a

        def value(p):
            return (p[:, 0] ** 2 + p[:, 1] ** 2) / a + shift

        def grad(p):
            return 2.0 * p / a

        return value, grad

    a = tuple(a_in if flag else a_out for flag in inside)
    exact = ExactSolution({k: branch(ak) for k, ak in enumerate(a, start=1)})
    bc = {"left": NEUMANN, "bottom": NEUMANN, "right": exact.dirichlet(), "top": exact.dirichlet()}
    model = ModelSpec(a=a, f=-4.0, f_gamma=0.0, bc=bc)
    name = "example1-extra" if extra_fracture else "example1"
    return ManufacturedCase(name, domain, model, build, exact, curves,
                            info={"radius": r0, "a_inside": a_in, "a_outside": a_out})


def case_example2(f_gamma=1.0, extra_fracture=False) -> ManufacturedCase:
    """Circular interface r = e in (1, e^(5/4))^2 with a conducting fracture.

    The flux jump of the closed-form solution across the circle is 1 while
    its trace is constant, so the fracture source must be 1 for the strong
    form to hold; ``f_gamma`` is exposed to reproduce the inconsistent 0.
    """
    e = math.e
    hi = math.exp(1.25)
    domain = (1.0, 1.0, hi, hi)
    tm = math.pi / 4
    extra_end = None
    if extra_fracture:
        mx = e * math.cos(tm)
        extra_end = (hi, mx + 0.47 * (hi - mx))
    build, curves = _circle_network(domain, e, 1.0, extra_end, 0.0)
    inside = _inside_flags(build(None), e)
    c_in = (4 + e) / 5
    c_out = (4 - 4 * e) / 5

    def branch(flag):
        if flag:
            return (lambda p: c_in * 0.5 * np.log(p[:, 0] ** 2 + p[:, 1] ** 2),
                    lambda p: c_in * p / (p[:, 0] ** 2 + p[:, 1] ** 2)[:, None])
        return (lambda p: c_out * (0.5 * np.log(p[:, 0] ** 2 + p[:, 1] ** 2) - 1.25) + 1.0,
                lambda p: c_out * p / (p[:, 0] ** 2 + p[:, 1] ** 2)[:, None])

    exact = ExactSolution({k: branch(flag) for k, flag in enumerate(inside, start=1)})
    fg = {0: f_gamma, 1: f_gamma, 2: 0.0} if extra_fracture else f_gamma
    model = ModelSpec(a=(1.0,) * len(inside), f=0.0, f_gamma=fg,
                      bc={s: exact.dirichlet() for s in ("left", "right", "bottom", "top")})
    name = "example2-extra" if extra_fracture else "example2"
    return ManufacturedCase(name, domain, model, build, exact, curves, info={"radius": e, "f_gamma": f_gamma})


EX3_P = (0.375, 0.375)
EX3_Q = (0.625, 0.625)


def _bow(p0, p1, offset):
    p0, p1 = np.asarray(p0, dtype=float), np.asarray(p1, dtype=float)
    d = p1 - p0
    normal = np.array([-d[1], d[0]]) / np.hypot(*d)
    return tuple((p0 + p1) / 2 + offset * normal)


EX3_EDGES = (
    (EX3_P, (0.0, 0.5)),
    (EX3_P, (0.5, 0.0)),
    (EX3_P, EX3_Q),
    (EX3_Q, (0.5, 1.0)),
    (EX3_Q, (1.0, 0.5)),
)
EX3_CONTROLS = (
    _bow(*EX3_EDGES[0], 0.05),
    _bow(*EX3_EDGES[1], -0.05),
    (0.6, 0.45),
    _bow(*EX3_EDGES[3], -0.05),
    _bow(*EX3_EDGES[4], 0.05),
)
EX3_CONFIGS = ("00000", "10000", "11000", "11100", "11110", "11111")


def case_example3(a_gamma=(0.0,) * 5) -> ManufacturedCase:
    """Two junctions joined by a curved edge, each with two more edges to the boundary.

    ``a_gamma`` may also be a config string such as "11000" (1 -> 100).
    """
    if isinstance(a_gamma, str):
        if len(a_gamma) != 5 or set(a_gamma) - {"0", "1"}:
            raise ValueError("config strings are five characters of 0/1")
        a_gamma = tuple(100.0 * int(c) for c in a_gamma)
    a_gamma = tuple(float(x) for x in a_gamma)
    if len(a_gamma) != 5:
        raise ValueError("example 3 has five edges")
    domain = (0.0, 0.0, 1.0, 1.0)
    nodes = [EX3_P, EX3_Q, (0.0, 0.5), (0.5, 0.0), (0.5, 1.0), (1.0, 0.5)]
    curves = tuple(_bezier_curve(p0, c, p1) for (p0, p1), c in zip(EX3_EDGES, EX3_CONTROLS))

    def build(n):
        edges = []
        for (p0, p1), c, a in zip(EX3_EDGES, EX3_CONTROLS, a_gamma):
            L = math.dist(p0, c) + math.dist(c, p1)
            edges.append((bezier_points(p0, c, p1, _segments(L, n, 1.0) // 2), a))
        return build_fracture_graph(nodes, edges, domain=domain)

    bc = {"left": Dirichlet(0.0), "right": Dirichlet(1.0), "bottom": Dirichlet(0.0), "top": Dirichlet(1.0)}
    n_sub = build(None).subdomains.n_subdomains
    model = ModelSpec(a=(1.0,) * n_sub, f=1.0, f_gamma=0.0, bc=bc)
    return ManufacturedCase("example3", domain, model, build, None, curves, info={"a_gamma": list(a_gamma)})


def case_patch(y=0.5 + (math.sqrt(2.0) - 1.0) / 10.0, a=1.0, slope=(2.0, -3.0)) -> ManufacturedCase:
    """Straight inert fracture y = const and a linear solution that P1 reproduces exactly."""
    domain = (0.0, 0.0, 1.0, 1.0)
    line = [(0.0, y), (1.0, y)]
    graph = build_fracture_graph(line, [(line, 0.0)], domain=domain)
    c = np.asarray(slope, dtype=float)
    lin = (lambda p: 1.0 + p @ c, lambda p: np.tile(c, (len(p), 1)))
    exact = ExactSolution({1: lin, 2: lin})
    model = ModelSpec(a=(a, a), f=0.0, f_gamma=0.0,
                      bc={s: exact.dirichlet() for s in ("left", "right", "bottom", "top")})
    return ManufacturedCase("patch", domain, model, lambda _n: graph, exact, (_line_curve(*line),),
                            info={"y": y})


def get_case(k, **kwargs) -> ManufacturedCase:
    builders = {1: case_example1, 2: case_example2, 3: case_example3}
    if int(k) not in builders:
        raise ValueError(f"unknown example {k}; choose 1, 2 or 3")
    return builders[int(k)](**kwargs)
