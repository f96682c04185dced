"""Verification harness: strong-form oracle, error norms, convergence
studies with fitted rates, and the cut-position conditioning sweep."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .assembly import ModelSpec, Dirichlet, _edge_source, _eval, apply_boundary_conditions, assemble_system
from .cases import ManufacturedCase
from .errors import MissingExact, OracleFailed
from .geometry import build_fracture_graph
from .mesh import build_structured_mesh, compute_cut_topology, edge_sides
from .solver import estimate_condition, solve
from .spaces import SolutionField, build_dof_space

ORACLE_TOL = 1e-4
FD_STEP = 1e-6
FD_STEP_NESTED = 1e-4
DEFAULT_OFFSETS = (0.5, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)


# ---------------------------------------------------------------- solve


@dataclass(eq=False)
class CaseRun:
    n: int
    mesh: object
    topo: object
    space: object
    model: ModelSpec
    system: object
    report: object
    field: SolutionField

    @property
    def h(self):
        return self.mesh.h

    @property
    def ndof(self):
        return self.space.ndof


def discretize(case: ManufacturedCase, n: int):
    graph = case.graph_for(n)
    snap = graph.nodes[graph.bifurcation_nodes] if graph.bifurcation_nodes else ()
    mesh = build_structured_mesh(case.domain, n, snap_nodes=snap)
    topo = compute_cut_topology(mesh, graph)
    return mesh, topo, build_dof_space(mesh, topo)


def solve_case(case: ManufacturedCase, n: int, method="auto", tol=1e-10, condition=False) -> CaseRun:
    """Mesh, cut, assemble and solve one case at resolution n."""
    mesh, topo, space = discretize(case, n)
    system = apply_boundary_conditions(assemble_system(case.model, topo, space), case.model, space)
    report = solve(system, tol=tol, method=method, condition=condition)
    return CaseRun(n, mesh, topo, space, case.model, system, report, SolutionField(space, report.coefficients))


# ---------------------------------------------------------------- oracle


@dataclass
class OracleReport:
    bulk: float
    gradient: float
    trace: float
    balance: float
    worst: dict = field(default_factory=dict)

    @property
    def max_residual(self):
        return max(self.bulk, self.gradient, self.trace, self.balance)

    @property
    def admitted(self):
        return self.max_residual < ORACLE_TOL


def residual_oracle(case: ManufacturedCase, sample_count=1000, seed=0, raise_on_fail=True) -> OracleReport:
    """Finite-difference check of the strong form for a closed-form solution.

    Bulk: -a_k lap(u) = f and grad(u) matches the supplied gradient, at
    ``sample_count`` random points. Fracture: [u] = 0 and
    f_gamma - [[n.a grad u]] + a_gamma d2u/ds2 = 0 at ``sample_count``
    random points on the exact curves.
    """
    if case.exact is None:
        raise MissingExact(f"{case.name} has no closed-form solution")
    exact, model = case.exact, case.model
    graph = case.graph
    sub = graph.subdomains
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = case.domain
    pts = rng.uniform((x0, y0), (x1, y1), size=(sample_count, 2))
    ks = sub.locate(pts)
    worst = {}
    res_bulk = res_grad = 0.0
    ex, ey = np.array([FD_STEP, 0.0]), np.array([0.0, FD_STEP])
    for k in range(1, sub.n_subdomains + 1):
        p = pts[ks == k]
        if not len(p):
            continue
        g = lambda q: exact.gradient(q, k)
        u = lambda q: exact.value(q, k)
        lap = ((g(p + ex)[:, 0] - g(p - ex)[:, 0]) + (g(p + ey)[:, 1] - g(p - ey)[:, 1])) / (2 * FD_STEP)
        r = np.abs(-model.a[k - 1] * lap - _eval(model.f, p))
        fd = np.column_stack([u(p + ex) - u(p - ex), u(p + ey) - u(p - ey)]) / (2 * FD_STEP)
        rg = np.abs(fd - g(p)).max(axis=1)
        res_bulk, res_grad = _track(worst, "bulk", res_bulk, r, p), _track(worst, "gradient", res_grad, rg, p)

    sides = edge_sides(graph, sub)
    lengths = np.array([e.length for e in graph.edges])
    counts = np.maximum(1, np.round(sample_count * lengths / lengths.sum()).astype(int))
    res_trace = res_bal = 0.0
    d = FD_STEP_NESTED
    for j, (edge, curve) in enumerate(zip(graph.edges, case.curves)):
        s1, s2, sign = sides[j]
        t = rng.uniform(2 * d, 1 - 2 * d, size=counts[j])
        p = curve(t)
        speed = lambda tt: np.hypot(*((curve(tt + FD_STEP) - curve(tt - FD_STEP)) / (2 * FD_STEP)).T)
        tang = (curve(t + FD_STEP) - curve(t - FD_STEP)) / (2 * FD_STEP)
        tang /= np.hypot(tang[:, 0], tang[:, 1])[:, None]
        n = sign * np.column_stack([-tang[:, 1], tang[:, 0]])
        a1, a2 = model.a[s1 - 1], model.a[s2 - 1]
        jump = np.einsum("md,md->m", n, a1 * exact.gradient(p, s1) - a2 * exact.gradient(p, s2))
        du_ds = lambda tt: (exact.value(curve(tt + d), s1) - exact.value(curve(tt - d), s1)) / (2 * d) / speed(tt)
        d2u = (du_ds(t + d) - du_ds(t - d)) / (2 * d) / speed(t)
        fg = _edge_source(model.f_gamma, np.full(len(p), j), p)
        bal = np.abs(fg - jump + edge.a_gamma * d2u)
        tr = np.abs(exact.value(p, s1) - exact.value(p, s2))
        res_bal, res_trace = _track(worst, "balance", res_bal, bal, p), _track(worst, "trace", res_trace, tr, p)

    rep = OracleReport(res_bulk, res_grad, res_trace, res_bal, worst)
    if raise_on_fail and not rep.admitted:
        eq = max(("bulk", "gradient", "trace", "balance"), key=lambda name: getattr(rep, name))
        raise OracleFailed(eq, worst[eq], getattr(rep, eq))
    return rep


def _track(worst, name, current, values, pts):
    if len(values) and values.max() > current:
        worst[name] = tuple(float(c) for c in pts[int(np.argmax(values))])
        return float(values.max())
    return current


# ---------------------------------------------------------------- errors


@dataclass
class ErrorNorms:
    l2_bulk: float
    l2_gamma: float
    energy: float

    def __iter__(self):
        return iter((self.l2_bulk, self.l2_gamma, self.energy))


def compute_errors(field: SolutionField, case: ManufacturedCase, topo, model: ModelSpec | None = None) -> ErrorNorms:
    """Bulk L2, fracture L2 (against <u_h>_*) and energy-norm errors."""
    if case.exact is None:
        raise MissingExact(f"{case.name} has no closed-form solution")
    model = model or case.model
    exact = case.exact
    mesh = topo.mesh
    l2 = grad2 = 0.0
    for k in range(1, topo.n_subdomains + 1):
        e, p, w = topo.bulk_quadrature(k)
        diff = exact.value(p, k) - field.copy_values(e, p, k)
        gdiff = exact.gradient(p, k) - field.copy_gradients(e, k)
        l2 += float(w @ diff**2)
        grad2 += model.a[k - 1] * float(w @ np.einsum("md,md->m", gdiff, gdiff))

    iq = topo.interface
    jump2 = gam2 = tan2 = 0.0
    if len(iq):
        kap = np.array([model.edge_kappa(topo, j) for j in range(len(topo.graph.edges))])
        k1, k2 = kap[iq.edge, 0], kap[iq.edge, 1]
        a_gam = np.array([e.a_gamma for e in topo.graph.edges])[iq.edge]
        v1 = _side_values(field, iq.elem, iq.points, iq.side1, iq.side2)
        v2 = _side_values(field, iq.elem, iq.points, iq.side2, iq.side1)
        g1 = _side_gradients(field, iq.elem, iq.side1, iq.side2)
        g2 = _side_gradients(field, iq.elem, iq.side2, iq.side1)
        avg = k2 * v1 + k1 * v2
        davg = np.einsum("md,md->m", k2[:, None] * g1 + k1[:, None] * g2, iq.tangents)
        u = _exact_on(exact, iq.points, iq.side1)
        du = np.einsum("md,md->m", _exact_grad_on(exact, iq.points, iq.side1), iq.tangents)
        sep = iq.side1 != iq.side2
        jump2 = float((iq.weights * model.beta_array(topo, iq.edge))[sep] @ (v1 - v2)[sep] ** 2)
        gam2 = float(iq.weights @ (u - avg) ** 2)
        tan2 = float(iq.weights @ (a_gam * (du - davg) ** 2))
    energy = grad2 + jump2 / mesh.h + tan2
    return ErrorNorms(math.sqrt(l2), math.sqrt(gam2), math.sqrt(energy))


def _by_side(sides, fn):
    out = None
    for k in np.unique(sides):
        sel = sides == k
        vals = fn(sel, int(k))
        if out is None:
            out = np.zeros((len(sides),) + vals.shape[1:])
        out[sel] = vals
    return out


def _side_values(field, elems, pts, side, fallback):
    """Copy values, falling back to the other side's copy where one is absent."""
    v = _by_side(side, lambda sel, k: field.copy_values(elems[sel], pts[sel], k))
    bad = np.isnan(v)
    if bad.any():
        v[bad] = _side_values(field, elems[bad], pts[bad], fallback[bad], side[bad])
    return v


def _side_gradients(field, elems, side, fallback):
    g = _by_side(side, lambda sel, k: field.copy_gradients(elems[sel], k))
    bad = np.isnan(g[:, 0])
    if bad.any():
        g[bad] = _side_gradients(field, elems[bad], fallback[bad], side[bad])
    return g


def _exact_on(exact, pts, side):
    return _by_side(side, lambda sel, k: exact.value(pts[sel], k))


def _exact_grad_on(exact, pts, side):
    return _by_side(side, lambda sel, k: exact.gradient(pts[sel], k))


# ---------------------------------------------------------------- rates


@dataclass
class RateFit:
    slope: float
    r_squared: float
    pairwise: list

    def as_dict(self):
        return asdict(self)


def fit_rate(h, err) -> RateFit:
    """Least-squares slope of log(err) against log(h), with R^2 and consecutive-level rates."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if len(h) < 2 or np.any(err <= 0) or not np.all(np.isfinite(err)):
        return RateFit(float("nan"), float("nan"), [float("nan")] * max(len(h) - 1, 0))
    x, y = np.log(h), np.log(err)
    slope, icpt = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + icpt)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    pairwise = list(np.diff(y) / np.diff(x))
    return RateFit(float(slope), float(r2), [float(r) for r in pairwise])


NORMS = ("err_L2_bulk", "err_L2_gamma", "err_energy")


@dataclass
class LevelResult:
    n: int
    h: float
    ndof: int
    err_L2_bulk: float
    err_L2_gamma: float
    err_energy: float
    cond_estimate: float | None
    residual: float


@dataclass
class ConvergenceReport:
    case: str
    levels: list
    rates: dict

    def column(self, name):
        return [getattr(lv, name) for lv in self.levels]

    def as_dict(self):
        return {"case": self.case, "levels": [asdict(lv) for lv in self.levels],
                "rates": {k: v.as_dict() for k, v in self.rates.items()}}


def run_convergence(case: ManufacturedCase, n_levels=5, n0=8, method="auto", condition=True,
                    check_oracle=True) -> ConvergenceReport:
    """Solve on n0, 2 n0, ... and fit error rates over all levels."""
    if case.exact is None:
        raise MissingExact(f"{case.name} has no closed-form solution; convergence needs one")
    if n_levels < 3:
        raise ValueError("a rate needs at least 3 levels")
    if check_oracle:
        residual_oracle(case)
    levels = []
    for lev in range(n_levels):
        n = n0 * 2**lev
        run = solve_case(case, n, method=method, condition=condition)
        errs = compute_errors(run.field, case, run.topo, run.model)
        levels.append(LevelResult(n, run.h, run.ndof, errs.l2_bulk, errs.l2_gamma, errs.energy,
                                  run.report.cond_estimate, run.report.residual_norm))
    h = [lv.h for lv in levels]
    rates = {name: fit_rate(h, [getattr(lv, name) for lv in levels]) for name in NORMS}
    return ConvergenceReport(case.name, levels, rates)


# ---------------------------------------------------------------- sweep


@dataclass
class SweepRow:
    offset: float
    y: float
    cond_stabilized: float
    cond_unstabilized: float


def sweep_case(offset, n=32, gamma=0.1):
    """Straight horizontal fracture ``offset`` grid cells above the line y = 1/2."""
    y = 0.5 + offset / n
    graph = build_fracture_graph([(0.0, y), (1.0, y)], [([(0.0, y), (1.0, y)], 0.0)], domain=(0, 0, 1, 1))
    model = ModelSpec(a=(1.0, 1.0), f=1.0, gamma=gamma, bc={s: Dirichlet(0.0) for s in ("left", "right", "bottom", "top")})
    return ManufacturedCase(f"sweep-{offset:g}", (0.0, 0.0, 1.0, 1.0), model, lambda _n: graph), y


def cut_robustness_sweep(offsets=DEFAULT_OFFSETS, n=32, gamma=0.1) -> list:
    """Condition estimates of the constrained matrix with and without ghost penalty."""
    offsets = list(offsets)
    if not offsets:
        raise ValueError("no offsets given")
    rows = []
    for off in offsets:
        case, y = sweep_case(off, n, gamma)
        mesh, topo, space = discretize(case, n)
        conds = []
        for g in (gamma, 0.0):
            model = ModelSpec(**{**case.model.__dict__, "gamma": g})
            system = apply_boundary_conditions(assemble_system(model, topo, space), model, space)
            conds.append(estimate_condition(system))
        rows.append(SweepRow(float(off), y, conds[0], conds[1]))
    return rows
