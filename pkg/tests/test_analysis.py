import dataclasses

import numpy as np
import pytest

from cutfrac.analysis import (
    NORMS,
    compute_errors,
    fit_rate,
    residual_oracle,
    run_convergence,
    solve_case,
)
from cutfrac.cases import ExactSolution, ManufacturedCase, case_example2, case_patch
from cutfrac.errors import MissingExact, OracleFailed
from cutfrac.spaces import SolutionField

from conftest import cached_case, cached_convergence, cached_sweep, straight_graph


def test_fit_rate_exact_power_law():
    h = 1.0 / np.array([8, 16, 32, 64, 128])
    fit = fit_rate(h, h**2)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(fit.pairwise, 2.0, atol=1e-12)


def test_fit_rate_degenerate_input():
    assert np.isnan(fit_rate([0.1, 0.05], [1.0, 0.0]).slope)


def test_constant_solution_zero_field():
    graph = straight_graph(0.503)
    one = (lambda p: np.ones(len(p)), lambda p: np.zeros((len(p), 2)))
    base = cached_case("example1").model
    model = dataclasses.replace(base, a=(1.0, 1.0), f=0.0)
    case = ManufacturedCase("ones", (0.0, 0.0, 1.0, 1.0), model, lambda _n: graph, ExactSolution({1: one, 2: one}))
    from cutfrac.analysis import discretize

    mesh, topo, space = discretize(case, 8)
    errs = compute_errors(SolutionField(space, np.zeros(space.ndof)), case, topo)
    assert errs.l2_bulk == pytest.approx(1.0, rel=1e-12)
    assert errs.l2_gamma == pytest.approx(1.0, rel=1e-12)
    assert errs.energy == 0.0


def test_patch_errors_vanish():
    case = case_patch()
    run = solve_case(case, 16)
    assert max(compute_errors(run.field, case, run.topo)) <= 1e-10


def test_errors_need_exact_solution():
    case = cached_case("example3")
    run = solve_case(case, 8)
    with pytest.raises(MissingExact):
        compute_errors(run.field, case, run.topo)
    with pytest.raises(MissingExact):
        residual_oracle(case)
    with pytest.raises(MissingExact):
        run_convergence(case)


def test_oracle_admits_example1():
    rep = residual_oracle(cached_case("example1"), sample_count=1000)
    assert rep.admitted and rep.max_residual < 1e-4


def test_oracle_rejects_wrong_bulk_source():
    case = cached_case("example1")
    bad = dataclasses.replace(case, model=dataclasses.replace(case.model, f=4.0))
    with pytest.raises(OracleFailed) as info:
        residual_oracle(bad)
    assert info.value.equation == "bulk"
    assert len(info.value.point) == 2


def test_oracle_decides_example2_fracture_source():
    assert residual_oracle(case_example2(f_gamma=1.0)).admitted
    with pytest.raises(OracleFailed) as info:
        residual_oracle(case_example2(f_gamma=0.0))
    assert info.value.equation == "balance"
    assert info.value.residual == pytest.approx(1.0, abs=1e-4)


def test_example1_refinement_ratios():
    rep = cached_convergence("example1")
    lv = {r.n: r for r in rep.levels}
    assert lv[32].err_L2_bulk / lv[64].err_L2_bulk == pytest.approx(4.0, rel=0.25)
    assert lv[32].err_energy / lv[64].err_energy == pytest.approx(2.0, rel=0.15)


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_monotone_decay_and_fit_quality(name):
    rep = cached_convergence(name)
    for norm in NORMS:
        col = rep.column(norm)
        assert all(b < a for a, b in zip(col, col[1:])), norm
        tail = fit_rate([lv.h for lv in rep.levels[1:]], col[1:])
        assert tail.r_squared >= 0.98, norm
    assert all(e >= l for e, l in zip(rep.column("err_energy"), rep.column("err_L2_bulk")))
    assert all(r <= 1e-10 for r in rep.column("residual"))


def test_extra_fracture_variant_converges():
    rep = run_convergence(cached_case("example1-extra"), 4, 8, condition=False)
    assert 0.85 <= rep.rates["err_energy"].slope <= 1.15
    assert rep.rates["err_L2_bulk"].slope >= 1.5


def test_convergence_needs_three_levels():
    with pytest.raises(ValueError):
        run_convergence(cached_case("example1"), 2)


def test_sweep_rows():
    rows = cached_sweep()
    assert rows[0].offset == 0.5 and rows[-1].offset == 1e-8
    assert rows[0].cond_unstabilized / rows[0].cond_stabilized < 10
    assert rows[-1].cond_stabilized <= 10 * rows[0].cond_stabilized
    assert rows[-1].cond_unstabilized >= 10 * rows[-1].cond_stabilized
    assert all(r.y == pytest.approx(0.5 + r.offset / 32, abs=1e-15) for r in rows)
