import functools

import numpy as np
import pytest

from cutfrac.analysis import discretize
from cutfrac.cases import case_example1, case_example2, case_example3
from cutfrac.geometry import build_fracture_graph


def straight_graph(y, a_gamma=0.0, domain=(0.0, 0.0, 1.0, 1.0)):
    x0, _, x1, _ = domain
    return build_fracture_graph([(x0, y), (x1, y)], [([(x0, y), (x1, y)], a_gamma)], domain=domain)


@functools.lru_cache(maxsize=None)
def cached_case(name):
    return {
        "example1": case_example1,
        "example1-extra": lambda: case_example1(extra_fracture=True),
        "example2": case_example2,
        "example3": lambda: case_example3("11111"),
        "example3-mixed": lambda: case_example3("10100"),
    }[name]()


@functools.lru_cache(maxsize=None)
def cached_discretization(name, n):
    return discretize(cached_case(name), n)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@functools.lru_cache(maxsize=None)
def cached_convergence(name, n_levels=5, n0=8):
    from cutfrac.analysis import run_convergence

    return run_convergence(cached_case(name), n_levels, n0)


@functools.lru_cache(maxsize=None)
def cached_sweep(n=32, gamma=0.1):
    from cutfrac.analysis import DEFAULT_OFFSETS, cut_robustness_sweep

    return tuple(cut_robustness_sweep(DEFAULT_OFFSETS, n=n, gamma=gamma))


ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    """Store one acceptance line; printed now and again in the terminal summary."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE.setdefault(number, []).append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE, key=str):
        for line in ACCEPTANCE[number]:
            terminalreporter.write_line(line)
