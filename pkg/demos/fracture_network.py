"""Flow through a bifurcating five-edge network.

Run:  python demos/fracture_network.py [n]

Pressure is held at 0 on the left and bottom sides and at 1 on the right
and top. Switching edges from blocked (a_gamma = 0) to conducting
(a_gamma = 100) one at a time shows how the network redistributes pressure.
The solution is written to network_<config>.csv for plotting.
"""

import sys

import numpy as np

from cutfrac import case_example3, solve_case
from cutfrac.cases import EX3_CONFIGS
from cutfrac.reporting import sample_solution, write_solution_csv

if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 32
    base = None
    for config in EX3_CONFIGS:
        case = case_example3(config)
        run = solve_case(case, n)
        _, _, vals = sample_solution(run.field, case.domain)
        base = vals if base is None else base
        print(f"{config}: {run.ndof} dofs, {run.report.method}, residual {run.report.residual_norm:.1e}, "
              f"max change vs 00000 {np.abs(vals - base).max():.3f}")
        write_solution_csv(run.field, case.domain, f"network_{config}.csv")
