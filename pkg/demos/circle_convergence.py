"""Convergence on the two circular-interface benchmarks.

Run:  python demos/circle_convergence.py [levels]

Each benchmark has a closed-form solution. The script first checks that
solution against the strong form with finite differences, then solves on a
sequence of meshes and prints the error in three norms with fitted rates.
P1 elements should give about 2 in L2 and 1 in the energy norm.
"""

import sys

from cutfrac import case_example1, case_example2, residual_oracle, run_convergence


def report(case, levels):
    oracle = residual_oracle(case)
    print(f"\n{case.name}: strong-form residual {oracle.max_residual:.1e}")
    rep = run_convergence(case, n_levels=levels, n0=8, condition=False)
    print(f"{'n':>5} {'ndof':>7} {'L2 bulk':>10} {'L2 fracture':>12} {'energy':>10}")
    for lv in rep.levels:
        print(f"{lv.n:5d} {lv.ndof:7d} {lv.err_L2_bulk:10.3e} {lv.err_L2_gamma:12.3e} {lv.err_energy:10.3e}")
    print("rates: " + ", ".join(f"{k[4:]} {v.slope:.2f}" for k, v in rep.rates.items()))


if __name__ == "__main__":
    levels = int(sys.argv[1]) if len(sys.argv) > 1 else 4
    # permeability jump 1:1000 across an inert circle
    report(case_example1(), levels)
    # a conducting circular fracture carrying a unit source
    report(case_example2(f_gamma=1.0), levels)
