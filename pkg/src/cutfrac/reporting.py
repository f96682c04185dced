"""CSV, JSON and gnuplot output for runs, convergence studies and sweeps.

Floats are written with ``repr`` (shortest round-trip form), so identical
results give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

CONVERGENCE_COLUMNS = ("h", "ndof", "err_L2_bulk", "err_L2_gamma", "err_energy", "cond_estimate")
RATE_COLUMNS = ("rate_L2_bulk", "rate_L2_gamma", "rate_energy")


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def write_json(obj, path):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])


def write_convergence_csv(report, path):
    rows = []
    pairwise = {name: report.rates[name].pairwise for name in ("err_L2_bulk", "err_L2_gamma", "err_energy")}
    for i, lv in enumerate(report.levels):
        base = [lv.h, lv.ndof, lv.err_L2_bulk, lv.err_L2_gamma, lv.err_energy, lv.cond_estimate]
        rates = [None if i == 0 else pairwise[name][i - 1] for name in ("err_L2_bulk", "err_L2_gamma", "err_energy")]
        rows.append(base + rates)
    write_csv(path, CONVERGENCE_COLUMNS + RATE_COLUMNS, rows)


def write_convergence_json(report, path):
    write_json(report.as_dict(), path)


def gnuplot_script(report, csv_name="convergence.csv", image="convergence.png"):
    """Log-log error plot with 1:1 and 2:1 reference slopes anchored at the coarsest level."""
    lv = report.levels[0]
    return "\n".join([
        "set terminal pngcairo size 800,600",
        f"set output '{image}'",
        "set datafile separator ','",
        "set logscale xy",
        "set key left top",
        "set xlabel 'h'",
        "set ylabel 'error'",
        f"set title '{report.case}'",
        f"h0 = {lv.h!r}",
        f"e1 = {lv.err_energy!r}",
        f"e2 = {lv.err_L2_bulk!r}",
        f"plot '{csv_name}' every ::1 using 1:3 with linespoints title 'L2 bulk', \\",
        f"     '{csv_name}' every ::1 using 1:4 with linespoints title 'L2 fracture', \\",
        f"     '{csv_name}' every ::1 using 1:5 with linespoints title 'energy', \\",
        "     e1*(x/h0) dashtype 2 title 'slope 1', \\",
        "     e2*(x/h0)**2 dashtype 3 title 'slope 2'",
        "",
    ])


def write_sweep_csv(rows, path):
    write_csv(path, ("offset", "y", "cond_stabilized", "cond_unstabilized"),
              [(r.offset, r.y, r.cond_stabilized, r.cond_unstabilized) for r in rows])


def sample_solution(field, domain, count=41):
    """Solution at the centres of a uniform count x count grid; points on a fracture are skipped."""
    x0, y0, x1, y1 = domain
    xs = x0 + (np.arange(count) + 0.5) * (x1 - x0) / count
    ys = y0 + (np.arange(count) + 0.5) * (y1 - y0) / count
    pts = np.array([(x, y) for y in ys for x in xs])
    sides = field.space.topo.subdomains.locate(pts)
    keep = sides > 0
    pts, sides = pts[keep], sides[keep]
    vals = np.empty(len(pts))
    for k in np.unique(sides):
        sel = sides == k
        vals[sel] = field.evaluate(pts[sel], side=int(k))
    return pts, sides, vals


def write_solution_csv(field, domain, path, count=41):
    pts, sides, vals = sample_solution(field, domain, count)
    write_csv(path, ("x", "y", "side", "u"), [(p[0], p[1], int(k), v) for p, k, v in zip(pts, sides, vals)])


def sweep_as_dicts(rows):
    return [asdict(r) for r in rows]
