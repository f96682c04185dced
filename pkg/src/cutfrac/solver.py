"""Linear solvers and spectral condition estimates for the reduced system."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import LinearSystem
from .errors import IndefiniteDetected, NotConverged

DIRECT_LIMIT = 2000


@dataclass
class SolveReport:
    coefficients: np.ndarray
    method: str
    iterations: int = 0
    residual_norm: float = 0.0
    cond_estimate: float | None = None
    residuals: list = field(default_factory=list)
    energy_decrements: list = field(default_factory=list)


@dataclass
class CGResult:
    x: np.ndarray
    residuals: list
    energy_decrements: list


def conjugate_gradient(A, b, tol=1e-10, maxiter=None, x0=None) -> CGResult:
    """Jacobi-preconditioned CG with an explicit positivity check.

    ``energy_decrements[k] = alpha_k * r_k.z_k`` is the drop of the squared
    A-norm error in step k, so it must be non-negative for SPD input.
    Raises IndefiniteDetected on non-positive curvature and NotConverged
    (carrying the best iterate) when the iteration budget runs out.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    maxiter = maxiter or 10 * max(n, 1)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise IndefiniteDetected("non-positive diagonal entry")
    minv = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    bnorm = np.linalg.norm(b) or 1.0
    history = [float(np.linalg.norm(r) / bnorm)]
    drops = []
    best, best_res = x.copy(), history[0]
    if history[0] <= tol:
        return CGResult(x, history, drops)
    z = minv * r
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0:
            raise IndefiniteDetected(f"p^T A p = {curv:.3e} after {len(history) - 1} iterations")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        drops.append(float(alpha * rz))
        res = float(np.linalg.norm(r) / bnorm)
        history.append(res)
        if res < best_res:
            best, best_res = x.copy(), res
        if res <= tol:
            return CGResult(x, history, drops)
        z = minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NotConverged(f"CG stalled at relative residual {best_res:.3e}", best, best_res)


def solve(system: LinearSystem, tol=1e-10, max_iter=None, method="auto", condition=False) -> SolveReport:
    """Solve with Dirichlet DOFs eliminated.

    ``method="auto"`` factorizes directly below DIRECT_LIMIT free DOFs and
    runs preconditioned CG above it. ``coefficients`` covers all DOFs,
    constrained ones included.
    """
    A, b = system.reduced()
    if method == "auto":
        method = "direct" if A.shape[0] < DIRECT_LIMIT else "cg"
    if method == "direct":
        x = spla.splu(A.tocsc()).solve(b) if A.shape[0] else np.zeros(0)
        res = float(np.linalg.norm(A @ x - b) / (np.linalg.norm(b) or 1.0))
        report = SolveReport(system.expand(x), "direct", residual_norm=res, residuals=[res])
    elif method == "cg":
        out = conjugate_gradient(A, b, tol=tol, maxiter=max_iter)
        report = SolveReport(system.expand(out.x), "cg", len(out.residuals) - 1, out.residuals[-1],
                             residuals=out.residuals, energy_decrements=out.energy_decrements)
    else:
        raise ValueError(f"unknown solver method {method!r}")
    if condition:
        report.cond_estimate = estimate_condition(A)
    return report


def estimate_condition(A, seed=0, tol=1e-10):
    """Spectral condition number |lambda|_max / |lambda|_min of a symmetric matrix.

    A LinearSystem is reduced to its free DOFs first.

    Both extreme eigenvalues come from Lanczos iteration; the smallest one
    through shift-invert about zero. Small matrices are handled densely.
    """
    if isinstance(A, LinearSystem):
        A = A.reduced()[0]
    A = sp.csc_matrix(A)
    n = A.shape[0]
    if n == 0:
        return 1.0
    if n <= 300:
        ev = np.abs(np.linalg.eigvalsh(A.toarray()))
        return float(ev.max() / ev.min()) if ev.min() > 0 else float("inf")
    v0 = np.random.default_rng(seed).standard_normal(n)
    big = spla.eigsh(A, k=1, which="LM", v0=v0, tol=tol, return_eigenvectors=False)
    small = spla.eigsh(A, k=1, sigma=0.0, which="LM", v0=v0, tol=tol, return_eigenvectors=False)
    lo = abs(small[0])
    return float(abs(big[0]) / lo) if lo > 0 else float("inf")
