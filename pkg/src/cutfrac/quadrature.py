"""Reference quadrature rules on triangles and line segments."""

import numpy as np

# Degree-4 symmetric rule (Dunavant, 6 points), barycentric coordinates.
_A1, _W1 = 0.44594849091596488632, 0.22338158967801146570
_A2, _W2 = 0.09157621350977074346, 0.10995174365532186764
_B1 = 1.0 - 2.0 * _A1
_B2 = 1.0 - 2.0 * _A2

TRI_BARY = np.array([
    [_A1, _A1, _B1],
    [_A1, _B1, _A1],
    [_B1, _A1, _A1],
    [_A2, _A2, _B2],
    [_A2, _B2, _A2],
    [_B2, _A2, _A2],
])
# weights sum to one; multiply by the triangle area
TRI_WEIGHTS = np.array([_W1, _W1, _W1, _W2, _W2, _W2])

# 3-point Gauss-Legendre on [0, 1]
GAUSS_T = 0.5 + 0.5 * np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0


def triangle_rule(tris):
    """Quadrature points and weights on a batch of triangles.

    ``tris`` has shape (m, 3, 2). Returns points (m, 6, 2) and weights
    (m, 6) scaled by the absolute triangle areas.
    """
    tris = np.asarray(tris, dtype=float)
    pts = np.einsum("qi,mij->mqj", TRI_BARY, tris)
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return pts, area[:, None] * TRI_WEIGHTS[None, :]


def segment_rule(a, b):
    """3-point Gauss rule on segments a[k] -> b[k]; returns points (m, 3, 2), weights (m, 3)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    pts = a[:, None, :] + GAUSS_T[None, :, None] * d[:, None, :]
    length = np.hypot(d[:, 0], d[:, 1])
    return pts, length[:, None] * GAUSS_W[None, :]
