"""Quadrature rules on the unit interval and the reference triangle.

The reference triangle is {(x, y): x >= 0, y >= 0, x + y <= 1} with area 1/2.
Interval rules live on [0, 1].
"""

import numpy as np


def gauss01(n):
    """n-point Gauss-Legendre rule on [0, 1]; returns (points, weights)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def graded01(order, levels, end=0):
    """Composite Gauss rule on [0, 1], dyadically graded toward one endpoint.

    Subdivides [0, 1] at 2^-1, 2^-2, ..., 2^-levels (measured from the
    endpoint `end`, 0 or 1) and applies an `order`-point Gauss rule on each
    piece, including the innermost one.  Integrates endpoint singularities
    of log / fractional-power type to near machine precision.
    """
    xg, wg = gauss01(order)
    breaks = [0.0] + [2.0 ** (-k) for k in range(levels, 0, -1)] + [1.0]
    pts, wts = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        pts.append(a + (b - a) * xg)
        wts.append((b - a) * wg)
    x = np.concatenate(pts)
    w = np.concatenate(wts)
    if end == 1:
        x = 1.0 - x
    return x, w


def graded01_both(order, levels):
    """Composite Gauss rule on [0, 1] graded toward both endpoints."""
    x, w = graded01(order, levels, end=0)
    xl, wl = 0.5 * x, 0.5 * w
    return np.concatenate([xl, 1.0 - xl]), np.concatenate([wl, wl])


# Symmetric 6-point rule, exact for polynomials of total degree 4.
# Barycentric orbit data; weights sum to 1 and are relative to the area.
_D4_A1, _D4_B1, _D4_W1 = 0.816847572980459, 0.091576213509771, 0.109951743655322
_D4_A2, _D4_B2, _D4_W2 = 0.108103018168070, 0.445948490915965, 0.223381589678011


def triangle_degree4():
    """Symmetric degree-4 rule on the reference triangle; (points(6,2), weights(6,))."""
    bary = []
    for (a, b) in [(_D4_A1, _D4_B1), (_D4_A2, _D4_B2)]:
        bary += [(a, b, b), (b, a, b), (b, b, a)]
    bary = np.array(bary)
    pts = bary[:, 1:]  # lambda1 = x, lambda2 = y on the reference triangle
    w = 0.5 * np.array([_D4_W1] * 3 + [_D4_W2] * 3)
    return pts, w


def triangle_duffy(n, collapse=2):
    """Collapsed tensor-Gauss rule on the reference triangle.

    Exact for polynomials of total degree <= 2n - 2; points cluster toward
    the collapse vertex (local index 0, 1 or 2), which also makes the rule
    effective for integrable point singularities located there.
    """
    a, wa = gauss01(n)
    b, wb = gauss01(n)
    A, B = np.meshgrid(a, b, indexing="ij")
    x = (A * (1.0 - B)).ravel()
    y = B.ravel()
    w = (np.outer(wa, wb) * (1.0 - B)).ravel()
    return _move_collapse(x, y, w, collapse)


def triangle_corner_rule(order=8, levels=16, collapse=2):
    """High-accuracy rule for integrands with a fractional-power singularity
    at one vertex: Duffy collapse combined with dyadic grading toward it."""
    a, wa = gauss01(order)
    b, wb = graded01(order, levels, end=1)
    A, B = np.meshgrid(a, b, indexing="ij")
    x = (A * (1.0 - B)).ravel()
    y = B.ravel()
    w = (np.outer(wa, wb) * (1.0 - B)).ravel()
    return _move_collapse(x, y, w, collapse)


def _move_collapse(x, y, w, collapse):
    # permute barycentric coordinates so the clustered vertex is `collapse`
    lam = np.stack([1.0 - x - y, x, y], axis=-1)
    if collapse == 2:
        pass
    elif collapse == 0:
        lam = lam[:, [2, 1, 0]]
    elif collapse == 1:
        lam = lam[:, [0, 2, 1]]
    else:
        raise ValueError("collapse vertex must be 0, 1 or 2")
    return lam[:, 1:], w


def map_to_physical(verts, pts):
    """Map reference points into physical triangles.

    verts: (..., 3, 2) triangle vertices, pts: (q, 2) reference points.
    Returns points of shape (..., q, 2).
    """
    verts = np.asarray(verts, dtype=float)
    v0 = verts[..., 0, :]
    e1 = verts[..., 1, :] - v0
    e2 = verts[..., 2, :] - v0
    return (v0[..., None, :]
            + pts[:, 0, None] * e1[..., None, :]
            + pts[:, 1, None] * e2[..., None, :])
