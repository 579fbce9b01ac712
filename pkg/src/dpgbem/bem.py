"""Galerkin boundary-element matrices and layer potentials for the 2D
Laplace kernel G(z) = -log|z| / (2 pi) on polygonal boundaries.

All panels are straight, so the inner integral of both kernels against a
P0 or P1 density has a closed form (log / arctangent antiderivatives);
only the outer (test) integration is numerical.  Coincident panels use the
fully closed form of the double log integral, and panels sharing a vertex
use an outer rule graded toward the shared vertex.

Convention: the double-layer operator is assembled as the plain principal
value integral (for x on a flat panel the own-panel kernel vanishes
identically), so the coupling combination reads (1/2)*M_up - K_up.  The
sign convention is pinned operationally by the representation-formula
(dipole) test: V(dudn) + (1/2 - K)(trace) -> 0 for exterior harmonic
fields with O(1/|x|) decay.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import quadrature
from .errors import MeshError, NumericalError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class BoundaryPanel:
    """One straight boundary panel with its outward unit normal."""

    a: np.ndarray
    b: np.ndarray
    length: float
    normal: np.ndarray
    global_index: int = -1

    @classmethod
    def from_endpoints(cls, a, b, global_index=-1):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = b - a
        length = float(np.hypot(*d))
        if length <= 0.0:
            raise MeshError("degenerate panel")
        t = d / length
        return cls(a=a, b=b, length=length,
                   normal=np.array([t[1], -t[0]]), global_index=global_index)


def panels_from_loop(loop):
    """Panels of a boundary loop, in loop order."""
    return [BoundaryPanel(a=loop.points_a[k], b=loop.points_b[k],
                          length=float(loop.lengths[k]),
                          normal=loop.normals[k],
                          global_index=int(loop.edge_ids[k]))
            for k in range(loop.num_panels)]


# ----------------------------------------------------------------------
# analytic inner integrals
# ----------------------------------------------------------------------

def _local_coords(points, pa, pb, lengths):
    """Tangential/normal coordinates of points relative to panels.

    points (..., 2) broadcast against panels (P, 2): returns u, v of shape
    (..., P) with u along the panel from its tail and v along the outward
    normal n = (t_y, -t_x).
    """
    d = pb - pa
    t = d / lengths[..., None]
    n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
    rel = points[..., None, :] - pa
    u = rel[..., 0] * t[..., 0] + rel[..., 1] * t[..., 1]
    v = rel[..., 0] * n[..., 0] + rel[..., 1] * n[..., 1]
    return u, v


def _slp_inner(u, v, h):
    """Exact integrals of log|x - y(t)| and t*log|x - y(t)| for t in [0, h].

    y(t) runs along the panel; (u, v) are the local coordinates of x.
    Returns (J0, J1); the physical single-layer moments are -J/(2 pi).
    """
    vsafe = np.where(v != 0.0, v, 1.0)

    def F(s):
        R = s * s + v * v
        Rsafe = np.where(R > 0.0, R, 1.0)
        slog = np.where(R > 0.0, s * np.log(Rsafe), 0.0)
        at = np.where(v != 0.0, v * np.arctan(s / vsafe), 0.0)
        return slog - 2.0 * s + 2.0 * at

    def G2(s):
        R = s * s + v * v
        lg = np.log(np.where(R > 0.0, R, 1.0))
        return 0.5 * (R * lg - s * s)

    sb, sa = h - u, -u
    J0 = 0.5 * (F(sb) - F(sa))
    J1 = 0.5 * (G2(sb) - G2(sa)) + u * J0
    return J0, J1


def _dlp_inner(u, v, h):
    """Exact integrals of the double-layer kernel times 1 and t over a
    panel: kernel (x - y).n(y) / (2 pi |x - y|^2).

    Returns (D0, D1) already including the 1/(2 pi) factor.  For v == 0
    (x on the panel's line) the principal value is zero.
    """
    theta = np.arctan2(v * h, v * v - u * (h - u))
    Ra = u * u + v * v
    Rb = (h - u) ** 2 + v * v
    ok = (Ra > 0.0) & (Rb > 0.0)
    lr = np.where(ok, np.log(np.where(ok, Rb / np.where(Ra > 0.0, Ra, 1.0), 1.0)),
                  0.0)
    Q0 = theta
    Q1 = 0.5 * v * lr + u * theta
    on_line = (v == 0.0)
    D0 = np.where(on_line, 0.0, Q0 / TWO_PI)
    D1 = np.where(on_line, 0.0, Q1 / TWO_PI)
    return D0, D1


def _slp_inner_basis(points, pa, pb, lengths):
    """Single-layer moments against the P1 panel basis (1 - t/h, t/h);
    shape (..., P, 2).  Summing the last axis gives the P0 moment."""
    u, v = _local_coords(points, pa, pb, lengths)
    J0, J1 = _slp_inner(u, v, lengths)
    m1 = J1 / lengths
    return np.stack([J0 - m1, m1], axis=-1) * (-1.0 / TWO_PI)


def _dlp_inner_basis(points, pa, pb, lengths):
    """Double-layer moments against the P1 panel basis; shape (..., P, 2)."""
    u, v = _local_coords(points, pa, pb, lengths)
    D0, D1 = _dlp_inner(u, v, lengths)
    m1 = D1 / lengths
    return np.stack([D0 - m1, m1], axis=-1)


# ----------------------------------------------------------------------
# closed forms and pairwise Galerkin integrals
# ----------------------------------------------------------------------

def _coincident_slp_block(h, order_a, order_b):
    # from int_0^1 int_0^1 log|s-t| s^m t^n = -3/2, -3/4, -3/4, -7/16
    L = np.log(h)
    c = h * h / TWO_PI
    if order_a == 0 and order_b == 0:
        return np.array([[c * (1.5 - L)]])
    if order_a == 0 and order_b == 1:
        return np.full((1, 2), c * (0.75 - 0.5 * L))
    if order_a == 1 and order_b == 0:
        return np.full((2, 1), c * (0.75 - 0.5 * L))
    diag = c * (7.0 / 16.0 - 0.25 * L)
    off = c * (5.0 / 16.0 - 0.25 * L)
    return np.array([[diag, off], [off, diag]])


def _test_weights(order, t, w, h):
    if order == 0:
        return np.ones((1, t.size)) * (w * h)
    return np.stack([1.0 - t, t]) * (w * h)


def _panel_relation(p, q, tol=1e-12):
    """Classify a panel pair: 'coincident', 'shared' (+ which endpoint of p),
    'overlap' (invalid), or 'separate'."""
    scale = max(p.length, q.length)
    same = (np.allclose(p.a, q.a, atol=tol * scale) and
            np.allclose(p.b, q.b, atol=tol * scale))
    flipped = (np.allclose(p.a, q.b, atol=tol * scale) and
               np.allclose(p.b, q.a, atol=tol * scale))
    if same or flipped:
        return "coincident", None
    d = p.b - p.a
    cr_a = d[0] * (q.a[1] - p.a[1]) - d[1] * (q.a[0] - p.a[0])
    cr_b = d[0] * (q.b[1] - p.a[1]) - d[1] * (q.b[0] - p.a[0])
    collinear = max(abs(cr_a), abs(cr_b)) <= tol * scale * scale
    if collinear:
        t = d / p.length ** 2
        ta = float((q.a - p.a) @ t) * p.length
        tb = float((q.b - p.a) @ t) * p.length
        lo, hi = min(ta, tb), max(ta, tb)
        if lo < p.length - tol * scale and hi > tol * scale:
            raise MeshError("overlapping, non-identical panels")
    for end, pt in ((0, p.a), (1, p.b)):
        if (np.allclose(pt, q.a, atol=tol * scale)
                or np.allclose(pt, q.b, atol=tol * scale)):
            return "shared", end
    return "separate", None


def _panels_collinear(p, q, tol=1e-12):
    scale = max(p.length, q.length)
    d = p.b - p.a
    cr_a = d[0] * (q.a[1] - p.a[1]) - d[1] * (q.a[0] - p.a[0])
    cr_b = d[0] * (q.b[1] - p.a[1]) - d[1] * (q.b[0] - p.a[0])
    return max(abs(cr_a), abs(cr_b)) <= tol * scale * scale


def _outer_rule(relation, shared_end, p, q, order):
    if relation == "shared":
        return quadrature.graded01(order, 30, end=shared_end)
    gap = _panel_gap(p, q)
    if gap < max(p.length, q.length):
        return quadrature.gauss01(2 * order)
    return quadrature.gauss01(max(order, 8))


def _panel_gap(p, q):
    t, _ = quadrature.gauss01(4)
    xs = p.a + t[:, None] * (p.b - p.a)
    ys = q.a + t[:, None] * (q.b - q.a)
    d = xs[:, None, :] - ys[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).min())


def slp_panel_integral(panel_a, panel_b, order_a, order_b):
    """Galerkin single-layer block between two panels,
    entries int_a int_b G(x - y) test_i(x) trial_j(y).

    order 0 is the constant basis (one function), order 1 the two linear
    Lagrange functions along the panel.
    """
    relation, end = _panel_relation(panel_a, panel_b)
    if relation == "coincident":
        return _coincident_slp_block(panel_a.length, order_a, order_b)
    t, w = _outer_rule(relation, end, panel_a, panel_b, 8)
    xs = panel_a.a + t[:, None] * (panel_a.b - panel_a.a)
    inner = _slp_inner_basis(xs, panel_b.a[None, :], panel_b.b[None, :],
                             np.array([panel_b.length]))[:, 0, :]
    if order_b == 0:
        inner = inner.sum(axis=1, keepdims=True)
    tw = _test_weights(order_a, t, w, panel_a.length)
    return tw @ inner


def dlp_panel_integral(panel_x, panel_y, order_x=1, order_y=1):
    """Galerkin double-layer block: entries
    int_x int_y [(x - y).n(y) / (2 pi |x - y|^2)] test_i(x) trial_j(y).

    Exactly zero for collinear (including coincident) panel pairs.
    """
    relation, end = _panel_relation(panel_x, panel_y)
    nx = 1 if order_x == 0 else 2
    ny = 1 if order_y == 0 else 2
    if relation == "coincident" or _panels_collinear(panel_x, panel_y):
        return np.zeros((nx, ny))
    t, w = _outer_rule(relation, end, panel_x, panel_y, 8)
    xs = panel_x.a + t[:, None] * (panel_x.b - panel_x.a)
    inner = _dlp_inner_basis(xs, panel_y.a[None, :], panel_y.b[None, :],
                             np.array([panel_y.length]))[:, 0, :]
    if order_y == 0:
        inner = inner.sum(axis=1, keepdims=True)
    tw = _test_weights(order_x, t, w, panel_x.length)
    return tw @ inner


# ----------------------------------------------------------------------
# assembled operator matrices
# ----------------------------------------------------------------------

@dataclass
class BemMatrices:
    """Boundary operator matrices on a loop with P panels.

    Rows are the 2P discontinuous-P1 test functions (panelwise, loop
    order).  V_ps columns are the P panelwise-constant flux densities,
    K_up / M_up columns are the P boundary vertex hat functions, and
    G_psi is the single-layer Gram matrix on the test space itself (the
    discrete H^{-1/2}(Gamma) inner product; positive definite for domains
    of diameter < 1).
    """

    loop: object
    V_ps: np.ndarray
    K_up: np.ndarray
    M_up: np.ndarray
    G_psi: np.ndarray
    G_psi_chol: np.ndarray = field(repr=False, default=None)

    def solve_gpsi(self, rhs):
        return scipy.linalg.cho_solve((self.G_psi_chol, True), rhs)

    def half_minus_k(self):
        """Matrix of <(1/2 - K) uhat_j, psi_i> on the boundary hats."""
        return 0.5 * self.M_up - self.K_up


def assemble_bem(loop, quad_order=8):
    """Assemble all boundary matrices for a loop.

    The single-layer Gram G_psi is factorized here; failure indicates a
    geometry/scaling violation (the domain must have diameter < 1).
    """
    P = loop.num_panels
    pa, pb = loop.points_a, loop.points_b
    lengths = loop.lengths
    order_far = max(16, 2 * quad_order)
    t_far, w_far = quadrature.gauss01(order_far)
    t_gr, w_gr = quadrature.graded01(quad_order, 30, end=0)

    G = np.zeros((2 * P, 2 * P))
    K = np.zeros((2 * P, P))
    M = np.zeros((2 * P, P))
    nb = np.arange(P)
    prev = (nb - 1) % P
    nxt = (nb + 1) % P

    for i in range(P):
        # far-field pass for all source panels at the target's Gauss nodes
        xs = pa[i] + t_far[:, None] * (pb[i] - pa[i])
        Sb = _slp_inner_basis(xs, pa, pb, lengths)       # (q, P, 2)
        Db = _dlp_inner_basis(xs, pa, pb, lengths)
        tw = _test_weights(1, t_far, w_far, lengths[i])  # (2, q)
        Gblk = np.einsum("aq,qjb->ajb", tw, Sb)
        Kblk = np.einsum("aq,qjb->ajb", tw, Db)

        # graded fix-up for the neighbours sharing a vertex with panel i
        for j, end in ((int(prev[i]), 0), (int(nxt[i]), 1)):
            tt = t_gr if end == 0 else 1.0 - t_gr
            xs_n = pa[i] + tt[:, None] * (pb[i] - pa[i])
            Sn = _slp_inner_basis(xs_n, pa[j][None], pb[j][None],
                                  lengths[j][None])[:, 0, :]
            Dn = _dlp_inner_basis(xs_n, pa[j][None], pb[j][None],
                                  lengths[j][None])[:, 0, :]
            twn = _test_weights(1, tt, w_gr, lengths[i])
            Gblk[:, j, :] = twn @ Sn
            Kblk[:, j, :] = twn @ Dn

        # closed form on the panel itself; own double layer vanishes
        Gblk[:, i, :] = _coincident_slp_block(lengths[i], 1, 1)
        Kblk[:, i, :] = 0.0

        rows = slice(2 * i, 2 * i + 2)
        G[rows, :] = Gblk.reshape(2, 2 * P)
        np.add.at(K[rows, :], (slice(None), nb), Kblk[:, :, 0])
        np.add.at(K[rows, :], (slice(None), nxt), Kblk[:, :, 1])
        M[2 * i, i] = lengths[i] / 3.0
        M[2 * i, int(nxt[i])] = lengths[i] / 6.0
        M[2 * i + 1, i] = lengths[i] / 6.0
        M[2 * i + 1, int(nxt[i])] = lengths[i] / 3.0

    Vps = G[:, 0::2] + G[:, 1::2]
    try:
        chol = scipy.linalg.cholesky(0.5 * (G + G.T), lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(
            "single-layer Gram not positive definite; check that the "
            "domain diameter is < 1") from exc
    return BemMatrices(loop=loop, V_ps=Vps, K_up=K, M_up=M, G_psi=G,
                       G_psi_chol=chol)


# ----------------------------------------------------------------------
# potential evaluation
# ----------------------------------------------------------------------

def _as_p1_coefs(density, P):
    density = np.asarray(density, dtype=float)
    if density.shape == (P,):
        return np.repeat(density[:, None], 2, axis=1)
    if density.shape == (P, 2):
        return density
    raise ValueError("density must have shape (P,) or (P, 2)")


def eval_single_layer(loop, density, points):
    """Single-layer potential of a panelwise density at arbitrary points
    (principal value on the boundary itself).  density: (P,) panel
    constants or (P, 2) panelwise-linear endpoint values."""
    points = np.asarray(points, dtype=float)
    coefs = _as_p1_coefs(density, loop.num_panels)
    inner = _slp_inner_basis(points, loop.points_a, loop.points_b,
                             loop.lengths)
    return np.einsum("...jb,jb->...", inner, coefs)


def eval_double_layer(loop, density, points):
    """Double-layer potential of a panelwise density at arbitrary points
    (principal value on the boundary: own / collinear panels drop out)."""
    points = np.asarray(points, dtype=float)
    coefs = _as_p1_coefs(density, loop.num_panels)
    inner = _dlp_inner_basis(points, loop.points_a, loop.points_b,
                             loop.lengths)
    return np.einsum("...jb,jb->...", inner, coefs)


def hat_trace_coefs(loop, vertex_values):
    """Panelwise-linear endpoint values of the piecewise-linear boundary
    function with the given loop-vertex values."""
    vals = np.asarray(vertex_values, dtype=float)
    nxt = (np.arange(loop.num_panels) + 1) % loop.num_panels
    return np.stack([vals, vals[nxt]], axis=1)


def winding_number(loop, points):
    """Winding number of the loop around each point (1 inside, 0 outside)."""
    points = np.asarray(points, dtype=float)
    u, v = _local_coords(points, loop.points_a, loop.points_b, loop.lengths)
    h = loop.lengths
    theta = np.arctan2(v * h, v * v - u * (h - u))
    return -theta.sum(axis=-1) / TWO_PI


def distance_to_boundary(loop, points):
    points = np.asarray(points, dtype=float)
    u, v = _local_coords(points, loop.points_a, loop.points_b, loop.lengths)
    uc = np.clip(u, 0.0, loop.lengths)
    d = np.sqrt((u - uc) ** 2 + v ** 2)
    return d.min(axis=-1)


def point_location(loop, point, tol=1e-12):
    """Classify a point as 'interior', 'exterior' or 'boundary'."""
    point = np.asarray(point, dtype=float)
    scale = float(loop.lengths.max())
    if distance_to_boundary(loop, point[None, :])[0] <= tol * scale:
        return "boundary"
    w = winding_number(loop, point[None, :])[0]
    return "interior" if abs(w - 1.0) < 0.5 else "exterior"


def eval_potentials(loop, density_slp, density_dlp, point, side,
                    quad_order=8):
    """Evaluate S(density_slp)(x) + D(density_dlp)(x) at a point off the
    boundary.

    Densities may be panelwise coefficient arrays ((P,) constants or
    (P, 2) linear endpoint values) or callables f(x, y), which are
    integrated panelwise with Gauss rules, subdividing panels that are
    closer to the point than their own length.  A density of None
    contributes nothing.

    Raises ValueError if the point lies on the boundary or on the side
    other than the one stated.
    """
    point = np.asarray(point, dtype=float)
    loc = point_location(loop, point)
    if loc == "boundary":
        raise ValueError("evaluation point lies on the boundary")
    if side not in ("interior", "exterior"):
        raise ValueError("side must be 'interior' or 'exterior'")
    if loc != side:
        raise ValueError("point is {} but side='{}' was stated".format(loc, side))
    total = 0.0
    for density, kind in ((density_slp, "slp"), (density_dlp, "dlp")):
        if density is None:
            continue
        if callable(density):
            total += _numeric_layer_eval(loop, density, point, kind, quad_order)
        else:
            fn = eval_single_layer if kind == "slp" else eval_double_layer
            total += float(fn(loop, density, point[None, :])[0])
    return float(total)


def _numeric_layer_eval(loop, fn, point, kind, order):
    total = 0.0
    for k in range(loop.num_panels):
        pa, pb = loop.points_a[k], loop.points_b[k]
        nrm = loop.normals[k]
        pieces = [(pa, pb)]
        # split panels lying closer than their own length
        for _ in range(40):
            new = []
            again = False
            for (a, b) in pieces:
                ln = float(np.hypot(*(b - a)))
                mid = 0.5 * (a + b)
                dist = min(np.hypot(*(point - a)), np.hypot(*(point - b)),
                           np.hypot(*(point - mid)))
                if dist < ln:
                    new += [(a, mid), (mid, b)]
                    again = True
                else:
                    new.append((a, b))
            pieces = new
            if not again:
                break
        t, w = quadrature.gauss01(max(order, 8))
        for (a, b) in pieces:
            ln = float(np.hypot(*(b - a)))
            ys = a + t[:, None] * (b - a)
            vals = fn(ys[:, 0], ys[:, 1])
            d = point[None, :] - ys
            r2 = (d ** 2).sum(axis=1)
            if kind == "slp":
                ker = -np.log(r2) / (2.0 * TWO_PI)
            else:
                ker = (d @ nrm) / (TWO_PI * r2)
            total += ln * np.dot(w, vals * ker)
    return total
