"""Discrete trial and test spaces.

Trial space: piecewise-constant field variables (vector sigma and scalar u),
continuous piecewise-linear skeleton traces (one dof per mesh vertex) and
edgewise-constant normal fluxes (one dof per edge, with respect to the
fixed global edge normal).

Test space: scalar P2 and vector P2 per element, plus discontinuous P1 on
the boundary edges.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import quadrature


@dataclass(frozen=True)
class TrialDofLayout:
    """Index map for the trial unknowns (sigma, u, uhat, sighat).

    Global ordering: 2 sigma components per triangle (interleaved), then u
    per triangle, then one uhat per mesh vertex, then one sighat per edge.
    """

    n_tri: int
    n_vert: int
    n_edge: int

    @classmethod
    def from_mesh(cls, mesh):
        return cls(mesh.num_triangles, mesh.num_vertices, mesh.num_edges)

    @property
    def dim(self):
        return 3 * self.n_tri + self.n_vert + self.n_edge

    def sigma(self, tri, comp):
        return 2 * tri + comp

    def u(self, tri):
        return 2 * self.n_tri + tri

    def uhat(self, vert):
        return 3 * self.n_tri + vert

    def sighat(self, edge):
        return 3 * self.n_tri + self.n_vert + edge


@dataclass(frozen=True)
class TestDofLayout:
    """Index map for the enriched test space (v, tau, psi).

    Global ordering: 6 scalar P2 dofs per triangle, then 12 vector P2 dofs
    per triangle (node-major, components interleaved), then 2 boundary-trace
    dofs per boundary panel in loop order.
    """

    n_tri: int
    n_bedge: int

    @classmethod
    def from_mesh(cls, mesh):
        return cls(mesh.num_triangles, mesh.num_boundary_edges)

    @property
    def dim(self):
        return 18 * self.n_tri + 2 * self.n_bedge

    def v(self, tri, node):
        return 6 * tri + node

    def tau(self, tri, node, comp):
        return 6 * self.n_tri + 12 * tri + 2 * node + comp

    def psi(self, panel, node):
        return 18 * self.n_tri + 2 * panel + node


def eval_p2_basis(bary):
    """Quadratic Lagrange basis on the reference triangle.

    Parameters
    ----------
    bary : (..., 3) array
        Barycentric coordinates (lambda0, lambda1, lambda2).

    Returns
    -------
    vals : (..., 6) array
    grads : (..., 6, 2) array
        Gradients with respect to the reference coordinates (xi, eta) with
        lambda = (1 - xi - eta, xi, eta).  Node order: vertices 0,1,2 then
        edge midpoints (0,1), (1,2), (2,0).
    """
    bary = np.asarray(bary, dtype=float)
    l0, l1, l2 = bary[..., 0], bary[..., 1], bary[..., 2]
    vals = np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], axis=-1)
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    g = [
        (4 * l0 - 1)[..., None] * dl[0],
        (4 * l1 - 1)[..., None] * dl[1],
        (4 * l2 - 1)[..., None] * dl[2],
        4 * (l1[..., None] * dl[0] + l0[..., None] * dl[1]),
        4 * (l2[..., None] * dl[1] + l1[..., None] * dl[2]),
        4 * (l0[..., None] * dl[2] + l2[..., None] * dl[0]),
    ]
    return vals, np.stack(g, axis=-2)


def eval_trace_p1(t):
    """Linear Lagrange basis on an edge, parameter t in [0, 1]: (1-t, t)."""
    t = np.asarray(t, dtype=float)
    return np.stack([1.0 - t, t], axis=-1)


def side_bary(side, t):
    """Barycentric coordinates along local side s (from local vertex s to
    s+1 mod 3) at edge parameter t."""
    t = np.asarray(t, dtype=float)
    z = np.zeros_like(t)
    cols = {0: (1.0 - t, t, z), 1: (z, 1.0 - t, t), 2: (t, z, 1.0 - t)}[side]
    return np.stack(cols, axis=-1)


def boundary_quadrature(loop, order=8, levels=0):
    """Quadrature nodes on all panels of a boundary loop.

    Returns physical points (P, q, 2) and arc-length weights (P, q).
    With levels > 0 a composite rule graded toward both panel endpoints is
    used, which integrates data with endpoint singularities accurately.
    """
    if levels > 0:
        t, w = quadrature.graded01_both(order, levels)
    else:
        t, w = quadrature.gauss01(order)
    pa, pb = loop.points_a, loop.points_b
    pts = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
    wts = loop.lengths[:, None] * w[None, :]
    return pts, wts


def project_boundary_p0(loop, fn, order=8, levels=24):
    """Panelwise means of a scalar boundary function fn(x, y)."""
    pts, wts = boundary_quadrature(loop, order, levels)
    vals = fn(pts[..., 0], pts[..., 1])
    return (wts * vals).sum(axis=1) / loop.lengths


def project_boundary_p0_flux(loop, fn, order=8, levels=24):
    """Panelwise means of a normal-flux function fn(x, y, nx, ny), taken
    with the outward panel normal."""
    pts, wts = boundary_quadrature(loop, order, levels)
    nx = loop.normals[:, None, 0]
    ny = loop.normals[:, None, 1]
    vals = fn(pts[..., 0], pts[..., 1], nx, ny)
    return (wts * vals).sum(axis=1) / loop.lengths


def project_boundary_p1(loop, fn, order=8, levels=24):
    """L2 projection of fn(x, y) onto the continuous piecewise linears on
    the boundary loop; returns one coefficient per loop vertex."""
    npan = loop.num_panels
    if levels > 0:
        t, w = quadrature.graded01_both(order, levels)
    else:
        t, w = quadrature.gauss01(order)
    pa, pb = loop.points_a, loop.points_b
    pts = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
    vals = fn(pts[..., 0], pts[..., 1])
    wts = loop.lengths[:, None] * w[None, :]
    rhs = np.zeros(npan)
    np.add.at(rhs, np.arange(npan), (wts * vals * (1.0 - t)[None, :]).sum(axis=1))
    np.add.at(rhs, (np.arange(npan) + 1) % npan, (wts * vals * t[None, :]).sum(axis=1))
    h = loop.lengths
    mass = np.zeros((npan, npan))
    k = np.arange(npan)
    mass[k, k] += h / 3.0
    mass[k, (k + 1) % npan] += h / 6.0
    mass[(k + 1) % npan, k] += h / 6.0
    mass[(k + 1) % npan, (k + 1) % npan] += h / 3.0
    return scipy.linalg.solve(mass, rhs, assume_a="pos")


def interpolate_trial(exact_u, exact_grad_u, exact_flux, mesh, layout,
                      volume_rule=None, edge_order=6, edge_levels=24):
    """Interpolate an exact solution into the trial space.

    sigma and u are elementwise mean values (sigma from exact_flux), uhat
    interpolates exact_u at the vertices, and sighat is the edge mean of
    exact_grad_u dotted with the global edge normal.

    exact_u(x, y) -> scalar, exact_grad_u(x, y) and exact_flux(x, y) ->
    pair of arrays (gx, gy); all numpy-vectorized.
    """
    if volume_rule is None:
        volume_rule = quadrature.triangle_duffy(6)
    pts, w = volume_rule
    coeffs = np.zeros(layout.dim)

    phys = quadrature.map_to_physical(mesh.triangle_vertices(), pts)
    x, y = phys[..., 0], phys[..., 1]
    wsum = w.sum()
    uvals = exact_u(x, y)
    coeffs[2 * layout.n_tri:3 * layout.n_tri] = uvals @ w / wsum
    gx, gy = exact_flux(x, y)
    gx = np.broadcast_to(gx, x.shape)
    gy = np.broadcast_to(gy, x.shape)
    sig = np.stack([gx @ w, gy @ w], axis=1) / wsum
    coeffs[:2 * layout.n_tri] = sig.ravel()

    vx, vy = mesh.vertices[:, 0], mesh.vertices[:, 1]
    off = 3 * layout.n_tri
    coeffs[off:off + layout.n_vert] = exact_u(vx, vy)

    t, wt = quadrature.graded01_both(edge_order, edge_levels)
    pa = mesh.vertices[mesh.edges[:, 0]]
    pb = mesh.vertices[mesh.edges[:, 1]]
    epts = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
    gx, gy = exact_grad_u(epts[..., 0], epts[..., 1])
    gx = np.broadcast_to(gx, epts[..., 0].shape)
    gy = np.broadcast_to(gy, epts[..., 0].shape)
    gn = gx * mesh.edge_normals[:, None, 0] + gy * mesh.edge_normals[:, None, 1]
    off = 3 * layout.n_tri + layout.n_vert
    coeffs[off:] = gn @ wt
    return coeffs
