"""Assembly of the coupled ultra-weak system and its normal equations.

The rectangular operator B maps the trial unknowns (sigma, u, uhat,
sighat) to the enriched test space (elementwise scalar P2, vector P2, and
discontinuous P1 on the boundary), implementing the three coupled
equations

    (sigma, grad_T v)     - <sighat, v>_S                   = (f, v)
    (sigma, tau) + (u, div_T tau) - <uhat, tau.n>_S         = 0
    <V sighat, psi>_G + <(1/2 - K) uhat, psi>_G             = <(1/2-K)u0 + V phi0, psi>_G

Skeleton pairings carry the element-side sign of the fixed global edge
normal (sighat terms) and the element-outward normals (uhat terms).

The test Gram G is block diagonal: one H1 block (6x6) and one H(div)
block (12x12) per element, plus the single-layer Gram on the boundary
trace space; no cross blocks.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import quadrature, spaces
from .errors import NumericalError


@dataclass
class ProblemData:
    """Transmission problem data: interior source f(x, y), Dirichlet jump
    u0(x, y) on the boundary and Neumann jump phi0(x, y, nx, ny) taken with
    the outward normal.  All callables are numpy-vectorized.

    For d = 2 the data must satisfy int_Omega f + int_Gamma phi0 = 0;
    this holds automatically for data manufactured from an interior
    solution with vanishing exterior part.
    """

    f: Callable
    u0: Callable
    phi0: Callable


class BlockGram:
    """Block-diagonal test-space Gram matrix with per-block factorizations.

    Blocks: per element the H1 Gram on scalar P2 and the H(div) Gram on
    vector P2, then one global boundary block, the single-layer Gram of
    the bem module (realizing the H^{-1/2}(Gamma) inner product).
    """

    def __init__(self, Gv, Gtau, bem_mats):
        self.Gv = Gv
        self.Gtau = Gtau
        self.bem = bem_mats
        self.n_tri = Gv.shape[0]
        self.n_psi = bem_mats.G_psi.shape[0]
        try:
            self._Lv = np.linalg.cholesky(Gv)
            self._Ltau = np.linalg.cholesky(Gtau)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("test Gram block not SPD; assembly bug") from exc

    @property
    def dim(self):
        return 18 * self.n_tri + self.n_psi

    @property
    def num_blocks(self):
        return 2 * self.n_tri + 1

    def _parts(self, vec):
        nt = self.n_tri
        return (vec[:6 * nt].reshape(nt, 6),
                vec[6 * nt:18 * nt].reshape(nt, 12),
                vec[18 * nt:])

    def apply(self, vec):
        """G @ vec."""
        rv, rt, rp = self._parts(np.asarray(vec, dtype=float))
        out = np.concatenate([
            np.einsum("tij,tj->ti", self.Gv, rv).ravel(),
            np.einsum("tij,tj->ti", self.Gtau, rt).ravel(),
            self.bem.G_psi @ rp])
        return out

    def solve_vec(self, vec):
        """G^{-1} @ vec, applied blockwise."""
        rv, rt, rp = self._parts(np.asarray(vec, dtype=float))
        sv = np.linalg.solve(self.Gv, rv[..., None])[..., 0]
        st = np.linalg.solve(self.Gtau, rt[..., None])[..., 0]
        sp = self.bem.solve_gpsi(rp)
        return np.concatenate([sv.ravel(), st.ravel(), sp])

    def quadratic(self, vec):
        """vec . G^{-1} vec (the dual-norm square of a residual)."""
        return float(np.dot(vec, self.solve_vec(vec)))

    def solve_matrix(self, B):
        """G^{-1} @ B for a sparse matrix with this row layout."""
        B = B.tocsr()
        nt = self.n_tri
        rows, cols, data = [], [], []

        def run_blocks(blocks, start, bs):
            for t in range(blocks.shape[0]):
                r0 = start + bs * t
                i0, i1 = B.indptr[r0], B.indptr[r0 + bs]
                if i0 == i1:
                    continue
                sub_cols = B.indices[i0:i1]
                uniq, inv = np.unique(sub_cols, return_inverse=True)
                loc = np.zeros((bs, uniq.size))
                rep = np.repeat(np.arange(bs), np.diff(B.indptr[r0:r0 + bs + 1]))
                loc[rep, inv] = B.data[i0:i1]
                sol = np.linalg.solve(blocks[t], loc)
                rr, cc = np.meshgrid(np.arange(r0, r0 + bs), uniq, indexing="ij")
                rows.append(rr.ravel())
                cols.append(cc.ravel())
                data.append(sol.ravel())

        run_blocks(self.Gv, 0, 6)
        run_blocks(self.Gtau, 6 * nt, 12)

        r0 = 18 * nt
        i0, i1 = B.indptr[r0], B.indptr[-1]
        if i1 > i0:
            sub_cols = B.indices[i0:i1]
            uniq, inv = np.unique(sub_cols, return_inverse=True)
            loc = np.zeros((self.n_psi, uniq.size))
            rep = np.repeat(np.arange(self.n_psi), np.diff(B.indptr[r0:]))
            loc[rep, inv] = B.data[i0:i1]
            sol = self.bem.solve_gpsi(loc)
            rr, cc = np.meshgrid(np.arange(r0, r0 + self.n_psi), uniq,
                                 indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            data.append(sol.ravel())

        W = scipy.sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=B.shape)
        return W.tocsr()


@dataclass
class OperatorBlocks:
    """Assembled trial-to-test operator B, test Gram G and load vector."""

    B: scipy.sparse.csr_matrix
    G: BlockGram
    ell: np.ndarray


# ----------------------------------------------------------------------
# element geometry and reference data
# ----------------------------------------------------------------------

_VOL_PTS, _VOL_W = quadrature.triangle_degree4()
_EDGE_T, _EDGE_W = quadrature.gauss01(4)


def _volume_basis():
    bary = np.stack([1.0 - _VOL_PTS[:, 0] - _VOL_PTS[:, 1],
                     _VOL_PTS[:, 0], _VOL_PTS[:, 1]], axis=-1)
    return spaces.eval_p2_basis(bary)


def _edge_basis():
    vals = np.empty((3, _EDGE_T.size, 6))
    hats = np.zeros((3, _EDGE_T.size, 3))
    for s in range(3):
        b = spaces.side_bary(s, _EDGE_T)
        vals[s] = spaces.eval_p2_basis(b)[0]
        hats[s, :, s] = 1.0 - _EDGE_T
        hats[s, :, (s + 1) % 3] = _EDGE_T
    return vals, hats


_P2_VALS, _P2_GRADS = _volume_basis()
_P2_EDGE, _HAT_EDGE = _edge_basis()


def _geometry(mesh):
    verts = mesh.triangle_vertices()
    J = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]],
                 axis=-1)
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    Jinv = np.empty_like(J)
    Jinv[:, 0, 0] = J[:, 1, 1] / detJ
    Jinv[:, 0, 1] = -J[:, 0, 1] / detJ
    Jinv[:, 1, 0] = -J[:, 1, 0] / detJ
    Jinv[:, 1, 1] = J[:, 0, 0] / detJ
    # physical gradients: grad_phys[t, q, i, c] = sum_d gref[q, i, d] Jinv[t, d, c]
    gphys = np.einsum("qid,tdc->tqic", _P2_GRADS, Jinv)
    return verts, detJ, gphys


def _element_b_locals(mesh):
    """Local B blocks (T, 18, 9); trial columns ordered
    [sigma_x, sigma_y, u, uhat(3 vertices), sighat(3 edges)]."""
    ntri = mesh.num_triangles
    _, detJ, gphys = _geometry(mesh)
    loc = np.zeros((ntri, 18, 9))

    # integrals of physical gradients and values over each element
    int_grad = np.einsum("q,tqic->tic", _VOL_W, gphys) * detJ[:, None, None]
    int_val = np.einsum("q,qi->i", _VOL_W, _P2_VALS)[None, :] * detJ[:, None]

    # rows 0..5: test v; (sigma, grad v) columns
    loc[:, 0:6, 0] = int_grad[:, :, 0]
    loc[:, 0:6, 1] = int_grad[:, :, 1]

    # rows 6..17: test tau = e_c N_k; (sigma, tau) and (u, div tau)
    for k in range(6):
        for c in range(2):
            r = 6 + 2 * k + c
            loc[:, r, c] = int_val[:, k]
            loc[:, r, 2] = int_grad[:, k, c]

    h_e = mesh.edge_lengths[mesh.tri_edges]            # (T, 3)
    n_e = mesh.edge_normals[mesh.tri_edges]            # (T, 3, 2)
    sgn = mesh.tri_edge_signs.astype(float)            # (T, 3)
    n_out = sgn[:, :, None] * n_e                      # element outward normals

    # edge moments of the P2 traces and of the vertex hats
    mom_v = np.einsum("q,sqi->si", _EDGE_W, _P2_EDGE)       # (3, 6)
    mom_hv = np.einsum("q,sqj,sqi->sji", _EDGE_W, _HAT_EDGE, _P2_EDGE)  # (3,3,6)

    # - <sighat, v>: column 6+s gets -sign * h * int_e N_i
    for s in range(3):
        loc[:, 0:6, 6 + s] = -(sgn[:, s] * h_e[:, s])[:, None] * mom_v[s][None, :]

    # - <uhat, tau.n>: column 3+j gets -sum_s h_s (n_out)_c int_e hat_j N_k
    for s in range(3):
        for j in range(3):
            contrib = h_e[:, s, None] * mom_hv[s, j][None, :]  # (T, 6)
            for c in range(2):
                loc[:, 6 + 2 * np.arange(6) + c, 3 + j] -= \
                    contrib * n_out[:, s, c][:, None]
    return loc


def _element_maps(mesh, trial, test):
    ntri = mesh.num_triangles
    tri = np.arange(ntri)
    cols = np.empty((ntri, 9), dtype=int)
    cols[:, 0] = trial.sigma(tri, 0)
    cols[:, 1] = trial.sigma(tri, 1)
    cols[:, 2] = trial.u(tri)
    cols[:, 3:6] = trial.uhat(mesh.triangles)
    cols[:, 6:9] = trial.sighat(mesh.tri_edges)
    rows = np.empty((ntri, 18), dtype=int)
    rows[:, 0:6] = 6 * tri[:, None] + np.arange(6)[None, :]
    rows[:, 6:18] = (6 * ntri + 12 * tri[:, None]
                     + np.arange(12)[None, :])
    return rows, cols


def assemble_B(mesh, trial_layout, test_layout, bem_mats):
    """Assemble the rectangular coupled operator as a sparse matrix
    (rows: test dofs, columns: trial dofs)."""
    if trial_layout.n_tri != mesh.num_triangles:
        raise ValueError("trial layout does not match mesh")
    if test_layout.n_bedge != mesh.num_boundary_edges:
        raise ValueError("test layout does not match mesh")
    loc = _element_b_locals(mesh)
    rows, cols = _element_maps(mesh, trial_layout, test_layout)
    r = np.repeat(rows[:, :, None], 9, axis=2).ravel()
    c = np.repeat(cols[:, None, :], 18, axis=1).ravel()

    loop = bem_mats.loop
    P = loop.num_panels
    psi_rows = 18 * mesh.num_triangles + np.arange(2 * P)
    # <V sighat, psi>: global flux dof s_e restricts to sign * s_e on Gamma
    vb = bem_mats.V_ps * loop.signs[None, :].astype(float)
    rb_v = np.repeat(psi_rows, P)
    cb_v = np.tile(trial_layout.sighat(loop.edge_ids), 2 * P)
    # <(1/2 - K) uhat, psi>: boundary vertex hats
    kb = bem_mats.half_minus_k()
    rb_k = np.repeat(psi_rows, P)
    cb_k = np.tile(trial_layout.uhat(loop.vertex_ids), 2 * P)

    B = scipy.sparse.coo_matrix(
        (np.concatenate([loc.ravel(), vb.ravel(), kb.ravel()]),
         (np.concatenate([r, rb_v, rb_k]),
          np.concatenate([c, cb_v, cb_k]))),
        shape=(test_layout.dim, trial_layout.dim))
    return B.tocsr()


def assemble_gram(mesh, test_layout, bem_mats):
    """Assemble the block-diagonal test Gram: per element
    int grad v . grad v' + v v' and int tau . tau' + div tau div tau',
    boundary block from the bem module."""
    if test_layout.n_tri != mesh.num_triangles:
        raise ValueError("test layout does not match mesh")
    _, detJ, gphys = _geometry(mesh)
    w = _VOL_W
    vals = _P2_VALS
    Gv = (np.einsum("q,tqic,tqjc->tij", w, gphys, gphys)
          + np.einsum("q,qi,qj->ij", w, vals, vals)[None]) * detJ[:, None, None]

    ntri = mesh.num_triangles
    Gtau = np.zeros((ntri, 12, 12))
    mass = np.einsum("q,qi,qj->ij", w, vals, vals)
    for k in range(6):
        for m in range(6):
            for c in range(2):
                Gtau[:, 2 * k + c, 2 * m + c] += mass[k, m] * detJ
    div = gphys.reshape(ntri, w.size, 12)[:, :, :]  # grad components interleave
    # div(e_c N_k) = d N_k / d x_c lines up with the (k, c) interleaving
    Gtau += np.einsum("q,tqa,tqb->tab", w, div, div) * detJ[:, None, None]
    return BlockGram(Gv, Gtau, bem_mats)


def assemble_load(mesh, test_layout, data, bem_mats, volume_rule=None,
                  boundary_order=8, boundary_levels=30):
    """Assemble the load vector: (f, v) per element plus the boundary data
    term <(1/2 - K) u0 + V phi0, psi>.

    The kernel parts apply the assembled operators to the L2 projections
    of u0 (onto the boundary hats) and phi0 (onto panel constants); the
    mass part integrates u0 directly against the test functions.
    """
    if volume_rule is None:
        volume_rule = quadrature.triangle_duffy(5)
    pts, w = volume_rule
    bary = np.stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]],
                    axis=-1)
    vals = spaces.eval_p2_basis(bary)[0]
    verts = mesh.triangle_vertices()
    J = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]],
                 axis=-1)
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    phys = quadrature.map_to_physical(verts, pts)
    fv = data.f(phys[..., 0], phys[..., 1])
    fv = np.broadcast_to(fv, phys[..., 0].shape)
    ell = np.zeros(test_layout.dim)
    ell[:6 * mesh.num_triangles] = (
        np.einsum("q,tq,qi->ti", w, fv, vals) * detJ[:, None]).ravel()

    loop = bem_mats.loop
    u0_hat = spaces.project_boundary_p1(loop, data.u0,
                                        order=boundary_order,
                                        levels=boundary_levels)
    phi0_p0 = spaces.project_boundary_p0_flux(loop, data.phi0,
                                              order=boundary_order,
                                              levels=boundary_levels)
    # direct quadrature of u0 against the boundary test functions
    t, wt = quadrature.graded01_both(boundary_order, boundary_levels)
    pa, pb = loop.points_a, loop.points_b
    bpts = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
    u0v = data.u0(bpts[..., 0], bpts[..., 1])
    wl = loop.lengths[:, None] * wt[None, :]
    m0 = (wl * u0v * (1.0 - t)[None, :]).sum(axis=1)
    m1 = (wl * u0v * t[None, :]).sum(axis=1)
    mass_u0 = np.stack([m0, m1], axis=1).ravel()

    ell[6 * mesh.num_triangles + 12 * mesh.num_triangles:] = (
        0.5 * mass_u0 - bem_mats.K_up @ u0_hat + bem_mats.V_ps @ phi0_p0)
    return ell


def assemble_operator_blocks(mesh, trial_layout, test_layout, bem_mats, data,
                             **load_kwargs):
    """Assemble B, G and ell together."""
    B = assemble_B(mesh, trial_layout, test_layout, bem_mats)
    G = assemble_gram(mesh, test_layout, bem_mats)
    ell = assemble_load(mesh, test_layout, data, bem_mats, **load_kwargs)
    return OperatorBlocks(B=B, G=G, ell=ell)


def build_normal_equations(B, G, ell):
    """Form the practical-DPG normal equations A = B^T G^{-1} B and
    b = B^T G^{-1} ell.

    A is symmetric positive definite on the trial space; G^{-1} is applied
    blockwise, never formed densely.
    """
    W = G.solve_matrix(B)
    A = (B.T @ W).tocsr()
    b = B.T @ G.solve_vec(ell)
    if np.any(A.diagonal() <= 0.0):
        raise NumericalError("normal equations indefinite: B rank deficient")
    return A, b
