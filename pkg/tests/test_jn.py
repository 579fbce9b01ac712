import numpy as np
import pytest

from dpgbem import boundary_loop, make_square_mesh, refine_uniform
from dpgbem import bem, cli, jn_reference as jn, solver
from dpgbem.dpg_assembly import ProblemData


def zero_data():
    return ProblemData(
        f=lambda x, y: np.zeros_like(x),
        u0=lambda x, y: np.zeros_like(x),
        phi0=lambda x, y, nx, ny: np.zeros_like(x + nx))


def test_system_size_coarsest_square():
    mesh = make_square_mesh(0.1, 1)
    system = jn.assemble_jn(mesh, zero_data(), stabilized=False)
    assert system.matrix.shape == (8, 8)  # 4 vertices + 4 boundary panels


def test_zero_data_zero_rhs():
    mesh = make_square_mesh(0.1, 2)
    system = jn.assemble_jn(mesh, zero_data(), stabilized=False)
    assert np.all(system.rhs == 0.0)
    system_s = jn.assemble_jn(mesh, zero_data(), stabilized=True)
    assert np.allclose(system_s.rhs, 0.0)


def test_stabilization_is_rank_one_from_column_sums():
    mesh = make_square_mesh(0.1, 2)
    mats = bem.assemble_bem(boundary_loop(mesh))
    data = zero_data()
    s0 = jn.assemble_jn(mesh, data, stabilized=False, bem_mats=mats)
    s1 = jn.assemble_jn(mesh, data, stabilized=True, bem_mats=mats)
    diff = (s1.matrix - s0.matrix).toarray()
    # reconstruct the functional vector entrywise from column sums
    loop = mats.loop
    nv = mesh.num_vertices
    g = np.zeros(nv + loop.num_panels)
    np.add.at(g[:nv], loop.vertex_ids,
              jn.p0_test_rows(mats.half_minus_k()).sum(axis=0))
    g[nv:] = jn.p0_test_rows(mats.V_ps).sum(axis=0)
    assert np.allclose(diff, np.outer(g, g), atol=1e-14)


def test_constant_solution():
    c = 3.0
    data = ProblemData(
        f=lambda x, y: np.zeros_like(x),
        u0=lambda x, y: c * np.ones_like(x),
        phi0=lambda x, y, nx, ny: np.zeros_like(x + nx))
    mesh = make_square_mesh(0.1, 2)
    u_n, phi = jn.solve_jn(jn.assemble_jn(mesh, data))
    assert np.abs(u_n - c).max() < 1e-10
    assert np.abs(phi).max() < 1e-10


def test_stabilized_matches_unstabilized():
    data, exact = cli.manufacture_data("square")
    mesh = make_square_mesh(0.1, 4)
    mats = bem.assemble_bem(boundary_loop(mesh))
    u1, p1 = jn.solve_jn(jn.assemble_jn(mesh, data, stabilized=True,
                                        bem_mats=mats))
    u0, p0 = jn.solve_jn(jn.assemble_jn(mesh, data, stabilized=False,
                                        bem_mats=mats))
    assert np.abs(u1 - u0).max() < 1e-9
    assert np.abs(p1 - p0).max() < 1e-9


def test_smooth_convergence_rate_h1():
    data, exact = cli.manufacture_data("square")
    mesh = make_square_mesh(0.1, 4)
    errs = []
    for _ in range(3):
        u_n, _ = jn.solve_jn(jn.assemble_jn(mesh, data))
        errs.append(jn.jn_errors(mesh, u_n, exact.u, exact.grad)[1])
        mesh = refine_uniform(mesh)
    rates = np.log(np.array(errs[:-1]) / np.array(errs[1:])) / np.log(2.0)
    assert np.all(rates > 0.8) and np.all(rates < 1.2)


def test_cross_method_agreement_decreases():
    data, exact = cli.manufacture_data("square")
    mesh = make_square_mesh(0.1, 2)
    diffs, bounds = [], []
    for _ in range(3):
        mats = bem.assemble_bem(boundary_loop(mesh))
        sol, _ = solver.solve_dpg(mesh, data, bem_mats=mats)
        u_n, phi = jn.solve_jn(jn.assemble_jn(mesh, data, bem_mats=mats))
        loop = mats.loop
        d = solver.piecewise_linear_boundary_norm(
            loop, sol.uhat[loop.vertex_ids] - u_n[loop.vertex_ids])
        et_dpg, ef_dpg = solver.boundary_cauchy_errors(sol)
        et_jn, ef_jn = jn.jn_boundary_errors(mesh, loop, u_n, phi, data)
        diffs.append(d)
        bounds.append(et_dpg + et_jn)
        # flux agreement: both methods approximate the same exterior flux,
        # so their distance is bounded by the sum of their own errors
        dflux = np.sqrt((loop.lengths * (sol.flux_c - phi) ** 2).sum())
        assert dflux <= 2.0 * (ef_dpg + ef_jn)
        mesh = refine_uniform(mesh)
    assert diffs[0] > diffs[1] > diffs[2]
    assert all(d <= b for d, b in zip(diffs, bounds))


def test_boundary_errors_decrease():
    data, exact = cli.manufacture_data("square")
    mesh = make_square_mesh(0.1, 2)
    traces, fluxes = [], []
    for _ in range(3):
        loop = boundary_loop(mesh)
        u_n, phi = jn.solve_jn(jn.assemble_jn(mesh, data))
        et, ef = jn.jn_boundary_errors(mesh, loop, u_n, phi, data)
        traces.append(et)
        fluxes.append(ef)
        mesh = refine_uniform(mesh)
    assert traces[0] > traces[1] > traces[2]
    assert fluxes[0] > fluxes[1] > fluxes[2]
