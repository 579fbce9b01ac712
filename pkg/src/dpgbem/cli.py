"""Batch driver: run the convergence experiments and emit CSV results.

Two manufactured problems are built in, both with vanishing exterior
part (the transmission data are the trace and normal derivative of the
interior solution):

  square:  Omega = (-0.1, 0.1)^2,  u = sin(pi x) sin(pi y),
           f = 2 pi^2 sin(pi x) sin(pi y)
  lshape:  Omega = (-0.25, 0.25)^2 minus the quadrant (0,0.25)x(-0.25,0),
           u = r^(2/3) sin(2 phi / 3) in polar coordinates at the
           reentrant corner, f = 0

Squared error norms are reported to match the usual convergence plots;
rates are decay exponents with respect to the triangle count N (the
rate with respect to h is twice the N-rate, since h ~ N^{-1/2}).
"""

import argparse
import io
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bem as bem_mod
from . import jn_reference, solver
from .dpg_assembly import ProblemData
from .errors import ConfigError, MeshError, NumericalError
from .mesh import boundary_loop, make_lshape_mesh, make_square_mesh, refine_uniform

CSV_HEADER = ("level,N,h,dim_trial,dim_test,err_energy_sq,err_u_l2_sq,"
              "err_sigma_l2_sq,err_trace_l2,err_flux_l2,"
              "rate_energy,rate_u,rate_sigma")

AGREEMENT_HEADER = ("level,N,agree_trace_l2,agree_flux_l2,"
                    "dpg_err_trace_l2,jn_err_trace_l2")

MAX_LEVELS = 9  # memory guard


@dataclass
class ExperimentConfig:
    domain: str
    levels: int = 5
    solver: str = "dpg"
    quad_order_boundary: int = 8
    stabilize_jn: bool = True
    output_path: Optional[str] = None

    def validate(self):
        if self.domain not in ("square", "lshape"):
            raise ConfigError("domain must be 'square' or 'lshape'")
        if self.solver not in ("dpg", "jn", "both"):
            raise ConfigError("solver must be 'dpg', 'jn' or 'both'")
        if int(self.levels) != self.levels or self.levels < 2:
            raise ConfigError("levels must be an integer >= 2")
        if self.levels > MAX_LEVELS:
            raise ConfigError(
                "levels > {} exceeds the memory guard".format(MAX_LEVELS))
        if self.quad_order_boundary < 2:
            raise ConfigError("quad-order must be >= 2")


@dataclass
class ConvergenceRecord:
    level: int
    N: int
    h: float
    dim_trial: int
    dim_test: int
    err_energy_sq: float
    err_u_l2_sq: float
    err_sigma_l2_sq: float
    err_trace_l2: float
    err_flux_l2: float
    rate_energy: float = math.nan
    rate_u: float = math.nan
    rate_sigma: float = math.nan
    probe_values: tuple = field(default=())
    agree_trace_l2: float = math.nan
    agree_flux_l2: float = math.nan
    jn_err_trace_l2: float = math.nan
    jn_err_flux_l2: float = math.nan


@dataclass
class ExactSolution:
    u: callable
    grad: callable


def manufacture_data(domain):
    """Problem data and exact solution callables for a domain tag."""
    if domain == "square":
        pi = np.pi

        def u(x, y):
            return np.sin(pi * x) * np.sin(pi * y)

        def grad(x, y):
            return (pi * np.cos(pi * x) * np.sin(pi * y),
                    pi * np.sin(pi * x) * np.cos(pi * y))

        def f(x, y):
            return 2.0 * pi ** 2 * np.sin(pi * x) * np.sin(pi * y)

    elif domain == "lshape":
        def _polar(x, y):
            r = np.hypot(x, y)
            phi = np.arctan2(y, x)
            phi = np.where(phi < 0.0, phi + 2.0 * np.pi, phi)
            return r, phi

        def u(x, y):
            r, phi = _polar(x, y)
            return np.where(r > 0.0, r ** (2.0 / 3.0) * np.sin(2.0 * phi / 3.0),
                            0.0)

        def grad(x, y):
            r, phi = _polar(x, y)
            rs = np.where(r > 0.0, r, 1.0)
            c = (2.0 / 3.0) * rs ** (-1.0 / 3.0)
            gx = np.where(r > 0.0, -c * np.sin(phi / 3.0), 0.0)
            gy = np.where(r > 0.0, c * np.cos(phi / 3.0), 0.0)
            return gx, gy

        def f(x, y):
            return np.zeros_like(np.asarray(x, dtype=float))

    else:
        raise ConfigError("unknown domain '{}'".format(domain))

    def phi0(x, y, nx, ny):
        gx, gy = grad(x, y)
        return gx * nx + gy * ny

    data = ProblemData(f=f, u0=u, phi0=phi0)
    return data, ExactSolution(u=u, grad=grad)


def initial_mesh(domain):
    """Coarsest experiment mesh: 32 triangles on the square, 24 on the L."""
    if domain == "square":
        return make_square_mesh(0.1, 4)
    if domain == "lshape":
        return make_lshape_mesh(0.25, 2)
    raise ConfigError("unknown domain '{}'".format(domain))


def singular_vertex(domain):
    return (0.0, 0.0) if domain == "lshape" else None


def probe_points(domain):
    """Four exterior points at distance exactly 1 from the boundary."""
    if domain == "square":
        w = 0.1
        return np.array([[w + 1.0, 0.0], [-(w + 1.0), 0.0],
                         [0.0, w + 1.0], [0.0, -(w + 1.0)]])
    q = 0.25
    return np.array([[q + 1.0, q / 2.0], [-(q + 1.0), 0.0],
                     [0.0, q + 1.0], [0.0, -(q + 1.0)]])


def compatibility_residual(mesh, data, loop=None):
    """Quadrature value of int_Omega f + int_Gamma phi0 (must be ~0)."""
    from . import quadrature

    pts, w = quadrature.triangle_duffy(6)
    phys = quadrature.map_to_physical(mesh.triangle_vertices(), pts)
    fv = np.broadcast_to(data.f(phys[..., 0], phys[..., 1]),
                         phys[..., 0].shape)
    vol = float((fv @ w * 2.0 * mesh.areas()).sum())
    if loop is None:
        loop = boundary_loop(mesh)
    t, wt = quadrature.graded01_both(8, 40)
    pa, pb = loop.points_a, loop.points_b
    bpts = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
    ph = data.phi0(bpts[..., 0], bpts[..., 1], loop.normals[:, None, 0],
                   loop.normals[:, None, 1])
    bnd = float(((loop.lengths[:, None] * wt[None, :]) * ph).sum())
    return vol + bnd


def run_convergence(config, progress=None):
    """Run the configured refinement study; returns one record per level
    and writes the CSV file(s) if an output path is set."""
    config.validate()
    data, exact = manufacture_data(config.domain)
    sv = singular_vertex(config.domain)
    probes = probe_points(config.domain)
    mesh = initial_mesh(config.domain)
    records = []
    for level in range(config.levels):
        loop = boundary_loop(mesh)
        bem_mats = bem_mod.assemble_bem(loop,
                                        quad_order=config.quad_order_boundary)
        rec = None
        run_dpg = config.solver in ("dpg", "both")
        run_jn = config.solver in ("jn", "both")
        sol = None
        if run_dpg:
            sol, blocks = solver.solve_dpg(mesh, data,
                                           quad_order=config.quad_order_boundary,
                                           bem_mats=bem_mats)
            ee = solver.energy_error(blocks, sol)
            eu, es = solver.l2_errors(sol, exact.u, exact.grad, mesh,
                                      singular_vertex=sv)
            etr, efl = solver.boundary_cauchy_errors(sol)
            pv = tuple(float(v) for v in
                       solver.eval_exterior_field(sol, probes))
            rec = ConvergenceRecord(
                level=level, N=mesh.num_triangles, h=mesh.mesh_size(),
                dim_trial=sol.trial_layout.dim,
                dim_test=blocks.B.shape[0],
                err_energy_sq=ee ** 2, err_u_l2_sq=eu ** 2,
                err_sigma_l2_sq=es ** 2, err_trace_l2=etr, err_flux_l2=efl,
                probe_values=pv)
        if run_jn:
            system = jn_reference.assemble_jn(
                mesh, data, stabilized=config.stabilize_jn,
                bem_mats=bem_mats, quad_order=config.quad_order_boundary)
            u_n, phi = jn_reference.solve_jn(system)
            eu_j, es_j = jn_reference.jn_errors(mesh, u_n, exact.u, exact.grad,
                                                singular_vertex=sv)
            etr_j, efl_j = jn_reference.jn_boundary_errors(
                mesh, loop, u_n, phi, data)
            if rec is None:
                dim = mesh.num_vertices + loop.num_panels
                rec = ConvergenceRecord(
                    level=level, N=mesh.num_triangles, h=mesh.mesh_size(),
                    dim_trial=dim, dim_test=dim,
                    err_energy_sq=math.nan, err_u_l2_sq=eu_j ** 2,
                    err_sigma_l2_sq=es_j ** 2, err_trace_l2=etr_j,
                    err_flux_l2=efl_j)
            rec.jn_err_trace_l2 = etr_j
            rec.jn_err_flux_l2 = efl_j
            if sol is not None:
                diff = sol.uhat[loop.vertex_ids] - u_n[loop.vertex_ids]
                rec.agree_trace_l2 = solver.piecewise_linear_boundary_norm(
                    loop, diff)
                dflux = sol.flux_c - phi
                rec.agree_flux_l2 = float(
                    np.sqrt((loop.lengths * dflux ** 2).sum()))
        records.append(rec)
        if progress is not None:
            progress("level {} done: N={}, h={:.4g}".format(
                level, rec.N, rec.h))
        if level + 1 < config.levels:
            mesh = refine_uniform(mesh)

    _attach_rates(records)
    if config.output_path:
        with open(config.output_path, "w", newline="") as fh:
            write_csv(records, fh)
        if config.solver == "both":
            stem, ext = os.path.splitext(config.output_path)
            with open(stem + "_agreement" + (ext or ".csv"), "w",
                      newline="") as fh:
                write_agreement_csv(records, fh)
    return records


def _attach_rates(records):
    for prev, cur in zip(records[:-1], records[1:]):
        dn = math.log(cur.N / prev.N)
        for attr, rate_attr in (("err_energy_sq", "rate_energy"),
                                ("err_u_l2_sq", "rate_u"),
                                ("err_sigma_l2_sq", "rate_sigma")):
            a, b = getattr(prev, attr), getattr(cur, attr)
            if a > 0 and b > 0:
                setattr(cur, rate_attr, math.log(a / b) / dn)


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(records, stream):
    stream.write(CSV_HEADER + "\n")
    for r in records:
        row = [r.level, r.N, r.h, r.dim_trial, r.dim_test, r.err_energy_sq,
               r.err_u_l2_sq, r.err_sigma_l2_sq, r.err_trace_l2,
               r.err_flux_l2, r.rate_energy, r.rate_u, r.rate_sigma]
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def write_agreement_csv(records, stream):
    stream.write(AGREEMENT_HEADER + "\n")
    for r in records:
        row = [r.level, r.N, r.agree_trace_l2, r.agree_flux_l2,
               r.err_trace_l2, r.jn_err_trace_l2]
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dpgbem",
        description="Convergence studies for the coupled ultra-weak / "
                    "boundary-element transmission solver.")
    parser.add_argument("--domain", choices=("square", "lshape"),
                        required=True)
    parser.add_argument("--levels", type=int, default=5,
                        help="number of uniform refinement levels (>= 2)")
    parser.add_argument("--solver", choices=("dpg", "jn", "both"),
                        default="dpg")
    parser.add_argument("--out", default=None, metavar="PATH",
                        help="CSV output path (default: stdout)")
    parser.add_argument("--quad-order", type=int, default=8, dest="quad_order",
                        help="Gauss order for boundary quadrature")
    parser.add_argument("--no-stabilize", action="store_true",
                        help="disable the rank-one stabilization of the "
                             "reference coupling")
    args = parser.parse_args(argv)

    config = ExperimentConfig(domain=args.domain, levels=args.levels,
                              solver=args.solver,
                              quad_order_boundary=args.quad_order,
                              stabilize_jn=not args.no_stabilize,
                              output_path=args.out)
    try:
        records = run_convergence(
            config, progress=lambda msg: print(msg, file=sys.stderr))
    except ConfigError as exc:
        print("configuration error: {}".format(exc), file=sys.stderr)
        return 2
    except (NumericalError, MeshError) as exc:
        print("numerical failure: {}".format(exc), file=sys.stderr)
        return 3
    if not config.output_path:
        buf = io.StringIO()
        write_csv(records, buf)
        sys.stdout.write(buf.getvalue())
    return 0


if __name__ == "__main__":
    sys.exit(main())
