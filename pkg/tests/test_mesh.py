import io

import numpy as np
import pytest

from dpgbem import (MeshError, boundary_loop, build_mesh, dump_mesh,
                    make_lshape_mesh, make_square_mesh, refine_uniform)


def check_invariants(mesh):
    assert np.all(mesh.areas() > 0.0)
    # interior edges have two triangles, boundary edges one
    n_inc = (mesh.edge_tris >= 0).sum(axis=1)
    is_bnd = np.zeros(mesh.num_edges, dtype=bool)
    is_bnd[mesh.boundary_edges] = True
    assert np.all(n_inc[is_bnd] == 1)
    assert np.all(n_inc[~is_bnd] == 2)
    # the two elements of an interior edge see opposite outward normals
    for e in np.nonzero(~is_bnd)[0]:
        t0, t1 = mesh.edge_tris[e]
        s0 = mesh.tri_edge_signs[t0][mesh.tri_edges[t0] == e][0]
        s1 = mesh.tri_edge_signs[t1][mesh.tri_edges[t1] == e][0]
        assert {int(s0), int(s1)} == {1, -1}
    # outward normals integrate to zero around the closed loop
    loop = boundary_loop(mesh)
    assert np.linalg.norm(loop.normals.T @ loop.lengths) < 1e-14
    # n = (t_y, -t_x) for the counterclockwise tangent
    tang = (loop.points_b - loop.points_a) / loop.lengths[:, None]
    assert np.allclose(loop.normals, np.stack([tang[:, 1], -tang[:, 0]], axis=1))
    # consecutive panels share a vertex
    assert np.allclose(loop.points_b[:-1], loop.points_a[1:])
    assert np.allclose(loop.points_b[-1], loop.points_a[0])


def test_square_single_cell_counts():
    mesh = make_square_mesh(0.1, 1)
    assert mesh.num_triangles == 2
    assert mesh.num_vertices == 4
    assert mesh.num_edges == 5
    assert mesh.num_boundary_edges == 4
    check_invariants(mesh)


def test_square_two_cells_counts():
    mesh = make_square_mesh(0.1, 2)
    assert mesh.num_triangles == 8
    assert mesh.num_vertices == 9
    check_invariants(mesh)


def test_square_rejects_bad_arguments():
    with pytest.raises(MeshError):
        make_square_mesh(0.1, 0)
    with pytest.raises(MeshError):
        make_square_mesh(0.6, 1)  # diameter 1.2*sqrt(2) >= 1
    with pytest.raises(MeshError):
        make_square_mesh(-0.1, 1)


def test_lshape_counts():
    assert make_lshape_mesh(0.25, 1).num_triangles == 6
    assert make_lshape_mesh(0.25, 2).num_triangles == 24


def test_lshape_origin_vertex_unique():
    mesh = make_lshape_mesh(0.25, 2)
    at_origin = np.all(mesh.vertices == 0.0, axis=1)
    assert at_origin.sum() == 1
    check_invariants(mesh)


def test_lshape_boundary_perimeter():
    mesh = make_lshape_mesh(0.25, 1)
    loop = boundary_loop(mesh)
    assert loop.num_panels == 8
    assert loop.total_length == pytest.approx(8 * 0.25)


@pytest.mark.parametrize("make,args", [(make_square_mesh, (0.1, 3)),
                                       (make_lshape_mesh, (0.25, 2))])
def test_euler_relation(make, args):
    mesh = make(*args)
    assert mesh.num_vertices - mesh.num_edges + mesh.num_triangles == 1


def test_refine_counts_and_h():
    mesh = make_square_mesh(0.1, 1)
    fine = refine_uniform(mesh)
    assert fine.num_triangles == 8
    assert fine.mesh_size() == pytest.approx(mesh.mesh_size() / 2.0)
    finer = refine_uniform(fine)
    assert finer.num_triangles == 32
    check_invariants(fine)
    check_invariants(finer)


def test_refine_splits_boundary_edges():
    mesh = make_lshape_mesh(0.25, 1)
    fine = refine_uniform(mesh)
    assert fine.num_boundary_edges == 2 * mesh.num_boundary_edges
    # boundary polygon preserved: coarse boundary vertices survive
    coarse_bnd = mesh.vertices[mesh.boundary_tails]
    fine_bnd = fine.vertices[fine.boundary_tails]
    for p in coarse_bnd:
        assert np.min(np.hypot(*(fine_bnd - p).T)) < 1e-15
    check_invariants(fine)


def test_boundary_loop_ccw_and_arclength():
    mesh = make_square_mesh(0.1, 1)
    loop = boundary_loop(mesh)
    assert loop.num_panels == 4
    assert loop.total_length == pytest.approx(0.8)
    # counterclockwise: shoelace area of the loop polygon is positive
    pa, pb = loop.points_a, loop.points_b
    area2 = np.sum(pa[:, 0] * pb[:, 1] - pb[:, 0] * pa[:, 1])
    assert area2 > 0.0
    assert np.allclose(loop.arc_start, np.array([0.0, 0.2, 0.4, 0.6]))


def test_disconnected_boundary_rejected():
    # two triangles meeting only at one vertex: pinched boundary
    verts = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1],
                      [-0.1, 0.0], [0.0, -0.1]])
    tris = np.array([[0, 1, 2], [0, 3, 4]])
    with pytest.raises(MeshError):
        build_mesh(verts, tris)


def test_flipped_triangle_rejected():
    verts = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]])
    with pytest.raises(MeshError):
        build_mesh(verts, np.array([[0, 2, 1]]))


def test_dump_format():
    mesh = make_square_mesh(0.1, 1)
    buf = io.StringIO()
    dump_mesh(mesh, buf)
    lines = buf.getvalue().strip().splitlines()
    assert len(lines) == mesh.num_vertices + mesh.num_triangles
    assert all(l.startswith("v ") for l in lines[:4])
    assert all(l.startswith("t ") for l in lines[4:])
    i, j, k = map(int, lines[4].split()[1:])
    assert {i, j, k} <= set(range(4))


def test_lshape_rejects_bad_arguments():
    with pytest.raises(MeshError):
        make_lshape_mesh(0.25, 0)
    with pytest.raises(MeshError):
        make_lshape_mesh(0.5, 1)  # diameter sqrt(2) >= 1
    with pytest.raises(MeshError):
        make_lshape_mesh(-0.25, 2)
