"""Conforming triangulations of the two computational domains.

A mesh stores, besides vertices and (counterclockwise) triangles, the full
edge topology needed by skeleton-based assembly: every edge carries one
fixed global unit normal, every triangle side knows which edge it is and
whether the element-outward normal agrees with the global one, and the
boundary edges are kept in counterclockwise loop order with outward
normals.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MeshError


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle mesh with oriented edge and boundary topology.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array
        Vertex indices in counterclockwise order.
    edges : (E, 2) int array
        Unique edges, each stored with ascending vertex indices.
    edge_normals : (E, 2) float array
        Fixed global unit normal per edge (90 degrees clockwise from the
        tangent that runs from the lower to the higher vertex index).
    edge_lengths : (E,) float array
    tri_edges : (T, 3) int array
        Edge index of local side s (between local vertices s and s+1 mod 3).
    tri_edge_signs : (T, 3) int array
        +1 where the element-outward normal equals the global edge normal,
        -1 where it is opposite.
    edge_tris : (E, 2) int array
        Incident triangles (second entry -1 for boundary edges).
    boundary_edges : (Eb,) int array
        Edge indices ordered counterclockwise around the boundary loop.
    boundary_tails : (Eb,) int array
        First vertex of each boundary edge in loop direction.
    boundary_signs : (Eb,) int array
        +1 where the global edge normal points outward, else -1.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    tri_edges: np.ndarray
    tri_edge_signs: np.ndarray
    edge_tris: np.ndarray
    boundary_edges: np.ndarray
    boundary_tails: np.ndarray
    boundary_signs: np.ndarray

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    @property
    def num_boundary_edges(self):
        return self.boundary_edges.shape[0]

    def triangle_vertices(self):
        """Coordinates of all triangle corners, shape (T, 3, 2)."""
        return self.vertices[self.triangles]

    def areas(self):
        """Signed triangle areas (positive by construction), shape (T,)."""
        v = self.triangle_vertices()
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def mesh_size(self):
        """Global mesh size h = longest edge."""
        return float(self.edge_lengths.max())

    def __repr__(self):
        return ("Mesh(V={}, T={}, E={}, boundary={})"
                .format(self.num_vertices, self.num_triangles,
                        self.num_edges, self.num_boundary_edges))


def build_mesh(vertices, triangles):
    """Construct a :class:`Mesh` from raw arrays, deriving all topology.

    Raises
    ------
    MeshError
        On non-positive triangle areas, non-manifold edges, a boundary that
        is not a single closed loop, or a domain of diameter >= 1.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=int)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertices must have shape (V, 2)")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshError("triangles must have shape (T, 3)")

    v = vertices[triangles]
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(areas <= 0.0):
        bad = int(np.argmin(areas))
        raise MeshError("triangle {} has non-positive area".format(bad))

    span = vertices.max(axis=0) - vertices.min(axis=0)
    if float(np.hypot(*span)) >= 1.0:
        raise MeshError(
            "domain diameter {:.6g} >= 1; the single-layer operator "
            "loses ellipticity".format(float(np.hypot(*span))))

    ntri = triangles.shape[0]
    edge_index = {}
    edges = []
    tri_edges = np.empty((ntri, 3), dtype=int)
    tri_edge_signs = np.empty((ntri, 3), dtype=int)
    edge_tris = []
    for t in range(ntri):
        for s in range(3):
            a = int(triangles[t, s])
            b = int(triangles[t, (s + 1) % 3])
            key = (a, b) if a < b else (b, a)
            if key not in edge_index:
                edge_index[key] = len(edges)
                edges.append(key)
                edge_tris.append([t, -1])
            else:
                e = edge_index[key]
                if edge_tris[e][1] != -1:
                    raise MeshError("edge {} shared by >2 triangles".format(key))
                edge_tris[e][1] = t
            e = edge_index[key]
            tri_edges[t, s] = e
            tri_edge_signs[t, s] = 1 if (a, b) == key else -1

    edges = np.array(edges, dtype=int)
    edge_tris = np.array(edge_tris, dtype=int)
    tang = vertices[edges[:, 1]] - vertices[edges[:, 0]]
    edge_lengths = np.hypot(tang[:, 0], tang[:, 1])
    tang = tang / edge_lengths[:, None]
    edge_normals = np.stack([tang[:, 1], -tang[:, 0]], axis=1)

    boundary_edges, boundary_tails, boundary_signs = _walk_boundary(
        triangles, edges, edge_tris, tri_edges, tri_edge_signs)

    return Mesh(vertices=vertices, triangles=triangles, edges=edges,
                edge_normals=edge_normals, edge_lengths=edge_lengths,
                tri_edges=tri_edges, tri_edge_signs=tri_edge_signs,
                edge_tris=edge_tris, boundary_edges=boundary_edges,
                boundary_tails=boundary_tails, boundary_signs=boundary_signs)


def _walk_boundary(triangles, edges, edge_tris, tri_edges, tri_edge_signs):
    # Each boundary edge is traversed by its unique element in the element's
    # counterclockwise order, which chains the edges counterclockwise
    # around the domain (the domain lies to the left).
    bnd = np.nonzero(edge_tris[:, 1] < 0)[0]
    if bnd.size == 0:
        raise MeshError("mesh has no boundary")
    tail_of = {}
    head_of = {}
    sign_of = {}
    for e in bnd:
        t = int(edge_tris[e, 0])
        s = int(np.nonzero(tri_edges[t] == e)[0][0])
        a = int(triangles[t, s])
        b = int(triangles[t, (s + 1) % 3])
        tail_of[e] = a
        head_of[e] = b
        sign_of[e] = int(tri_edge_signs[t, s])
    start_at = {tail_of[e]: e for e in bnd}
    if len(start_at) != len(bnd):
        raise MeshError("boundary is not a simple closed loop")

    first = int(bnd.min())
    order = [first]
    cur = head_of[first]
    while cur != tail_of[first]:
        if cur not in start_at:
            raise MeshError("boundary loop is not closed")
        e = start_at[cur]
        order.append(e)
        cur = head_of[e]
    if len(order) != len(bnd):
        raise MeshError("boundary has more than one loop")
    order = np.array(order, dtype=int)
    tails = np.array([tail_of[e] for e in order], dtype=int)
    signs = np.array([sign_of[e] for e in order], dtype=int)
    return order, tails, signs


def make_square_mesh(half_width, n):
    """Structured mesh of the square (-w, w)^2 with n x n cells, each split
    into two triangles.

    Parameters
    ----------
    half_width : float
        Half the side length w; the domain diameter 2*sqrt(2)*w must be < 1.
    n : int
        Subdivisions per side, at least 1.
    """
    if n < 1 or int(n) != n:
        raise MeshError("n must be a positive integer")
    if half_width <= 0.0:
        raise MeshError("half_width must be positive")
    if 2.0 * np.sqrt(2.0) * half_width >= 1.0:
        raise MeshError("square with half_width {:.6g} has diameter >= 1"
                        .format(half_width))
    n = int(n)
    coords = np.linspace(-half_width, half_width, n + 1)
    idx = lambda i, j: j * (n + 1) + i
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    vertices = np.stack([xx.ravel(order="F"), yy.ravel(order="F")], axis=1)
    tris = []
    for j in range(n):
        for i in range(n):
            p00, p10 = idx(i, j), idx(i + 1, j)
            p11, p01 = idx(i + 1, j + 1), idx(i, j + 1)
            tris.append((p00, p10, p11))
            tris.append((p00, p11, p01))
    return build_mesh(vertices, np.array(tris, dtype=int))


def make_lshape_mesh(quarter, n):
    """Structured mesh of the L-shaped domain
    (-q, q)^2 minus the quadrant (0, q) x (-q, 0), with n x n cells per
    quarter square and the reentrant corner at the origin."""
    if n < 1 or int(n) != n:
        raise MeshError("n must be a positive integer")
    if quarter <= 0.0:
        raise MeshError("quarter must be positive")
    if 2.0 * np.sqrt(2.0) * quarter >= 1.0:
        raise MeshError("L-shape with quarter {:.6g} has diameter >= 1"
                        .format(quarter))
    n = int(n)
    s = quarter / n
    index = {}
    vertices = []
    for j in range(-n, n + 1):
        for i in range(-n, n + 1):
            if i > 0 and j < 0:
                continue  # interior of the removed quadrant
            index[(i, j)] = len(vertices)
            vertices.append((i * s, j * s))
    tris = []
    for j in range(-n, n):
        for i in range(-n, n):
            if i >= 0 and j <= -1:
                continue  # cell inside the removed quadrant
            p00, p10 = index[(i, j)], index[(i + 1, j)]
            p11, p01 = index[(i + 1, j + 1)], index[(i, j + 1)]
            tris.append((p00, p10, p11))
            tris.append((p00, p11, p01))
    return build_mesh(np.array(vertices, dtype=float), np.array(tris, dtype=int))


def refine_uniform(mesh):
    """Red refinement: split every triangle into 4 congruent children by
    connecting the edge midpoints.  Preserves shape regularity exactly and
    halves every edge length."""
    vertices = [tuple(p) for p in mesh.vertices]
    nvert = len(vertices)
    mid_index = {}

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        m = mid_index.get(key)
        if m is None:
            m = len(vertices)
            mid_index[key] = m
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            vertices.append(((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0))
        return m

    tris = []
    for (a, b, c) in mesh.triangles:
        mab = midpoint(a, b)
        mbc = midpoint(b, c)
        mca = midpoint(c, a)
        tris += [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
    del nvert
    return build_mesh(np.array(vertices, dtype=float), np.array(tris, dtype=int))


@dataclass(frozen=True)
class BoundaryLoop:
    """Boundary edges as oriented panels, counterclockwise around the domain.

    Panel k runs from ``points_a[k]`` to ``points_b[k]``; its tail vertex is
    loop vertex k (global index ``vertex_ids[k]``) so that panel k-1 and k
    share loop vertex k.  ``arc_start[k]`` is the accumulated arc length at
    the panel tail.
    """

    points_a: np.ndarray
    points_b: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray
    arc_start: np.ndarray
    edge_ids: np.ndarray
    signs: np.ndarray
    vertex_ids: np.ndarray

    @property
    def num_panels(self):
        return self.points_a.shape[0]

    @property
    def total_length(self):
        return float(self.lengths.sum())

    def point_at(self, panel, t):
        """Point at parameter t in [0, 1] along a panel."""
        return (1.0 - t) * self.points_a[panel] + t * self.points_b[panel]


def boundary_loop(mesh):
    """Assemble the ordered boundary loop of a mesh as panel data.

    The outward normal of every panel is n = (t_y, -t_x) for the
    counterclockwise tangent t.
    """
    e = mesh.boundary_edges
    tails = mesh.boundary_tails
    heads_idx = mesh.edges[e]
    heads = np.where(heads_idx[:, 0] == tails, heads_idx[:, 1], heads_idx[:, 0])
    pa = mesh.vertices[tails]
    pb = mesh.vertices[heads]
    tang = pb - pa
    lengths = np.hypot(tang[:, 0], tang[:, 1])
    tang = tang / lengths[:, None]
    normals = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
    arc = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    return BoundaryLoop(points_a=pa, points_b=pb, normals=normals,
                        lengths=lengths, arc_start=arc, edge_ids=e.copy(),
                        signs=mesh.boundary_signs.copy(),
                        vertex_ids=tails.copy())


def dump_mesh(mesh, stream):
    """Write the mesh in the plain-text debug format: one 'v x y' line per
    vertex, one 't i j k' line per triangle (0-based indices)."""
    for p in mesh.vertices:
        stream.write("v {:.17g} {:.17g}\n".format(p[0], p[1]))
    for t in mesh.triangles:
        stream.write("t {} {} {}\n".format(t[0], t[1], t[2]))
