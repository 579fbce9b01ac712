import numpy as np
import pytest

from dpgbem import quadrature as quad


def tri_monomial_exact(p, q):
    # int_T x^p y^q over the reference triangle = p! q! / (p + q + 2)!
    from math import factorial
    return factorial(p) * factorial(q) / factorial(p + q + 2)


def test_gauss01_degree():
    x, w = quad.gauss01(6)
    for d in range(12):
        assert np.dot(w, x ** d) == pytest.approx(1.0 / (d + 1), rel=1e-14)


def test_triangle_degree4_exact_to_degree4():
    pts, w = quad.triangle_degree4()
    assert w.sum() == pytest.approx(0.5, rel=1e-14)
    for p in range(5):
        for q in range(5 - p):
            val = np.dot(w, pts[:, 0] ** p * pts[:, 1] ** q)
            assert val == pytest.approx(tri_monomial_exact(p, q), rel=1e-13)


@pytest.mark.parametrize("n,deg", [(3, 4), (4, 6), (6, 10)])
def test_triangle_duffy_exactness(n, deg):
    pts, w = quad.triangle_duffy(n)
    for p in range(deg + 1):
        for q in range(deg + 1 - p):
            val = np.dot(w, pts[:, 0] ** p * pts[:, 1] ** q)
            assert val == pytest.approx(tri_monomial_exact(p, q), rel=1e-12)


@pytest.mark.parametrize("collapse", [0, 1, 2])
def test_duffy_collapse_permutations_integrate_smooth(collapse):
    pts, w = quad.triangle_duffy(8, collapse=collapse)
    val = np.dot(w, np.exp(pts[:, 0] - pts[:, 1]))
    pts_ref, w_ref = quad.triangle_duffy(20)
    ref = np.dot(w_ref, np.exp(pts_ref[:, 0] - pts_ref[:, 1]))
    assert val == pytest.approx(ref, rel=1e-13)


def test_graded_rule_log_singularity():
    # int_0^1 log(x) dx = -1, int_0^1 x^(-1/3) dx = 3/2
    x, w = quad.graded01(8, 40, end=0)
    assert np.dot(w, np.log(x)) == pytest.approx(-1.0, abs=1e-12)
    assert np.dot(w, x ** (-1.0 / 3.0)) == pytest.approx(1.5, rel=1e-9)
    x, w = quad.graded01(8, 50, end=0)
    assert np.dot(w, x ** (-1.0 / 3.0)) == pytest.approx(1.5, rel=1e-11)


def test_graded_rule_toward_upper_end():
    x, w = quad.graded01(8, 40, end=1)
    assert np.dot(w, np.log1p(-x)) == pytest.approx(-1.0, abs=1e-12)


def test_graded_both_ends():
    x, w = quad.graded01_both(8, 40)
    assert np.dot(w, np.log(x * (1 - x))) == pytest.approx(-2.0, abs=1e-12)


def test_corner_rule_fractional_singularity():
    # int over reference triangle of r^(-2/3), singular at vertex (0,0):
    # in polar coordinates int_0^(pi/2) int_0^(R(phi)) r^(1/3) dr dphi with
    # R(phi) = 1/(cos phi + sin phi); compare against a dense oracle.
    pts, w = quad.triangle_corner_rule(order=16, levels=24, collapse=0)
    r = np.hypot(pts[:, 0], pts[:, 1])
    val = np.dot(w, r ** (-2.0 / 3.0))
    from scipy.integrate import quad as quad1d
    ref, _ = quad1d(lambda phi: (3.0 / 4.0) * (np.cos(phi) + np.sin(phi)) ** (-4.0 / 3.0),
                    0.0, np.pi / 2.0, epsabs=1e-13, epsrel=1e-13)
    assert val == pytest.approx(ref, rel=1e-12)


def test_map_to_physical_preserves_area_weighting():
    pts, w = quad.triangle_degree4()
    verts = np.array([[[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]]])
    phys = quad.map_to_physical(verts, pts)
    area = 3.0
    # integrate the constant 1: sum w * 2*area since reference area is 1/2
    assert (w.sum() * 2.0 * area) == pytest.approx(area * 1.0)
    assert phys.shape == (1, 6, 2)
    assert phys[0, :, 0].max() <= 2.0
