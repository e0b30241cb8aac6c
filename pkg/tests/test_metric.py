import numpy as np
import pytest

from bergman_lab.coords import to_complex, to_real
from bergman_lab.domains import AffineImage, Ball, Disc, Egg, HalfPlane, Polydisc, SiegelHalfSpace
from bergman_lab.errors import DegenerateMetric
from bergman_lab.kernel import build_kernel
from bergman_lab.metric import (caratheodory_distance, christoffel, closed_form_bergman_distance, complex_christoffel,
                                finite_difference_metric, has_closed_form_distance, metric_length, metric_tensor,
                                real_metric_derivatives)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ball_metric_at_center(n):
    st = metric_tensor(build_kernel(Ball(n)), np.zeros(n))
    np.testing.assert_allclose(st.g, (n + 1) * np.eye(n), atol=1e-8)
    np.testing.assert_allclose(st.eigenvalues, n + 1, atol=1e-8)


def test_disc_and_half_plane_metric():
    assert metric_tensor(build_kernel(Disc()), np.array([0.5])).g[0, 0].real == pytest.approx(2 / 0.75 ** 2)
    assert metric_tensor(build_kernel(HalfPlane()), np.array([-1.0])).g[0, 0].real == pytest.approx(0.5)


def test_metric_is_biholomorphically_invariant_under_affine_maps():
    M = np.array([[1.5, 0.2j], [0.0, 0.7]])
    c = np.array([0.1, -0.4j])
    m = build_kernel(AffineImage(Ball(2), M, c))
    u = np.array([0.2, 0.1 - 0.3j])
    g_img = metric_tensor(m, M @ u + c).g
    g_base = metric_tensor(build_kernel(Ball(2)), u).g
    Minv = np.linalg.inv(M)
    np.testing.assert_allclose(Minv.T @ g_base @ np.conj(Minv), g_img, atol=1e-12)


def test_egg_metric_against_finite_differences():
    m = build_kernel(Egg(2, 2))
    rng = np.random.default_rng(5)
    for _ in range(10):
        z = 0.6 * (rng.random(2) - 0.5) + 0.6j * (rng.random(2) - 0.5)
        g = metric_tensor(m, z).g
        fd = finite_difference_metric(m, z)
        assert np.linalg.norm(g - fd) / np.linalg.norm(g) < 1e-5


def test_metric_length():
    m = build_kernel(Disc())
    assert metric_length(m, np.array([0.0]), np.array([1.0])) == pytest.approx(np.sqrt(2))


def test_real_christoffel_against_finite_differences():
    m = build_kernel(Egg(2, 2))
    z = np.array([0.3 + 0.1j, -0.2 + 0.25j])
    x = to_real(z)
    gam = christoffel(m, x)
    h = 1e-5

    def G(x):
        return metric_tensor(m, to_complex(x)).g_real

    dG = np.array([(G(x + h * e) - G(x - h * e)) / (2 * h) for e in np.eye(4)])
    Ginv = np.linalg.inv(G(x))
    ref = np.empty((4, 4, 4))
    for e in range(4):
        for a in range(4):
            for b in range(4):
                ref[e, a, b] = 0.5 * sum(Ginv[e, t] * (dG[a][b, t] + dG[b][a, t] - dG[t][a, b]) for t in range(4))
    np.testing.assert_allclose(gam, ref, atol=1e-7)


def test_complex_and_real_geodesic_equations_agree():
    m = build_kernel(Egg(2, 2))
    z = np.array([0.3 + 0.1j, -0.2 + 0.25j])
    v = np.array([0.4 - 0.1j, 0.2 + 0.3j])
    _, Gc = complex_christoffel(m, z[None])
    acc_c = -np.einsum("kij,i,j->k", Gc[0], v, v)
    gam = christoffel(m, to_real(z))
    y = to_real(v)
    acc_r = -np.einsum("eab,a,b->e", gam, y, y)
    np.testing.assert_allclose(to_real(acc_c), acc_r, atol=1e-10)


def test_real_metric_derivatives_shape():
    m = build_kernel(Ball(2))
    st = metric_tensor(m, np.array([0.1, 0.2j]), christoffel_symbols=True)
    assert st.gamma.shape == (4, 4, 4)
    assert real_metric_derivatives(np.zeros((2, 2, 2), dtype=complex)).shape == (4, 4, 4)
    assert "eigenvalues" in st.dump()


def test_degenerate_metric_raises():
    class Flat:
        n = 1
        domain = Disc()

        def check_points(self, *points):
            pass

        def _log_jet(self, Z, V, order):
            N = Z.shape[0]
            return [np.zeros(N), np.zeros((N, 2)), np.zeros((N, 2, 2)), np.zeros((N, 2, 2, 2))][: order + 1]

    with pytest.raises(DegenerateMetric):
        metric_tensor(Flat(), np.array([0.0]))


def test_closed_form_distances():
    D = Disc()
    assert closed_form_bergman_distance(D, np.array([0.0]), np.array([0.5])) == pytest.approx(
        np.sqrt(2) * np.arctanh(0.5), abs=1e-12)
    assert closed_form_bergman_distance(D, np.array([0.0]), np.array([0.5])) == pytest.approx(0.7768362, abs=1e-7)
    b = Ball(2)
    z, w = np.array([0.1, 0.2j]), np.array([-0.3, 0.1])
    assert closed_form_bergman_distance(b, z, w) == pytest.approx(np.sqrt(3) * caratheodory_distance(b, z, w))
    bd = Polydisc(2)
    d = closed_form_bergman_distance(bd, np.zeros(2), np.array([0.5, 0.5]))
    assert d == pytest.approx(2 * np.arctanh(0.5))
    assert caratheodory_distance(bd, np.zeros(2), np.array([0.5, 0.3])) == pytest.approx(np.arctanh(0.5))
    assert has_closed_form_distance(SiegelHalfSpace(2))
    assert not has_closed_form_distance(Egg(2, 2))
    s = SiegelHalfSpace(2)
    assert closed_form_bergman_distance(s, np.array([-1.0, 0]), np.array([-1.0, 0])) == pytest.approx(0, abs=1e-7)
