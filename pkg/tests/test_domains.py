import numpy as np
import pytest
from scipy.special import gamma

from bergman_lab.domains import (AffineImage, Ball, CayleyChart, Disc, Egg, Ellipsoid, EuclideanBall, HalfPlane,
                                 Intersection, ModelPolynomial, PolyHalfPlane, Polydisc, SiegelHalfSpace,
                                 ball_volume, base_of, cayley, is_ball_biholomorphic, parse_domain)
from bergman_lab.errors import NoChart, UnsupportedDomain
from bergman_lab.kernel import qmc_moments


def test_membership_basic():
    assert Disc().contains(np.array([0.5j]))
    assert not Disc().contains(np.array([1.01]))
    b = Ball(2)
    assert b.contains(np.array([0.6, 0.6j]))
    assert not b.contains(np.array([0.8, 0.8]))
    bd = Polydisc(2)
    assert bd.contains(np.array([0.9, 0.9j]))
    e = Egg(2, 2)  # |z1|^2 + |z2|^4 < 1
    assert e.contains(np.array([0.0, 0.95]))
    assert not Ball(2).contains(np.array([0.0, 0.95 + 0.4j]))


def test_defining_function_sign_and_boundary():
    e = Ellipsoid([1.0, 2.0])
    p = np.array([1.0, 0.0])
    assert abs(e.defining(p)[0]) < 1e-14
    assert e.defining(np.array([0.5, 0.0]))[0] < 0
    s = SiegelHalfSpace(2)
    assert s.contains(np.array([-1.0, 0.5]))
    assert not s.contains(np.array([-0.1, 0.5]))


@pytest.mark.parametrize("ident, cls", [("disc", Ball), ("ball:3", Ball), ("bidisc", Polydisc), ("polydisc:3", Polydisc),
                                        ("ellipsoid:1,2", Ellipsoid), ("egg:2:4", Egg), ("halfplane", SiegelHalfSpace),
                                        ("siegel:2", SiegelHalfSpace), ("polyhalfplane:2", PolyHalfPlane),
                                        ("model:2:4", ModelPolynomial)])
def test_parse_domain(ident, cls):
    D = parse_domain(ident)
    assert isinstance(D, cls)
    assert parse_domain(D.ident) == D


def test_parse_domain_rejects_unknown():
    with pytest.raises(UnsupportedDomain):
        parse_domain("torus:2")


def test_ball_volume_and_moments():
    assert ball_volume(2) == pytest.approx(np.pi ** 2 / 2)
    b = Ball(2)
    assert b.volume() == pytest.approx(np.pi ** 2 / 2)
    # int_B |z1|^2 = pi^2 / 6 in C^2
    assert b.moment((1, 0)) == pytest.approx(np.pi ** 2 / 6)
    assert Polydisc(2).moment((1, 2)) == pytest.approx(np.pi ** 2 / 6)


def test_egg_moments_against_quadrature():
    e = Egg(2, 2)
    E = [(0, 0), (1, 0), (0, 1), (2, 1)]
    q = qmc_moments(e, E, n_nodes=2 ** 18, seed=3)
    exact = np.array([e.moment(a) for a in E])
    np.testing.assert_allclose(q, exact, rtol=5e-3)
    # Dirichlet integral with p = (1, 2): pi^2 Gamma(1) Gamma(1/2) / Gamma(5/2) / 2
    assert e.moment((0, 0)) == pytest.approx(np.pi ** 2 * gamma(1.0) * gamma(0.5) / gamma(2.5) / 2)


def test_boundary_distance_exact_and_numeric():
    b = Ball(2)
    z = np.array([0.3, 0.4j])
    assert b.boundary_distance(z) == pytest.approx(0.5, abs=1e-9)
    e = Ellipsoid([1.0, 4.0])  # semi-axes 1, 1/2
    assert e.boundary_distance(np.array([0.0, 0.0])) == pytest.approx(0.5, abs=1e-6)


def test_levi_form_of_ball_is_identity_on_tangent_space():
    b = Ball(2)
    L, P = b.levi_form(np.array([1.0, 0.0]))
    np.testing.assert_allclose(L, np.eye(2), atol=1e-6)
    np.testing.assert_allclose(P, 0, atol=1e-6)


def test_affine_image_membership_and_base():
    M = np.array([[2.0, 0.5j], [0.0, 1.0]])
    c = np.array([1.0, -1j])
    D = AffineImage(Ball(2), M, c)
    z = np.array([0.3, 0.2j])
    assert D.contains(M @ z + c)
    assert not D.contains(M @ np.array([0.9, 0.5]) + c)
    base, M2, c2 = base_of(D)
    assert isinstance(base, Ball)
    np.testing.assert_allclose(M2, M)
    np.testing.assert_allclose(c2, c)


def test_intersection_and_euclidean_ball():
    U = EuclideanBall(np.array([1.0, 0.0]), 0.5)
    I = Intersection([Ball(2), U])
    assert I.contains(np.array([0.8, 0.0]))
    assert not I.contains(np.array([0.2, 0.0]))
    assert not I.contains(np.array([1.2, 0.0]))
    assert I.bounded


def test_cayley_charts_map_into_targets():
    rng = np.random.default_rng(0)
    s = SiegelHalfSpace(2)
    ch = cayley(s)
    assert isinstance(ch, CayleyChart)
    Z = np.column_stack([-rng.random(50) * 3 - 0.01 + 1j * rng.normal(size=50), 0.1 * rng.normal(size=50)])
    Z = Z[s.contains(Z)]
    W = ch.forward(Z)
    assert np.all(Ball(2).contains(W))
    np.testing.assert_allclose(ch.inverse(W), Z, atol=1e-12)
    p = PolyHalfPlane(2)
    chp = cayley(p)
    Z = -rng.random((20, 2)) - 0.01 + 1j * rng.normal(size=(20, 2))
    assert np.all(Polydisc(2).contains(chp.forward(Z)))
    np.testing.assert_allclose(chp.inverse(chp.forward(Z)), Z, atol=1e-12)


def test_cayley_jacobian_against_finite_differences():
    ch = cayley(SiegelHalfSpace(2))
    z = np.array([-0.7 + 0.2j, 0.3 - 0.1j])
    h = 1e-6
    J = np.empty((2, 2), dtype=complex)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        J[:, k] = (ch.forward(z + e) - ch.forward(z - e)) / (2 * h)
    assert ch.jacobian_det(z) == pytest.approx(np.linalg.det(J), rel=1e-7)


def test_no_chart_for_egg():
    with pytest.raises(NoChart):
        cayley(ModelPolynomial.homogeneous(2, 4))


def test_ball_biholomorphic_registry():
    assert is_ball_biholomorphic(Disc())
    assert is_ball_biholomorphic(Ball(3))
    assert is_ball_biholomorphic(SiegelHalfSpace(2))
    assert is_ball_biholomorphic(HalfPlane())
    assert is_ball_biholomorphic(AffineImage(Ball(2), 2 * np.eye(2), np.zeros(2)))
    assert not is_ball_biholomorphic(Polydisc(2))
    assert not is_ball_biholomorphic(Egg(2, 2))
