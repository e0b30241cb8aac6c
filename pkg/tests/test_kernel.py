import numpy as np
import pytest

from bergman_lab.domains import (AffineImage, Ball, Disc, Egg, Ellipsoid, HalfPlane, PolyHalfPlane, Polydisc,
                                 SiegelHalfSpace, cayley, parse_domain)
from bergman_lab.errors import OutsideDomain, QuadratureUnavailable
from bergman_lab.kernel import (ChartPullbackKernel, MomentTable, SeriesKernel, TrustWarning, build_kernel,
                                extremal_check, kernel_derivatives, kernel_eval, log_jet_from_values, mixed_partial,
                                moment_table, polar_moments, qmc_moments, reproducing_check, values_from_log_jet)


def _points_in_disc(count, radius, seed):
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.random(count))
    return r * np.exp(2j * np.pi * rng.random(count))


def test_disc_closed_form_values():
    m = build_kernel(Disc())
    z = np.array([0.5])
    assert kernel_eval(m, z) == pytest.approx(1 / (np.pi * 0.75 ** 2))
    assert mixed_partial(m, np.array([0.0]), np.array([0.0]), (1,), (1,)) == pytest.approx(2 / np.pi)


def test_disc_closed_form_matches_series_inside_radius_08():
    closed = build_kernel(Disc())
    series = build_kernel(Disc(), degree=60, mode="series")
    Z = _points_in_disc(200, 0.8, 0)[:, None]
    rel = np.abs(kernel_eval(closed, Z) - kernel_eval(series, Z)) / kernel_eval(closed, Z)
    assert rel.max() < 1e-10


def test_series_truncation_error_is_the_analytic_tail():
    closed = build_kernel(Disc())
    series = build_kernel(Disc(), degree=60, mode="series")
    x = 0.81
    tail = (1 - x) ** 2 * sum((k + 1) * x ** k for k in range(61, 4000))
    z = np.array([0.9])
    rel = abs(kernel_eval(closed, z) - kernel_eval(series, z)) / kernel_eval(closed, z)
    assert rel == pytest.approx(tail, rel=1e-6)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ball_kernel_at_center(n):
    m = build_kernel(Ball(n))
    from math import factorial
    assert kernel_eval(m, np.zeros(n)) == pytest.approx(factorial(n) / np.pi ** n)


def test_egg_closed_form_matches_series_jets():
    e = Egg(2, 2)
    closed = build_kernel(e)
    series = build_kernel(e, degree=60, mode="series")
    rng = np.random.default_rng(1)
    Z = 0.5 * (rng.random((10, 2)) - 0.5) + 0.5j * (rng.random((10, 2)) - 0.5)
    for z in Z:
        a = closed.log_jet(z, order=3)
        b = series.log_jet(z, order=3)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=1e-9, atol=1e-10)


def test_egg_kernel_off_diagonal_matches_series():
    e = Egg(2, 2)
    closed = build_kernel(e)
    series = build_kernel(e, degree=60, mode="series")
    z = np.array([0.2 + 0.1j, 0.3j])
    w = np.array([-0.1, 0.25 - 0.1j])
    assert kernel_eval(closed, z, w) == pytest.approx(kernel_eval(series, z, w), rel=1e-10)


def test_quadrature_moment_table_close_to_beta_formula():
    e = Egg(2, 2)
    E = [(a, b) for a in range(4) for b in range(5)]
    exact = moment_table(e, E, "closed_form")
    quad = qmc_moments(e, E, n_nodes=2 ** 18, seed=0)
    rel = np.abs(quad - np.array([exact[a] for a in E])) / np.array([exact[a] for a in E])
    assert rel.max() < 2e-2


@pytest.mark.parametrize("spec", ["egg:2:4", "ellipsoid:1,2", "ball:3"])
def test_polar_moments_match_beta_formula(spec):
    D = parse_domain(spec)
    E = list(np.ndindex(*(3,) * D.n))[:12]
    exact = np.array([D.moment(e) for e in E])
    rel = np.abs(polar_moments(D, E, n_nodes=10 ** 6) - exact) / exact
    assert rel.max() < 1e-8


def test_moment_table_roundtrip(tmp_path):
    t = MomentTable()
    t.add((1, 2), 0.125, "closed_form_beta")
    t.add((0, 0), 4.0, "quadrature:1024:0")
    path = tmp_path / "m.csv"
    t.save(path)
    u = MomentTable.load(path)
    assert u[(1, 2)] == 0.125 and u.provenance[(0, 0)] == "quadrature:1024:0"


def test_moment_cache_env(tmp_path, monkeypatch):
    monkeypatch.setenv("BERGLAB_CACHE", str(tmp_path))
    e = Egg(2, 2)
    first = moment_table(e, [(0, 0), (1, 1)], "quadrature", n_nodes=2 ** 12, seed=2)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    second = moment_table(e, [(1, 1)], "quadrature", n_nodes=2 ** 12, seed=2)
    assert second[(1, 1)] == first[(1, 1)]
    assert second.provenance[(1, 1)] == "qmc:4096:2"


def test_kernel_jet_conversions_roundtrip():
    m = build_kernel(Ball(2))
    z = np.array([0.1 + 0.2j, -0.3j])
    jet = m.log_jet(z, order=3)
    K = values_from_log_jet([x[None] for x in jet])
    back = log_jet_from_values(*K)
    for a, b in zip(back, jet):
        np.testing.assert_allclose(np.squeeze(a), b, atol=1e-12)


def test_kernel_derivative_against_finite_difference():
    m = build_kernel(Egg(2, 2))
    z = np.array([0.2 + 0.1j, 0.3 - 0.2j])
    w = np.array([0.1j, 0.2])
    jet = kernel_derivatives(m, z, w, order=1)
    h = 1e-6
    e = np.array([h, 0])
    fd = (m.eval(z + e, w) - m.eval(z - e, w)) / (2 * h)
    assert np.squeeze(jet[1])[0] == pytest.approx(np.squeeze(fd), rel=1e-7)
    # derivative in conj(w_2): K is antiholomorphic in w
    e2 = np.array([0, h])
    fd2 = (m.eval(z, w + e2) - m.eval(z, w - e2)) / (2 * h)
    assert np.squeeze(jet[1])[3] == pytest.approx(np.squeeze(fd2), rel=1e-7)


def test_outside_domain_raises_and_trust_warning():
    m = build_kernel(Disc())
    with pytest.raises(OutsideDomain):
        kernel_eval(m, np.array([1.2]))
    s = build_kernel(Disc(), degree=30, mode="series")
    with pytest.warns(TrustWarning):
        kernel_eval(s, np.array([0.99]))


def test_unbounded_models_agree_with_chart_pullbacks():
    for D, z in [(SiegelHalfSpace(2), np.array([-0.8 + 0.3j, 0.4 - 0.2j])), (HalfPlane(), np.array([-1.0 + 0.5j])),
                 (PolyHalfPlane(2), np.array([-0.5 + 1j, -2.0]))]:
        m = build_kernel(D)
        ch = cayley(D)
        ref = ChartPullbackKernel(ch, build_kernel(ch.target))
        assert kernel_eval(m, z) == pytest.approx(np.real(ref.eval(z)), rel=1e-12)
    assert kernel_eval(build_kernel(HalfPlane()), np.array([-1.0])) == pytest.approx(1 / (4 * np.pi))


def test_affine_transformation_law():
    M = np.array([[2.0, 0.3j], [0.0, 0.5]])
    c = np.array([1.0 + 1j, 0.0])
    D = AffineImage(Ball(2), M, c)
    m = build_kernel(D)
    base = build_kernel(Ball(2))
    u = np.array([0.2, -0.3j])
    z = M @ u + c
    assert kernel_eval(m, z) == pytest.approx(kernel_eval(base, u) / abs(np.linalg.det(M)) ** 2, rel=1e-12)


def test_reproducing_property_moments_and_qmc():
    s = build_kernel(Ellipsoid([1.0, 2.0]), degree=30, mode="series")
    f = {(1, 0): 1.0, (0, 2): 0.5 - 0.2j, (0, 0): 0.3}
    w = np.array([0.2 + 0.1j, -0.1])
    assert reproducing_check(s, f, w, method="moments") < 1e-12
    closed = build_kernel(Ball(2))
    assert reproducing_check(closed, {(1, 0): 1.0}, np.array([0.3, 0.1j]), method="qmc", n_nodes=2 ** 18) < 5e-3
    with pytest.raises(QuadratureUnavailable):
        reproducing_check(closed, f, w, method="moments")


def test_extremal_property():
    s = build_kernel(Polydisc(2), degree=20, mode="series")
    w = np.array([0.3, -0.2j])
    trials = [{(0, 0): 1.0}, {(0, 0): 1.0, (1, 0): 0.4}, {(1, 1): 1.0, (0, 0): 0.2}]
    ok, minimum, values = extremal_check(s, w, trials)
    assert ok
    assert minimum == pytest.approx(1 / kernel_eval(s, w), rel=1e-10)
    assert min(values) > minimum
    assert isinstance(s, SeriesKernel)
