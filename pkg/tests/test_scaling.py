import numpy as np
import pytest

from bergman_lab.domains import ModelPolynomial, PolyHalfPlane, SiegelHalfSpace, parse_domain
from bergman_lab.errors import ApproachLeavesCone, NotInNormalForm, UnknownClass
from bergman_lab.scaling import build_scaling, default_deltas, hausdorff_gap, verify_chain


def test_default_deltas():
    assert np.allclose(default_deltas(), [1e-1, 10 ** -1.5, 1e-2, 10 ** -2.5, 1e-3])


def test_disc_images_are_fixed_at_q0():
    seq = build_scaling(parse_domain("disc"), np.array([1.0 + 0j]))
    assert isinstance(seq.limit, SiegelHalfSpace)
    assert np.allclose(seq.images, -1.0)
    for j in range(len(seq.deltas)):
        assert seq.scaled[j].contains(seq.images[j])
        assert np.allclose(seq.inverse(j, seq.forward(j, seq.points[j])), seq.points[j])


def test_disc_hausdorff_gap_shrinks():
    seq = build_scaling(parse_domain("disc"), np.array([1.0 + 0j]))
    window = ((-3.0, -3.0), (1.0, 3.0))
    gaps = [hausdorff_gap(D, seq.limit, window, n_grid=64) for D in seq.scaled]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))
    assert gaps[0] > 0 and gaps[-1] < 0.07


def test_hausdorff_gap_of_identical_sets_is_zero():
    D = parse_domain("ball:2")
    assert hausdorff_gap(D, D, ((-1.2, -1.2), (1.2, 1.2)), n_grid=8) == 0.0


def test_strongly_pseudoconvex_weights_and_limit():
    seq = build_scaling(parse_domain("ellipsoid:1,2"), np.array([1.0, 0j]))
    assert isinstance(seq.limit, SiegelHalfSpace)
    assert np.allclose(seq.weights, [1.0, 0.5])
    assert np.allclose(seq.images, seq.q0)


def test_cone_approach_images_converge():
    seq = build_scaling(parse_domain("ellipsoid:1,2"), np.array([1.0, 0j]), approach="cone")
    err = np.abs(seq.images - seq.q0).max(axis=1)
    assert np.all(np.diff(err) < 0)
    assert seq.limit.contains(seq.images[-1])


def test_levi_corank_one_weights():
    seq = build_scaling(parse_domain("egg:2:4"), np.array([1.0, 0j]), cls="levi_corank_one")
    assert isinstance(seq.limit, ModelPolynomial)
    assert np.allclose(seq.weights, [1.0, 0.25])


def test_bidisc_corner():
    seq = build_scaling(parse_domain("bidisc"), np.array([1.0, 1.0 + 0j]), cls="bidisc_corner")
    assert isinstance(seq.limit, PolyHalfPlane)
    assert np.allclose(seq.images, -1.0)


def test_unknown_class():
    with pytest.raises(UnknownClass):
        build_scaling(parse_domain("disc"), np.array([1.0 + 0j]), cls="weakly_something")
    with pytest.raises(UnknownClass):
        build_scaling(parse_domain("ball:2"), np.array([1.0, 0j]), cls="bidisc_corner")


def test_not_in_normal_form():
    with pytest.raises(NotInNormalForm):
        build_scaling(parse_domain("egg:2:4"), np.array([0, 1.0 + 0j]), cls="levi_corank_one")


def test_approach_leaves_cone():
    with pytest.raises(ApproachLeavesCone):
        build_scaling(parse_domain("ball:2"), np.array([1.0, 0j]), approach="cone", aperture=0.1, tilt=0.5)


def test_rejects_interior_point_and_increasing_deltas():
    with pytest.raises(ValueError):
        build_scaling(parse_domain("disc"), np.array([0.5 + 0j]))
    with pytest.raises(ValueError):
        build_scaling(parse_domain("disc"), np.array([1.0 + 0j]), deltas=[0.01, 0.1])


def test_verify_chain_disc_kernel_and_metric():
    seq = build_scaling(parse_domain("disc"), np.array([1.0 + 0j]), deltas=default_deltas(3))
    reports = verify_chain(seq, quantities=("kernel", "metric"))
    for rep in reports:
        assert rep.mode == "limit"
        assert rep.decreasing
    # at w = -2 the rescaled disc kernel is 1 / (16 pi (1 - delta)^2) against 1 / (16 pi)
    assert np.allclose(reports[0].gaps, 1.0 / (1.0 - seq.deltas) ** 2 - 1.0, rtol=1e-8)
