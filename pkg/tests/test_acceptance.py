"""Acceptance suite: one PASS/FAIL line per criterion, with the stated tolerances.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the terminal summary.  The Fridman experiments make this suite take a
while (tens of minutes on one core).
"""
import time

import numpy as np
import pytest

from bergman_lab.cli import verify_all
from bergman_lab.domains import Egg, parse_domain
from bergman_lab.fridman import boundary_limit_experiment, fridman_upper, resample_check
from bergman_lab.geodesics import bergman_distance
from bergman_lab.kernel import build_kernel, kernel_eval, moment_table, polar_moments
from bergman_lab.metric import (
    closed_form_bergman_distance,
    finite_difference_metric,
    hahn_lu_check,
    metric_tensor,
)
from bergman_lab.scaling import QUANTITIES, build_scaling, verify_chain

LADDER = np.logspace(-1, -3, 5)


def _disc_points(count, radius, seed):
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.random(count))
    return r * np.exp(2j * np.pi * rng.random(count))


def _polydisc_points(count, n, radius, seed):
    return np.stack([_disc_points(count, radius, seed + k) for k in range(n)], axis=1)


def _disc_pairs(count, seed, max_distance=3.0):
    D = parse_domain("disc")
    pairs, k = [], 0
    while len(pairs) < count:
        z, w = _disc_points(2, 0.95, seed + k)
        k += 1
        if closed_form_bergman_distance(D, [z], [w]) <= max_distance:
            pairs.append((np.array([z]), np.array([w])))
    return pairs


def _mobius(a):
    return lambda z: (z - a) / (1 - np.conj(a) * z)


@pytest.fixture(scope="module")
def ellipsoid_rows():
    seq = build_scaling(parse_domain("ellipsoid:1,2"), np.array([1.0, 0j]), deltas=LADDER)
    return seq, boundary_limit_experiment(seq)


@pytest.fixture(scope="module")
def egg_rows():
    seq = build_scaling(parse_domain("egg:2:4"), np.array([1.0, 0j]), cls="levi_corank_one", approach="cone",
                        deltas=LADDER)
    return seq, boundary_limit_experiment(seq)


@pytest.fixture(scope="module")
def bidisc_estimate():
    model = build_kernel(parse_domain("bidisc"))
    return model, fridman_upper(model, np.zeros(2, dtype=complex))


def test_criterion_1_kernel_oracles(criterion):
    t0 = time.perf_counter()
    disc = parse_domain("disc")
    closed = build_kernel(disc)
    series = build_kernel(disc, degree=60, mode="series")
    Z = _disc_points(200, 0.9, seed=11)[:, None]
    K, Ks = kernel_eval(closed, Z), kernel_eval(series, Z)
    disc_err = float(np.max(np.abs(Ks - K) / np.abs(K)))
    egg = Egg(2, 2)
    E = [(a, b) for a in range(4) for b in range(5)]
    exact = moment_table(egg, E, "closed_form")
    exact = np.array([exact[a] for a in E])
    quad = polar_moments(egg, E, n_nodes=10 ** 6)
    egg_err = float(np.max(np.abs(quad - exact) / exact))
    wall = time.perf_counter() - t0
    ok = criterion(1, "kernel oracle agreement", disc_err < 1e-10 and egg_err < 1e-3 and wall < 60,
                   f"disc series max rel err {disc_err:.2e} (tol 1e-10), egg moments {egg_err:.2e} (tol 1e-3), "
                   f"{wall:.1f} s")
    assert ok


def test_criterion_2_metric_gates(criterion):
    ball_err = 0.0
    for n in (1, 2, 3):
        g = metric_tensor(build_kernel(parse_domain(f"ball:{n}")), np.zeros(n, dtype=complex)).g
        ball_err = max(ball_err, float(np.max(np.abs(g - (n + 1) * np.eye(n)))))
    egg = parse_domain("egg:2:4")
    model = build_kernel(egg)
    rng = np.random.default_rng(5)
    pts = []
    while len(pts) < 100:
        z = rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)
        if egg.contains(z / 0.95):
            pts.append(z)
    fd_err = max(float(np.linalg.norm(metric_tensor(model, z).g - finite_difference_metric(model, z))
                       / np.linalg.norm(metric_tensor(model, z).g)) for z in pts)
    ok = criterion(2, "metric gates", ball_err < 1e-8 and fd_err < 1e-5,
                   f"ball |g - (n+1)I| {ball_err:.1e} (tol 1e-8), egg FD rel err {fd_err:.2e} (tol 1e-5)")
    assert ok


def test_criterion_3_distance_gate(criterion):
    disc = parse_domain("disc")
    model = build_kernel(disc)
    pairs = _disc_pairs(50, seed=100)
    err = max(abs(bergman_distance(model, z, w, method="shooting").distance
                  - closed_form_bergman_distance(disc, z, w)) for z, w in pairs)
    # triangle inequality on the disc and the bidisc
    tri = np.inf
    for spec, seed in (("disc", 7), ("bidisc", 8)):
        m = build_kernel(parse_domain(spec))
        P = _polydisc_points(30, m.n, 0.85, seed)
        for x, y, z in zip(P[0::3], P[1::3], P[2::3]):
            d = lambda a, b: bergman_distance(m, a, b, method="shooting").distance
            tri = min(tri, d(x, y) + d(y, z) - d(x, z))
    # invariance under a disc automorphism
    phi = _mobius(0.3 + 0.2j)
    auto = max(abs(bergman_distance(model, z, w, method="shooting").distance
                   - bergman_distance(model, phi(z), phi(w), method="shooting").distance) for z, w in pairs[:20])
    ok = criterion(3, "distance gate", err < 1e-4 and tri >= -1e-8 and auto < 1e-6,
                   f"max shooting error {err:.2e} (tol 1e-4), triangle slack {tri:.2e}, automorphism {auto:.2e}")
    assert ok


def test_criterion_4_hahn_lu(criterion):
    worst = {}
    for spec in ("disc", "bidisc"):
        m = build_kernel(parse_domain(spec))
        P = _polydisc_points(200, m.n, 0.9, seed=21)
        worst[spec] = float(hahn_lu_check(m, list(zip(P[0::2], P[1::2]))).min())
    ok = criterion(4, "Hahn-Lu gate", min(worst.values()) >= -1e-4,
                   ", ".join(f"{k} min margin {v:.3e}" for k, v in worst.items()) + " (tol -1e-4)")
    assert ok


def test_criterion_5_stability_chain(criterion):
    t0 = time.perf_counter()
    seq = build_scaling(parse_domain("disc"), np.array([1.0 + 0j]), deltas=LADDER)
    reports = verify_chain(seq, S=np.array([[-2.0], [-1.0], [-0.5]], dtype=complex), quantities=QUANTITIES,
                           radius=1.0, eps=0.05)
    wall = time.perf_counter() - t0
    by = {r.quantity: r for r in reports}
    decreasing = all(r.decreasing for r in reports)
    final_d = by["distance"].final_gap
    inc = by["ball"].extra["inclusions"]
    ok = criterion(5, "stability chain", decreasing and final_d < 5e-3 and inc["holds"] and wall < 600,
                   f"decreasing {[q for q, r in by.items() if r.decreasing]}, final distance gap {final_d:.2e} "
                   f"(tol 5e-3), inclusions slack {inc['outer_slack']:.2e}/{inc['inner_slack']:.2e}, {wall:.0f} s")
    assert ok


def test_criterion_6_fridman_limits(criterion, ellipsoid_rows, egg_rows):
    u_ell = np.array([r["u"] for r in ellipsoid_rows[1]])
    u_egg = np.array([r["u"] for r in egg_rows[1]])
    ell_ok = bool(np.all(np.diff(u_ell) < 0) and u_ell[-1] < 0.2)
    change = abs(u_egg[-1] - u_egg[-2]) / u_egg[-2]
    egg_ok = bool(np.all(u_egg > 0) and change < 0.05)
    zeros = [fridman_upper(build_kernel(parse_domain("disc")), np.array([0.5 + 0j])),
             fridman_upper(build_kernel(parse_domain("ball:2")), np.array([0.3, 0.1j]))]
    disc_seq = build_scaling(parse_domain("disc"), np.array([1.0 + 0j]), deltas=LADDER)
    zero_ok = all(e.certified_zero for e in zeros) and all(r["u"] == 0.0 for r in boundary_limit_experiment(disc_seq))
    ok = criterion(6, "Fridman boundary limits", ell_ok and egg_ok and zero_ok,
                   f"ellipsoid u {np.round(u_ell, 4).tolist()}, egg u {np.round(u_egg, 4).tolist()} "
                   f"(last change {change:.2%}), ball/disc zero {zero_ok}")
    assert ok


def test_criterion_7_soundness(criterion, ellipsoid_rows, egg_rows, bidisc_estimate):
    margins = []
    for seq, rows in (ellipsoid_rows, egg_rows):
        for r in rows:
            e = r["estimate"]
            if e is not None and not e.certified_zero:
                margins.append(resample_check(build_kernel(seq.scaled[r["j"] - 1]), e))
    margins.append(resample_check(*bidisc_estimate))
    worst = float(np.min(margins))
    ok = criterion(7, "estimator soundness", worst >= -1e-6,
                   f"{len(margins)} witnesses, worst 4x-resample margin {worst:.2e} (tol -1e-6)")
    assert ok


def test_criterion_8_reproducibility(criterion, tmp_path):
    codes = [verify_all(seed=0, output=str(tmp_path / tag)) for tag in ("a", "b")]
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("results.csv"))
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
    ok = criterion(8, "reproducibility", bool(files) and same,
                   f"{len(files)} CSVs byte-identical: {same}; exit codes {codes}")
    assert ok
