import numpy as np
from scipy.integrate import solve_ivp

from bergman_lab.ode import FAILED, LEFT, OK, integrate


def _oscillator(Y):
    return np.column_stack([Y[:, 1], -Y[:, 0]])


def test_matches_solve_ivp_on_nonlinear_system():
    def f(Y):
        return np.column_stack([Y[:, 1], -np.sin(Y[:, 0]) - 0.1 * Y[:, 1]])

    y0 = np.array([[1.0, 0.0], [2.5, 0.3], [-0.5, 1.0]])
    res = integrate(f, y0, 7.0, rtol=1e-10, atol=1e-12)
    assert np.all(res.status == OK)
    for i, y in enumerate(y0):
        ref = solve_ivp(lambda t, u: f(u[None])[0], (0, 7.0), y, method="DOP853", rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(res.y[i], ref.y[:, -1], atol=1e-8)


def test_exact_solution_and_per_trajectory_end_times():
    y0 = np.array([[1.0, 0.0], [0.0, 1.0]])
    T = np.array([np.pi / 2, 1.3])
    res = integrate(_oscillator, y0, T, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(res.t, T)
    np.testing.assert_allclose(res.y[0], [0.0, -1.0], atol=1e-9)
    np.testing.assert_allclose(res.y[1], [np.sin(1.3), np.cos(1.3)], atol=1e-9)


def test_stop_snapshots():
    y0 = np.array([[1.0, 0.0]])
    stops = np.array([0.0, 0.5, 1.0, 2.0])
    res = integrate(_oscillator, y0, 2.0, rtol=1e-11, atol=1e-12, stops=stops)
    for s, t in enumerate(stops):
        np.testing.assert_allclose(res.snapshots[s, 0], [np.cos(t), -np.sin(t)], atol=1e-9)


def test_validity_region_marks_left():
    def f(Y):
        return np.ones_like(Y)

    res = integrate(f, np.array([[0.0], [0.5]]), 2.0, valid=lambda Y: Y[:, 0] < 1.0)
    assert res.status[0] == LEFT and res.status[1] == LEFT
    assert np.all(res.y[:, 0] < 1.0)
    assert res.y[0, 0] > 1.0 - 1e-5
    np.testing.assert_allclose(res.t, res.y[:, 0] - np.array([0.0, 0.5]), atol=1e-12)


def test_nan_right_hand_side_fails_cleanly():
    def f(Y):
        out = np.ones_like(Y)
        out[Y[:, 0] > 0.5] = np.nan
        return out

    res = integrate(f, np.array([[0.0]]), 2.0)
    assert res.status[0] == FAILED
    assert res.y[0, 0] <= 0.5


def test_record_history():
    res = integrate(_oscillator, np.array([[1.0, 0.0]]), 1.0, record=True)
    ts = [t for t, _ in res.history[0]]
    assert ts[0] == 0.0 and ts[-1] == 1.0
    assert np.all(np.diff(ts) > 0)
    assert res.n_steps[0] == len(ts) - 1
