"""Batched Dormand-Prince 5(4) integrator for autonomous systems.

Each trajectory in the batch keeps its own time, step size and status, so a
whole sweep of geodesics is advanced with one vectorized right-hand side call
per stage. scipy's ``solve_ivp`` is used in the tests as the reference.
"""
from dataclasses import dataclass, field

import numpy as np

OK, LEFT, FAILED = 0, 1, 2

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class ODEResult:
    """Final states, per-stop snapshots and integrator diagnostics."""

    t: np.ndarray
    y: np.ndarray
    status: np.ndarray
    stops: np.ndarray
    snapshots: np.ndarray
    n_steps: np.ndarray
    n_rejected: np.ndarray
    history: list = field(default=None)


def integrate(f, y0, t_end, rtol=1e-8, atol=1e-8, h0=None, valid=None, stops=None, record=False,
              max_steps=100000, h_min=1e-14):
    """Integrate ``y' = f(y)`` for a batch of initial states.

    Parameters
    ----------
    f : callable
        ``f(Y) -> dY`` on arrays of shape ``(M, d)``; may return NaN for
        states where it cannot be evaluated (the step is then rejected).
    y0 : array (N, d)
    t_end : float or array (N,)
    valid : callable, optional
        ``valid(Y) -> bool mask``; an accepted step landing on an invalid state
        stops that trajectory with status ``LEFT`` (the last valid state is kept).
    stops : array, optional
        Increasing times at which every trajectory's state is snapshotted.
    record : bool
        Keep every accepted ``(t, y)`` per trajectory.
    """
    y = np.array(y0, dtype=float, copy=True)
    N, d = y.shape
    t = np.zeros(N)
    t_end = np.broadcast_to(np.asarray(t_end, dtype=float), (N,)).copy()
    stops = np.array([] if stops is None else stops, dtype=float)
    snaps = np.full((len(stops), N, d), np.nan)
    next_stop = np.zeros(N, dtype=int)
    status = np.full(N, OK)
    n_steps = np.zeros(N, dtype=int)
    n_rej = np.zeros(N, dtype=int)
    history = [[(0.0, y[i].copy())] for i in range(N)] if record else None

    k1 = f(y)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2, axis=1))
        d1 = np.sqrt(np.mean((k1 / scale) ** 2, axis=1))
        h = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
        h = np.minimum(h, np.maximum(t_end, 1e-12))
    else:
        h = np.full(N, float(h0))

    # snapshots at t = 0
    for s, ts in enumerate(stops):
        hit = (next_stop == s) & (ts <= 0.0)
        snaps[s, hit] = y[hit]
        next_stop[hit] += 1

    active = (t < t_end) & (status == OK)
    it = 0
    while np.any(active):
        it += 1
        idx = np.nonzero(active)[0]
        if it > max_steps:
            status[idx] = FAILED
            break
        yi, ti, hi = y[idx], t[idx], h[idx]
        limit = t_end[idx].copy()
        ns = next_stop[idx]
        has_stop = ns < len(stops)
        if len(stops):
            limit = np.where(has_stop, np.minimum(limit, stops[np.minimum(ns, len(stops) - 1)]), limit)
        hi = np.minimum(hi, limit - ti)
        K = [k1[idx]]
        for s in range(1, 7):
            acc = yi + hi[:, None] * sum(a * K[j] for j, a in enumerate(_A[s]) if a != 0.0)
            K.append(f(acc))
        y_new = yi + hi[:, None] * sum(b * K[j] for j, b in enumerate(_B) if b != 0.0)
        err_vec = hi[:, None] * sum(e * K[j] for j, e in enumerate(_E) if e != 0.0)
        scale = atol + rtol * np.maximum(np.abs(yi), np.abs(y_new))
        with np.errstate(invalid="ignore", over="ignore"):
            err = np.sqrt(np.mean((err_vec / scale) ** 2, axis=1))
        finite = np.isfinite(err) & np.all(np.isfinite(y_new), axis=1) & np.all(np.isfinite(K[6]), axis=1)
        err = np.where(finite, err, np.inf)
        accept = err <= 1.0
        if valid is not None and np.any(accept):
            ok = np.ones(len(idx), dtype=bool)
            ok[accept] = valid(y_new[accept])
            left = accept & ~ok
            if np.any(left):
                # shrink first; a trajectory is declared out only at a tiny step
                small = left & (hi <= 1e-6 * np.maximum(1.0, np.abs(ti)))
                status[idx[small]] = LEFT
                accept = accept & ok
                err = np.where(left & ~small, 4.0 ** 5, err)
        with np.errstate(divide="ignore"):
            fac = np.where(err == 0, 5.0, np.clip(0.9 * err ** -0.2, 0.2, 5.0))
        fac = np.where(np.isfinite(err), fac, 0.25)
        h_next = hi * np.where(accept, fac, np.minimum(fac, 1.0))

        acc_idx = idx[accept]
        t_new = ti + hi
        reached = accept & (np.abs(t_new - limit) <= 1e-14 * np.maximum(1.0, np.abs(limit)))
        t_new = np.where(reached, limit, t_new)
        t[acc_idx] = t_new[accept]
        y[acc_idx] = y_new[accept]
        k1[acc_idx] = K[6][accept]
        n_steps[acc_idx] += 1
        n_rej[idx[~accept]] += 1
        # keep the pre-clipping step size when a stop forced a short step
        h[idx] = np.where(reached, np.maximum(h_next, h[idx]), h_next)
        if record:
            for i in acc_idx:
                history[i].append((t[i], y[i].copy()))
        if len(stops):
            for i in acc_idx:
                while next_stop[i] < len(stops) and t[i] >= stops[next_stop[i]] - 1e-14 * max(1.0, stops[next_stop[i]]):
                    snaps[next_stop[i], i] = y[i]
                    next_stop[i] += 1
        stuck = idx[(~accept) & (h[idx] < h_min * np.maximum(1.0, np.abs(ti)))]
        status[stuck[status[stuck] == OK]] = FAILED
        active = (t < t_end) & (status == OK)
    return ODEResult(t=t, y=y, status=status, stops=stops, snapshots=snaps, n_steps=n_steps,
                     n_rejected=n_rej, history=history)
