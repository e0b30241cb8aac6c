"""Bergman geodesics, distances and metric balls.

The geodesic system is integrated in complex form, ``z' = zeta`` and
``zeta' = -Gamma^k_{ij} zeta_i zeta_j``, which is the complexification of the
real system ``x' = y, y' = -Gamma^eta_{mu nu} y_mu y_nu``.
"""
import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize

from .coords import as_points, realify, to_complex, to_real
from .errors import DegenerateMetric, LeftDomain, NoConvergence
from .metric import complex_christoffel, metric_jets, metric_tensor
from .ode import FAILED, LEFT, OK, integrate
from .sampling import sphere_directions

SHOOT_TOL = 1e-6
N_MULTISTART = 8


@dataclass
class GeodesicPath:
    """Samples ``(t, x, y)`` of a unit-speed geodesic (real coordinates)."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    length: float
    n_steps: int
    n_rejected: int

    @property
    def endpoint(self):
        return to_complex(self.x[-1])

    def speeds(self, model):
        out = []
        for x, y in zip(self.x, self.y):
            G = metric_tensor(model, to_complex(x)).g_real
            out.append(np.sqrt(y @ G @ y))
        return np.array(out)

    def to_csv(self, path):
        d = self.x.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i}" for i in range(d)] + [f"y{i}" for i in range(d)])
            for t, x, y in zip(self.t, self.x, self.y):
                w.writerow([f"{t:.12e}"] + [f"{v:.12e}" for v in x] + [f"{v:.12e}" for v in y])


@dataclass
class DistanceResult:
    distance: float
    method: str
    miss: float = np.nan
    shooting: float = np.nan
    energy: float = np.nan
    direction: np.ndarray = field(default=None)


@dataclass
class BergmanBallSample:
    """Endpoints of unit-speed geodesics of length ``radius`` from ``center``."""

    center: np.ndarray
    radius: float
    directions: np.ndarray
    endpoints: np.ndarray
    flags: np.ndarray

    @property
    def ok(self):
        return ~self.flags

    def to_csv(self, path):
        n = self.endpoints.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "flag"] + [f"x{i}" for i in range(2 * n)])
            for i, (p, fl) in enumerate(zip(self.endpoints, self.flags)):
                w.writerow([i, int(fl)] + [f"{v:.12e}" for v in to_real(p)])


# ---------------------------------------------------------------------------
# right-hand side and validity
# ---------------------------------------------------------------------------


def _rhs(model):
    n = model.n

    def f(Y):
        Z = to_complex(Y[:, : 2 * n])
        Zd = to_complex(Y[:, 2 * n:])
        out = np.full(Y.shape, np.nan)
        with np.errstate(all="ignore"):
            ok = model.domain.contains(Z)
            if np.any(ok):
                try:
                    _, Gam = complex_christoffel(model, Z[ok])
                except np.linalg.LinAlgError:
                    return out
                acc = -np.einsum("nkij,ni,nj->nk", Gam, Zd[ok], Zd[ok])
                out[ok, : 2 * n] = Y[ok, 2 * n:]
                out[ok, 2 * n:] = to_real(acc)
        return out

    return f


def _validity(model, margin):
    n = model.n

    def valid(Y):
        Z = to_complex(Y[:, : 2 * n])
        ok = np.asarray(model.trusted(Z), dtype=bool).reshape(-1)
        if margin:
            ok &= np.atleast_1d(model.domain.approx_boundary_distance(Z)) >= margin
        return ok

    return valid


def unit_velocity(model, z, xi):
    """Scale the complex tangent ``xi`` to unit Bergman length at ``z``."""
    g = metric_tensor(model, z).g
    s = np.sqrt(np.real(xi @ g @ np.conj(xi)))
    if s == 0:
        raise ValueError("zero tangent vector")
    return xi / s


def flow(model, z0, V, t_end, tol=1e-8, margin=0.0, stops=None, record=False):
    """Integrate geodesics from ``z0`` with initial complex velocities ``V`` (M, n)."""
    n = model.n
    z0 = np.asarray(z0, dtype=complex).reshape(n)
    V = np.atleast_2d(np.asarray(V, dtype=complex))
    Y0 = np.concatenate([np.repeat(to_real(z0)[None, :], V.shape[0], axis=0), to_real(V)], axis=1)
    return integrate(_rhs(model), Y0, t_end, rtol=tol, atol=tol, valid=_validity(model, margin),
                     stops=stops, record=record)


# ---------------------------------------------------------------------------
# integrate_geodesic
# ---------------------------------------------------------------------------


def integrate_geodesic(model, z0, xi, length, tol=1e-8, margin=0.0):
    """Unit-speed geodesic from ``z0`` in direction ``xi`` of Bergman length ``length``.

    Raises ``LeftDomain`` if the trajectory leaves the region where the
    kernel is trusted (or comes within ``margin`` of the boundary).
    """
    z0 = np.asarray(z0, dtype=complex).reshape(model.n)
    model.check_points(z0)
    v = unit_velocity(model, z0, np.asarray(xi, dtype=complex).reshape(model.n))
    res = flow(model, z0, v[None, :], float(length), tol=tol, margin=margin, record=True)
    hist = res.history[0]
    t = np.array([h[0] for h in hist])
    Y = np.array([h[1] for h in hist])
    d = 2 * model.n
    if res.status[0] == LEFT:
        raise LeftDomain(f"geodesic left the trusted region at t={res.t[0]:.6g}", t=res.t[0], state=res.y[0])
    if res.status[0] == FAILED:
        raise DegenerateMetric(f"geodesic integration failed at t={res.t[0]:.6g}")
    return GeodesicPath(t=t, x=Y[:, :d], y=Y[:, d:], length=float(length),
                        n_steps=int(res.n_steps[0]), n_rejected=int(res.n_rejected[0]))


# ---------------------------------------------------------------------------
# distance
# ---------------------------------------------------------------------------


def _endpoints(model, z, Vreal, tol, margin):
    res = flow(model, z, to_complex(Vreal), 1.0, tol=tol, margin=margin)
    return res.y[:, : 2 * model.n], res.status


def _shoot(model, z, w, v0, tol, margin):
    target = to_real(w)
    d = 2 * model.n
    cache = {}

    def batch(v):
        # residual and central-difference Jacobian from one vectorized sweep
        key = v.tobytes()
        if key not in cache:
            h = 1e-6 * max(1.0, np.linalg.norm(v))
            V = np.vstack([v[None, :], v + h * np.eye(d), v - h * np.eye(d)])
            Y, _ = _endpoints(model, z, V, tol, margin)
            cache.clear()
            cache[key] = (Y[0] - target, (Y[1:d + 1] - Y[d + 1:]).T / (2 * h))
        return cache[key]

    def fun(v):
        return batch(v)[0]

    def jac(v):
        return batch(v)[1]

    try:
        sol = least_squares(fun, v0, jac=jac, method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=200)
    except (ValueError, np.linalg.LinAlgError):
        return None, np.inf
    _, status = _endpoints(model, z, sol.x[None, :], tol, margin)
    miss = float(np.linalg.norm(sol.fun))
    if status[0] != OK:
        return None, np.inf
    return sol.x, miss


def shooting_distance(model, z, w, tol=1e-10, margin=0.0, seed=0):
    """Distance by geodesic shooting; returns ``(distance, miss, direction)``.

    Starts from the straight-segment velocity ``w - z`` and, if that fails,
    from ``N_MULTISTART`` perturbed velocities. Among converged solutions the
    shortest wins; near-ties break lexicographically on the initial velocity.
    """
    z = np.asarray(z, dtype=complex).reshape(model.n)
    w = np.asarray(w, dtype=complex).reshape(model.n)
    G = metric_tensor(model, z).g_real
    v0 = to_real(w - z)
    starts = [v0]
    sols = []
    v, miss = _shoot(model, z, w, v0, tol, margin)
    if v is not None and miss < SHOOT_TOL:
        sols.append((float(np.sqrt(v @ G @ v)), tuple(v), miss))
    else:
        rng = np.random.default_rng(seed)
        scale = max(np.linalg.norm(v0), 1e-3)
        for _ in range(N_MULTISTART):
            start = v0 + 0.3 * scale * rng.standard_normal(v0.shape)
            starts.append(start)
            v, miss = _shoot(model, z, w, start, tol, margin)
            if v is not None and miss < SHOOT_TOL:
                sols.append((float(np.sqrt(v @ G @ v)), tuple(v), miss))
    if not sols:
        return np.nan, np.inf, None
    sols.sort(key=lambda s: (round(s[0], 9), s[1]))
    length, v, miss = sols[0]
    return length, miss, np.array(v)


def _path_energy(model, z, w, K):
    n = model.n
    d = 2 * n
    a, b = to_real(z), to_real(w)

    def unpack(theta):
        inner = theta.reshape(K - 1, d)
        return np.vstack([a, inner, b])

    def energy(theta):
        X = unpack(theta)
        D = np.diff(X, axis=0)
        M = 0.5 * (X[1:] + X[:-1])
        Zm = to_complex(M)
        if not np.all(model.domain.contains(Zm)) or not np.all(model.domain.contains(to_complex(X))):
            return 1e30, np.zeros_like(theta)
        g, dg = metric_jets(model, Zm, derivatives=True)
        G = realify(g)
        q = np.einsum("ki,kij,kj->k", D, G, D)
        E = K * np.sum(q)
        # dq/dM through the metric derivatives
        Xi = to_complex(D)
        dM = np.empty_like(M)
        dgh = np.conj(np.swapaxes(dg, 2, 3))
        t1 = np.einsum("ki,kaij,kj->ka", Xi, dg + dgh, np.conj(Xi)).real
        t2 = np.einsum("ki,kaij,kj->ka", Xi, 1j * (dg - dgh), np.conj(Xi)).real
        dM[:, 0::2] = t1
        dM[:, 1::2] = t2
        dD = 2.0 * np.einsum("kij,kj->ki", G, D)
        gX = np.zeros_like(X)
        gX[1:] += dD + 0.5 * dM
        gX[:-1] += -dD + 0.5 * dM
        return E, K * gX[1:-1].ravel()

    def length(theta):
        X = unpack(theta)
        D = np.diff(X, axis=0)
        g, _ = metric_jets(model, to_complex(0.5 * (X[1:] + X[:-1])))
        G = realify(g)
        return float(np.sum(np.sqrt(np.einsum("ki,kij,kj->k", D, G, D))))

    return unpack, energy, length


def energy_distance(model, z, w, K0=64, K_max=512, tol=1e-4, init=None):
    """Length of a minimal-energy piecewise-linear path.

    ``K`` segments, doubled until the length changes by less than ``tol``.
    Segment lengths use the metric at the midpoint, so the value bounds the
    distance from above only up to the ``O(K^-2)`` quadrature error.
    """
    z = np.asarray(z, dtype=complex).reshape(model.n)
    w = np.asarray(w, dtype=complex).reshape(model.n)
    d = 2 * model.n
    a, b = to_real(z), to_real(w)
    K = K0
    s = np.linspace(0.0, 1.0, K + 1)[1:-1, None]
    theta = (a + s * (b - a)).ravel() if init is None else init
    prev = np.inf
    while True:
        unpack, energy, length = _path_energy(model, z, w, K)
        # rescaled variables keep the first quasi-Newton steps inside the domain
        S = 4.0 * K

        def scaled(u, energy=energy, S=S):
            e, g = energy(u / S)
            return e, g / S

        res = minimize(scaled, theta * S, jac=True, method="L-BFGS-B",
                       options={"maxiter": 50 * K, "ftol": 1e-15, "gtol": 1e-12})
        res.x = res.x / S
        L = length(res.x)
        if abs(L - prev) < tol or K >= K_max:
            if not np.isfinite(L):
                raise NoConvergence("energy minimization produced a non-finite length")
            return L, K
        prev = L
        X = unpack(res.x)
        # refine: insert midpoints
        Xn = np.empty((2 * K + 1, d))
        Xn[0::2] = X
        Xn[1::2] = 0.5 * (X[1:] + X[:-1])
        K *= 2
        theta = Xn[1:-1].ravel()


def bergman_distance(model, z, w, method="auto", tol=1e-10, margin=0.0, seed=0):
    """Bergman distance with a method tag.

    ``method`` is ``"shooting"``, ``"energy"``, ``"auto"`` (shooting, energy
    fallback) or ``"both"`` (the smaller of the two, tagged accordingly).
    """
    z = np.asarray(z, dtype=complex).reshape(model.n)
    w = np.asarray(w, dtype=complex).reshape(model.n)
    model.check_points(z, w)
    if np.allclose(z, w, rtol=0, atol=1e-15):
        return DistanceResult(0.0, "trivial", 0.0, 0.0, 0.0)
    out = DistanceResult(np.nan, method)
    if method in ("auto", "shooting", "both"):
        d, miss, v = shooting_distance(model, z, w, tol=tol, margin=margin, seed=seed)
        out.shooting, out.miss, out.direction = d, miss, v
        if np.isfinite(d) and method != "both":
            out.distance, out.method = d, "shooting"
            return out
        if method == "shooting":
            raise NoConvergence(f"shooting failed between {z} and {w} (miss {miss:.3e})")
    try:
        e, _ = energy_distance(model, z, w)
    except NoConvergence:
        e = np.nan
    out.energy = e
    cands = [(v, tag) for v, tag in ((out.shooting, "shooting"), (e, "energy")) if np.isfinite(v)]
    if not cands:
        raise NoConvergence(f"no method converged between {z} and {w}")
    out.distance, out.method = min(cands)
    return out


# ---------------------------------------------------------------------------
# balls
# ---------------------------------------------------------------------------


def unit_directions(model, p, n_dirs, seed=0):
    """Initial velocities on the unit sphere of the metric at ``p``: ``G^{-1/2} u``."""
    G = metric_tensor(model, p).g_real
    evals, evecs = np.linalg.eigh(G)
    Gm12 = evecs @ np.diag(evals ** -0.5) @ evecs.T
    U = sphere_directions(n_dirs, G.shape[0], seed=seed)
    return U @ Gm12.T


def default_n_dirs(n):
    return 2 ** n * 64


def bergman_spheres(model, p, radii, n_dirs=None, tol=1e-8, margin=0.0, seed=0):
    """Geodesic-sphere samples around ``p`` at several radii from one sweep.

    Returns ``(directions, endpoints, flags)`` with ``endpoints`` of shape
    ``(len(radii), n_dirs, n)``; a flagged entry left the trusted region
    before reaching that radius.
    """
    p = np.asarray(p, dtype=complex).reshape(model.n)
    model.check_points(p)
    n_dirs = default_n_dirs(model.n) if n_dirs is None else int(n_dirs)
    radii = np.sort(np.atleast_1d(np.asarray(radii, dtype=float)))
    Vr = unit_directions(model, p, n_dirs, seed)
    res = flow(model, p, to_complex(Vr), radii[-1], tol=tol, margin=margin, stops=radii)
    snaps = res.snapshots[:, :, : 2 * model.n]
    flags = ~np.all(np.isfinite(snaps), axis=2)
    ends = to_complex(np.where(np.isfinite(snaps), snaps, np.nan))
    return Vr, ends, flags


def bergman_ball(model, p, r, n_dirs=None, tol=1e-8, margin=0.0, seed=0):
    """Sample the Bergman sphere of radius ``r`` about ``p``; aborted directions are flagged."""
    dirs, ends, flags = bergman_spheres(model, p, [r], n_dirs, tol, margin, seed)
    return BergmanBallSample(center=np.asarray(p, dtype=complex).reshape(model.n), radius=float(r),
                             directions=dirs, endpoints=ends[0], flags=flags[0])
