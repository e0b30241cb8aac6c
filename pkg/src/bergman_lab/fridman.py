"""Upper bounds for the Fridman invariant from affine ball embeddings.

For a point ``p`` the estimator looks for a complex-affine image
``E = c + M(B^n)`` of the unit ball inside the domain that contains the
Bergman ball ``B(p, r)`` for ``r`` as large as possible; ``1 / r`` is then an
upper bound for the invariant. Bergman balls are represented by geodesic
sphere samples; containment in ``E`` is the exact quadratic-form test
``|M^-1 (x - c)|^2 <= 1``.

The embedding family is affine covariant: every ingredient (the normal
direction, the chord lengths, the tangential frame) is built from the metric
and the domain, so ``u(p; D) = u(A p; A D)`` for affine ``A`` up to the
sampling of sphere directions.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .coords import real_gradient, realify, to_complex, to_real
from .domains import EuclideanBall, Intersection, cayley, is_ball_biholomorphic
from .errors import BergmanLabError, NoEmbeddingFound, UnsupportedIntersection
from .geodesics import bergman_spheres, default_n_dirs, flow
from .ode import OK
from .kernel import build_kernel
from .metric import metric_tensor
from .sampling import sphere_directions

N_CENTERS = 17
LEVELS = (1.0, 0.85, 0.7, 0.5, 0.3)
CHORD_FRACTION = 0.25
SUBSTEPS = 8
CONTAIN_MARGIN = 1e-9
SAFETY_SHRINK = 1e-7
TIP_GAP = 1e-8
LEFT_CAP = 0.01


def radius_grid(r_min=0.25, ratio=1.3, r_max=12.0, substeps=SUBSTEPS):
    """Geometric radii ``r_min * ratio^(k / substeps)`` up to ``r_max``."""
    k_max = int(np.floor(substeps * np.log(r_max / r_min) / np.log(ratio) + 1e-9))
    return r_min * ratio ** (np.arange(k_max + 1) / substeps)


@dataclass
class Witness:
    """Embedding ``u -> center + M u`` of the unit ball."""

    center: np.ndarray
    M: np.ndarray
    index: int = -1
    params: dict = field(default_factory=dict)

    def quadratic(self, Z):
        """``|M^-1 (z - c)|^2`` for points ``Z`` (N, n)."""
        Y = np.linalg.solve(self.M, (np.atleast_2d(Z) - self.center).T).T
        return np.sum(np.abs(Y) ** 2, axis=1)


@dataclass
class FridmanEstimate:
    point: np.ndarray
    u: float
    radius: float
    witness: object
    diagnostics: dict = field(default_factory=dict)

    @property
    def certified_zero(self):
        return self.u == 0.0


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------


def _ray_exit(domain, z, direction, t_max=1e6, iters=80):
    """Largest ``t`` with ``z + s * direction`` inside for all ``s < t`` (bisection)."""
    lo, hi = 0.0, 1.0
    while domain.contains(z + hi * direction):
        lo, hi = hi, 2.0 * hi
        if hi > t_max:
            return np.inf
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if domain.contains(z + mid * direction):
            lo = mid
        else:
            hi = mid
    return lo


def _line_radius(domain, c, v, n_angles=64):
    """Radius of the largest disc ``{c + zeta v : |zeta| < a}`` inside the domain."""
    best = np.inf
    for th in 2 * np.pi * np.arange(n_angles) / n_angles:
        best = min(best, _ray_exit(domain, c, np.exp(1j * th) * v))
    return best


def _nearest_exit_direction(domain, p, G, n_dirs=256, seed=0):
    """Unit vector (in the real metric ``G``) along which the boundary is nearest.

    The ray exit time of ``p + t v`` is minimized over metric-unit ``v``:
    sampled first, then polished by Nelder-Mead on the sphere.  Both the
    metric sphere and straight rays transform covariantly under affine maps.
    """
    from scipy.optimize import minimize

    evals, evecs = np.linalg.eigh(G)
    Gm12 = evecs @ np.diag(evals ** -0.5) @ evecs.T

    def exit_time(u):
        u = np.asarray(u, dtype=float)
        return _ray_exit(domain, p, to_complex(Gm12 @ (u / np.linalg.norm(u))), iters=60)

    U = sphere_directions(n_dirs, G.shape[0], seed=seed)
    t = np.array([exit_time(u) for u in U])
    res = minimize(exit_time, U[int(np.argmin(t))], method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    u = res.x / np.linalg.norm(res.x)
    return to_complex(Gm12 @ u)


def normal_direction(model, p):
    """Metric gradient of ``log K`` at ``p`` (outward), normalized in the metric.

    At critical points of ``log K`` (e.g. centers of symmetric domains) the
    metric-unit direction towards the nearest boundary point along straight
    rays is used instead.
    """
    jet = model.log_jet(p, order=1)
    st = metric_tensor(model, p)
    grad_x = real_gradient(jet[1][: model.n])
    v = np.linalg.solve(st.g_real, grad_x)
    if np.sqrt(max(float(grad_x @ v), 0.0)) < 1e-8:
        vc = _nearest_exit_direction(model.domain, p, st.g_real)
    else:
        vc = to_complex(v)
    return vc / np.sqrt(np.real(vc @ st.g @ np.conj(vc))), st.g


def _complement_frame(g, v):
    """g-orthonormal basis (columns) of the g-orthogonal complement of ``v``."""
    n = g.shape[0]
    if n == 1:
        return np.zeros((1, 0), dtype=complex)
    # Gram-Schmidt in the Hermitian form <a, b> = a^T g conj(b)
    basis = [v / np.sqrt(np.real(v @ g @ np.conj(v)))]
    evals, evecs = np.linalg.eigh(g)
    out = []
    for k in range(n):
        e = evecs[:, k].copy()
        for b in basis + out:
            e = e - (e @ g @ np.conj(b)) * b
        nrm = np.sqrt(max(np.real(e @ g @ np.conj(e)), 0.0))
        if nrm > 1e-8:
            out.append(e / nrm)
        if len(out) == n - 1:
            break
    return np.column_stack(out)


# ---------------------------------------------------------------------------
# containment of the embedded ball in the domain
# ---------------------------------------------------------------------------


class _Container:
    def __init__(self, domain, n_samples, seed):
        self.domain = domain
        self.S = to_complex(sphere_directions(n_samples, 2 * domain.n, seed=seed + 101))

    def inside(self, c, M):
        pts = c + self.S @ M.T
        return bool(np.all(self.domain.contains(pts)))

    def worst(self, c, M, n_starts=8, iters=200):
        """Maximum of the defining function over the ellipsoid surface.

        The densest sampled maxima are refined by a batched monotone ascent on
        the sphere (finite-difference gradients, adaptive step per start).
        """
        dom = self.domain
        d = 2 * dom.n

        def f(X):
            return np.max(dom.defining(c + to_complex(X) @ M.T), axis=1)

        rho = f(to_real(self.S))
        X = to_real(self.S[np.argsort(rho)[-n_starts:]])
        fx = f(X)
        step = np.full(len(X), 0.05)
        h = 1e-7
        E = np.eye(d) * h
        for _ in range(iters):
            live = step > 1e-12
            if not np.any(live):
                break
            Xl = X[live]
            P = np.concatenate([Xl[:, None, :] + E, Xl[:, None, :] - E], axis=1)
            P /= np.linalg.norm(P, axis=2, keepdims=True)
            F = f(P.reshape(-1, d)).reshape(len(Xl), 2, d)
            g = (F[:, 0] - F[:, 1]) / (2 * h)
            g -= np.sum(g * Xl, axis=1, keepdims=True) * Xl
            gn = np.linalg.norm(g, axis=1, keepdims=True)
            trial = Xl + step[live, None] * g / np.maximum(gn, 1e-300)
            trial /= np.linalg.norm(trial, axis=1, keepdims=True)
            ft = f(trial)
            better = ft > fx[live]
            idx = np.nonzero(live)[0]
            X[idx[better]] = trial[better]
            fx[idx[better]] = ft[better]
            step[idx] = np.where(better, step[idx] * 1.5, step[idx] * 0.5)
        return float(max(rho.max(), fx.max()))


def _fit_tangential(container, c, a_vec, T, b_hi, tol=1e-10):
    """Largest ``b`` such that ``c + [a_vec, b T](B^n)`` is inside the domain."""

    def M_of(b):
        return np.column_stack([a_vec, b * T]) if T.shape[1] else a_vec[:, None]

    if T.shape[1] == 0:
        return 0.0, M_of(0.0)
    lo, hi = 0.0, b_hi
    if container.inside(c, M_of(hi)):
        lo = hi
    else:
        for _ in range(200):
            if hi - lo <= tol * hi:
                break
            mid = 0.5 * (lo + hi)
            if container.inside(c, M_of(mid)):
                lo = mid
            else:
                hi = mid
    b = lo
    # the sampled verdict can be optimistic: bisect again on the refined check
    if b > 0 and container.worst(c, M_of(b)) >= 0:
        good, bad = 0.0, b
        for frac in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.5):
            trial = b * (1.0 - frac)
            if container.worst(c, M_of(trial)) < 0:
                good = trial
                break
            bad = trial
        for _ in range(30):
            if bad - good <= 1e-7 * bad:
                break
            mid = 0.5 * (good + bad)
            if container.worst(c, M_of(mid)) < 0:
                good = mid
            else:
                bad = mid
        b = good
    return b, M_of(b)


def embedding_family(model, p, n_centers=N_CENTERS, levels=LEVELS, chord_fraction=CHORD_FRACTION,
                     n_samples=2048, seed=0):
    """Candidate embeddings ``(c, M)`` with ``c + M(B^n)`` inside the domain.

    Centers lie on the line through ``p`` along the metric normal ``v``,
    displaced inward by ``s = 0`` and ``s = l_+ 2^(k-3)`` (``l_+`` the distance to the
    boundary along ``v``), clipped at ``chord_fraction`` of the inward chord.
    The normal semi-axis is a fraction ``level`` of the largest disc in that
    complex line; the tangential axes are the metric-orthonormal complement
    scaled by the largest ``b`` keeping the ellipsoid inside.
    """
    dom = model.domain
    p = np.asarray(p, dtype=complex).reshape(model.n)
    v, g = normal_direction(model, p)
    T = _complement_frame(g, v)
    l_plus = _ray_exit(dom, p, v)
    l_minus = _ray_exit(dom, p, -v)
    s_cap = chord_fraction * (l_plus + l_minus) if np.isfinite(l_minus) else np.inf
    positions = [0.0]
    for k in range(n_centers - 1):
        s = l_plus * 2.0 ** (k - 3)
        s = min(s, s_cap) if np.isfinite(s_cap) else s
        if positions and abs(s - positions[-1]) <= 1e-12 * max(1.0, s):
            continue
        positions.append(s)
    container = _Container(dom, n_samples, seed)
    family = []
    for s in positions:
        c = p - s * v
        if not dom.contains(c):
            continue
        a_max = _line_radius(dom, c, v)
        if not np.isfinite(a_max):
            continue
        for level in levels:
            # level 1 would touch the boundary exactly; keep a relative gap
            a_vec = (1.0 - TIP_GAP) * level * a_max * v
            if T.shape[1]:
                b_hi = min(_ray_exit(dom, c, T[:, k]) for k in range(T.shape[1]))
                b_hi = min(b_hi, _ray_exit(dom, c, -T[:, 0]))
                if not np.isfinite(b_hi):
                    b_hi = 1e3 * a_max
            else:
                b_hi = 0.0
            b, M = _fit_tangential(container, c, a_vec, T, b_hi)
            if T.shape[1] and b <= 0:
                continue
            M = (1.0 - SAFETY_SHRINK) * M
            family.append(Witness(center=c, M=M, index=len(family),
                                  params={"s": float(s), "level": float(level), "a": float((1.0 - TIP_GAP) * level * a_max), "b": float(b)}))
    return family


# ---------------------------------------------------------------------------
# estimator
# ---------------------------------------------------------------------------


def _certify(witness, ends, flags, eta):
    """Largest index ``k`` such that all radii up to ``k`` pass; -1 if none."""
    R, N, n = ends.shape
    q = witness.quadratic(np.where(np.isfinite(ends), ends, 0.0).reshape(-1, n)).reshape(R, N)
    ok = np.all((q <= 1.0 - eta) & ~flags, axis=1)
    if ok.all():
        return R - 1, q
    return int(np.argmin(ok)) - 1, q


def _spread_starts(U, q, count, min_angle=0.3):
    """Indices of the ``count`` largest ``q`` whose directions are pairwise ``min_angle`` apart."""
    chosen = []
    for i in np.argsort(q)[::-1]:
        if all(abs(U[i] @ U[j]) < np.cos(min_angle) or U[i] @ U[j] < 0 for j in chosen):
            chosen.append(i)
        if len(chosen) == count:
            break
    return np.array(chosen)


def _sphere_sup(model, p, witness, r, Vr, q, tol, n_starts=4, iters=30, min_step=1e-4):
    """Largest witness quadratic over the continuous Bergman sphere of radius ``r``.

    ``Vr`` are the sampled initial velocities (unit in the metric at ``p``)
    and ``q`` the quadratic at their endpoints.  From the ``n_starts`` best
    well-separated samples, a batched projected ascent over the direction
    sphere climbs to the local maxima of ``Q(exp_p(r v))`` (forward-difference
    gradients, adaptive angular step).  A direction whose geodesic aborts
    counts as ``+inf``.
    """
    G = metric_tensor(model, p).g_real
    evals, evecs = np.linalg.eigh(G)
    G12 = evecs @ np.diag(evals ** 0.5) @ evecs.T
    Gm12 = evecs @ np.diag(evals ** -0.5) @ evecs.T
    U = Vr @ G12.T
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    idx = _spread_starts(U, q, n_starts)
    U, f = U[idx].copy(), q[idx].copy()
    k, d = U.shape
    h = 1e-6

    def values(X):
        X = X / np.linalg.norm(X, axis=1, keepdims=True)
        res = flow(model, p, to_complex(X @ Gm12.T), r, tol=tol)
        out = np.full(len(X), np.inf)
        ok = (res.status == OK) & np.all(np.isfinite(res.y), axis=1)
        if np.any(ok):
            out[ok] = witness.quadratic(to_complex(res.y[ok, :d]))
        return out

    step = np.full(k, 0.05)
    active = np.ones(k, dtype=bool)
    for _ in range(iters):
        a = np.nonzero(active)[0]
        if len(a) == 0:
            break
        X = np.concatenate([U[a, None, :], U[a, None, :] + h * np.eye(d)[None]], axis=1)
        fx = values(X.reshape(-1, d)).reshape(len(a), d + 1)
        if not np.all(np.isfinite(fx)):
            return np.inf
        f[a] = fx[:, 0]
        grad = (fx[:, 1:] - fx[:, :1]) / h
        grad -= np.sum(grad * U[a], axis=1, keepdims=True) * U[a]
        gn = np.linalg.norm(grad, axis=1, keepdims=True)
        trial = U[a] + step[a, None] * grad / np.maximum(gn, 1e-300)
        trial /= np.linalg.norm(trial, axis=1, keepdims=True)
        ft = values(trial)
        if not np.all(np.isfinite(ft)):
            return np.inf
        up = ft > f[a]
        U[a[up]], f[a[up]] = trial[up], ft[up]
        step[a] = np.where(up, step[a] * 1.5, step[a] * 0.3)
        active &= step >= min_step
        active[a[gn[:, 0] < 1e-12]] = False
    return float(np.max(f))


def fridman_upper(model, p, radii=None, n_dirs=None, family=None, tol=1e-8, seed=0,
                  max_refined=3, **family_opts):
    """Upper bound ``u >= h_D(p)`` from the affine embedding family.

    Ball biholomorphs with a registered chart give a certified ``u = 0``.
    Otherwise every candidate embedding is scored by the largest grid radius
    whose Bergman sphere (all sampled directions) lies inside it.  The winning
    candidate is then checked against the continuous sphere: its worst sampled
    directions are refined by local ascent, and the radius is lowered until
    the refined supremum still clears the containment margin.
    """
    dom = model.domain
    p = np.asarray(p, dtype=complex).reshape(model.n)
    model.check_points(p)
    if is_ball_biholomorphic(dom):
        return FridmanEstimate(point=p, u=0.0, radius=np.inf, witness=cayley(dom),
                               diagnostics={"certified": "registered ball biholomorphism"})
    radii = radius_grid() if radii is None else np.asarray(radii, dtype=float)
    n_dirs = default_n_dirs(model.n) if n_dirs is None else int(n_dirs)
    Vr, ends, flags = bergman_spheres(model, p, radii, n_dirs=n_dirs, tol=tol, seed=seed)
    frac = flags.mean(axis=1)
    usable = np.nonzero(frac > LEFT_CAP)[0]
    n_usable = int(usable[0]) if len(usable) else len(radii)
    ends, flags, radii_u = ends[:n_usable], flags[:n_usable], radii[:n_usable]
    fam = embedding_family(model, p, seed=seed, **family_opts) if family is None else family
    ks = np.array([_certify(w, ends, flags, CONTAIN_MARGIN)[0] for w in fam], dtype=int)
    diag = {"n_dirs": n_dirs, "n_candidates": len(fam), "left_fraction": frac.tolist(),
            "radius_cap": float(radii_u[-1]) if n_usable else 0.0, "refinements": 0}
    k = int(ks.max()) if len(ks) else -1
    while k >= 0:
        ok = flags[k] == 0
        cands = [i for i in np.nonzero(ks >= k)[0]]
        qmax = [fam[i].quadratic(ends[k][ok]).max() for i in cands]
        for j in np.argsort(qmax)[:max_refined]:
            w = fam[cands[j]]
            q = w.quadratic(ends[k][ok])
            sup = _sphere_sup(model, p, w, float(radii_u[k]), Vr[ok], q, tol)
            diag["refinements"] += 1
            if sup <= 1.0 - CONTAIN_MARGIN:
                r = float(radii_u[k])
                diag["sampled_margin"] = float(1.0 - q.max())
                diag["worst_margin"] = float(1.0 - sup)
                diag["grid_capped"] = bool(k == n_usable - 1)
                return FridmanEstimate(point=p, u=1.0 / r, radius=r, witness=w, diagnostics=diag)
        k -= 1
    raise NoEmbeddingFound("no candidate embedding contains the smallest Bergman ball", diagnostics=diag)


def resample_check(model, estimate, factor=4, tol=1e-8, seed=1):
    """Worst containment margin of the witness on a ``factor``-times denser sphere sample."""
    if estimate.certified_zero:
        return np.inf
    n_dirs = factor * estimate.diagnostics["n_dirs"]
    _, ends, flags = bergman_spheres(model, estimate.point, [estimate.radius], n_dirs=n_dirs, tol=tol, seed=seed)
    if np.any(flags):
        return -np.inf
    return float(1.0 - estimate.witness.quadratic(ends[0]).max())


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def boundary_limit_experiment(seq, radii=None, n_dirs=None, seed=0, **opts):
    """``u_j`` along a scaling sequence, evaluated at ``q^j`` in the scaled domains.

    For affine scalings ``u(p^j; D) = u(q^j; D^j)``; working in scaled
    coordinates keeps the geometry at unit scale.
    """
    rows = []
    for j, (D, q, delta) in enumerate(zip(seq.scaled, seq.images, seq.deltas)):
        row = {"j": j + 1, "delta": float(delta)}
        try:
            model = build_kernel(D)
            est = fridman_upper(model, q, radii=radii, n_dirs=n_dirs, seed=seed, **opts)
            row.update(u=est.u, radius=est.radius, estimate=est, error="")
        except BergmanLabError as exc:
            row.update(u=np.nan, radius=np.nan, estimate=None, error=type(exc).__name__)
        rows.append(row)
    return rows


def localization_experiment(domain, p0, neighborhood_radius, seq=None, cls="strongly_pseudoconvex",
                            approach="normal", deltas=None, radii=None, n_dirs=None, seed=0, gram_degree=8):
    """Compare ``u`` on ``D`` and on ``U cap D`` along an approach to ``p0``.

    ``U`` is the Euclidean ball of the given radius about ``p0``; the
    intersection's kernel is a Gram-matrix kernel (diagnostic accuracy).
    """
    from .scaling import build_scaling

    if seq is None:
        seq = build_scaling(domain, p0, cls=cls, approach=approach, deltas=deltas)
    U = EuclideanBall(np.asarray(p0, dtype=complex), neighborhood_radius)
    lo, hi = domain.bounding_box()
    corners = np.array(np.meshgrid(*[[a, b] for a, b in zip(lo, hi)])).reshape(2 * domain.n, -1).T
    swallowed = bool(np.all(U.contains(to_complex(corners))))
    full_model = build_kernel(domain)
    if swallowed:
        local_model = full_model
        local_domain = domain
    else:
        local_domain = Intersection([domain, U])
        try:
            local_model = build_kernel(local_domain, gram_degree=gram_degree, seed=seed)
        except BergmanLabError as exc:
            raise UnsupportedIntersection(str(exc)) from exc
    rows = []
    for delta, p in zip(seq.deltas, seq.points):
        row = {"delta": float(delta)}
        for tag, m in (("full", full_model), ("local", local_model)):
            try:
                row[f"u_{tag}"] = fridman_upper(m, p, radii=radii, n_dirs=n_dirs, seed=seed).u
            except BergmanLabError as exc:
                row[f"u_{tag}"] = np.nan
                row[f"error_{tag}"] = type(exc).__name__
        uf, ul = row["u_full"], row["u_local"]
        row["ratio"] = ul / uf if np.isfinite(uf) and np.isfinite(ul) and uf > 0 else (1.0 if uf == ul else np.nan)
        rows.append(row)
    return rows


def write_rows_csv(rows, path, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10e}"
    return v
