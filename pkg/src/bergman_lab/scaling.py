"""Scaling sequences and the stability-chain verifier.

A scaling sequence approaches a boundary point ``p0`` along points ``p^j`` and
maps the domain by affine maps ``Phi_j(z) = A_j (z - p0)`` composed of a
unitary rotation taking the outward normal to ``e_1``, an optional Levi
normalization and the anisotropic dilation ``diag(delta^-w_k)``. Every
``D^j = Phi_j(D)`` is therefore an affine image, and its kernel follows exactly
from the transformation rule.
"""
import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import sqrtm
from scipy.spatial import cKDTree

from .domains import (
    AffineImage,
    ComplexEllipsoid,
    ModelPolynomial,
    Polydisc,
    PolyHalfPlane,
    SiegelHalfSpace,
    base_of,
    cayley,
)
from .errors import ApproachLeavesCone, BergmanLabError, NoChart, NotInNormalForm, UnknownClass
from .geodesics import bergman_ball, bergman_distance, unit_directions
from .kernel import build_kernel, kernel_eval
from .metric import closed_form_bergman_distance, has_closed_form_distance, metric_tensor

CLASSES = ("strongly_pseudoconvex", "levi_corank_one", "bidisc_corner")
DEFAULT_APERTURE = np.pi / 6
QUANTITIES = ("kernel", "metric", "christoffel", "distance", "ball")


def default_deltas(J=5, delta1=0.1):
    """``delta_j = delta1 * 10^(-(j-1)/2)``: 1e-1, 3.16e-2, 1e-2, ... for the default."""
    return delta1 * 10.0 ** (-0.5 * np.arange(J))


@dataclass
class ScalingSequence:
    """Approach points, affine normalizations and scaled domains along ``delta_j``."""

    domain: object
    p0: np.ndarray
    cls: str
    approach: str
    aperture: float
    deltas: np.ndarray
    weights: np.ndarray
    base_map: np.ndarray
    points: np.ndarray
    maps: list
    scaled: list
    limit: object
    images: np.ndarray
    notes: dict = field(default_factory=dict)

    @property
    def q0(self):
        """Limit of the transported points: ``(-1, 0')``, or ``(-1, ..., -1)`` at a corner."""
        if self.cls == "bidisc_corner":
            return -np.ones(self.domain.n, dtype=complex)
        q = np.zeros(self.domain.n, dtype=complex)
        q[0] = -1.0
        return q

    def forward(self, j, z):
        A, c = self.maps[j]
        return np.asarray(z) @ A.T + c

    def inverse(self, j, w):
        A, c = self.maps[j]
        return (np.asarray(w) - c) @ np.linalg.inv(A).T


def _unitary_to_e1(nu):
    """Unitary ``U`` with ``U nu = e_1`` (Householder-type, ``U = I`` when ``nu = e_1``)."""
    n = nu.shape[0]
    e1 = np.zeros(n, dtype=complex)
    e1[0] = 1.0
    if np.allclose(nu, e1, atol=1e-15):
        return np.eye(n, dtype=complex)
    # phase-align then reflect
    phase = nu[0] / abs(nu[0]) if abs(nu[0]) > 1e-15 else 1.0
    v = nu / phase - e1
    if np.linalg.norm(v) < 1e-15:
        return np.eye(n, dtype=complex) * np.conj(phase)
    v = v / np.linalg.norm(v)
    H = np.eye(n, dtype=complex) - 2.0 * np.outer(v, np.conj(v))
    return H / phase


def build_scaling(domain, p0, cls="strongly_pseudoconvex", approach="normal", J=5, deltas=None,
                  aperture=DEFAULT_APERTURE, tilt=None):
    """Construct the scaling sequence of ``domain`` at the boundary point ``p0``.

    Parameters
    ----------
    cls : {"strongly_pseudoconvex", "levi_corank_one", "bidisc_corner"}
    approach : {"normal", "cone"}
        ``cone`` tilts the approach by ``tilt`` (default ``aperture / 2``)
        towards a complex tangential direction.
    """
    if cls not in CLASSES:
        raise UnknownClass(f"unknown domain class {cls!r}")
    n = domain.n
    p0 = np.asarray(p0, dtype=complex).reshape(n)
    deltas = default_deltas(J) if deltas is None else np.asarray(deltas, dtype=float)
    if np.any(np.diff(deltas) >= 0):
        raise ValueError("deltas must be strictly decreasing")
    notes = {}

    if cls == "bidisc_corner":
        base, M, c = base_of(domain)
        if not isinstance(base, Polydisc) or not np.allclose(M, np.eye(n)) or not np.allclose(c, 0):
            raise UnknownClass("the corner scaling is registered for the polydisc only")
        if not np.allclose(np.abs(p0), 1.0):
            raise UnknownClass("corner point must have all coordinates on the unit circle")
        B = np.diag(np.conj(p0))  # rotate the corner to (1, ..., 1)
        nu = p0 / np.linalg.norm(p0)
        weights = np.ones(n)
        limit = PolyHalfPlane(n)
        direction = p0  # approach along the diagonal
    else:
        rho = domain.defining(p0)
        i = int(np.argmax(rho))
        if abs(rho[i]) > 1e-10:
            raise ValueError("p0 is not a boundary point")
        d = domain.defining_gradient(p0)[i]
        dn = np.linalg.norm(d)
        nu = np.conj(d) / dn
        U = _unitary_to_e1(nu)
        L, P = domain.levi_form(p0, which=i)
        Ut = U.conj().T
        # second derivatives in rotated coordinates w = U (z - p0)
        P_rot = Ut.T @ P @ Ut
        L_rot = Ut.T @ L @ np.conj(Ut)
        if np.max(np.abs(P_rot)) > 1e-6 * max(1.0, np.max(np.abs(L_rot))):
            raise NotInNormalForm("pure second derivatives of the defining function do not vanish at p0")
        T = L_rot[1:, 1:] / dn
        if cls == "strongly_pseudoconvex":
            ev = np.linalg.eigvalsh(0.5 * (T + T.conj().T)) if n > 1 else np.array([1.0])
            if n > 1 and ev.min() <= 1e-8:
                raise UnknownClass("Levi form is not positive definite at p0")
            R = np.eye(n, dtype=complex)
            if n > 1:
                R[1:, 1:] = np.conj(sqrtm(0.5 * (T + T.conj().T)))
            B = R @ U
            weights = np.array([1.0] + [0.5] * (n - 1))
            limit = SiegelHalfSpace(n)
        else:
            base, M, c = base_of(domain)
            if not (isinstance(base, ComplexEllipsoid) and n == 2 and np.allclose(M, np.eye(n)) and np.allclose(c, 0)):
                raise NotInNormalForm("Levi corank one scaling needs a complex ellipsoid in C^2 in normal form")
            pw = np.array(base.powers)
            if pw[0] != 1 or pw[1] < 2 or abs(abs(p0[0]) - base.radii()[0]) > 1e-12 or abs(p0[1]) > 0:
                raise NotInNormalForm("p0 must be the axis point of a type 2m egg-like domain")
            m = int(pw[1])
            B = U
            weights = np.array([1.0, 1.0 / (2 * m)])
            coeff = base.coeffs[1] / dn
            limit = ModelPolynomial(2, {(m, m): coeff})
            notes["weight_reading"] = "1/m_k for coordinate z_k"
        direction = -nu

    points = []
    maps = []
    scaled = []
    images = []
    cone_axis = -nu
    tilt = aperture / 2.0 if tilt is None else float(tilt)
    for delta in deltas:
        if cls == "bidisc_corner":
            p = p0 * (1.0 - delta)
        else:
            step = cone_axis
            if approach == "cone" and n > 1:
                tau = U.conj().T[:, 1]
                step = cone_axis + np.tan(tilt) * tau
            elif approach not in ("normal", "cone"):
                raise ValueError(f"unknown approach {approach!r}")
            p = p0 + delta * step
            # angle to the inward normal
            v = p - p0
            cosang = np.real(np.vdot(cone_axis, v)) / np.linalg.norm(v)
            if np.arccos(np.clip(cosang, -1, 1)) > aperture + 1e-12:
                raise ApproachLeavesCone(f"approach point at delta={delta:g} leaves the cone of aperture {aperture:g}")
        if not domain.contains(p):
            raise ApproachLeavesCone(f"approach point at delta={delta:g} is outside the domain")
        dil = np.diag(delta ** (-weights)).astype(complex)
        A = dil @ B
        c = -A @ p0
        maps.append((A, c))
        scaled.append(AffineImage(domain, A, c))
        points.append(p)
        images.append(A @ p + c)
    return ScalingSequence(domain=domain, p0=p0, cls=cls, approach=approach, aperture=aperture,
                           deltas=deltas, weights=weights, base_map=B, points=np.array(points),
                           maps=maps, scaled=scaled, limit=limit, images=np.array(images), notes=notes)


# ---------------------------------------------------------------------------
# Hausdorff gap
# ---------------------------------------------------------------------------


def hausdorff_gap(A, B, window, n_grid=32):
    """Grid-based local Hausdorff gap between two domains on a box window.

    ``window`` is ``(lo, hi)`` in interleaved real coordinates (or per complex
    coordinate pairs broadcast to all). For every grid point lying in exactly
    one of the sets, the distance to the nearest grid point of the other set
    is taken; the gap is the maximum (0 when the samples agree).
    """
    n = A.n
    lo, hi = (np.asarray(w, dtype=float) for w in window)
    if lo.size == 2 and n > 1:
        lo, hi = np.tile(lo, n), np.tile(hi, n)
    axes = [np.linspace(lo[k], hi[k], n_grid) for k in range(2 * n)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2 * n)
    Z = X[:, 0::2] + 1j * X[:, 1::2]
    inA = A.contains(Z)
    inB = B.contains(Z)
    diff = inA ^ inB
    if not np.any(diff):
        return 0.0
    gap = 0.0
    for mine, other in ((inA & ~inB, inB), (inB & ~inA, inA)):
        if not np.any(mine):
            continue
        if not np.any(other):
            return float(np.linalg.norm(hi - lo))
        d, _ = cKDTree(X[other]).query(X[mine])
        gap = max(gap, float(d.max()))
    return gap


# ---------------------------------------------------------------------------
# verify_chain
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    """Per-rung sup-gaps of one quantity and the resulting verdict."""

    quantity: str
    deltas: np.ndarray
    gaps: np.ndarray
    flags: list
    mode: str = "limit"
    extra: dict = field(default_factory=dict)

    @property
    def decreasing(self):
        g = self.gaps[np.isfinite(self.gaps)]
        return bool(len(g) == len(self.gaps) and np.all(np.diff(g) < 0))

    @property
    def final_gap(self):
        return float(self.gaps[-1])

    def predicted_next(self):
        """Gap extrapolated to ``delta_J / 2`` from the order fitted to the last two rungs."""
        g, d = self.gaps, self.deltas
        if len(g) < 2 or g[-1] <= 0 or g[-2] <= 0:
            return 0.0
        order = np.log(g[-2] / g[-1]) / np.log(d[-2] / d[-1])
        return float(g[-1] * 0.5 ** order)

    @property
    def saturation_ok(self):
        if self.final_gap == 0:
            return True
        return self.final_gap < 10.0 * self.predicted_next()

    def rows(self):
        for j, (d, g, f) in enumerate(zip(self.deltas, self.gaps, self.flags)):
            yield [self.quantity, j + 1, f"{d:.6e}", f"{g:.10e}", ";".join(f) if f else ""]


def write_reports_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "j", "delta", "sup_gap", "flags"])
        for r in reports:
            for row in r.rows():
                w.writerow(row)


def default_test_points(seq):
    """Compact test set in the limit domain around ``q0 = (-1, 0')``."""
    n = seq.domain.n
    if seq.cls == "bidisc_corner":
        return np.array([[-1.0, -1.0], [-2.0, -0.5], [-0.5, -1.5 + 0.3j]], dtype=complex)[:, :n]
    if n == 1:
        return np.array([[-2.0], [-1.0], [-0.5]], dtype=complex)
    pts = [np.r_[-2.0, np.zeros(n - 1)], np.r_[-1.0, np.zeros(n - 1)], np.r_[-0.5, np.zeros(n - 1)]]
    pts.append(np.r_[-1.0 + 0.3j, 0.4 * np.ones(n - 1)])
    return np.array(pts, dtype=complex)


def _limit_model(seq):
    try:
        cayley(seq.limit)
    except NoChart:
        return None
    return build_kernel(seq.limit)


def _safe(fn, flags, tag):
    try:
        return fn()
    except BergmanLabError as exc:
        flags.append(f"{tag}:{type(exc).__name__}")
        return np.nan


def verify_chain(seq, S=None, quantities=QUANTITIES, radius=1.0, eps=0.05, n_dirs=None, n_incl=16,
                 model=None, seed=0):
    """Stability-chain reports for ``seq`` at the test points ``S`` (limit coordinates).

    Kernel, metric and Christoffel gaps are relative sup-norms over ``S``;
    the distance gap is ``sup_s |d_j(q0, s) - d_inf(q0, s)|``; the ball gap is
    the largest Euclidean distance between matched geodesic-sphere points of
    radius ``radius`` around ``q^j`` and ``q0``. When the limit domain has no
    chart, consecutive rungs are compared instead (Cauchy mode).
    """
    S = default_test_points(seq) if S is None else np.atleast_2d(np.asarray(S, dtype=complex))
    base_model = build_kernel(seq.domain) if model is None else model
    models = [build_kernel(D) if model is None else _pullback(D, model) for D in seq.scaled]
    lim = _limit_model(seq)
    mode = "limit" if lim is not None else "cauchy"
    q0 = seq.q0
    J = len(seq.deltas)

    def kernel_q(m, pts):
        return np.array([float(np.real(kernel_eval(m, s))) for s in pts])

    def metric_q(m, pts):
        return [metric_tensor(m, s).g for s in pts]

    def gamma_q(m, pts):
        return [metric_tensor(m, s, christoffel_symbols=True).gamma for s in pts]

    def dist_q(m, pts, center):
        return np.array([bergman_distance(m, center, s).distance for s in pts])

    def ball_q(m, center):
        b = bergman_ball(m, center, radius, n_dirs=n_dirs, seed=seed)
        return np.where(b.flags[:, None], np.nan, b.endpoints)

    compute = {
        "kernel": lambda m, center: kernel_q(m, S),
        "metric": lambda m, center: metric_q(m, S),
        "christoffel": lambda m, center: gamma_q(m, S),
        "distance": lambda m, center: dist_q(m, S, center),
        "ball": lambda m, center: ball_q(m, center),
    }

    def gap(qty, a, b):
        if qty == "kernel":
            return float(np.max(np.abs(a - b) / np.abs(b)))
        if qty == "metric":
            return float(max(np.linalg.norm(x - y) / np.linalg.norm(y) for x, y in zip(a, b)))
        if qty == "christoffel":
            return float(max(np.max(np.abs(x - y)) for x, y in zip(a, b)))
        if qty == "distance":
            return float(np.max(np.abs(a - b)))
        return float(np.nanmax(np.abs(a - b)))

    reports = []
    for qty in quantities:
        flags = [[] for _ in range(J)]
        if lim is not None:
            ref = _safe(lambda: compute[qty](lim, q0), flags[0], "limit")
        vals = [_safe(lambda m=m, j=j: compute[qty](m, seq.images[j] if qty == "ball" else q0), flags[j], "rung")
                for j, m in enumerate(models)]
        gaps = np.full(J, np.nan)
        for j in range(J):
            if mode == "limit":
                if not _isnan(vals[j]) and not _isnan(ref):
                    gaps[j] = gap(qty, vals[j], ref)
            elif j + 1 < J and not _isnan(vals[j]) and not _isnan(vals[j + 1]):
                gaps[j] = gap(qty, vals[j], vals[j + 1])
        if mode == "cauchy":
            gaps, deltas, flags = gaps[:-1], seq.deltas[:-1], flags[:-1]
        else:
            deltas = seq.deltas
        rep = ConvergenceReport(qty, deltas, gaps, flags, mode)
        if qty == "ball" and lim is not None:
            rep.extra["inclusions"] = ball_inclusions(seq, models[-1], lim, radius, eps, n_incl, seed)
        reports.append(rep)
    return reports


def _isnan(v):
    return isinstance(v, float) and np.isnan(v)


def _pullback(D, model):
    from .kernel import AffinePullback

    return AffinePullback(D, model, D.M, D.c)


def ball_inclusions(seq, model_j, model_inf, R=1.0, eps=0.05, n_points=16, seed=0):
    """Check both epsilon-inclusions between Bergman balls of ``D^J`` and ``D_inf``.

    (a) points of the ``D_inf`` sphere of radius ``R`` about ``q0`` lie within
    ``R + eps`` of ``q^J`` in ``D^J``; (b) points of the ``D^J`` sphere of radius
    ``R - eps`` about ``q^J`` lie within ``R`` of ``q0`` in ``D_inf``.
    Returns a dict with the worst slack of each inclusion (>= 0 means it holds).
    """
    qJ = seq.images[-1]
    q0 = seq.q0
    b_inf = bergman_ball(model_inf, q0, R, n_dirs=n_points, seed=seed)
    b_j = bergman_ball(model_j, qJ, R - eps, n_dirs=n_points, seed=seed)
    lim = model_inf.domain
    da = [bergman_distance(model_j, qJ, x).distance for x in b_inf.endpoints[b_inf.ok]]
    if has_closed_form_distance(lim):
        db = [closed_form_bergman_distance(lim, q0, x) for x in b_j.endpoints[b_j.ok]]
    else:
        db = [bergman_distance(model_inf, q0, x).distance for x in b_j.endpoints[b_j.ok]]
    slack_a = float(np.min(R + eps - np.array(da)))
    slack_b = float(np.min(R - np.array(db)))
    return {"outer_slack": slack_a, "inner_slack": slack_b, "holds": bool(slack_a >= 0 and slack_b >= 0),
            "n_points": int(n_points)}
