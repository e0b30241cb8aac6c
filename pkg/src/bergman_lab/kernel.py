"""Bergman kernels: closed forms, truncated monomial series and Gram-matrix kernels.

A kernel is handled as a holomorphic function of ``u = (z, v)`` where
``v = conj(w)``, so ``K(z, w) = k(z, conj(w))``. All models expose the jet of
``log k`` up to order three in the ``2n`` variables ``u``; index ``i < n`` is
``d/dz_i`` and index ``n + i`` is ``d/dconj(w_i)``.
"""
import csv
import functools
import os
import warnings
from itertools import combinations_with_replacement
from math import factorial

import numpy as np
import sympy as sp

from .coords import as_points
from .domains import (
    AffineImage,
    Ball,
    ComplexEllipsoid,
    Egg,
    EuclideanBall,
    Intersection,
    PolyHalfPlane,
    Polydisc,
    SiegelHalfSpace,
    base_of,
)
from .errors import OutsideDomain, QuadratureUnavailable, UnsupportedDomain, UnsupportedIntersection
from .sampling import sobol

DEFAULT_DEGREE = 40
DEFAULT_NODES = 10 ** 6
SERIES_TRUST_MARGIN = 0.05
CACHE_ENV = "BERGLAB_CACHE"


class TrustWarning(UserWarning):
    """Evaluation of a truncated kernel closer to the boundary than its trust margin."""


# ---------------------------------------------------------------------------
# jet algebra
# ---------------------------------------------------------------------------


def _sym3(A2, A1):
    """``A2_ij A1_k + A2_ik A1_j + A2_jk A1_i`` for stacked arrays."""
    return (
        np.einsum("...ij,...k->...ijk", A2, A1)
        + np.einsum("...ik,...j->...ijk", A2, A1)
        + np.einsum("...jk,...i->...ijk", A2, A1)
    )


def log_jet_from_values(F, F1, F2=None, F3=None):
    """Derivatives of ``log F`` from derivatives of ``F`` (same variables)."""
    out = [np.log(F)]
    L1 = F1 / F[..., None]
    out.append(L1)
    if F2 is not None:
        L2 = F2 / F[..., None, None] - np.einsum("...i,...j->...ij", L1, L1)
        out.append(L2)
        if F3 is not None:
            Fi = F[..., None, None, None]
            L3 = F3 / Fi - _sym3(F2 / F[..., None, None], L1) + 2.0 * np.einsum("...i,...j,...k->...ijk", L1, L1, L1)
            out.append(L3)
    return out


def values_from_log_jet(jet):
    """Derivatives of ``K = exp(L)`` from the jet of ``L``."""
    K = np.exp(jet[0])
    out = [K]
    if len(jet) > 1:
        L1 = jet[1]
        out.append(K[..., None] * L1)
    if len(jet) > 2:
        L2 = jet[2]
        out.append(K[..., None, None] * (L2 + np.einsum("...i,...j->...ij", L1, L1)))
    if len(jet) > 3:
        L3 = jet[3]
        out.append(
            K[..., None, None, None]
            * (L3 + _sym3(L2, L1) + np.einsum("...i,...j,...k->...ijk", L1, L1, L1))
        )
    return out


def reinhardt_lift(G, Z, V, order):
    """Jet in ``u = (z, v)`` of ``g(z * v)`` from the jet of ``g`` in ``x = z * v``."""
    N, n = Z.shape
    c = np.tile(np.arange(n), 2)
    P = np.concatenate([V, Z], axis=1)
    S = np.zeros((2 * n, 2 * n))
    S[np.arange(n), n + np.arange(n)] = 1.0
    S[n + np.arange(n), np.arange(n)] = 1.0
    out = [G[0]]
    if order >= 1:
        G1 = G[1][:, c]
        out.append(P * G1)
    if order >= 2:
        G2 = G[2][:, c][:, :, c]
        out.append(np.einsum("nk,nl,nkl->nkl", P, P, G2) + S * G1[:, :, None])
    if order >= 3:
        G3 = G[3][:, c][:, :, c][:, :, :, c]
        D3 = np.einsum("nk,nl,nm,nklm->nklm", P, P, P, G3)
        D3 += np.einsum("km,nl,nkl->nklm", S, P, G2)
        D3 += np.einsum("lm,nk,nkl->nklm", S, P, G2)
        D3 += np.einsum("kl,nm,nkm->nklm", S, P, G2)
        out.append(D3)
    return out


def monomial_jet(Y, exponents, order):
    """Values and derivatives of the monomials ``y^alpha``.

    Returns arrays of shape ``(N, m)``, ``(N, m, n)``, ``(N, m, n, n)`` and
    ``(N, m, n, n, n)`` up to ``order``.
    """
    E = np.asarray(exponents, dtype=int)
    N, n = Y.shape
    m = E.shape[0]
    maxdeg = int(E.max()) if E.size else 0
    powers = np.ones((N, n, maxdeg + 1), dtype=complex)
    for p in range(1, maxdeg + 1):
        powers[:, :, p] = powers[:, :, p - 1] * Y

    def term(shift):
        # prod_k falling(alpha_k, shift_k) * y_k^(alpha_k - shift_k)
        coef = np.ones(m)
        vals = np.ones((N, m), dtype=complex)
        for k in range(n):
            s = shift[k]
            a = E[:, k]
            f = np.ones(m)
            for t in range(s):
                f = f * (a - t)
            coef = coef * f
            e = np.clip(a - s, 0, None)
            vals = vals * powers[:, k, :][:, e]
        return vals * coef

    out = [term([0] * n)]
    for o in range(1, order + 1):
        shape = (N, m) + (n,) * o
        T = np.zeros(shape, dtype=complex)
        for idx in combinations_with_replacement(range(n), o):
            shift = [idx.count(k) for k in range(n)]
            val = term(shift)
            for perm in set(_perms(idx)):
                T[(slice(None), slice(None)) + perm] = val
        out.append(T)
    return out


def _perms(idx):
    from itertools import permutations

    return permutations(idx)


def exponents_up_to(n, degree):
    """All multi-indices ``alpha`` in ``N^n`` with ``|alpha| <= degree``, graded lexicographic."""
    out = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(n), d):
            out.append(tuple(combo.count(k) for k in range(n)))
    return np.array(out, dtype=int).reshape(-1, n)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


class KernelModel:
    """Base class: subclasses implement ``_log_jet(Z, V, order)``."""

    mode = "closed_form"
    trust_margin = 0.0

    def __init__(self, domain):
        self.domain = domain
        self.n = domain.n
        self.provenance = {}

    def __repr__(self):
        return f"{type(self).__name__}<{self.domain.ident}>"

    def log_jet(self, z, w=None, order=3, conj_w=False):
        """Jet of ``log K`` at ``(z, w)``; ``w`` defaults to ``z`` (diagonal)."""
        Z, single = as_points(z, self.n)
        if w is None:
            V = np.conj(Z)
        else:
            W, _ = as_points(w, self.n)
            V = W if conj_w else np.conj(W)
        jet = self._log_jet(Z, V, order)
        if single:
            jet = [a[0] for a in jet]
        return jet

    def jet(self, z, w=None, order=3):
        return values_from_log_jet(self.log_jet(z, w, order))

    def eval(self, z, w=None):
        return np.exp(self.log_jet(z, w, order=0)[0])

    def check_points(self, *points):
        for p in points:
            if p is None:
                continue
            P, _ = as_points(p, self.n)
            if not np.all(self.domain.contains(P)):
                raise OutsideDomain(f"point outside {self.domain!r}")
            if self.trust_margin > 0:
                d = self.domain.approx_boundary_distance(P)
                if np.any(np.asarray(d) < self.trust_margin):
                    warnings.warn(
                        f"kernel evaluated within {self.trust_margin} of the boundary of {self.domain!r}",
                        TrustWarning,
                        stacklevel=3,
                    )

    def trusted(self, z):
        """Boolean mask of points where the model is trusted."""
        Z, single = as_points(z, self.n)
        ok = self.domain.contains(Z)
        if self.trust_margin > 0:
            ok = ok & (np.atleast_1d(self.domain.approx_boundary_distance(Z)) >= self.trust_margin)
        return bool(ok[0]) if single else ok


class SesquilinearKernel(KernelModel):
    """``K = C * prod_f Q_f(z, v)^(-e_f)`` with ``Q_f = alpha + a.z + b.v + z^T H v``.

    Covers balls, complex ellipsoids with unit powers, polydiscs, the Siegel
    half-space and products of half-planes.
    """

    def __init__(self, domain, constant, factors):
        super().__init__(domain)
        self.log_constant = float(np.log(constant))
        self.factors = [
            (
                complex(alpha),
                np.asarray(a, dtype=complex),
                np.asarray(b, dtype=complex),
                np.asarray(H, dtype=complex),
                float(e),
            )
            for alpha, a, b, H, e in factors
        ]

    def _log_jet(self, Z, V, order):
        N, n = Z.shape
        L = np.full(N, self.log_constant, dtype=complex)
        L1 = np.zeros((N, 2 * n), dtype=complex)
        L2 = np.zeros((N, 2 * n, 2 * n), dtype=complex)
        L3 = np.zeros((N, 2 * n, 2 * n, 2 * n), dtype=complex)
        for alpha, a, b, H, e in self.factors:
            Q = alpha + Z @ a + V @ b + np.einsum("ni,ij,nj->n", Z, H, V)
            L -= e * np.log(Q)
            if order == 0:
                continue
            q = np.concatenate([a + V @ H.T, b + Z @ H], axis=1) / Q[:, None]
            L1 -= e * q
            if order == 1:
                continue
            S = np.zeros((2 * n, 2 * n), dtype=complex)
            S[:n, n:] = H
            S[n:, :n] = H.T
            Sq = S[None, :, :] / Q[:, None, None]
            L2 -= e * (Sq - np.einsum("ni,nj->nij", q, q))
            if order == 2:
                continue
            L3 -= e * (-_sym3(Sq, q) + 2.0 * np.einsum("ni,nj,nk->nijk", q, q, q))
        return [L, L1, L2, L3][: order + 1]


class ReinhardtLogKernel(KernelModel):
    """Closed-form Reinhardt kernel ``K = F(z * conj(w))`` given ``log F`` symbolically."""

    def __init__(self, domain, log_f, symbols):
        super().__init__(domain)
        self.expr = log_f
        self._fns = _lambdify_jet(log_f, tuple(symbols))

    def _log_jet(self, Z, V, order):
        X = Z * V
        args = [X[:, k] for k in range(self.n)]
        G = [np.broadcast_to(np.asarray(self._fns[0](*args), dtype=complex), (X.shape[0],))]
        n = self.n
        for o in range(1, order + 1):
            vals = self._fns[o](*args)
            arr = np.empty((X.shape[0],) + (n,) * o, dtype=complex)
            for idx, v in vals:
                for perm in set(_perms(idx)):
                    arr[(slice(None),) + perm] = v
            G.append(arr)
        return reinhardt_lift(G, Z, V, order)


def _lambdify_jet(expr, symbols):
    n = len(symbols)
    fns = [sp.lambdify(symbols, expr, "numpy")]
    for o in range(1, 4):
        idxs = list(combinations_with_replacement(range(n), o))
        exprs = [sp.diff(expr, *[symbols[i] for i in idx]) for idx in idxs]
        f = sp.lambdify(symbols, exprs, "numpy", cse=True)

        def call(*args, _f=f, _idxs=idxs):
            vals = _f(*args)
            shape = np.broadcast(*args).shape
            return [(idx, np.broadcast_to(np.asarray(v, dtype=complex), shape)) for idx, v in zip(_idxs, vals)]

        fns.append(call)
    return fns


@functools.lru_cache(maxsize=None)
def _egg_log_f(m):
    """``log F`` for the egg ``{|z1|^2 + |z2|^(2m) < 1}``, ``K = F(z conj(w))``.

    Summing the monomial series ``sum x^alpha / M(alpha)`` in closed form gives
    ``F = (1-x1)^(-2-1/m) / pi^2 * ((1+y)/(m (1-y)^3) + 1/(1-y)^2)`` with
    ``y = x2 (1-x1)^(-1/m)``.
    """
    x1, x2 = sp.symbols("x1 x2")
    r = sp.Rational(1, m)
    y = x2 * (1 - x1) ** (-r)
    expr = (
        -(2 + r) * sp.log(1 - x1)
        - 2 * sp.log(sp.pi)
        - 3 * sp.log(1 - y)
        + sp.log((1 + r) + (r - 1) * y)
    )
    return expr, (x1, x2)


class SeriesKernel(KernelModel):
    """Truncated orthonormal-monomial series ``sum_{|alpha|<=d} (z conj w)^alpha / M(alpha)``."""

    mode = "series"
    trust_margin = SERIES_TRUST_MARGIN

    def __init__(self, domain, degree, moments, source):
        super().__init__(domain)
        self.degree = int(degree)
        self.exponents = exponents_up_to(self.n, self.degree)
        self.moments = np.array([moments[tuple(a)] for a in self.exponents], dtype=float)
        if np.any(self.moments <= 0):
            raise ValueError("moments must be positive")
        self.coeffs = 1.0 / self.moments
        self.provenance = {"degree": self.degree, "moment_source": source}

    def _log_jet(self, Z, V, order):
        X = Z * V
        mj = monomial_jet(X, self.exponents, order)
        Fj = [np.tensordot(T, self.coeffs, axes=([1], [0])) for T in mj]
        G = log_jet_from_values(*Fj) if order >= 1 else [np.log(Fj[0])]
        return reinhardt_lift(G, Z, V, order)

    def section(self, w):
        """Coefficients of ``K(., w)`` in the monomial basis, as a dict ``alpha -> c``."""
        w = np.asarray(w, dtype=complex).reshape(self.n)
        vals = np.prod(np.conj(w)[None, :] ** self.exponents, axis=1) * self.coeffs
        return {tuple(a): complex(c) for a, c in zip(self.exponents, vals)}


class GramKernel(KernelModel):
    """Kernel of the span of shifted monomials, orthonormalized by a quadrature Gram matrix.

    ``K(z, w) = phi(z)^T A conj(phi(w))`` with ``A = (G^-1)^T``. It is the
    Bergman kernel of a finite-dimensional subspace, used for domains without
    monomial orthogonality (intersections).
    """

    mode = "gram"
    trust_margin = SERIES_TRUST_MARGIN

    def __init__(self, domain, degree=8, n_nodes=2 ** 18, seed=0, rcond=1e-13):
        super().__init__(domain)
        if not domain.bounded:
            raise UnsupportedIntersection(f"{domain!r} is unbounded; no Gram kernel")
        lo, hi = domain.bounding_box()
        c = 0.5 * (lo + hi)
        self.center = c[0::2] + 1j * c[1::2]
        self.scale = float(np.max(hi - lo) / 2.0)
        self.degree = int(degree)
        self.exponents = exponents_up_to(self.n, self.degree)
        pts, vol = qmc_points(domain, n_nodes, seed)
        Phi = monomial_jet((pts - self.center) / self.scale, self.exponents, 0)[0]
        G = vol / pts.shape[0] * (Phi.T @ np.conj(Phi))
        G = 0.5 * (G + G.conj().T)
        evals, evecs = np.linalg.eigh(G)
        keep = evals > rcond * evals.max()
        Ginv = (evecs[:, keep] / evals[keep]) @ evecs[:, keep].conj().T
        self.A = Ginv.T
        self.provenance = {"degree": self.degree, "nodes": int(n_nodes), "seed": int(seed), "rank": int(keep.sum())}

    def _log_jet(self, Z, V, order):
        n = self.n
        s = self.scale
        Pz = monomial_jet((Z - self.center) / s, self.exponents, order)
        Pv = monomial_jet((V - np.conj(self.center)) / s, self.exponents, order)
        A = self.A
        # contract with A: right side vectors
        Rv = [np.einsum("ab,nb...->na...", A, T) for T in Pv]
        K = np.einsum("na,na->n", Pz[0], Rv[0])
        out = [K]
        if order >= 1:
            D1 = np.concatenate(
                [np.einsum("nai,na->ni", Pz[1], Rv[0]), np.einsum("na,nai->ni", Pz[0], Rv[1])], axis=1
            ) / s
            out.append(D1)
        if order >= 2:
            D2 = np.empty((Z.shape[0], 2 * n, 2 * n), dtype=complex)
            D2[:, :n, :n] = np.einsum("naij,na->nij", Pz[2], Rv[0])
            D2[:, :n, n:] = np.einsum("nai,naj->nij", Pz[1], Rv[1])
            D2[:, n:, :n] = np.swapaxes(D2[:, :n, n:], 1, 2)
            D2[:, n:, n:] = np.einsum("na,naij->nij", Pz[0], Rv[2])
            out.append(D2 / s ** 2)
        if order >= 3:
            D3 = np.empty((Z.shape[0],) + (2 * n,) * 3, dtype=complex)
            zzz = np.einsum("naijk,na->nijk", Pz[3], Rv[0])
            zzv = np.einsum("naij,nak->nijk", Pz[2], Rv[1])
            zvv = np.einsum("nai,najk->nijk", Pz[1], Rv[2])
            vvv = np.einsum("na,naijk->nijk", Pz[0], Rv[3])
            zs, vs = slice(0, n), slice(n, 2 * n)
            D3[:, zs, zs, zs] = zzz
            D3[:, zs, zs, vs] = zzv
            D3[:, zs, vs, zs] = np.transpose(zzv, (0, 1, 3, 2))
            D3[:, vs, zs, zs] = np.transpose(zzv, (0, 3, 1, 2))
            D3[:, zs, vs, vs] = zvv
            D3[:, vs, zs, vs] = np.transpose(zvv, (0, 2, 1, 3))
            D3[:, vs, vs, zs] = np.transpose(zvv, (0, 2, 3, 1))
            D3[:, vs, vs, vs] = vvv
            out.append(D3 / s ** 3)
        if order == 0:
            return [np.log(K)]
        return log_jet_from_values(*out)


class AffinePullback(KernelModel):
    """Kernel of ``M(base) + c`` from the base kernel by the transformation rule.

    With ``L = M^-1``: ``K'(z, w) = |det L|^2 K(L(z - c), L(w - c))``.
    """

    def __init__(self, domain, base_model, M, c):
        super().__init__(domain)
        self.base = base_model
        self.L = np.linalg.inv(np.asarray(M, dtype=complex))
        self.c = np.asarray(c, dtype=complex)
        self.log_det2 = float(2.0 * np.log(abs(np.linalg.det(self.L))))
        n = self.n
        T = np.zeros((2 * n, 2 * n), dtype=complex)
        T[:n, :n] = self.L
        T[n:, n:] = np.conj(self.L)
        self.T = T
        self.mode = base_model.mode
        self.trust_margin = 0.0
        self.provenance = dict(base_model.provenance, pullback="affine")

    def trusted(self, z):
        Z, single = as_points(z, self.n)
        ok = self.base.trusted((Z - self.c) @ self.L.T)
        return bool(np.atleast_1d(ok)[0]) if single else ok

    def _log_jet(self, Z, V, order):
        Zb = (Z - self.c) @ self.L.T
        Vb = (V - np.conj(self.c)) @ np.conj(self.L).T
        jet = self.base._log_jet(Zb, Vb, order)
        T = self.T
        out = [jet[0] + self.log_det2]
        if order >= 1:
            out.append(jet[1] @ T)
        if order >= 2:
            out.append(np.einsum("nab,ai,bj->nij", jet[2], T, T))
        if order >= 3:
            out.append(np.einsum("nabc,ai,bj,ck->nijk", jet[3], T, T, T))
        return out


class ChartPullbackKernel(KernelModel):
    """Kernel of a charted domain from its bounded representative (values only).

    ``K(z, w) = J(z) K_B(phi(z), phi(w)) conj(J(w))``. Used as an independent
    check on the closed forms registered for unbounded models.
    """

    def __init__(self, chart, target_model):
        super().__init__(chart.source)
        self.chart = chart
        self.target_model = target_model

    def _log_jet(self, Z, V, order):
        if order > 0:
            raise NotImplementedError("chart pull-back provides kernel values only")
        W = np.conj(V)
        jz = self.chart.jacobian_det(Z)
        jw = self.chart.jacobian_det(W)
        K = self.target_model.log_jet(self.chart.forward(Z), self.chart.forward(W), order=0)[0]
        return [K + np.log(jz) + np.log(np.conj(jw))]


# ---------------------------------------------------------------------------
# moments and quadrature
# ---------------------------------------------------------------------------


def qmc_points(domain, n_nodes=DEFAULT_NODES, seed=0):
    """Scrambled Sobol nodes in the bounding box that fall inside ``domain``.

    Returns ``(points, box_volume)``; integrals are ``box_volume * mean``
    over all ``n_nodes`` nodes (rejected nodes contribute zero).
    """
    if not domain.bounded:
        raise QuadratureUnavailable(f"{domain!r} is unbounded")
    lo, hi = domain.bounding_box()
    u = sobol(n_nodes, 2 * domain.n, seed=seed)
    x = lo + u * (hi - lo)
    z = x[:, 0::2] + 1j * x[:, 1::2]
    inside = domain.contains(z)
    pts = z[inside]
    vol = float(np.prod(hi - lo))
    # rescale so that mean over kept points times vol' equals the box integral
    return pts, vol * pts.shape[0] / n_nodes


def qmc_moments(domain, exponents, n_nodes=DEFAULT_NODES, seed=0, chunk=2 ** 16):
    """``int_D |z^alpha|^2`` by box quasi Monte Carlo with membership rejection."""
    if not domain.bounded:
        raise QuadratureUnavailable(f"{domain!r} is unbounded")
    E = np.asarray(exponents, dtype=int).reshape(-1, domain.n)
    lo, hi = domain.bounding_box()
    u = sobol(n_nodes, 2 * domain.n, seed=seed)
    acc = np.zeros(E.shape[0])
    for start in range(0, n_nodes, chunk):
        x = lo + u[start:start + chunk] * (hi - lo)
        z = x[:, 0::2] + 1j * x[:, 1::2]
        inside = domain.contains(z)
        a = np.abs(z[inside])
        acc += np.sum(np.prod(a[:, None, :] ** (2 * E[None, :, :]), axis=2), axis=0)
    return acc * float(np.prod(hi - lo)) / n_nodes


def polar_moments(domain, exponents, n_nodes=10 ** 6):
    """``int_D |z^alpha|^2`` on a complex ellipsoid by a radial Gauss product rule.

    The domain is Reinhardt, so the angles integrate to ``(2 pi)^n`` and the
    remaining integral runs over ``{r >= 0 : sum_k a_k r_k^(2 p_k) < 1}``.
    Each radius ``r_k`` gets about ``n_nodes^(1/n)`` Gauss-Legendre nodes on
    ``[0, R_k]``, with ``R_k`` the exit point given ``r_1, ..., r_(k-1)``.
    """
    a, p = np.asarray(domain.coeffs), np.asarray(domain.powers)
    n = domain.n
    E = np.asarray(exponents, dtype=int).reshape(-1, n)
    m = max(2, int(round(n_nodes ** (1.0 / n))))
    x, wx = np.polynomial.legendre.leggauss(m)
    x, wx = 0.5 * (x + 1.0), 0.5 * wx
    w = np.ones(1)
    used = np.zeros(1)
    radii = []
    for k in range(n):
        R = (np.maximum(1.0 - used, 0.0) / a[k]) ** (1.0 / (2 * p[k]))
        r = (R[:, None] * x[None, :]).ravel()
        w = (w[:, None] * R[:, None] * wx[None, :]).ravel()
        used = np.repeat(used, m) + a[k] * r ** (2 * p[k])
        radii = [np.repeat(q, m) for q in radii] + [r]
    Rr = np.stack(radii, axis=1)
    vals = np.array([np.sum(w * np.prod(Rr ** (2 * e + 1), axis=1)) for e in E])
    return (2.0 * np.pi) ** n * vals


class MomentTable:
    """Map ``alpha -> M(alpha)`` with a provenance tag per entry."""

    def __init__(self, values=None, provenance=None):
        self.values = dict(values or {})
        self.provenance = dict(provenance or {})

    def __getitem__(self, alpha):
        return self.values[tuple(int(a) for a in alpha)]

    def __contains__(self, alpha):
        return tuple(int(a) for a in alpha) in self.values

    def __len__(self):
        return len(self.values)

    def add(self, alpha, value, tag):
        if not value > 0:
            raise ValueError(f"moment for {alpha} must be positive, got {value}")
        key = tuple(int(a) for a in alpha)
        self.values[key] = float(value)
        self.provenance[key] = tag

    def save(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["exponent", "moment", "provenance"])
            for key in sorted(self.values):
                w.writerow([" ".join(map(str, key)), repr(self.values[key]), self.provenance[key]])

    @classmethod
    def load(cls, path):
        table = cls()
        with open(path, newline="") as fh:
            rows = csv.reader(fh)
            next(rows)
            for exp, val, tag in rows:
                table.add(tuple(int(t) for t in exp.split()), float(val), tag)
        return table


def moment_table(domain, exponents, source="closed_form", n_nodes=DEFAULT_NODES, seed=0, cache=True):
    """Moments for ``exponents`` from the closed formula or from cached/fresh quadrature."""
    table = MomentTable()
    E = [tuple(int(a) for a in e) for e in np.asarray(exponents).reshape(-1, domain.n)]
    if source == "closed_form":
        if not hasattr(domain, "moment"):
            raise UnsupportedDomain(f"no moment formula for {domain!r}")
        for e in E:
            table.add(e, domain.moment(e), "closed_form")
        return table
    if source != "quadrature":
        raise ValueError(f"unknown moment source {source!r}")
    tag = f"qmc:{n_nodes}:{seed}"
    path = None
    cache_dir = os.environ.get(CACHE_ENV) if cache else None
    if cache_dir:
        safe = domain.ident.replace(":", "_").replace(",", "-")
        path = os.path.join(cache_dir, f"moments_{safe}_{n_nodes}_{seed}.csv")
        if os.path.exists(path):
            cached = MomentTable.load(path)
            if all(e in cached for e in E):
                return cached
    vals = qmc_moments(domain, E, n_nodes, seed)
    for e, v in zip(E, vals):
        table.add(e, v, tag)
    if path:
        os.makedirs(cache_dir, exist_ok=True)
        table.save(path)
    return table


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def _ellipsoid_kernel(domain):
    a = np.asarray(domain.coeffs)
    n = domain.n
    C = np.prod(a) * factorial(n) / np.pi ** n
    return SesquilinearKernel(domain, C, [(1.0, np.zeros(n), np.zeros(n), -np.diag(a), n + 1)])


def _polydisc_kernel(domain):
    n = domain.n
    factors = []
    for k in range(n):
        H = np.zeros((n, n))
        H[k, k] = -1.0
        factors.append((1.0, np.zeros(n), np.zeros(n), H, 2))
    return SesquilinearKernel(domain, np.pi ** (-n), factors)


def _siegel_kernel(domain):
    n = domain.n
    a = np.zeros(n)
    a[0] = -1.0
    H = np.zeros((n, n))
    H[np.arange(1, n), np.arange(1, n)] = -1.0
    return SesquilinearKernel(domain, factorial(n) / np.pi ** n, [(0.0, a, a, H, n + 1)])


def _polyhalfplane_kernel(domain):
    n = domain.n
    factors = []
    for k in range(n):
        a = np.zeros(n)
        a[k] = -1.0
        factors.append((0.0, a, a, np.zeros((n, n)), 2))
    return SesquilinearKernel(domain, np.pi ** (-n), factors)


def build_kernel(domain, degree=None, mode="auto", moments="closed_form", n_nodes=DEFAULT_NODES, seed=0,
                 gram_degree=8):
    """Evaluable Bergman kernel for a catalogued domain.

    Parameters
    ----------
    domain : Domain
    degree : int, optional
        Degree cap of a series model (default 40).
    mode : {"auto", "closed_form", "series", "gram"}
        ``auto`` prefers a closed form, then a series, then (for
        intersections) a Gram kernel.
    moments : {"closed_form", "quadrature"}
        Source of the series normalization moments.
    """
    base, M, c = base_of(domain)
    if isinstance(base, EuclideanBall):
        c = M @ base._c + c
        M = M * base.radius
        base = Ball(base.n)
    if base is not domain:
        inner = build_kernel(base, degree, mode, moments, n_nodes, seed, gram_degree)
        if np.allclose(M, np.eye(domain.n)) and np.allclose(c, 0):
            return inner
        return AffinePullback(domain, inner, M, c)

    reinhardt = isinstance(domain, (ComplexEllipsoid, Polydisc))
    if mode == "series" or (mode == "auto" and isinstance(domain, ComplexEllipsoid) and not _has_closed_form(domain)):
        if not reinhardt:
            raise UnsupportedDomain(f"series kernels need a complete Reinhardt domain, got {domain!r}")
        d = DEFAULT_DEGREE if degree is None else int(degree)
        E = exponents_up_to(domain.n, d)
        table = moment_table(domain, E, moments, n_nodes, seed)
        tag = "closed_form_beta" if moments == "closed_form" else f"quadrature:{n_nodes}:{seed}"
        return SeriesKernel(domain, d, table, tag)
    if mode == "gram":
        return GramKernel(domain, gram_degree, seed=seed)
    if isinstance(domain, ComplexEllipsoid) and all(p == 1 for p in domain.powers):
        return _ellipsoid_kernel(domain)
    if isinstance(domain, Egg) and domain.n == 2:
        expr, syms = _egg_log_f(domain.m)
        return ReinhardtLogKernel(domain, expr, syms)
    if isinstance(domain, Polydisc):
        return _polydisc_kernel(domain)
    if isinstance(domain, SiegelHalfSpace):
        return _siegel_kernel(domain)
    if isinstance(domain, PolyHalfPlane):
        return _polyhalfplane_kernel(domain)
    if isinstance(domain, Intersection):
        if mode in ("auto",) and domain.bounded:
            return GramKernel(domain, gram_degree, seed=seed)
        raise UnsupportedIntersection(f"no kernel for {domain!r}")
    raise UnsupportedDomain(f"no kernel available for {domain!r}")


def _has_closed_form(domain):
    return all(p == 1 for p in domain.powers) or (isinstance(domain, Egg) and domain.n == 2)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def kernel_eval(model, z, w=None):
    """``K(z, w)``; ``w`` defaults to ``z``. Raises ``OutsideDomain`` off the domain."""
    model.check_points(z, w)
    val = model.eval(z, w)
    if w is None:
        val = np.real(val)
    return val


def kernel_derivatives(model, z, w=None, order=3):
    """Jet ``[K, dK, d2K, d3K]`` in the variables ``(z_1..z_n, conj(w)_1..conj(w)_n)``."""
    model.check_points(z, w)
    return model.jet(z, w, order)


def mixed_partial(model, z, w, a, b):
    """``d^a/dz^a d^b/dconj(w)^b K(z, w)`` for multi-indices with ``|a| + |b| <= 3``."""
    a = tuple(int(t) for t in a)
    b = tuple(int(t) for t in b)
    n = model.n
    idx = [k for k in range(n) for _ in range(a[k])] + [n + k for k in range(n) for _ in range(b[k])]
    if len(idx) > 3:
        raise ValueError("derivatives are available up to total order 3")
    jet = kernel_derivatives(model, z, w, order=len(idx))
    return jet[len(idx)][tuple(idx)] if idx else jet[0]


def poly_eval(coeffs, z):
    """Evaluate ``sum_alpha c_alpha z^alpha`` given as a dict."""
    Z = np.atleast_2d(np.asarray(z, dtype=complex))
    out = np.zeros(Z.shape[0], dtype=complex)
    for alpha, c in coeffs.items():
        out += c * np.prod(Z ** np.asarray(alpha), axis=1)
    return out


def _norm2_moments(domain, coeffs):
    return float(sum(abs(c) ** 2 * domain.moment(alpha) for alpha, c in coeffs.items()))


def reproducing_check(model, coeffs, w, method="auto", n_nodes=DEFAULT_NODES, seed=0):
    """Residual ``|int f conj(K(., w)) - f(w)|`` for a polynomial ``f``.

    ``method="moments"`` integrates exactly with the domain's moment formula
    (series models on Reinhardt domains); ``"qmc"`` uses box quasi Monte Carlo.
    """
    w = np.asarray(w, dtype=complex).reshape(model.n)
    fw = poly_eval(coeffs, w)[0]
    if method == "auto":
        method = "moments" if isinstance(model, SeriesKernel) else "qmc"
    if method == "moments":
        if not isinstance(model, SeriesKernel) or not hasattr(model.domain, "moment"):
            raise QuadratureUnavailable("moment integration needs a series model on a Reinhardt domain")
        section = model.section(w)
        # <f, K(., w)> = sum_alpha c_alpha conj(s_alpha) M(alpha)
        val = sum(c * np.conj(section.get(tuple(a), 0.0)) * model.domain.moment(a) for a, c in coeffs.items())
        return float(abs(val - fw))
    if method != "qmc":
        raise ValueError(f"unknown method {method!r}")
    pts, vol = qmc_points(model.domain, n_nodes, seed)
    f = poly_eval(coeffs, pts)
    Kzw = model.eval(pts, np.broadcast_to(w, pts.shape))
    val = vol * np.mean(f * np.conj(Kzw))
    return float(abs(val - fw))


def extremal_check(model, w, trials, tol=1e-10):
    """Variational characterization at ``w``.

    Returns ``(ok, minimum, values)`` where ``minimum = int |K(., w) / K(w, w)|^2``
    and ``values`` are ``int |g|^2`` for the trial polynomials (each normalized
    to ``g(w) = 1``). ``ok`` is true iff no trial beats the kernel section.
    """
    w = np.asarray(w, dtype=complex).reshape(model.n)
    Kww = float(np.real(kernel_eval(model, w)))
    dom = model.domain
    if isinstance(model, SeriesKernel) and hasattr(dom, "moment"):
        section = {a: c / Kww for a, c in model.section(w).items()}
        minimum = _norm2_moments(dom, section)

        def norm2(g):
            return _norm2_moments(dom, g)
    elif hasattr(dom, "moment"):
        minimum = 1.0 / Kww

        def norm2(g):
            return _norm2_moments(dom, g)
    else:
        raise QuadratureUnavailable("extremal check needs a moment formula")
    values = []
    for g in trials:
        g = dict(g)
        gw = poly_eval(g, w)[0]
        g = {a: c / gw for a, c in g.items()}
        values.append(norm2(g))
    ok = all(v >= minimum - tol * max(1.0, minimum) for v in values) and abs(minimum - 1.0 / Kww) <= tol * max(1.0, minimum) + 1e-12
    return ok, minimum, values
