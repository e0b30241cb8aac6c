"""Catalogue of bounded and model domains in C^n.

Every domain is an immutable value described by defining functions
``rho_1, ..., rho_l`` with ``D = {rho_i < 0 for all i}``. Points are complex
arrays of shape ``(n,)`` or ``(N, n)``.
"""
from math import factorial

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .coords import as_points, real_gradient, real_linear, to_complex, to_real
from .errors import NoChart, NotInDomain, UnsupportedDomain
from .sampling import sphere_directions

N_BOUNDARY_RAYS = 4096


class Domain:
    """Base class. Subclasses set ``n``, ``bounded`` and implement ``_rho``/``_grad``."""

    kind = "domain"
    n = 1
    bounded = True
    n_defining = 1

    # -- identity -----------------------------------------------------------
    @property
    def key(self):
        raise NotImplementedError

    @property
    def ident(self):
        return str(self.key)

    def __eq__(self, other):
        return isinstance(other, Domain) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"{type(self).__name__}<{self.ident}>"

    # -- defining functions -------------------------------------------------
    def _rho(self, Z):
        raise NotImplementedError

    def _grad(self, Z):
        raise NotImplementedError

    def defining(self, z):
        """Values of the defining functions, shape ``(l,)`` or ``(N, l)``."""
        Z, single = as_points(z, self.n)
        out = self._rho(Z)
        return out[0] if single else out

    def defining_gradient(self, z):
        """Holomorphic gradients ``d rho_i / d z_k``, shape ``(l, n)`` or ``(N, l, n)``."""
        Z, single = as_points(z, self.n)
        out = self._grad(Z)
        return out[0] if single else out

    def contains(self, z):
        Z, single = as_points(z, self.n)
        with np.errstate(invalid="ignore", over="ignore"):
            inside = np.all(self._rho(Z) < 0.0, axis=1) & np.all(np.isfinite(Z), axis=1)
        return bool(inside[0]) if single else inside

    def bounding_box(self):
        """``(lo, hi)`` in interleaved real coordinates; only for bounded domains."""
        raise ValueError(f"{self!r} is unbounded")

    # -- boundary distance --------------------------------------------------
    def _exact_distance(self, Z):
        return None

    def approx_boundary_distance(self, z):
        """Cheap first order estimate ``-rho / |grad rho|``; exact where a formula exists."""
        Z, single = as_points(z, self.n)
        exact = self._exact_distance(Z)
        if exact is None:
            rho = self._rho(Z)
            g = np.linalg.norm(self._grad(Z), axis=2) * 2.0
            with np.errstate(divide="ignore", invalid="ignore"):
                est = np.where(g > 0, -rho / g, np.inf)
            exact = np.min(est, axis=1)
        return float(exact[0]) if single else exact

    def boundary_distance(self, z, n_rays=N_BOUNDARY_RAYS):
        """Euclidean distance from interior points to the boundary.

        Exact for balls, polydiscs and half-spaces. Otherwise the nearest of
        ``n_rays`` boundary crossings along rays from ``z`` is refined by a
        constrained nearest-point solve.
        """
        Z, single = as_points(z, self.n)
        if not np.all(self.contains(Z)):
            raise NotInDomain(f"point outside {self!r}")
        exact = self._exact_distance(Z)
        if exact is None:
            exact = np.array([self._numeric_distance(zz, n_rays) for zz in Z])
        return float(exact[0]) if single else exact

    def _numeric_distance(self, z, n_rays):
        x0 = to_real(z)
        dirs = sphere_directions(n_rays, 2 * self.n, seed=7)
        guess = self.approx_boundary_distance(z)
        if not np.isfinite(guess) or guess <= 0:
            guess = 1.0
        best = np.inf
        for i in range(self.n_defining):
            best = min(best, self._distance_to_level(x0, i, dirs, guess))
        return best

    def _rho_i_real(self, x, i):
        return self._rho(to_complex(np.atleast_2d(x)))[:, i]

    def _distance_to_level(self, x0, i, dirs, guess):
        """Distance from ``x0`` to ``{rho_i >= 0}``."""
        n_dirs = dirs.shape[0]
        lo = np.zeros(n_dirs)
        hi = np.full(n_dirs, 0.25 * guess)
        cap = 1e6 * max(guess, 1.0)
        out = self._rho_i_real(x0 + hi[:, None] * dirs, i) >= 0
        for _ in range(80):
            grow = ~out & (hi < cap)
            if not np.any(grow):
                break
            lo[grow] = hi[grow]
            hi[grow] *= 2.0
            out[grow] = self._rho_i_real(x0 + hi[grow, None] * dirs[grow], i) >= 0
        if not np.any(out):
            return np.inf
        lo, hi, dirs = lo[out], hi[out], dirs[out]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            o = self._rho_i_real(x0 + mid[:, None] * dirs, i) >= 0
            hi = np.where(o, mid, hi)
            lo = np.where(o, lo, mid)
        k = int(np.argmin(hi))
        best = hi[k]
        start = x0 + hi[k] * dirs[k]

        def rho_real(x):
            return float(self._rho_i_real(x, i)[0])

        def rho_jac(x):
            return real_gradient(self._grad(to_complex(x[None, :]))[0, i])

        res = minimize(
            lambda x: float(np.sum((x - x0) ** 2)),
            start,
            jac=lambda x: 2.0 * (x - x0),
            constraints=[{"type": "eq", "fun": rho_real, "jac": rho_jac}],
            method="SLSQP",
            options={"ftol": 1e-16, "maxiter": 200},
        )
        if res.success or res.status in (0, 8, 9):
            x = res.x
            gn = np.linalg.norm(rho_jac(x))
            if gn > 0 and abs(rho_real(x)) / gn < 1e-11:
                best = min(best, float(np.linalg.norm(x - x0)))
        return best

    # -- geometry helpers ---------------------------------------------------
    def outward_normal(self, p0, which=None):
        """Unit outward normal (as a complex vector) at a smooth boundary point."""
        rho = self.defining(p0)
        i = int(np.argmax(rho)) if which is None else which
        d = self.defining_gradient(p0)[i]
        nu = np.conj(d)
        return nu / np.linalg.norm(nu)

    def levi_form(self, p, which=0, h=1e-5):
        """``d^2 rho / dz_j dzbar_k`` by central differences of the analytic gradient."""
        p = np.asarray(p, dtype=complex)
        n = self.n
        L = np.empty((n, n), dtype=complex)
        P = np.empty((n, n), dtype=complex)
        for k in range(n):
            e = np.zeros(n, dtype=complex)
            e[k] = h
            gx = (self.defining_gradient(p + e)[which] - self.defining_gradient(p - e)[which]) / (2 * h)
            gy = (self.defining_gradient(p + 1j * e)[which] - self.defining_gradient(p - 1j * e)[which]) / (2 * h)
            # d/dzbar_k = (d/dx + i d/dy)/2 ; d/dz_k = (d/dx - i d/dy)/2
            L[:, k] = 0.5 * (gx + 1j * gy)
            P[:, k] = 0.5 * (gx - 1j * gy)
        return L, P


# ---------------------------------------------------------------------------
# Reinhardt domains {sum a_k |z_k|^(2 p_k) < 1}
# ---------------------------------------------------------------------------


class ComplexEllipsoid(Domain):
    """``{z : sum_k a_k |z_k|^(2 p_k) < 1}`` with positive ``a_k`` and integer ``p_k >= 1``."""

    kind = "complex_ellipsoid"
    reinhardt = True

    def __init__(self, coeffs, powers):
        self.coeffs = tuple(float(a) for a in coeffs)
        self.powers = tuple(int(p) for p in powers)
        if len(self.coeffs) != len(self.powers):
            raise ValueError("coeffs and powers must have equal length")
        if min(self.coeffs) <= 0 or min(self.powers) < 1:
            raise ValueError("coefficients must be positive and powers >= 1")
        self.n = len(self.coeffs)
        self._a = np.array(self.coeffs)
        self._p = np.array(self.powers)

    @property
    def key(self):
        return ("complex_ellipsoid", self.coeffs, self.powers)

    @property
    def ident(self):
        a = ",".join(f"{c:g}" for c in self.coeffs)
        p = ",".join(str(q) for q in self.powers)
        return f"cellipsoid:{a}:{p}"

    def _rho(self, Z):
        return (np.sum(self._a * np.abs(Z) ** (2 * self._p), axis=1) - 1.0)[:, None]

    def _grad(self, Z):
        g = self._a * self._p * np.abs(Z) ** (2 * (self._p - 1)) * np.conj(Z)
        return g[:, None, :]

    def radii(self):
        return self._a ** (-1.0 / (2 * self._p))

    def bounding_box(self):
        r = np.repeat(self.radii(), 2)
        return -r, r

    def _exact_distance(self, Z):
        if np.all(self._p == 1) and np.all(self._a == self._a[0]):
            return 1.0 / np.sqrt(self._a[0]) - np.linalg.norm(Z, axis=1)
        return None

    def moment(self, alpha):
        """``int_D |z^alpha|^2 dlambda`` from the Dirichlet integral."""
        alpha = np.asarray(alpha, dtype=float)
        beta = (alpha + 1.0) / self._p
        log_m = (
            self.n * np.log(np.pi)
            + np.sum(gammaln(beta) - np.log(self._p) - beta * np.log(self._a))
            - gammaln(np.sum(beta) + 1.0)
        )
        return float(np.exp(log_m))

    def volume(self):
        return self.moment(np.zeros(self.n))


class Ball(ComplexEllipsoid):
    kind = "ball"

    def __init__(self, n=1):
        super().__init__((1.0,) * n, (1,) * n)

    @property
    def ident(self):
        return "disc" if self.n == 1 else f"ball:{self.n}"


def Disc():
    return Ball(1)


class Ellipsoid(ComplexEllipsoid):
    """``{sum a_k |z_k|^2 < 1}``: an affine image of the ball."""

    kind = "ellipsoid"

    def __init__(self, coeffs):
        super().__init__(coeffs, (1,) * len(tuple(coeffs)))

    @property
    def ident(self):
        return "ellipsoid:" + ",".join(f"{c:g}" for c in self.coeffs)


class Egg(ComplexEllipsoid):
    """``{|z_1|^2 + ... + |z_{n-1}|^2 + |z_n|^(2m) < 1}``."""

    kind = "egg"

    def __init__(self, n=2, m=2):
        self.m = int(m)
        super().__init__((1.0,) * n, (1,) * (n - 1) + (self.m,))

    @property
    def ident(self):
        return f"egg:{self.n}:{2 * self.m}"


class Polydisc(Domain):
    kind = "polydisc"
    reinhardt = True

    def __init__(self, n=2):
        self.n = int(n)
        self.n_defining = self.n

    @property
    def key(self):
        return ("polydisc", self.n)

    @property
    def ident(self):
        return "bidisc" if self.n == 2 else f"polydisc:{self.n}"

    def _rho(self, Z):
        return np.abs(Z) ** 2 - 1.0

    def _grad(self, Z):
        N, n = Z.shape
        g = np.zeros((N, n, n), dtype=complex)
        idx = np.arange(n)
        g[:, idx, idx] = np.conj(Z)
        return g

    def bounding_box(self):
        return -np.ones(2 * self.n), np.ones(2 * self.n)

    def _exact_distance(self, Z):
        return np.min(1.0 - np.abs(Z), axis=1)

    def moment(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        return float(np.prod(np.pi / (alpha + 1.0)))

    def volume(self):
        return np.pi ** self.n


# ---------------------------------------------------------------------------
# Unbounded models
# ---------------------------------------------------------------------------


class SiegelHalfSpace(Domain):
    """``{2 Re z_1 + |z_2|^2 + ... + |z_n|^2 < 0}``, the unbounded ball."""

    kind = "siegel"
    bounded = False

    def __init__(self, n=2):
        self.n = int(n)

    @property
    def key(self):
        return ("siegel", self.n)

    @property
    def ident(self):
        return "halfplane" if self.n == 1 else f"siegel:{self.n}"

    def _rho(self, Z):
        return (2.0 * Z[:, 0].real + np.sum(np.abs(Z[:, 1:]) ** 2, axis=1))[:, None]

    def _grad(self, Z):
        g = np.conj(Z).astype(complex)
        g[:, 0] = 1.0
        return g[:, None, :]

    def _exact_distance(self, Z):
        if self.n == 1:
            return -Z[:, 0].real
        return None


def HalfPlane():
    """``{Re z < 0}`` in C."""
    return SiegelHalfSpace(1)


class PolyHalfPlane(Domain):
    """``{Re z_k < 0 for all k}``: the corner limit of the polydisc."""

    kind = "polyhalfplane"
    bounded = False

    def __init__(self, n=2):
        self.n = int(n)
        self.n_defining = self.n

    @property
    def key(self):
        return ("polyhalfplane", self.n)

    @property
    def ident(self):
        return f"polyhalfplane:{self.n}"

    def _rho(self, Z):
        return 2.0 * Z.real

    def _grad(self, Z):
        N, n = Z.shape
        g = np.zeros((N, n, n), dtype=complex)
        g[:, np.arange(n), np.arange(n)] = 1.0
        return g

    def _exact_distance(self, Z):
        return np.min(-Z.real, axis=1)


class ModelPolynomial(Domain):
    """``{2 Re z_1 + |z_2|^2 + ... + |z_{n-1}|^2 + P(z_n) < 0}``.

    ``terms`` maps exponent pairs ``(a, b)`` to coefficients of
    ``z_n^a conj(z_n)^b``; the polynomial must be real valued.
    """

    kind = "model"
    bounded = False

    def __init__(self, n, terms):
        self.n = int(n)
        if self.n < 2:
            raise ValueError("model polynomial domains need n >= 2")
        items = tuple(sorted((tuple(map(int, k)), complex(v)) for k, v in dict(terms).items()))
        lookup = dict(items)
        for (a, b), c in items:
            if abs(lookup.get((b, a), 0.0) - np.conj(c)) > 1e-14:
                raise ValueError("model polynomial is not real valued")
        self.terms = items

    @classmethod
    def homogeneous(cls, n, two_m, coeff=1.0):
        m = two_m // 2
        return cls(n, {(m, m): coeff})

    @property
    def key(self):
        return ("model", self.n, self.terms)

    @property
    def ident(self):
        if len(self.terms) == 1 and self.terms[0][0][0] == self.terms[0][0][1] and self.terms[0][1] == 1:
            return f"model:{self.n}:{2 * self.terms[0][0][0]}"
        return f"model:{self.n}:" + ";".join(f"{a},{b}={c.real:g}{c.imag:+g}j" for (a, b), c in self.terms)

    def _P(self, w):
        out = np.zeros(w.shape, dtype=complex)
        for (a, b), c in self.terms:
            out += c * w ** a * np.conj(w) ** b
        return out.real

    def _rho(self, Z):
        mid = np.sum(np.abs(Z[:, 1:-1]) ** 2, axis=1)
        return (2.0 * Z[:, 0].real + mid + self._P(Z[:, -1]))[:, None]

    def _grad(self, Z):
        g = np.conj(Z).astype(complex)
        g[:, 0] = 1.0
        w = Z[:, -1]
        d = np.zeros(w.shape, dtype=complex)
        for (a, b), c in self.terms:
            if a > 0:
                d += c * a * w ** (a - 1) * np.conj(w) ** b
        g[:, -1] = d
        return g[:, None, :]


# ---------------------------------------------------------------------------
# Combinators
# ---------------------------------------------------------------------------


class Intersection(Domain):
    kind = "intersection"

    def __init__(self, parts):
        parts = tuple(parts)
        if not parts:
            raise ValueError("empty intersection")
        n = parts[0].n
        if any(p.n != n for p in parts):
            raise ValueError("dimension mismatch in intersection")
        self.parts = parts
        self.n = n
        self.n_defining = sum(p.n_defining for p in parts)
        self.bounded = any(p.bounded for p in parts)

    @property
    def key(self):
        return ("intersection", tuple(p.key for p in self.parts))

    @property
    def ident(self):
        return "(" + "&".join(p.ident for p in self.parts) + ")"

    def _rho(self, Z):
        return np.concatenate([p._rho(Z) for p in self.parts], axis=1)

    def _grad(self, Z):
        return np.concatenate([p._grad(Z) for p in self.parts], axis=1)

    def bounding_box(self):
        boxes = [p.bounding_box() for p in self.parts if p.bounded]
        lo = np.max([b[0] for b in boxes], axis=0)
        hi = np.min([b[1] for b in boxes], axis=0)
        return lo, hi

    def _exact_distance(self, Z):
        ds = [p._exact_distance(Z) for p in self.parts]
        if any(d is None for d in ds):
            return None
        return np.min(ds, axis=0)

    def _numeric_distance(self, z, n_rays):
        Z = z[None, :]
        best = np.inf
        for p in self.parts:
            d = p._exact_distance(Z)
            best = min(best, float(d[0]) if d is not None else p._numeric_distance(z, n_rays))
        return best


class EuclideanBall(Domain):
    """Round ball ``B(center, radius)``; used as a localizing neighbourhood."""

    kind = "euclidean_ball"

    def __init__(self, center, radius):
        self.center = tuple(complex(c) for c in np.atleast_1d(center))
        self.radius = float(radius)
        self.n = len(self.center)
        self._c = np.array(self.center)

    @property
    def key(self):
        return ("euclidean_ball", self.center, self.radius)

    @property
    def ident(self):
        c = ",".join(f"{v.real:g}{v.imag:+g}j" for v in self.center)
        return f"eball:{c}:{self.radius:g}"

    def _rho(self, Z):
        return (np.sum(np.abs(Z - self._c) ** 2, axis=1) - self.radius ** 2)[:, None]

    def _grad(self, Z):
        return np.conj(Z - self._c)[:, None, :]

    def bounding_box(self):
        c = to_real(self._c)
        return c - self.radius, c + self.radius

    def _exact_distance(self, Z):
        return self.radius - np.linalg.norm(Z - self._c, axis=1)


class AffineImage(Domain):
    """Image ``{M z + c : z in base}`` of a domain under an invertible complex affine map."""

    kind = "affine"

    def __init__(self, base, M, c=None):
        self.base = base
        self.n = base.n
        self.M = np.array(M, dtype=complex).reshape(self.n, self.n)
        self.c = np.zeros(self.n, dtype=complex) if c is None else np.array(c, dtype=complex).reshape(self.n)
        self.Minv = np.linalg.inv(self.M)
        self.bounded = base.bounded
        self.n_defining = base.n_defining
        self.M.setflags(write=False)
        self.c.setflags(write=False)

    @property
    def key(self):
        return ("affine", self.base.key, tuple(np.round(self.M.ravel(), 15)), tuple(np.round(self.c, 15)))

    @property
    def ident(self):
        return f"affine({self.base.ident})"

    def pull(self, Z):
        """Preimage points in the base domain."""
        return (Z - self.c) @ self.Minv.T

    def push(self, Z):
        return Z @ self.M.T + self.c

    def _rho(self, Z):
        return self.base._rho(self.pull(Z))

    def _grad(self, Z):
        return self.base._grad(self.pull(Z)) @ self.Minv

    def bounding_box(self):
        lo, hi = self.base.bounding_box()
        R = real_linear(self.M)
        mid = R @ (0.5 * (lo + hi)) + to_real(self.c)
        half = np.abs(R) @ (0.5 * (hi - lo))
        return mid - half, mid + half

    def _exact_distance(self, Z):
        gram = self.M.conj().T @ self.M
        scale2 = gram[0, 0].real
        if np.allclose(gram, scale2 * np.eye(self.n), rtol=1e-13, atol=0):
            d = self.base._exact_distance(self.pull(Z))
            if d is not None:
                return np.sqrt(scale2) * d
        return None


def base_of(domain):
    """Strip affine wrappers: returns ``(base, M, c)`` with ``domain = M base + c``."""
    M = np.eye(domain.n, dtype=complex)
    c = np.zeros(domain.n, dtype=complex)
    while isinstance(domain, AffineImage):
        c = M @ domain.c + c
        M = M @ domain.M
        domain = domain.base
    return domain, M, c


# ---------------------------------------------------------------------------
# Cayley charts
# ---------------------------------------------------------------------------


class CayleyChart:
    """Biholomorphism from a (possibly unbounded) domain onto a bounded representative."""

    def __init__(self, source, target, forward, inverse, jacobian_det, name):
        self.source = source
        self.target = target
        self._forward = forward
        self._inverse = inverse
        self._jac = jacobian_det
        self.name = name

    def forward(self, z):
        Z, single = as_points(z, self.source.n)
        out = self._forward(Z)
        return out[0] if single else out

    def inverse(self, w):
        W, single = as_points(w, self.source.n)
        out = self._inverse(W)
        return out[0] if single else out

    def jacobian_det(self, z):
        Z, single = as_points(z, self.source.n)
        out = self._jac(Z)
        return out[0] if single else out

    def __repr__(self):
        return f"CayleyChart<{self.name}: {self.source.ident} -> {self.target.ident}>"


def _siegel_chart(dom):
    n = dom.n
    s2 = np.sqrt(2.0)

    def fwd(Z):
        d = 1.0 - Z[:, :1]
        return np.concatenate([(1.0 + Z[:, :1]) / d, s2 * Z[:, 1:] / d], axis=1)

    def inv(W):
        d = 1.0 + W[:, :1]
        return np.concatenate([(W[:, :1] - 1.0) / d, s2 * W[:, 1:] / d], axis=1)

    def jac(Z):
        d = 1.0 - Z[:, 0]
        return 2.0 / d ** 2 * (s2 / d) ** (n - 1)

    return CayleyChart(dom, Ball(n), fwd, inv, jac, "siegel-cayley")


def _polyhalfplane_chart(dom):
    def fwd(Z):
        return (1.0 + Z) / (1.0 - Z)

    def inv(W):
        return (W - 1.0) / (W + 1.0)

    def jac(Z):
        return np.prod(2.0 / (1.0 - Z) ** 2, axis=1)

    return CayleyChart(dom, Polydisc(dom.n), fwd, inv, jac, "polydisc-cayley")


def identity_chart(dom):
    return CayleyChart(dom, dom, lambda Z: Z.copy(), lambda W: W.copy(), lambda Z: np.ones(Z.shape[0], dtype=complex), "identity")


def cayley(domain):
    """Chart onto the registered bounded representative of ``domain``."""
    if isinstance(domain, SiegelHalfSpace):
        return _siegel_chart(domain)
    if isinstance(domain, PolyHalfPlane):
        return _polyhalfplane_chart(domain)
    if isinstance(domain, AffineImage):
        inner = cayley(domain.base)
        if inner.name == "identity":
            return identity_chart(domain)
        det = np.linalg.det(domain.Minv)
        return CayleyChart(
            domain,
            inner.target,
            lambda Z: inner._forward(domain.pull(Z)),
            lambda W: domain.push(inner._inverse(W)),
            lambda Z: inner._jac(domain.pull(Z)) * det,
            inner.name,
        )
    if domain.bounded:
        return identity_chart(domain)
    raise NoChart(f"no registered chart for {domain!r}")


def is_ball_biholomorphic(domain):
    """True only for domains with a registered biholomorphism onto the unit ball."""
    base, _, _ = base_of(domain)
    return isinstance(base, (Ball, SiegelHalfSpace))


# ---------------------------------------------------------------------------
# Catalogue identifiers
# ---------------------------------------------------------------------------


def parse_domain(ident):
    """Build a catalogued domain from an identifier such as ``"egg:2:4"`` or ``"ball:3"``."""
    s = ident.strip().lower()
    head, _, rest = s.partition(":")
    args = rest.split(":") if rest else []
    try:
        if head == "disc":
            return Disc()
        if head == "ball":
            return Ball(int(args[0]) if args else 2)
        if head == "bidisc":
            return Polydisc(2)
        if head == "polydisc":
            return Polydisc(int(args[0]) if args else 2)
        if head == "ellipsoid":
            return Ellipsoid([float(a) for a in args[0].split(",")])
        if head == "egg":
            n = int(args[0]) if args else 2
            two_m = int(args[1]) if len(args) > 1 else 4
            if two_m % 2:
                raise ValueError("egg exponent must be even")
            return Egg(n, two_m // 2)
        if head == "halfplane":
            return HalfPlane()
        if head == "siegel":
            return SiegelHalfSpace(int(args[0]) if args else 2)
        if head == "polyhalfplane":
            return PolyHalfPlane(int(args[0]) if args else 2)
        if head == "model":
            return ModelPolynomial.homogeneous(int(args[0]), int(args[1]))
        if head == "cellipsoid":
            return ComplexEllipsoid([float(a) for a in args[0].split(",")], [int(p) for p in args[1].split(",")])
    except (IndexError, ValueError) as exc:
        raise UnsupportedDomain(f"malformed domain identifier {ident!r}: {exc}") from None
    raise UnsupportedDomain(f"unknown domain identifier {ident!r}")


def ball_volume(n):
    return np.pi ** n / factorial(n)
