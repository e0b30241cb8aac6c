"""Bergman metric tensor, its realification and Christoffel symbols.

The metric is ``g_{mu nu} = d^2 log K(z, z) / dz_mu dconj(z_nu)``, read off the
kernel's log-jet as the mixed ``(z_mu, v_nu)`` entry. Real coordinates are
interleaved, ``x_{2k} = Re z_k`` and ``x_{2k+1} = Im z_k``.
"""
from dataclasses import dataclass, field

import numpy as np

from .coords import as_points, realify, to_complex, to_real
from .domains import AffineImage, Ball, PolyHalfPlane, Polydisc, SiegelHalfSpace, base_of, cayley
from .errors import DegenerateMetric

DEGENERACY_THRESHOLD = 1e-12


@dataclass
class MetricState:
    """Metric data at one point.

    ``gamma[eta, mu, nu]`` is the real Christoffel symbol with upper index
    ``eta``; it is ``None`` unless requested.
    """

    z: np.ndarray
    g: np.ndarray
    g_real: np.ndarray
    gamma: np.ndarray = None
    eigenvalues: np.ndarray = field(default=None)

    def dump(self):
        """Plain-text summary for debugging."""
        lines = ["point: " + " ".join(f"{c.real:+.12e}{c.imag:+.12e}j" for c in np.atleast_1d(self.z))]
        for i, row in enumerate(self.g):
            lines.append(f"g[{i}]: " + " ".join(f"{c.real:+.12e}{c.imag:+.12e}j" for c in row))
        lines.append("eigenvalues: " + " ".join(f"{e:.12e}" for e in self.eigenvalues))
        if self.gamma is not None:
            lines.append(f"christoffel max-norm: {np.max(np.abs(self.gamma)):.12e}")
        return "\n".join(lines)


def metric_jets(model, Z, derivatives=False):
    """Batched ``g`` (N, n, n) and optionally ``dg[k, mu, nu] = d g_{mu nu} / dz_k``."""
    n = model.n
    jet = model._log_jet(Z, np.conj(Z), 3 if derivatives else 2)
    g = jet[2][:, :n, n:]
    if not derivatives:
        return g, None
    dg = jet[3][:, :n, :n, n:]
    return g, dg


def _check(g):
    ev = np.linalg.eigvalsh(g)
    if not np.all(np.isfinite(ev)) or ev.min() <= DEGENERACY_THRESHOLD:
        raise DegenerateMetric(f"metric smallest eigenvalue {ev.min():.3e} at or below threshold")
    return ev


def metric_tensor(model, z, christoffel_symbols=False):
    """``MetricState`` at ``z`` (Christoffel symbols only if requested)."""
    z = np.asarray(z, dtype=complex).reshape(model.n)
    model.check_points(z)
    g, dg = metric_jets(model, z[None, :], christoffel_symbols)
    g = 0.5 * (g[0] + g[0].conj().T)
    ev = _check(g)
    gamma = None
    if christoffel_symbols:
        gamma = _real_christoffel(g, dg[0])
    return MetricState(z=z, g=g, g_real=realify(g), gamma=gamma, eigenvalues=ev)


def metric_length(model, z, xi):
    """Infinitesimal Bergman length ``(sum g_{mu nu} xi_mu conj(xi_nu))^(1/2)``."""
    g = metric_tensor(model, z).g
    xi = np.asarray(xi, dtype=complex).reshape(model.n)
    return float(np.sqrt(max(np.real(xi @ g @ np.conj(xi)), 0.0)))


def real_metric_derivatives(dg):
    """``dG[tau] = d g_real / dx_tau`` from the holomorphic derivatives of ``g``."""
    n = dg.shape[-1]
    dG = np.empty((2 * n, 2 * n, 2 * n))
    for k in range(n):
        dgk = dg[k]
        dgk_bar = dgk.conj().T  # d/dconj(z_k) of g
        dG[2 * k] = realify(dgk + dgk_bar)
        dG[2 * k + 1] = realify(1j * (dgk - dgk_bar))
    return dG


def _real_christoffel(g, dg):
    G = realify(g)
    Ginv = np.linalg.inv(G)
    dG = real_metric_derivatives(dg)
    # T[mu, nu, tau] = d_mu G[nu, tau] + d_nu G[tau, mu] - d_tau G[mu, nu]
    T = dG + np.einsum("nta->ant", dG) - np.einsum("tmn->mnt", dG)
    return 0.5 * np.einsum("mnt,te->emn", T, Ginv)


def christoffel(model, x):
    """Real Christoffel array ``Gamma[eta, mu, nu]`` at the real point ``x`` (length 2n)."""
    z = to_complex(np.asarray(x, dtype=float))
    return metric_tensor(model, z, christoffel_symbols=True).gamma


def complex_christoffel(model, Z):
    """Batched holomorphic Christoffel symbols ``Gamma^k_{ij} = g^{k lbar} d_i g_{j lbar}``.

    Returns ``(g, Gamma)`` with ``Gamma[N, k, i, j]``.
    """
    g, dg = metric_jets(model, Z, derivatives=True)
    ginv = np.linalg.inv(g)
    return g, np.einsum("nijl,nlk->nkij", dg, ginv)


# ---------------------------------------------------------------------------
# registered closed forms
# ---------------------------------------------------------------------------


def _ball_mobius_modulus(z, w):
    """``|phi_z(w)|`` for the ball automorphism exchanging ``z`` and 0."""
    z = np.atleast_2d(z)
    w = np.atleast_2d(w)
    zz = np.sum(np.abs(z) ** 2, axis=-1)
    ww = np.sum(np.abs(w) ** 2, axis=-1)
    zw = np.sum(w * np.conj(z), axis=-1)
    s = 1.0 - (1.0 - zz) * (1.0 - ww) / np.abs(1.0 - zw) ** 2
    return np.sqrt(np.clip(s, 0.0, 1.0))


def _registered(domain):
    base, M, c = base_of(domain)
    if isinstance(base, (SiegelHalfSpace, PolyHalfPlane)):
        chart = cayley(base)
        target = chart.target
        pull = (lambda Z, M=M, c=c, ch=chart: ch.forward((np.atleast_2d(Z) - c) @ np.linalg.inv(M).T))
        return target, pull
    if isinstance(base, (Ball, Polydisc)) and (type(base) in (Ball, Polydisc)):
        pull = (lambda Z, M=M, c=c: (np.atleast_2d(Z) - c) @ np.linalg.inv(M).T)
        return base, pull
    return None, None


def has_closed_form_distance(domain):
    return _registered(domain)[0] is not None


def closed_form_bergman_distance(domain, z, w):
    """Bergman distance on ball and polydisc biholomorphs with registered maps."""
    target, pull = _registered(domain)
    if target is None:
        raise NotImplementedError(f"no closed-form Bergman distance for {domain!r}")
    a, b = pull(np.asarray(z, dtype=complex).reshape(-1, domain.n)), pull(np.asarray(w, dtype=complex).reshape(-1, domain.n))
    if isinstance(target, Polydisc):
        t = np.array([_ball_mobius_modulus(a[:, k:k + 1], b[:, k:k + 1]) for k in range(target.n)])
        d = np.sqrt(2.0) * np.arctanh(np.minimum(t, 1 - 1e-16))
        out = np.sqrt(np.sum(d ** 2, axis=0))
    else:
        out = np.sqrt(target.n + 1.0) * np.arctanh(np.minimum(_ball_mobius_modulus(a, b), 1 - 1e-16))
    return float(out[0]) if out.size == 1 else out


def caratheodory_distance(domain, z, w):
    """Carathéodory distance (registered closed forms only).

    Ball: ``arctanh |phi_z(w)|``; polydisc: maximum over the factors.
    """
    target, pull = _registered(domain)
    if target is None:
        raise NotImplementedError(f"no closed-form Caratheodory distance for {domain!r}")
    a, b = pull(np.asarray(z, dtype=complex).reshape(-1, domain.n)), pull(np.asarray(w, dtype=complex).reshape(-1, domain.n))
    if isinstance(target, Polydisc):
        t = np.max([_ball_mobius_modulus(a[:, k:k + 1], b[:, k:k + 1]) for k in range(target.n)], axis=0)
    else:
        t = _ball_mobius_modulus(a, b)
    out = np.arctanh(np.minimum(t, 1 - 1e-16))
    return float(out[0]) if out.size == 1 else out


def hahn_lu_check(model, pairs, **distance_opts):
    """Margins ``d_b(z, w) - d_c(z, w)`` for a list of point pairs.

    The Bergman distance comes from the geodesics module (shooting by
    default); the Carathéodory distance from the registered closed form.
    """
    from .geodesics import bergman_distance

    distance_opts.setdefault("method", "shooting")
    margins = []
    for z, w in pairs:
        db = bergman_distance(model, z, w, **distance_opts).distance
        dc = caratheodory_distance(model.domain, z, w)
        margins.append(db - dc)
    return np.array(margins)


def finite_difference_metric(model, z, h=1e-4):
    """``g`` by central differences of ``log K(z, z)`` in real coordinates (oracle)."""
    z = np.asarray(z, dtype=complex).reshape(model.n)
    n = model.n
    x0 = to_real(z)

    def f(x):
        return float(np.real(model.log_jet(to_complex(x), order=0)[0]))

    H = np.empty((2 * n, 2 * n))
    E = np.eye(2 * n) * h
    for a in range(2 * n):
        for b in range(a, 2 * n):
            val = (f(x0 + E[a] + E[b]) - f(x0 + E[a] - E[b]) - f(x0 - E[a] + E[b]) + f(x0 - E[a] - E[b])) / (4 * h * h)
            H[a, b] = H[b, a] = val
    # d^2/dz_mu dconj(z_nu) = (1/4)(d_x d_x + d_y d_y + i(d_x_mu d_y_nu - d_y_mu d_x_nu))
    g = np.empty((n, n), dtype=complex)
    for m in range(n):
        for v in range(n):
            xm, ym, xv, yv = 2 * m, 2 * m + 1, 2 * v, 2 * v + 1
            g[m, v] = 0.25 * (H[xm, xv] + H[ym, yv] + 1j * (H[xm, yv] - H[ym, xv]))
    return g
