"""Conversions between complex points in C^n and interleaved real coordinates.

A point ``z = (x1 + i x2, ..., x_{2n-1} + i x_{2n})`` is identified with the
real vector ``(x1, x2, ..., x_{2n})``.
"""
import numpy as np


def as_points(z, n):
    """Return ``(Z, single)`` with ``Z`` of shape ``(N, n)`` complex."""
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim == 1:
        if arr.shape[0] != n:
            if n == 1:
                return arr.reshape(-1, 1), False
            raise ValueError(f"expected a point with {n} coordinates, got shape {arr.shape}")
        return arr.reshape(1, n), True
    if arr.shape[-1] != n:
        raise ValueError(f"expected trailing dimension {n}, got shape {arr.shape}")
    return arr.reshape(-1, n), False


def to_real(z):
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def to_complex(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def real_linear(M):
    """Real ``2n x 2n`` matrix of the complex-linear map ``z -> M z``."""
    M = np.asarray(M, dtype=complex)
    n_out, n_in = M.shape
    R = np.empty((2 * n_out, 2 * n_in))
    R[0::2, 0::2] = M.real
    R[0::2, 1::2] = -M.imag
    R[1::2, 0::2] = M.imag
    R[1::2, 1::2] = M.real
    return R


def realify(H):
    """Real symmetric form of a Hermitian form.

    For ``H = A + iB`` the returned matrix ``G`` satisfies
    ``sum_{mu,nu} H[mu,nu] xi_mu conj(xi_nu) = y^T G y`` where ``y`` is the real
    vector of ``xi``. Works on stacks of matrices.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[-1]
    G = np.empty(H.shape[:-2] + (2 * n, 2 * n))
    G[..., 0::2, 0::2] = H.real
    G[..., 0::2, 1::2] = H.imag
    G[..., 1::2, 0::2] = -H.imag
    G[..., 1::2, 1::2] = H.real
    return G


def real_gradient(dz):
    """Real gradient of a real function from its holomorphic derivative ``df/dz``."""
    dz = np.asarray(dz, dtype=complex)
    out = np.empty(dz.shape[:-1] + (2 * dz.shape[-1],))
    out[..., 0::2] = 2.0 * dz.real
    out[..., 1::2] = -2.0 * dz.imag
    return out
