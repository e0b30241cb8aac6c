"""Quasi-random point sets shared by quadrature, ball sampling and boundary search."""
import warnings

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc


def sobol(n_points, dim, seed=0):
    """Scrambled Sobol points in ``[0, 1)^dim``; deterministic for a fixed seed."""
    engine = qmc.Sobol(d=dim, scramble=True, seed=seed)
    with warnings.catch_warnings():
        # balance warnings for non powers of two are irrelevant here
        warnings.simplefilter("ignore", UserWarning)
        return engine.random(n_points)


def sphere_directions(n_dirs, dim, seed=0):
    """Quasi-uniform unit vectors on the sphere ``S^(dim-1)`` in ``R^dim``.

    In the plane the directions are exactly equispaced; otherwise Sobol points
    are pushed through the Gaussian quantile function and normalized.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        theta = 2.0 * np.pi * (np.arange(n_dirs) + 0.5) / n_dirs
        return np.column_stack([np.cos(theta), np.sin(theta)])
    u = sobol(n_points=n_dirs, dim=dim, seed=seed)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    g = ndtri(u)
    return g / np.linalg.norm(g, axis=1, keepdims=True)
