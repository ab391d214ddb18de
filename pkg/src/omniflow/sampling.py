"""Seeded low-discrepancy point sets used by the verification harnesses."""
from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import norm, qmc


def sobol(dim: int, n: int, seed: int = 0) -> np.ndarray:
    """n scrambled Sobol points in [0, 1)^dim."""
    engine = qmc.Sobol(d=dim, scramble=True, seed=seed)
    with warnings.catch_warnings():
        # non power-of-two sizes are fine for our purposes
        warnings.simplefilter("ignore", UserWarning)
        return engine.random(n)


def box_points(dim: int, n: int, box: tuple[float, float], seed: int = 0) -> np.ndarray:
    lo, hi = box
    return lo + (hi - lo) * sobol(dim, n, seed)


def sphere_points(dim: int, n: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform points on the unit sphere in R^dim (Gaussian map of a Sobol set)."""
    u = np.clip(sobol(dim, n, seed), 1e-12, 1 - 1e-12)
    z = norm.ppf(u)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def time_pairs(n: int, time_range: tuple[float, float], seed: int = 0) -> np.ndarray:
    """n pairs (tau, t) with tau <= t inside time_range; always includes the full span."""
    lo, hi = time_range
    u = lo + (hi - lo) * sobol(2, n, seed + 7919)
    pairs = np.sort(u, axis=1)
    if n:
        pairs[0] = (lo, hi)
    return pairs
