"""High-order finite differences and local interpolation on uniform 2-D grids.

Fields are arrays of shape (n, n) indexed [i1, i2] with node coordinates
q_k = lo + i_k h.  Stencils are applied by gathering, so a NaN only spoils the
outputs whose stencil touches it.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np


def fornberg_weights(offsets: tuple[int, ...], deriv: int) -> list[Fraction]:
    """Exact weights of the ``deriv``-th derivative at 0 from values at integer ``offsets``."""
    x = [Fraction(o) for o in offsets]
    n = len(x) - 1
    c = [[[Fraction(0)] * (n + 1) for _ in range(n + 1)] for _ in range(deriv + 1)]
    c[0][0][0] = Fraction(1)
    c1 = Fraction(1)
    for i in range(1, n + 1):
        c2 = Fraction(1)
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            for m in range(min(i, deriv) + 1):
                prev = c[m - 1][i - 1][j] if m else Fraction(0)
                c[m][i][j] = (x[i] * c[m][i - 1][j] - m * prev) / c3
        for m in range(min(i, deriv) + 1):
            prev = c[m - 1][i - 1][i - 1] if m else Fraction(0)
            c[m][i][i] = c1 / c2 * (m * prev - x[i - 1] * c[m][i - 1][i - 1])
        c1 = c2
    return [c[deriv][n][j] for j in range(n + 1)]


@lru_cache(maxsize=64)
def stencils(n: int, deriv: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Index and weight tables (n, w) for a derivative of the given accuracy order (unit spacing)."""
    if order % 2:
        raise ValueError("order must be even")
    half = order // 2
    w_edge = order + deriv
    width = max(order + 1, w_edge)
    if n < width:
        raise ValueError(f"grid of {n} nodes too small for order-{order} stencils")
    idx = np.zeros((n, width), dtype=np.int64)
    wts = np.zeros((n, width))
    for i in range(n):
        if half <= i <= n - 1 - half:
            nodes = list(range(i - half, i + half + 1))
        else:
            start = min(max(i - w_edge // 2, 0), n - w_edge)
            nodes = list(range(start, start + w_edge))
        w = fornberg_weights(tuple(k - i for k in nodes), deriv)
        nodes += [i] * (width - len(nodes))
        w += [Fraction(0)] * (width - len(w))
        idx[i] = nodes
        wts[i] = [float(v) for v in w]
    return idx, wts


def diff(F: np.ndarray, h: float, axis: int, deriv: int = 1, order: int = 6) -> np.ndarray:
    """Derivative of F along ``axis`` (0 or 1); one-sided stencils at the edges."""
    F = np.asarray(F)
    n = F.shape[axis]
    idx, wts = stencils(n, deriv, order)
    G = np.moveaxis(F, axis, 0)
    gathered = G[idx]                                   # (n, width, other)
    with np.errstate(invalid="ignore"):
        keep = wts != 0
        out = np.einsum("iw,iw...->i...", np.where(keep, wts, 0.0), np.where(
            keep.reshape(keep.shape + (1,) * (gathered.ndim - 2)), gathered, 0.0))
        # a NaN inside the live part of a stencil must poison the result
        bad = np.any(np.isnan(gathered) & keep.reshape(keep.shape + (1,) * (gathered.ndim - 2)), axis=1)
    out = np.where(bad, np.nan, out)
    return np.moveaxis(out, 0, axis) / h**deriv


def derivatives(F: np.ndarray, h: float, order: int = 6) -> dict[str, np.ndarray]:
    """First and second partial derivatives of a grid field: keys '1', '2', '11', '12', '22'."""
    F1 = diff(F, h, 0, 1, order)
    F2 = diff(F, h, 1, 1, order)
    return {
        "1": F1,
        "2": F2,
        "11": diff(F, h, 0, 2, order),
        "22": diff(F, h, 1, 2, order),
        "12": diff(F1, h, 1, 1, order),
    }


def _lagrange(xi: np.ndarray, n: int, width: int):
    """Start indices and Lagrange weights for fractional node coordinates ``xi``."""
    start = np.clip(np.floor(xi).astype(np.int64) - (width // 2 - 1), 0, n - width)
    nodes = start[:, None] + np.arange(width)[None, :]
    t = xi[:, None] - nodes                              # (N, w)
    W = np.ones_like(t)
    for k in range(width):
        for j in range(width):
            if j != k:
                W[:, k] *= t[:, j] / (k - j)
    return nodes, W


def interpolate(fields, box: tuple[float, float], X: np.ndarray, width: int = 6):
    """Tensor Lagrange interpolation of one or several (n, n) fields at points X (N, 2).

    Points outside the box give NaN.
    """
    single = isinstance(fields, np.ndarray)
    flist = [fields] if single else list(fields)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = flist[0].shape[0]
    lo, hi = box
    h = (hi - lo) / (n - 1)
    xi = (X - lo) / h
    inside = np.all((xi >= -1e-9) & (xi <= n - 1 + 1e-9), axis=1)
    xi = np.clip(xi, 0, n - 1)
    n1, w1 = _lagrange(xi[:, 0], n, width)
    n2, w2 = _lagrange(xi[:, 1], n, width)
    out = []
    for F in flist:
        G = F[n1[:, :, None], n2[:, None, :]]            # (N, w, w)
        v = np.einsum("na,nb,nab->n", w1, w2, G)
        out.append(np.where(inside, v, np.nan))
    return out[0] if single else out


def node_coordinates(n: int, box: tuple[float, float]) -> tuple[np.ndarray, float]:
    lo, hi = box
    axis = np.linspace(lo, hi, n)
    Q1, Q2 = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([Q1, Q2], axis=-1), (hi - lo) / (n - 1)
