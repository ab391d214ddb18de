"""Short-wavelength (WKB) construction of 2-D omni-potential flows around a given phi0.

Notation on a patch of the plane:

* ``n`` is the unit eigenvector of Hess(phi0) chosen for the eikonal gradient
  (``branch`` 1 = smaller eigenvalue, 2 = larger), oriented along grad S;
* rays are the integral curves of the orthogonal field ``m = (n2, -n1)``, i.e. the
  level lines of S;
* with G = |grad S| the amplitude equations reduce to conservation laws along
  rays: m . grad(G A0) = 0 and m . grad(G A1) = i n1 n2 L[A0], where
  L = d11 - d22 - g d12 and g = (phi0_11 - phi0_22) / phi0_12.

S is prescribed on a seed curve crossing the rays; every grid node is traced back
along its ray to the seed, which fixes S, A0 and the A1 source integral there.
Derivatives of the gridded fields use 6th-order differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import gridops
from .config import DEFAULT_TOLERANCES as TOL, SamplingSpec, WkbConfig
from .flow import FlowPotential, TimePolynomial, verify_omnipotential, VerificationReport
from .polynomials import Polynomial
from .sampling import box_points


class DegenerateHessianError(ValueError):
    """Eigenvalues of Hess(phi0) coincide (within the gap tolerance) at a point of the patch."""


class TransversalityError(ValueError):
    pass


class RayCrossingError(ValueError):
    pass


class WkbConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Eigenvector fields
# ---------------------------------------------------------------------------

def branch_vectors(H: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit eigenvectors of 2x2 symmetric stacks: (branch 1, branch 2, relative gap).

    Branch 2 belongs to the larger eigenvalue.  Signs follow the closed-form
    angle and are not normalized.
    """
    a, b, c = H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]
    theta = 0.5 * np.arctan2(2 * b, a - c)
    v2 = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    v1 = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    gap = np.hypot(a - c, 2 * b)
    norm = np.linalg.norm(H, axis=(-2, -1))
    rel = np.where(norm > 0, gap / np.where(norm > 0, norm, 1.0), 0.0)
    return v1, v2, rel


def _normalize_sign(v: np.ndarray) -> np.ndarray:
    lead = 0 if abs(v[0]) >= abs(v[1]) - 1e-12 else 1
    return -v if v[lead] < 0 else v


def eigen_field(phi0: Polynomial, q, branch: int, gap_tol: float = TOL.distinct_gap) -> np.ndarray:
    """Unit eigenvector of Hess(phi0)(q) of the given branch (largest component positive)."""
    H = phi0.numeric_hessian(np.asarray(q, dtype=float)[None, :])
    v1, v2, rel = branch_vectors(H)
    if rel[0] <= gap_tol:
        raise DegenerateHessianError(f"eigenvalues coincide at q={list(map(float, q))}")
    return _normalize_sign((v1 if branch == 1 else v2)[0])


class EigenField2D:
    """Branch field of Hess(phi0) with sign continuity along successive queries."""

    def __init__(self, phi0: Polynomial, branch: int, gap_tol: float = TOL.distinct_gap):
        if branch not in (1, 2):
            raise ValueError("branch must be 1 or 2")
        self.phi0, self.branch, self.gap_tol = phi0, branch, gap_tol
        self._last: np.ndarray | None = None

    def reset(self):
        self._last = None

    def __call__(self, q) -> np.ndarray:
        v = eigen_field(self.phi0, q, self.branch, self.gap_tol)
        if self._last is not None and np.dot(v, self._last) < 0:
            v = -v
        self._last = v
        return v

    def batch(self, X: np.ndarray, ref: np.ndarray | None = None):
        """Vectors at rows of X aligned with ``ref`` rows; also returns the relative gaps."""
        v1, v2, rel = branch_vectors(self.phi0.numeric_hessian(X))
        v = v1 if self.branch == 1 else v2
        if ref is not None:
            v = np.where((np.sum(v * ref, axis=1) < 0)[:, None], -v, v)
        return v, rel


def _inside(X: np.ndarray, box) -> np.ndarray:
    lo, hi = box
    return np.all((X >= lo - 1e-12) & (X <= hi + 1e-12), axis=-1)


@dataclass
class Ray:
    points: np.ndarray     # (K, 2)
    arclength: np.ndarray  # (K,)
    stop_reason: str


def trace_ray(
    phi0: Polynomial,
    q0,
    branch: int,
    step: float | None = None,
    max_len: float | None = None,
    box: tuple[float, float] = (-1.0, 1.0),
    direction=None,
    gap_tol: float = TOL.distinct_gap,
) -> Ray:
    """Fixed-step RK4 integral curve of a branch field, parameterized by arclength."""
    lo, hi = box
    diag = np.sqrt(2) * (hi - lo)
    step = step or diag / 500
    max_len = max_len or 2 * diag
    field_ = EigenField2D(phi0, branch, gap_tol)
    x = np.asarray(q0, dtype=float)
    if not _inside(x, box):
        raise ValueError("start point outside the box")
    u = field_(x)   # raises on a degenerate start
    if direction is not None and np.dot(u, direction) < 0:
        u = -u
    pts, s = [x.copy()], [0.0]
    reason = "max_len"

    def f(y, ref):
        v, rel = field_.batch(y[None, :], ref[None, :])
        return v[0], rel[0]

    while s[-1] < max_len - 1e-15:
        h = min(step, max_len - s[-1])
        k1, r1 = f(x, u)
        k2, r2 = f(x + 0.5 * h * k1, k1)
        k3, r3 = f(x + 0.5 * h * k2, k2)
        k4, r4 = f(x + h * k3, k3)
        if min(r1, r2, r3, r4) <= gap_tol:
            reason = "degenerate"
            break
        xn = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not _inside(xn, box):
            reason = "boundary"
            break
        x, u = xn, k4
        pts.append(x.copy())
        s.append(s[-1] + h)
    return Ray(np.array(pts), np.array(s), reason)


# ---------------------------------------------------------------------------
# Seed curves
# ---------------------------------------------------------------------------

@dataclass
class SeedCurve:
    """Polyline carrying S and A0 as functions of arclength sigma along it."""

    points: np.ndarray
    S: Callable[[np.ndarray], np.ndarray] = field(default=lambda s: s)
    A0: Callable[[np.ndarray], np.ndarray] = field(default=lambda s: np.ones_like(s))
    dS: Callable[[np.ndarray], np.ndarray] | None = field(default=lambda s: np.ones_like(s))

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        seg = np.diff(self.points, axis=0)
        self.seg_len = np.linalg.norm(seg, axis=1)
        if np.any(self.seg_len <= 0):
            raise ValueError("seed polyline has repeated vertices")
        self.tangents = seg / self.seg_len[:, None]
        self.normals = np.stack([-self.tangents[:, 1], self.tangents[:, 0]], axis=1)
        self.offsets = np.r_[0.0, np.cumsum(self.seg_len)]

    @property
    def length(self) -> float:
        return float(self.offsets[-1])

    def slope(self, sigma: np.ndarray) -> np.ndarray:
        if self.dS is not None:
            return np.asarray(self.dS(sigma), dtype=float)
        h = 1e-5
        return (np.asarray(self.S(sigma + h)) - np.asarray(self.S(sigma - h))) / (2 * h)

    def at(self, sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Point and unit tangent at arclength sigma."""
        sigma = np.asarray(sigma, dtype=float)
        j = np.clip(np.searchsorted(self.offsets, sigma, side="right") - 1, 0, len(self.seg_len) - 1)
        return self.points[j] + (sigma - self.offsets[j])[:, None] * self.tangents[j], self.tangents[j]


def default_seed(phi0: Polynomial, box=(-1.0, 1.0), branch: int = 2, center=None) -> SeedCurve:
    """Straight segment through the box centre along the gradient branch, clipped to the box."""
    lo, hi = box
    c = np.full(2, 0.5 * (lo + hi)) if center is None else np.asarray(center, dtype=float)
    d = eigen_field(phi0, c, branch)
    ts = []
    for k in range(2):
        if abs(d[k]) > 1e-15:
            ts += [(lo - c[k]) / d[k], (hi - c[k]) / d[k]]
    t_lo = max(t for t in ts if t < 0)
    t_hi = min(t for t in ts if t > 0)
    return SeedCurve(np.array([c + t_lo * d, c + t_hi * d]))


# ---------------------------------------------------------------------------
# Patch construction
# ---------------------------------------------------------------------------

@dataclass
class RayPatch:
    phi0: Polynomial
    branch: int
    box: tuple[float, float]
    n: int
    seed: SeedCurve
    step: float
    fd_order: int
    nodes: np.ndarray                  # (n, n, 2)
    sigma: np.ndarray                  # seed parameter reached from each node (NaN if none)
    S: np.ndarray
    crossing_gain: np.ndarray          # G at the seed crossing, |S'(sigma)| / |n . t_C|
    orientation: np.ndarray            # sign(u . m) at the crossing, u = traced direction
    used_direction: np.ndarray         # +1 / -1 relative to the ray field at the node
    G: np.ndarray | None = None
    A0: np.ndarray | None = None
    A1: np.ndarray | None = None
    eikonal_residual: float = float("nan")
    alignment_residual: float = float("nan")
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def h(self) -> float:
        return (self.box[1] - self.box[0]) / (self.n - 1)

    @property
    def valid(self) -> np.ndarray:
        v = np.isfinite(self.S)
        if self.A0 is not None:
            v &= np.isfinite(self.A0)
        if self.A1 is not None:
            v &= np.isfinite(self.A1)
        return v

    def derivs(self, name: str) -> dict[str, np.ndarray]:
        if name not in self._cache:
            F = {"S": self.S, "A0": self.A0, "A1": self.A1}[name]
            self._cache[name] = gridops.derivatives(F, self.h, self.fd_order)
        return self._cache[name]

    def phi0_hessian(self) -> np.ndarray:
        if "H0" not in self._cache:
            self._cache["H0"] = self.phi0.numeric_hessian(self.nodes.reshape(-1, 2)).reshape(self.n, self.n, 2, 2)
        return self._cache["H0"]

    def interior(self, margin: int) -> np.ndarray:
        m = np.zeros((self.n, self.n), dtype=bool)
        m[margin:self.n - margin, margin:self.n - margin] = True
        return m

    def to_json(self) -> dict:
        def cplx(a):
            return [None if not np.isfinite(v) else float(v) for v in np.ravel(a)]

        A0 = self.A0 if self.A0 is not None else np.full_like(self.S, np.nan)
        A1 = self.A1 if self.A1 is not None else np.full_like(self.S, np.nan)
        return {
            "nx": self.n,
            "ny": self.n,
            "box": list(self.box),
            "branch": self.branch,
            "phi0": self.phi0.to_json(),
            "S": cplx(self.S),
            "A0_re": cplx(A0.real),
            "A0_im": cplx(A0.imag),
            "A1_re": cplx(A1.real),
            "A1_im": cplx(A1.imag),
        }

    def write_csv(self, path):
        """Grid header line, then one node per line: q1, q2, S, A0re, A0im, A1re, A1im."""
        A0 = self.A0 if self.A0 is not None else np.full_like(self.S, np.nan, dtype=complex)
        A1 = self.A1 if self.A1 is not None else np.full_like(self.S, np.nan, dtype=complex)
        Q = self.nodes.reshape(-1, 2)
        cols = np.column_stack([Q, self.S.ravel(), A0.real.ravel(), A0.imag.ravel(), A1.real.ravel(), A1.imag.ravel()])
        header = f"nx={self.n},ny={self.n},box={self.box[0]}:{self.box[1]}\nq1,q2,S,A0re,A0im,A1re,A1im"
        np.savetxt(path, cols, delimiter=",", header=header, comments="# ", fmt="%.17g")


class _Tracer:
    """Vectorized back-tracing of many nodes along rays to the seed curve."""

    def __init__(self, phi0, branch, box, seed: SeedCurve, step, gap_tol):
        self.ray_field = EigenField2D(phi0, 3 - branch, gap_tol)
        self.grad_field = EigenField2D(phi0, branch, gap_tol)
        self.box, self.seed, self.step, self.gap_tol = box, seed, step, gap_tol
        self.max_steps = int(np.ceil(2 * np.sqrt(2) * (box[1] - box[0]) / step))

    def _rhs(self, X, ref):
        v, rel = self.ray_field.batch(X, ref)
        return v, rel

    def _rk4(self, X, U, h, src):
        """One RK4 step of length h (array or scalar) for positions and the source integral."""
        h = np.asarray(h, dtype=float).reshape(-1, 1) if np.ndim(h) else h
        k1, r1 = self._rhs(X, U)
        X2 = X + 0.5 * h * k1
        k2, r2 = self._rhs(X2, k1)
        X3 = X + 0.5 * h * k2
        k3, r3 = self._rhs(X3, k2)
        X4 = X + h * k3
        k4, r4 = self._rhs(X4, k3)
        Xn = X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        dI = None
        if src is not None:
            f1, f2, f3, f4 = src(X), src(X2), src(X3), src(X4)
            hh = h[:, 0] if np.ndim(h) else h
            dI = hh / 6 * (f1 + 2 * f2 + 2 * f3 + f4)
        gap = np.minimum(np.minimum(r1, r2), np.minimum(r3, r4))
        return Xn, k4, dI, gap

    def _signed(self, X):
        """Signed distances (N, segments) to each seed segment line, and along-segment positions."""
        P0 = self.seed.points[:-1]
        rel = X[:, None, :] - P0[None, :, :]
        d = np.einsum("nsk,sk->ns", rel, self.seed.normals)
        a = np.einsum("nsk,sk->ns", rel, self.seed.tangents)
        return d, a

    def run(self, X0: np.ndarray, direction: np.ndarray, src=None):
        """Trace from X0 with initial ray direction sign ``direction`` until the seed is hit.

        Returns sigma, crossing points, traced directions at the crossing, integrals
        of ``src`` along the path (if given) and a success mask.
        """
        N = len(X0)
        sigma = np.full(N, np.nan)
        Xc = np.full((N, 2), np.nan)
        Uc = np.full((N, 2), np.nan)
        integ = np.zeros(N, dtype=complex)
        ok = np.zeros(N, dtype=bool)
        v0, rel0 = self._rhs(X0, None)
        U = v0 * direction[:, None]
        X = X0.copy()
        active = rel0 > self.gap_tol
        seg_len = self.seed.seg_len

        # nodes lying on the seed itself
        d0, a0 = self._signed(X0)
        on = (np.abs(d0) < 1e-13) & (a0 >= -1e-13) & (a0 <= seg_len + 1e-13)
        hit0 = active & np.any(on, axis=1)
        if np.any(hit0):
            j = np.argmax(on[hit0], axis=1)
            sigma[hit0] = self.seed.offsets[j] + a0[hit0, j]
            Xc[hit0] = X0[hit0]
            Uc[hit0] = U[hit0]
            ok[hit0] = True
            active &= ~hit0

        idx = np.nonzero(active)[0]
        for _ in range(self.max_steps):
            if idx.size == 0:
                break
            x, u = X[idx], U[idx]
            xn, un, dI, gap = self._rk4(x, u, self.step, src)
            d_old, _ = self._signed(x)
            d_new, a_new = self._signed(xn)
            cross = (np.sign(d_old) != np.sign(d_new)) | (d_new == 0)
            # refine every candidate crossing to locate the exact sub-step
            done = np.zeros(len(idx), dtype=bool)
            if np.any(cross):
                rows, segs = np.nonzero(cross)
                # keep the first segment crossed per node
                first = np.unique(rows, return_index=True)[1]
                rows, segs = rows[first], segs[first]
                s_star = self._refine(x[rows], u[rows], d_old[rows, segs], d_new[rows, segs], segs)
                xs, us, dIs, _ = self._rk4(x[rows], u[rows], s_star, src)
                _, a_s = self._signed(xs)
                a_s = a_s[np.arange(len(rows)), segs]
                within = (a_s >= -1e-12) & (a_s <= seg_len[segs] + 1e-12)
                r = rows[within]
                g = idx[r]
                sigma[g] = self.seed.offsets[segs[within]] + a_s[within]
                Xc[g] = xs[within]
                Uc[g] = us[within]
                if src is not None:
                    integ[g] += dIs[within]
                ok[g] = True
                done[r] = True
            bad = (~done) & ((gap <= self.gap_tol) | ~_inside(xn, self.box))
            cont = ~(done | bad)
            X[idx[cont]] = xn[cont]
            U[idx[cont]] = un[cont]
            if src is not None:
                integ[idx[cont]] += dI[cont]
            idx = idx[cont]
        integ[~ok] = np.nan
        return sigma, Xc, Uc, integ, ok

    def _refine(self, x, u, d0, d1, segs, iters: int = 6):
        """Secant iteration for the sub-step length that lands exactly on the seed line."""
        s_lo = np.zeros(len(x))
        s_hi = np.full(len(x), self.step)
        f_lo, f_hi = d0, d1
        s = np.where(f_hi != f_lo, self.step * f_lo / (f_lo - f_hi), self.step)
        for _ in range(iters):
            xs, _, _, _ = self._rk4(x, u, s, None)
            ds, _ = self._signed(xs)
            f = ds[np.arange(len(x)), segs]
            left = np.sign(f) == np.sign(f_lo)
            s_lo = np.where(left, s, s_lo)
            f_lo = np.where(left, f, f_lo)
            s_hi = np.where(left, s_hi, s)
            f_hi = np.where(left, f_hi, f)
            denom = f_lo - f_hi
            s_new = np.where(denom != 0, s_lo + (s_hi - s_lo) * f_lo / np.where(denom != 0, denom, 1), s)
            s = np.clip(s_new, 0.0, self.step)
        return s


def _trace_all(tr: _Tracer, X: np.ndarray, seed: SeedCurve, src=None, prefer=None):
    """Back-trace all nodes; first in the preferred direction, then the other one."""
    if prefer is None:
        v, _ = tr.ray_field.batch(X)
        d, _ = tr._signed(X)
        nearest = np.argmin(np.abs(d), axis=1)
        dn = d[np.arange(len(X)), nearest]
        vn = np.sum(v * seed.normals[nearest], axis=1)
        prefer = np.where(dn * vn > 0, -1.0, 1.0)
    out = tr.run(X, prefer, src)
    sigma, Xc, Uc, integ, ok = out
    used = np.where(ok, prefer, np.nan)
    retry = np.nonzero(~ok)[0]
    if retry.size:
        s2, X2, U2, I2, ok2 = tr.run(X[retry], -prefer[retry], src)
        sigma[retry], Xc[retry], Uc[retry], integ[retry], ok[retry] = s2, X2, U2, I2, ok2
        used[retry] = np.where(ok2, -prefer[retry], np.nan)
    return sigma, Xc, Uc, integ, ok, used


def build_eikonal(
    phi0: Polynomial,
    seed: SeedCurve | None = None,
    branch: int = 2,
    box: tuple[float, float] = (-1.0, 1.0),
    grid_n: int = 81,
    step: float | None = None,
    fd_order: int = 6,
    gap_tol: float = TOL.distinct_gap,
    min_angle_deg: float = 10.0,
) -> RayPatch:
    """Eikonal S on a grid: constant along rays, prescribed on the seed curve.

    ``branch`` selects the eigenvector that grad S follows; rays follow the other
    one.  Raises on eigenvalue coincidence in the box, on a seed that is not
    transversal to the rays, and on ray focusing (vanishing grad S).
    """
    if phi0.dim != 2:
        raise ValueError("phi0 must be a function of two variables")
    nodes, h = gridops.node_coordinates(grid_n, box)
    X = nodes.reshape(-1, 2)
    _, _, rel = branch_vectors(phi0.numeric_hessian(X))
    worst = int(np.argmin(rel))
    if rel[worst] <= gap_tol:
        raise DegenerateHessianError(
            f"Hessian of phi0 has a double eigenvalue near q={X[worst].tolist()}; choose a patch avoiding it"
        )
    seed = seed or default_seed(phi0, box, branch)
    step = step or np.sqrt(2) * (box[1] - box[0]) / 500

    # transversality of the seed to the rays
    sig = np.linspace(0, seed.length, 201)
    P, T = seed.at(sig)
    nvec, rel_c = EigenField2D(phi0, branch, gap_tol).batch(P)
    if np.any(rel_c <= gap_tol):
        raise DegenerateHessianError("double eigenvalue on the seed curve")
    sin_angle = np.abs(np.sum(nvec * T, axis=1))     # |cos(angle to the gradient)| = |sin(angle to rays)|
    if np.min(sin_angle) < np.sin(np.radians(min_angle_deg)):
        k = int(np.argmin(sin_angle))
        raise TransversalityError(
            f"seed curve is within {min_angle_deg} degrees of a ray at {P[k].tolist()}"
        )

    tr = _Tracer(phi0, branch, box, seed, step, gap_tol)
    sigma, Xc, Uc, _, ok, used = _trace_all(tr, X, seed)
    S = np.full(len(X), np.nan)
    gain = np.full(len(X), np.nan)
    orient = np.full(len(X), np.nan)
    if np.any(ok):
        s_ok = sigma[ok]
        S[ok] = seed.S(s_ok)
        slope = seed.slope(s_ok)
        _, t_c = seed.at(s_ok)
        n_c, _ = tr.grad_field.batch(Xc[ok])
        dot = np.sum(n_c * t_c, axis=1)
        gain[ok] = np.abs(slope) / np.abs(dot)
        # orient n along grad S, then compare the traced direction with m = (n2, -n1)
        n_c = n_c * (np.sign(dot) * np.sign(slope))[:, None]
        m_c = np.stack([n_c[:, 1], -n_c[:, 0]], axis=1)
        orient[ok] = np.sign(np.sum(Uc[ok] * m_c, axis=1))
    shape = (grid_n, grid_n)
    patch = RayPatch(
        phi0, branch, tuple(box), grid_n, seed, step, fd_order, nodes, sigma.reshape(shape), S.reshape(shape),
        gain.reshape(shape), orient.reshape(shape), used.reshape(shape),
    )
    dS = patch.derivs("S")
    G = np.hypot(dS["1"], dS["2"])
    finite = np.isfinite(G)
    if np.any(finite) and np.min(G[finite]) < 1e-6 * np.median(G[finite]):
        k = np.unravel_index(np.nanargmin(np.where(finite, G, np.nan)), G.shape)
        raise RayCrossingError(f"rays focus (grad S vanishes) near q={nodes[k].tolist()}")
    patch.G = G
    patch.eikonal_residual, patch.alignment_residual = eikonal_residuals(patch)
    return patch


def eikonal_residuals(patch: RayPatch, margin: int = 0) -> tuple[float, float]:
    """max |p^2 - q^2 - g p q| / (p^2 + q^2) where g is defined, and max |sin| of grad S vs n."""
    dS = patch.derivs("S")
    p, q = dS["1"], dS["2"]
    H = patch.phi0_hessian()
    a, b, c = H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]
    mask = np.isfinite(p) & np.isfinite(q) & patch.interior(margin)
    Hn = np.linalg.norm(H, axis=(-2, -1))
    gdef = mask & (np.abs(b) > 1e-8 * Hn)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (a - c) / b
        E = np.abs(p**2 - q**2 - g * p * q) / (p**2 + q**2)
    eik = float(np.max(E[gdef])) if np.any(gdef) else float("nan")
    v1, v2, _ = branch_vectors(H)
    ray = v1 if patch.branch == 2 else v2
    with np.errstate(invalid="ignore"):
        sin = np.abs(ray[..., 0] * p + ray[..., 1] * q) / np.hypot(p, q)
    align = float(np.max(sin[mask])) if np.any(mask) else float("nan")
    return eik, align


def _L(H0: np.ndarray, d: dict) -> np.ndarray:
    a, b, c = H0[..., 0, 0], H0[..., 0, 1], H0[..., 1, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (a - c) / b
    return d["11"] - d["22"] - g * d["12"]


def transport_amplitudes(patch: RayPatch, a0_seed: Callable | None = None) -> RayPatch:
    """Fill A0 (conserved G A0 along rays) and A1 (zero on the seed, sourced by L[A0])."""
    seed = patch.seed if a0_seed is None else replace(patch.seed, A0=a0_seed)
    A0_c = np.full(patch.S.shape, np.nan, dtype=complex)
    ok = np.isfinite(patch.sigma)
    A0_c[ok] = np.asarray(seed.A0(patch.sigma[ok]), dtype=complex)
    if np.any(ok) and np.min(np.abs(A0_c[ok])) == 0:
        raise ValueError("A0 seed data must be non-zero")
    A0 = patch.crossing_gain * A0_c / patch.G
    patch = replace(patch, A0=A0, A1=None, _cache={k: v for k, v in patch._cache.items() if k in ("S", "H0")})

    # source i n1 n2 L[A0]; n1 n2 does not depend on the sign of n
    LA0 = _L(patch.phi0_hessian(), patch.derivs("A0"))
    src_re = np.where(np.isfinite(LA0), LA0.real, np.nan)
    src_im = np.where(np.isfinite(LA0), LA0.imag, np.nan)
    grad = EigenField2D(patch.phi0, patch.branch)

    def src(X):
        n, _ = grad.batch(X)
        re, im = gridops.interpolate([src_re, src_im], patch.box, X)
        return 1j * n[:, 0] * n[:, 1] * (re + 1j * im)

    tr = _Tracer(patch.phi0, patch.branch, patch.box, seed, patch.step, TOL.distinct_gap)
    X = patch.nodes.reshape(-1, 2)
    prefer = np.nan_to_num(patch.used_direction.ravel(), nan=1.0)
    _, _, _, integ, ok2, _ = _trace_all(tr, X, seed, src, prefer)
    integ = integ.reshape(patch.S.shape)
    A1 = -patch.orientation * integ / patch.G
    A1 = np.where(ok2.reshape(patch.S.shape), A1, np.nan)
    patch.A1 = A1
    return patch


def build_patch(phi0: Polynomial, config: WkbConfig | None = None, seed: SeedCurve | None = None,
                a0_seed: Callable | None = None) -> RayPatch:
    config = config or WkbConfig()
    patch = build_eikonal(phi0, seed, config.branch, config.box, config.grid_n, fd_order=config.fd_order)
    return transport_amplitudes(patch, a0_seed)


# ---------------------------------------------------------------------------
# Residuals and the kappa study
# ---------------------------------------------------------------------------

def _amplitude(patch: RayPatch, kappa: float, order: int) -> tuple[np.ndarray, dict]:
    d0 = patch.derivs("A0")
    if order == 0:
        return patch.A0, d0
    d1 = patch.derivs("A1")
    return patch.A0 + patch.A1 / kappa, {k: d0[k] + d1[k] / kappa for k in d0}


def residual_envelope(patch: RayPatch, kappa: float, order: int = 1, margin: int = 4) -> float:
    """max over interior nodes of |e^{-i kappa S} L[e^{i kappa S} A]| (L with g = phi0 ratio).

    A = A0 for order 0 and A0 + A1/kappa for order 1.  The envelope removes the
    fast phase so the value varies smoothly with kappa.
    """
    A, dA = _amplitude(patch, kappa, order)
    dS = patch.derivs("S")
    k = kappa
    # second derivatives of e^{i k S} A divided by the phase factor
    U = {
        "11": -k**2 * dS["1"] ** 2 * A + 1j * k * (dS["11"] * A + 2 * dS["1"] * dA["1"]) + dA["11"],
        "22": -k**2 * dS["2"] ** 2 * A + 1j * k * (dS["22"] * A + 2 * dS["2"] * dA["2"]) + dA["22"],
        "12": -k**2 * dS["1"] * dS["2"] * A
        + 1j * k * (dS["12"] * A + dS["1"] * dA["2"] + dS["2"] * dA["1"])
        + dA["12"],
    }
    R = np.abs(_L(patch.phi0_hessian(), U))
    mask = patch.interior(margin) & np.isfinite(R)
    if not np.any(mask):
        raise WkbConfigError("no interior nodes with a complete stencil")
    return float(np.max(R[mask]))


@dataclass
class KappaSweep:
    kappas: list[float]
    residuals: list[float]
    slope: float
    order: int

    def to_json(self) -> dict:
        return {"kappas": self.kappas, "residuals": self.residuals, "slope": self.slope, "order": self.order}


def kappa_sweep(patch: RayPatch, kappas: Sequence[float] = (25, 50, 100, 200), order: int = 1,
                margin: int = 4) -> KappaSweep:
    """Least-squares slope of log2(residual) against log2(kappa)."""
    res = [residual_envelope(patch, k, order, margin) for k in kappas]
    slope = float(np.polyfit(np.log2(kappas), np.log2(res), 1)[0])
    return KappaSweep([float(k) for k in kappas], res, slope, order)


# ---------------------------------------------------------------------------
# The WKB term as a flow block
# ---------------------------------------------------------------------------

class WkbTerm:
    """2 Re[e^{i kappa S} A] from gridded S and A; derivatives via 6th-order differences.

    Evaluation outside the patch (or where a stencil touches an invalid node)
    returns NaN.
    """

    dim = 2

    def __init__(self, box, S: np.ndarray, A: np.ndarray, kappa: float, fd_order: int = 6):
        self.box = tuple(float(v) for v in box)
        self.S = np.asarray(S, dtype=float)
        self.A = np.asarray(A, dtype=complex)
        self.kappa = float(kappa)
        self.fd_order = fd_order
        n = self.S.shape[0]
        h = (self.box[1] - self.box[0]) / (n - 1)
        dS = gridops.derivatives(self.S, h, fd_order)
        dA = gridops.derivatives(self.A, h, fd_order)
        self._fields = [self.S, self.A.real, self.A.imag]
        for k in ("1", "2", "11", "12", "22"):
            self._fields += [dS[k], dA[k].real, dA[k].imag]

    @classmethod
    def from_patch(cls, patch: RayPatch, kappa: float, order: int = 1) -> "WkbTerm":
        A = patch.A0 if order == 0 else patch.A0 + patch.A1 / kappa
        return cls(patch.box, patch.S, A, kappa, patch.fd_order)

    def _eval(self, X):
        vals = gridops.interpolate(self._fields, self.box, np.atleast_2d(X))
        S, A = vals[0], vals[1] + 1j * vals[2]
        dS, dA = {}, {}
        for i, k in enumerate(("1", "2", "11", "12", "22")):
            dS[k] = vals[3 + 3 * i]
            dA[k] = vals[4 + 3 * i] + 1j * vals[5 + 3 * i]
        return np.exp(1j * self.kappa * S), A, dS, dA

    def numeric_value(self, X) -> np.ndarray:
        E, A, _, _ = self._eval(X)
        return 2 * np.real(E * A)

    def numeric_gradient(self, X) -> np.ndarray:
        E, A, dS, dA = self._eval(X)
        k = self.kappa
        g = [2 * np.real(E * (1j * k * dS[c] * A + dA[c])) for c in ("1", "2")]
        return np.stack(g, axis=-1)

    def numeric_hessian(self, X) -> np.ndarray:
        E, A, dS, dA = self._eval(X)
        k = self.kappa

        def entry(i, j, ij):
            return 2 * np.real(E * (-k**2 * dS[i] * dS[j] * A
                                    + 1j * k * (dS[ij] * A + dS[i] * dA[j] + dS[j] * dA[i]) + dA[ij]))

        h11, h12, h22 = entry("1", "1", "11"), entry("1", "2", "12"), entry("2", "2", "22")
        return np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)

    def to_json(self) -> dict:
        def flat(a):
            return [None if not np.isfinite(v) else float(v) for v in np.ravel(a)]

        return {
            "gridded": True,
            "nx": self.S.shape[0],
            "ny": self.S.shape[1],
            "box": list(self.box),
            "kappa": self.kappa,
            "fd_order": self.fd_order,
            "S": flat(self.S),
            "A_re": flat(self.A.real),
            "A_im": flat(self.A.imag),
        }

    @classmethod
    def from_json(cls, data) -> "WkbTerm":
        shape = (int(data["nx"]), int(data["ny"]))

        def arr(key):
            return np.array([np.nan if v is None else v for v in data[key]], dtype=float).reshape(shape)

        return cls(data["box"], arr("S"), arr("A_re") + 1j * arr("A_im"), data["kappa"], int(data.get("fd_order", 6)))


def patch_points(patch: RayPatch, num_points: int, seed: int = 0, margin: int = 4) -> np.ndarray:
    """Quasi-random points inside the patch where every gridded field is defined."""
    lo, hi = patch.box
    inset = margin * patch.h
    X = box_points(2, 4 * num_points, (lo + inset, hi - inset), seed)
    term = WkbTerm.from_patch(patch, 50.0, 1 if patch.A1 is not None else 0)
    Hs = term.numeric_hessian(X)
    good = np.all(np.isfinite(Hs.reshape(len(X), -1)), axis=1)
    X = X[good]
    if len(X) < num_points:
        raise WkbConfigError("patch has too few valid points for verification")
    return X[:num_points]


@dataclass
class WkbAssembly:
    flow: FlowPotential
    term: WkbTerm
    kappa: float
    epsilon: float
    order: int
    T: float
    residual: float
    eikonal_residual: float
    points: np.ndarray = field(repr=False)
    report: VerificationReport | None = None

    def summary(self) -> dict:
        out = {
            "kappa": self.kappa,
            "epsilon": self.epsilon,
            "order": self.order,
            "T": self.T,
            "gen2d_residual": self.residual,
            "eikonal_residual": self.eikonal_residual,
        }
        if self.report is not None:
            out["verification"] = self.report.to_json()
        return out


def assemble_wkb_flow(
    patch: RayPatch,
    kappa: float = 50.0,
    epsilon: float = 0.05,
    f: TimePolynomial | None = None,
    T: float = 1.0,
    order: int = 1,
    num_points: int = 256,
    num_time_pairs: int = 16,
    seed: int = 0,
    verify: bool = True,
    margin: int = 4,
) -> WkbAssembly:
    """|q|^2/2 + t phi0 + f(t) (eps/kappa^2) 2Re[e^{i kappa S}(A0 + A1/kappa)] on the patch.

    T is shrunk by factors 0.8 until sampled Hessians stay positive definite on
    the patch for all sampled t <= T; below 1e-4 this is a configuration error.
    The admissible T is a sampled estimate, not a certificate.
    """
    f = f or TimePolynomial([0.0, 0.0, 1.0])
    if abs(f(0.0)) > 1e-15 or abs(f.derivative()(0.0)) > 1e-15:
        raise WkbConfigError("f must vanish together with its derivative at t = 0")
    term = WkbTerm.from_patch(patch, kappa, order)
    mu = TimePolynomial([c * epsilon / kappa**2 for c in f.coefficients])
    base = FlowPotential(2, TimePolynomial([1.0]), ((patch.phi0, TimePolynomial([0.0, 1.0])), (term, mu)),
                         "wkb-augmented", (0.0, T))
    X = patch_points(patch, num_points, seed, margin)
    probe = patch_points(patch, 1024, seed + 1, margin)
    while True:
        ts = np.linspace(0, T, 17)[1:]
        lam = min(float(np.min(np.linalg.eigvalsh(base.hessian(probe, t))[:, 0])) for t in ts)
        if lam > TOL.shell_crossing:
            break
        T *= 0.8
        if T < 1e-4:
            raise WkbConfigError("no convex time window above 1e-4 on this patch; reduce epsilon")
    flow = base.with_time_range(T)
    res = residual_envelope(patch, kappa, order, margin)
    report = None
    if verify:
        spec = SamplingSpec(num_points=len(X), num_time_pairs=num_time_pairs, time_range=(0.0, T), seed=seed)
        report = verify_omnipotential(flow, spec, points=X)
    eik, _ = eikonal_residuals(patch, margin)
    return WkbAssembly(flow, term, kappa, epsilon, order, T, res, eik, X, report)
