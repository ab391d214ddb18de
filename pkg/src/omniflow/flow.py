"""Time-dependent flow potentials and numerical checks of omni-potentiality.

A flow potential is Phi(q, t) = mu2(t) |q|^2 / 2 + sum_k mu_k(t) block_k(q).  The
Lagrangian map is q -> grad Phi(q, t), so trajectories are evaluated in closed
form; no time stepping is involved.  Blocks are duck-typed: anything exposing
``dim`` and batched ``numeric_value`` / ``numeric_gradient`` / ``numeric_hessian``
works (exact polynomials, or gridded WKB terms).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import polynomials as P
from .config import DEFAULT_TOLERANCES as TOL, SamplingSpec
from .sampling import box_points, time_pairs
from .symmat import SymmetricMatrix, batch_commutation_defect, gamma3_arrays

KINDS = ("zeldovich-type", "polynomial-family", "wkb-augmented", "radial", "custom")


@dataclass(frozen=True)
class TimePolynomial:
    coefficients: tuple[float, ...]

    def __init__(self, coefficients: Sequence[float]):
        c = tuple(float(x) for x in coefficients) or (0.0,)
        object.__setattr__(self, "coefficients", c)

    def __call__(self, t):
        return npoly.polyval(t, self.coefficients)

    value = __call__

    def derivative(self) -> "TimePolynomial":
        return TimePolynomial(npoly.polyder(self.coefficients) if len(self.coefficients) > 1 else [0.0])

    @classmethod
    def power(cls, k: int, scale: float = 1.0) -> "TimePolynomial":
        return cls([0.0] * k + [scale])


@dataclass(frozen=True)
class FlowPotential:
    dim: int
    quad_mu: TimePolynomial
    blocks: tuple[tuple[Any, TimePolynomial], ...] = ()
    kind: str = "custom"
    time_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if abs(self.quad_mu(0.0) - 1.0) > 1e-12:
            raise ValueError("quadratic coefficient must equal 1 at t=0 (identity map)")
        for term, mu in self.blocks:
            if term.dim != self.dim:
                raise ValueError(f"block of dim {term.dim} in a dim-{self.dim} flow")
            if abs(mu(0.0)) > 1e-12:
                raise ValueError("every block coefficient must vanish at t=0")
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "time_range", tuple(float(v) for v in self.time_range))

    def with_time_range(self, T: float) -> "FlowPotential":
        return FlowPotential(self.dim, self.quad_mu, self.blocks, self.kind, (0.0, float(T)))

    # batched kernels; X has shape (N, d)

    def value(self, X, t) -> np.ndarray:
        X = np.atleast_2d(X)
        out = 0.5 * self.quad_mu(t) * np.sum(X * X, axis=1)
        for term, mu in self.blocks:
            out = out + mu(t) * term.numeric_value(X)
        return out

    def gradient(self, X, t, dt: bool = False) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        q2 = self.quad_mu.derivative() if dt else self.quad_mu
        out = q2(t) * X
        for term, mu in self.blocks:
            m = mu.derivative()(t) if dt else mu(t)
            if m:
                out = out + m * term.numeric_gradient(X)
        return out

    def hessian(self, X, t, dt: bool = False) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        q2 = self.quad_mu.derivative() if dt else self.quad_mu
        out = np.broadcast_to(q2(t) * np.eye(self.dim), (X.shape[0], self.dim, self.dim)).copy()
        for term, mu in self.blocks:
            m = mu.derivative()(t) if dt else mu(t)
            if m:
                out += m * term.numeric_hessian(X)
        return out


# ---------------------------------------------------------------------------
# Point-wise operations
# ---------------------------------------------------------------------------

def lagrangian_map(flow: FlowPotential, q, t: float) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    x = flow.gradient(q, t)
    return x[0] if q.ndim == 1 else x


def lagrangian_velocity(flow: FlowPotential, q, t: float) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    v = flow.gradient(q, t, dt=True)
    return v[0] if q.ndim == 1 else v


def flow_hessian(flow: FlowPotential, q, t: float) -> SymmetricMatrix:
    return SymmetricMatrix(flow.hessian(np.asarray(q, dtype=float), t)[0])


def flow_hessian_dt(flow: FlowPotential, q, t: float) -> SymmetricMatrix:
    return SymmetricMatrix(flow.hessian(np.asarray(q, dtype=float), t, dt=True)[0])


def _asym(M: np.ndarray) -> np.ndarray:
    """||M - M^T|| / ||M|| on stacks; 0 where M vanishes."""
    n = np.linalg.norm(M, axis=(-2, -1))
    a = np.linalg.norm(M - np.swapaxes(M, -1, -2), axis=(-2, -1))
    out = np.zeros_like(n)
    ok = n > 0
    out[ok] = a[ok] / n[ok]
    return out


def intermediate_map_symmetry(flow: FlowPotential, q, t: float, tau: float) -> float:
    """Asymmetry of J = H(tau) H(t)^{-1}: zero iff the (t, tau) map is a gradient at q."""
    if tau < t:
        raise ValueError("need t <= tau")
    if tau == t:
        return 0.0  # J is the identity
    Ht = flow.hessian(np.asarray(q, dtype=float), t)
    Htau = flow.hessian(np.asarray(q, dtype=float), tau)
    if abs(np.linalg.det(Ht[0])) < 1e-300:
        raise np.linalg.LinAlgError("Hessian singular at the initial time")
    J = np.linalg.solve(np.swapaxes(Ht, -1, -2), np.swapaxes(Htau, -1, -2))
    J = np.swapaxes(J, -1, -2)
    return float(_asym(J)[0])


class NoPreimageError(RuntimeError):
    pass


@dataclass
class EulerianVelocity:
    x: np.ndarray
    q: np.ndarray
    velocity: np.ndarray
    product: np.ndarray          # H^{-1} dH/dt at the preimage
    asymmetry: float
    iterations: int
    residual: float


def invert_map(flow: FlowPotential, x, t: float, max_iter: int = 50, q0=None):
    """Damped Newton solve of grad Phi(q, t) = x; returns (q, iterations, residual)."""
    x = np.asarray(x, dtype=float)
    q = x.copy() if q0 is None else np.asarray(q0, dtype=float).copy()
    target = 1e-12 * (1 + np.linalg.norm(x))
    r = flow.gradient(q, t)[0] - x
    res = np.linalg.norm(r)
    for it in range(max_iter + 1):
        if res < target:
            return q, it, float(res)
        if it == max_iter:
            break
        H = flow.hessian(q, t)[0]
        try:
            step = np.linalg.solve(H, r)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        while lam > 1e-8:
            qn = q - lam * step
            rn = flow.gradient(qn, t)[0] - x
            if np.linalg.norm(rn) < res:
                break
            lam *= 0.5
        else:
            break
        q, r, res = qn, rn, np.linalg.norm(rn)
    raise NoPreimageError(f"Newton inversion failed at x={x.tolist()}, t={t} (residual {res:.3g})")


def eulerian_velocity(flow: FlowPotential, x, t: float, max_iter: int = 50) -> EulerianVelocity:
    q, it, res = invert_map(flow, x, t, max_iter)
    H = flow.hessian(q, t)[0]
    Hd = flow.hessian(q, t, dt=True)[0]
    M = np.linalg.solve(H, Hd)
    return EulerianVelocity(
        np.asarray(x, dtype=float), q, flow.gradient(q, t, dt=True)[0], M, float(_asym(M[None])[0]), it, res
    )


# ---------------------------------------------------------------------------
# Invariants along trajectories
# ---------------------------------------------------------------------------

def g_values(H: np.ndarray) -> np.ndarray:
    """Frame invariants of Hessian stacks: (H11 - H22)/H12 in 2-D, (g1, g2, g3) in 3-D.

    Poles and (near-)isotropic Hessians give NaN.
    """
    H = np.asarray(H, dtype=float)
    d = H.shape[-1]
    dev = H - np.trace(H, axis1=-2, axis2=-1)[..., None, None] / d * np.eye(d)
    iso = np.linalg.norm(dev, axis=(-2, -1)) < 1e-9 * np.linalg.norm(H, axis=(-2, -1))
    if d == 2:
        h12 = H[..., 0, 1]
        bad = iso | (np.abs(h12) < TOL.pole * np.linalg.norm(dev, axis=(-2, -1)))
        with np.errstate(divide="ignore", invalid="ignore"):
            g = (H[..., 0, 0] - H[..., 1, 1]) / h12
        return np.where(bad, np.nan, g)
    if d == 3:
        gam = gamma3_arrays(dev)
        g = np.stack([gam["1"] + gam["3"], gam["2"] + 1.0, gam["3"]], axis=-1)
        return np.where(iso[..., None], np.nan, g)
    raise ValueError("frame invariants are implemented for d = 2 and d = 3")


@dataclass
class InvariantDrift:
    times: list[float]
    values: list                # per time: g (d=2) or [g1, g2, g3] (d=3); None at poles
    mean: list
    drift: float
    poles: int


def _relative_drift(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """G shape (T, N, c) with NaN poles -> (per-point drift (N,), mean (N, c))."""
    with np.errstate(invalid="ignore"):
        mean = np.nanmean(G, axis=0)
        rel = np.abs(G - mean) / np.maximum(np.abs(mean), 1.0)
    drift = np.nanmax(np.where(np.isnan(rel), -np.inf, rel), axis=(0, 2))
    return np.where(np.isfinite(drift), drift, 0.0), mean


def g_invariant_along_trajectory(flow: FlowPotential, q, times: Sequence[float]) -> InvariantDrift:
    q = np.asarray(q, dtype=float)[None, :]
    G = np.stack([np.atleast_1d(g_values(flow.hessian(q, t))[0]) for t in times])[:, None, :]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        drift, mean = _relative_drift(G)
    vals = [None if np.any(np.isnan(row)) else (row.tolist() if row.size > 1 else float(row[0])) for row in G[:, 0]]
    m = mean[0]
    return InvariantDrift(
        [float(t) for t in times], vals, m.tolist(), float(drift[0]), int(sum(v is None for v in vals))
    )


# ---------------------------------------------------------------------------
# Verification harness
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    num_points: int
    num_time_pairs: int
    seed: int
    box: tuple[float, float]
    time_range: tuple[float, float]
    commutation_defect: float
    bipotential_defect: float
    intermediate_defect: float
    convexity_ok: bool
    min_eigenvalue: float
    invariant_drift: float
    eigenframe_drift: float
    worst_point: list[float]
    worst_times: list[float]
    shell_crossings: int
    shell_crossing_examples: list = field(default_factory=list)
    frame_samples_skipped: int = 0

    def max_defect(self) -> float:
        return max(
            self.commutation_defect, self.bipotential_defect, self.intermediate_defect, self.eigenframe_drift
        )

    def passed(self, tol: float = TOL.omnipotential) -> bool:
        return self.convexity_ok and self.max_defect() < tol

    def to_json(self) -> dict:
        d = asdict(self)
        d["max_defect"] = self.max_defect()
        return _jsonable(d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _frame_drift(H: np.ndarray, rel_gap_min: float = 1e-4) -> tuple[np.ndarray, int]:
    """Max eigenframe angle between each time and a reference time, per point.

    H has shape (T, N, d, d).  The isotropic part is removed first, so an
    identity-dominated Hessian still has a well-defined frame.  Samples whose
    deviatoric eigenvalues are closer than ``rel_gap_min`` (relative) are skipped.
    """
    T, N, d, _ = H.shape
    dev = H - np.trace(H, axis1=-2, axis2=-1)[..., None, None] / d * np.eye(d)
    w, U = np.linalg.eigh(dev)
    scale = np.linalg.norm(dev, axis=(-2, -1))
    gap = np.min(np.diff(w, axis=-1), axis=-1)
    good = (scale > 0) & (gap > rel_gap_min * np.where(scale > 0, scale, 1.0))
    gap_rel = np.where(good, gap / np.where(scale > 0, scale, 1), -1.0)
    ref = np.argmax(gap_rel, axis=0)                      # best-conditioned time per point
    Uref = U[ref, np.arange(N)]                            # (N, d, d), columns are vectors
    ok_ref = good[ref, np.arange(N)]
    drift = np.zeros(N)
    skipped = 0
    for k in range(T):
        use = good[k] & ok_ref
        skipped += int(np.sum(~good[k]))
        if not np.any(use):
            continue
        # |cos| between every pair of reference / current eigenvectors
        A, B = Uref[use], U[k, use]
        C = np.einsum("nij,nik->njk", A, B)
        match = np.argmax(np.abs(C), axis=2)                # (n, d)
        sgn = np.sign(np.take_along_axis(C, match[..., None], axis=2))[..., 0]
        W = np.take_along_axis(B, match[:, None, :], axis=2) * sgn[:, None, :]
        # chord length gives an angle accurate near zero, unlike arccos of |cos|
        chord = np.linalg.norm(A - W, axis=1)
        ang = 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))
        drift[use] = np.maximum(drift[use], np.max(ang, axis=1))
    return drift, skipped


def verify_omnipotential(
    flow: FlowPotential,
    spec: SamplingSpec | None = None,
    points: np.ndarray | None = None,
) -> VerificationReport:
    """Commutation, bi-potentiality, intermediate-map, convexity and frame checks on samples.

    Points with a Hessian eigenvalue below the shell-crossing threshold at some
    sampled time are reported as events and excluded from the defect maxima.
    """
    spec = spec or SamplingSpec(time_range=flow.time_range)
    X = points if points is not None else box_points(flow.dim, spec.num_points, spec.box, spec.seed)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, d = X.shape
    pairs = time_pairs(spec.num_time_pairs, spec.time_range, spec.seed)
    times, inv = np.unique(pairs.ravel(), return_inverse=True)
    inv = inv.reshape(pairs.shape)

    H = np.stack([flow.hessian(X, t) for t in times])            # (T, N, d, d)
    Hd = np.stack([flow.hessian(X, t, dt=True) for t in times])
    eig = np.linalg.eigvalsh(H)
    min_eig_pt = eig[..., 0]                                      # (T, N)
    crossed = min_eig_pt < TOL.shell_crossing
    bad_pt = np.any(crossed, axis=0)
    events = [
        {"q": X[n].tolist(), "t": float(times[k]), "min_eigenvalue": float(min_eig_pt[k, n])}
        for k, n in zip(*np.nonzero(crossed))
    ]
    keep = ~bad_pt

    worst = (0.0, None, None)

    def track(vals: np.ndarray, tpair):
        nonlocal worst
        v = np.where(keep, vals, 0.0)
        i = int(np.argmax(v))
        if v[i] > worst[0]:
            worst = (float(v[i]), X[i].tolist(), list(tpair))
        return float(np.max(v)) if v.size else 0.0

    comm = inter = 0.0
    for (i1, i2), (t1, t2) in zip(inv, pairs):
        comm = max(comm, track(batch_commutation_defect(H[i1], H[i2]), (t1, t2)))
        with np.errstate(all="ignore"):
            Hs = np.where(keep[:, None, None], H[i1], np.eye(d))
            J = np.swapaxes(np.linalg.solve(np.swapaxes(Hs, -1, -2), np.swapaxes(H[i2], -1, -2)), -1, -2)
        inter = max(inter, track(_asym(J), (t1, t2)))

    bip = 0.0
    for k, t in enumerate(times):
        Hs = np.where(keep[:, None, None], H[k], np.eye(d))
        M = np.linalg.solve(Hs, Hd[k])
        bip = max(bip, track(_asym(M), (t, t)))

    fd, skipped = _frame_drift(H[:, keep]) if np.any(keep) else (np.zeros(0), 0)
    frame = float(np.max(fd)) if fd.size else 0.0

    inv_drift = 0.0
    if d in (2, 3) and np.any(keep):
        G = g_values(H[:, keep])
        G = G[..., None] if G.ndim == 2 else G
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            dr, _ = _relative_drift(G)
        inv_drift = float(np.max(dr)) if dr.size else 0.0

    min_eig = float(np.min(min_eig_pt))
    return VerificationReport(
        num_points=N,
        num_time_pairs=len(pairs),
        seed=spec.seed,
        box=tuple(spec.box),
        time_range=tuple(spec.time_range),
        commutation_defect=comm,
        bipotential_defect=bip,
        intermediate_defect=inter,
        convexity_ok=bool(min_eig > TOL.shell_crossing),
        min_eigenvalue=min_eig,
        invariant_drift=inv_drift,
        eigenframe_drift=frame,
        worst_point=worst[1] or [],
        worst_times=[float(v) for v in (worst[2] or [])],
        shell_crossings=len(events),
        shell_crossing_examples=events[:10],
        frame_samples_skipped=skipped,
    )


def convex_time_horizon(
    flow: FlowPotential,
    t_max: float,
    box: tuple[float, float] = (-1.0, 1.0),
    num_points: int = 1024,
    num_times: int = 64,
    seed: int = 0,
    margin: float = 0.5,
) -> float:
    """Largest T <= t_max for which sampled Hessians stay positive definite on [0, T].

    The result is shrunk by ``margin`` below the first failing time so the
    returned horizon sits strictly inside the sampled convexity window.  This
    is a sampled estimate, not a certificate.
    """
    X = box_points(flow.dim, num_points, box, seed)
    ts = np.linspace(0.0, t_max, num_times + 1)[1:]
    for k, t in enumerate(ts):
        if np.min(np.linalg.eigvalsh(flow.hessian(X, t))[:, 0]) < TOL.shell_crossing:
            prev = ts[k - 1] if k else 0.0
            return float(margin * prev) if k else float(margin * t / num_times)
    return float(t_max)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def _tp(c) -> TimePolynomial:
    return c if isinstance(c, TimePolynomial) else TimePolynomial(c)


def zeldovich_flow(phi0, T: float = 1.0) -> FlowPotential:
    """|q|^2/2 + t phi0(q): straight trajectories with constant velocity grad phi0."""
    return FlowPotential(phi0.dim, TimePolynomial([1.0]), ((phi0, TimePolynomial([0.0, 1.0])),),
                         "zeldovich-type", (0.0, T))


def zeldovich_type_flow(phi0, mu=(1.0, 0.5), eta=(0.0, 1.0), T: float = 1.0) -> FlowPotential:
    """mu(t) |q|^2/2 + eta(t) phi0(q)."""
    return FlowPotential(phi0.dim, _tp(mu), ((phi0, _tp(eta)),), "zeldovich-type", (0.0, T))


def radial_flow(dim: int, mu2=(1.0,), powers: Sequence[tuple[int, Sequence[float]]] = ((2, (0.0, 1.0)),),
                T: float = 1.0) -> FlowPotential:
    """mu2(t)|q|^2/2 + sum mu_k(t) |q|^(2k); trajectories stay on rays through the origin."""
    blocks = tuple((P.radial_polynomial(dim, k), _tp(mu)) for k, mu in powers)
    return FlowPotential(dim, _tp(mu2), blocks, "radial", (0.0, T))


def exa2d_flow(a=1, b=0, ks: Sequence[int] = (2, 3), mus=None, T: float = 0.1) -> FlowPotential:
    """|q|^2/2 + sum_k mu_2k(t) p_2k(q) with the 2-D family at parameters (a, b).

    Default coefficients mu_2k(t) = t^(k-1).  At degenerate parameters the
    derivative solutions replace the vanishing family member.
    """
    blocks = []
    for idx, k in enumerate(ks):
        mu = _tp(mus[idx]) if mus is not None else TimePolynomial.power(k - 1)
        for p in P.p2_even_solutions(k, a, b):
            blocks.append((p, mu))
    return FlowPotential(2, TimePolynomial([1.0]), tuple(blocks), "polynomial-family", (0.0, T))


def polydd_flow(d: int = 3, c=3, mu4=(0.0, 0.0, 1.0), mu6=(0.0, 0.0, 0.0, 1.0), T: float = 0.2) -> FlowPotential:
    blocks = ((P.family_pd4(d, c), _tp(mu4)), (P.family_pd6(d, c), _tp(mu6)))
    return FlowPotential(d, TimePolynomial([1.0]), blocks, "polynomial-family", (0.0, T))


def xpoly_flow(c=1, n_max: int = 4, mus=None, T: float = 0.1) -> FlowPotential:
    """3-D flow with symmetric blocks of degree 4..2 n_max; default mu_2n(t) = t^(n-1)."""
    blocks = []
    for idx, n in enumerate(range(2, n_max + 1)):
        mu = _tp(mus[idx]) if mus is not None else TimePolynomial.power(n - 1)
        blocks.append((P.family_p3_2n(n, c), mu))
    return FlowPotential(3, TimePolynomial([1.0]), tuple(blocks), "polynomial-family", (0.0, T))


def control_flow(T: float = 0.2) -> FlowPotential:
    """|q|^2/2 + t q1^2 q2^2 + t^2 q1^4: Hessians of the two blocks do not commute."""
    b1 = P.HomogeneousPolynomial(2, 4, {(2, 2): 1})
    b2 = P.HomogeneousPolynomial(2, 4, {(4, 0): 1})
    return FlowPotential(2, TimePolynomial([1.0]), ((b1, TimePolynomial([0, 1])), (b2, TimePolynomial([0, 0, 1]))),
                         "custom", (0.0, T))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def flow_to_json(flow: FlowPotential) -> dict:
    blocks = []
    for term, mu in flow.blocks:
        entry = {"mu": list(mu.coefficients)}
        if isinstance(term, P.Polynomial):
            entry["poly"] = term.to_json()
        else:
            entry["wkb"] = term.to_json()
        blocks.append(entry)
    return {
        "dim": flow.dim,
        "kind": flow.kind,
        "quad_mu": list(flow.quad_mu.coefficients),
        "blocks": blocks,
        "time_range": list(flow.time_range),
    }


def flow_from_json(data) -> FlowPotential:
    if isinstance(data, str):
        data = json.loads(data)
    blocks = []
    for entry in data["blocks"]:
        if "poly" in entry:
            term = P.Polynomial.from_json(entry["poly"])
        elif "wkb" in entry:
            from .wkb2d import WkbTerm

            term = WkbTerm.from_json(entry["wkb"])
        else:
            raise ValueError("block needs a 'poly' or 'wkb' entry")
        blocks.append((term, TimePolynomial(entry["mu"])))
    return FlowPotential(
        int(data["dim"]), TimePolynomial(data["quad_mu"]), tuple(blocks), data.get("kind", "custom"),
        tuple(data.get("time_range", (0.0, 1.0))),
    )
