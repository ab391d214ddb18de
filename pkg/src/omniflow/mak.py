"""Discrete quadratic-cost transport between a Lagrangian grid and its image.

Two assignment solvers are provided and kept fully independent so that one can
serve as the oracle of the other: an epsilon-scaling forward auction and a
shortest-augmenting-path Hungarian method.  Both run on the same integerized
cost matrix, so their optimal costs must agree exactly.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES as TOL, MakConfig
from .flow import FlowPotential, lagrangian_map
from .sampling import box_points


class ShellCrossingError(ValueError):
    """The map is not invertible (or not convex) somewhere on the requested grid."""


@dataclass
class PointCloudPair:
    lagrangian: np.ndarray                       # (N, d)
    eulerian: np.ndarray                         # (N, d)
    true_permutation: np.ndarray | None = None   # Lagrangian index -> Eulerian index
    grid_shape: tuple[int, ...] | None = None
    spacing: float | None = None
    time: float | None = None

    def __post_init__(self):
        self.lagrangian = np.atleast_2d(np.asarray(self.lagrangian, dtype=float))
        self.eulerian = np.atleast_2d(np.asarray(self.eulerian, dtype=float))
        if self.lagrangian.shape != self.eulerian.shape:
            raise ValueError(f"point counts differ: {self.lagrangian.shape} vs {self.eulerian.shape}")
        if not (np.all(np.isfinite(self.lagrangian)) and np.all(np.isfinite(self.eulerian))):
            raise ValueError("non-finite coordinates")
        if self.true_permutation is not None:
            self.true_permutation = np.asarray(self.true_permutation, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.lagrangian.shape[0]

    @property
    def dim(self) -> int:
        return self.lagrangian.shape[1]

    def to_json(self) -> dict:
        return {
            "lagrangian": self.lagrangian.tolist(),
            "eulerian": self.eulerian.tolist(),
            "permutation": None if self.true_permutation is None else self.true_permutation.tolist(),
            "grid_shape": None if self.grid_shape is None else list(self.grid_shape),
            "spacing": self.spacing,
            "time": self.time,
        }

    @classmethod
    def from_json(cls, data) -> "PointCloudPair":
        return cls(
            np.array(data["lagrangian"], dtype=float),
            np.array(data["eulerian"], dtype=float),
            data.get("permutation"),
            tuple(data["grid_shape"]) if data.get("grid_shape") else None,
            data.get("spacing"),
            data.get("time"),
        )


def regular_grid(grid_n: int, dim: int, box: tuple[float, float] = (-1.0, 1.0)) -> tuple[np.ndarray, float]:
    """Cell-centred grid points in C order, and the spacing."""
    lo, hi = box
    h = (hi - lo) / grid_n
    axis = lo + (np.arange(grid_n) + 0.5) * h
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), h


def generate_pair(
    flow: FlowPotential,
    grid_n: int,
    box: tuple[float, float] = (-1.0, 1.0),
    t: float | None = None,
    convexity_samples: int = 1024,
) -> PointCloudPair:
    """Lagrangian grid and its image under the time-t map; refuses past shell-crossing."""
    t = flow.time_range[1] if t is None else float(t)
    Q, h = regular_grid(grid_n, flow.dim, box)
    probe = np.vstack([Q, box_points(flow.dim, convexity_samples, box, seed=0)])
    lam = np.linalg.eigvalsh(flow.hessian(probe, t))[:, 0]
    i = int(np.argmin(lam))
    if lam[i] < TOL.shell_crossing:
        raise ShellCrossingError(
            f"Hessian eigenvalue {lam[i]:.3g} at q={probe[i].tolist()}, t={t}: map not convex there"
        )
    X = lagrangian_map(flow, Q, t)
    return PointCloudPair(Q, X, np.arange(len(Q)), (grid_n,) * flow.dim, h, t)


def shuffle_pair(pair: PointCloudPair, seed: int = 0) -> PointCloudPair:
    """Relabel the Eulerian points at random, carrying the ground truth along."""
    rng = np.random.default_rng(seed)
    pi = rng.permutation(pair.n)               # new index k holds old point pi[k]
    inv = np.empty_like(pi)
    inv[pi] = np.arange(pair.n)
    truth = None if pair.true_permutation is None else inv[pair.true_permutation]
    return PointCloudPair(pair.lagrangian, pair.eulerian[pi], truth, pair.grid_shape, pair.spacing, pair.time)


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------

def cost_matrix(Q: np.ndarray, X: np.ndarray) -> np.ndarray:
    """C[i, j] = |X[j] - Q[i]|^2."""
    C = np.sum(Q * Q, axis=1)[:, None] + np.sum(X * X, axis=1)[None, :] - 2.0 * Q @ X.T
    return np.maximum(C, 0.0)


def integerize(C: np.ndarray, bits: int = 32) -> np.ndarray:
    """Round costs to integers at 2^bits relative resolution."""
    if not np.all(np.isfinite(C)):
        raise ValueError("non-finite costs")
    cmax = float(np.max(C)) if C.size else 0.0
    if cmax == 0.0:
        return np.zeros(C.shape, dtype=np.int64)
    return np.rint(C / cmax * float(2**bits)).astype(np.int64)


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------

@dataclass
class TransportAssignment:
    permutation: np.ndarray
    total_cost: float
    integer_cost: int
    method: str
    epsilon_final: float | None = None
    iterations: int = 0
    runtime_ms: float = 0.0
    epsilon_schedule: list = field(default_factory=list)


def hungarian(C: np.ndarray) -> np.ndarray:
    """Exact min-cost perfect matching by shortest augmenting paths, O(N^3).

    Works with integer or float costs; returns row -> column permutation.
    """
    C = np.asarray(C)
    n = C.shape[0]
    if C.shape != (n, n):
        raise ValueError("cost matrix must be square")
    integer = np.issubdtype(C.dtype, np.integer)
    dt = np.int64 if integer else float
    inf = np.iinfo(np.int64).max // 4 if integer else np.inf
    u = np.zeros(n + 1, dtype=dt)
    v = np.zeros(n + 1, dtype=dt)
    owner = np.zeros(n + 1, dtype=np.int64)   # owner[j]: row matched to column j (1-based, 0 = none)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(n + 1, inf, dtype=dt)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used[1:]
            cur = C[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    perm = np.empty(n, dtype=np.int64)
    perm[owner[1:] - 1] = np.arange(n)
    return perm


def auction(C: np.ndarray, shrink: float = 0.25, eps0: int | None = None):
    """Forward auction with epsilon scaling on an integer cost matrix.

    Costs are scaled by N + 1 internally so that the final phase (epsilon = 1 in
    scaled units) corresponds to epsilon = 1/(N+1) < 1/N in the original units,
    which makes the result an exact optimum for integer costs.

    Returns (permutation, epsilon_final in original units, rounds, schedule).
    """
    C = np.asarray(C)
    if not np.issubdtype(C.dtype, np.integer):
        raise TypeError("auction expects integer costs; use integerize() first")
    n = C.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0.0, 0, []
    if n == 1:
        return np.zeros(1, dtype=np.int64), 1.0 / 2, 0, []
    scale = n + 1
    A = -(C.astype(np.int64) * scale)          # benefits
    eps = int(eps0) if eps0 is not None else max(int(np.max(C)) * scale // 2, 1)
    prices = np.zeros(n, dtype=np.int64)
    rounds = 0
    schedule = []
    rows = np.arange(n)
    while True:
        schedule.append(eps)
        owner = np.full(n, -1, dtype=np.int64)       # object -> bidder
        assigned = np.full(n, -1, dtype=np.int64)    # bidder -> object
        unassigned = rows
        while unassigned.size:
            rounds += 1
            vals = A[unassigned] - prices[None, :]
            best = np.argmax(vals, axis=1)
            v1 = vals[np.arange(len(unassigned)), best]
            vals[np.arange(len(unassigned)), best] = np.iinfo(np.int64).min
            v2 = np.max(vals, axis=1)
            bids = prices[best] + (v1 - v2) + eps
            # highest bid per object wins; lexsort makes the winner deterministic
            order = np.lexsort((-unassigned, bids, best))
            last = np.r_[best[order][1:] != best[order][:-1], True]
            win = order[last]
            objs = best[win]
            prev = owner[objs]
            displaced = prev[prev >= 0]
            assigned[displaced] = -1
            owner[objs] = unassigned[win]
            assigned[unassigned[win]] = objs
            prices[objs] = bids[win]
            unassigned = np.nonzero(assigned < 0)[0]
        if eps == 1:
            break
        eps = max(1, int(eps * shrink))
    return assigned, 1.0 / scale, rounds, schedule


def solve_assignment(
    pair: PointCloudPair, method: str = "auction", config: MakConfig | None = None
) -> TransportAssignment:
    config = config or MakConfig()
    C = cost_matrix(pair.lagrangian, pair.eulerian)
    Ci = integerize(C, config.cost_resolution_bits)
    t0 = time.perf_counter()
    if method == "auction":
        perm, eps_final, rounds, sched = auction(Ci, config.epsilon_shrink)
    elif method == "hungarian":
        perm, eps_final, rounds, sched = hungarian(Ci), None, pair.n, []
    else:
        raise ValueError(f"unknown solver {method!r}")
    ms = (time.perf_counter() - t0) * 1e3
    _check_bijection(perm, pair.n)
    idx = np.arange(pair.n)
    return TransportAssignment(
        perm,
        float(np.sum((pair.eulerian[perm] - pair.lagrangian) ** 2)),
        int(np.sum(Ci[idx, perm])),
        method,
        eps_final,
        rounds,
        ms,
        sched,
    )


def _check_bijection(perm: np.ndarray, n: int):
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise RuntimeError("solver returned a non-bijective assignment")


# ---------------------------------------------------------------------------
# Reconstruction and diagnostics
# ---------------------------------------------------------------------------

@dataclass
class MakReport:
    match_fraction: float | None
    total_cost: float
    integer_cost: int
    solver: str
    epsilon_final: float | None
    runtime_ms: float
    n: int
    assignment: TransportAssignment = field(repr=False)
    displacement: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        return {
            "match_fraction": self.match_fraction,
            "total_cost": self.total_cost,
            "integer_cost": self.integer_cost,
            "solver": self.solver,
            "epsilon_final": self.epsilon_final,
            "runtime_ms": self.runtime_ms,
            "n": self.n,
        }


def mak_reconstruct(pair: PointCloudPair, method: str = "auction", config: MakConfig | None = None) -> MakReport:
    """Recover the Lagrangian-to-Eulerian pairing from the two point sets alone."""
    a = solve_assignment(pair, method, config)
    match = None
    if pair.true_permutation is not None:
        match = float(np.mean(a.permutation == pair.true_permutation))
    disp = pair.eulerian[a.permutation] - pair.lagrangian
    return MakReport(match, a.total_cost, a.integer_cost, method, a.epsilon_final, a.runtime_ms, pair.n, a, disp)


def displacement_divergence(pair: PointCloudPair, assignment: TransportAssignment | np.ndarray) -> np.ndarray:
    """-div_q (x - q) on the Lagrangian grid (second-order differences, one-sided at edges)."""
    if pair.grid_shape is None or pair.spacing is None:
        raise ValueError("Lagrangian points do not form a regular grid")
    perm = assignment.permutation if isinstance(assignment, TransportAssignment) else np.asarray(assignment)
    D = (pair.eulerian[perm] - pair.lagrangian).reshape(*pair.grid_shape, pair.dim)
    div = np.zeros(pair.grid_shape)
    for k in range(pair.dim):
        div += np.gradient(D[..., k], pair.spacing, axis=k, edge_order=2)
    return -div.ravel()


def no_improving_swaps(pair: PointCloudPair, perm: np.ndarray, samples: int = 10_000, seed: int = 0) -> bool:
    """Spot check of cyclical monotonicity on random 2-swaps."""
    rng = np.random.default_rng(seed)
    i = rng.integers(0, pair.n, samples)
    j = rng.integers(0, pair.n, samples)
    Q, X = pair.lagrangian, pair.eulerian[perm]
    cur = np.sum((X[i] - Q[i]) ** 2, 1) + np.sum((X[j] - Q[j]) ** 2, 1)
    swp = np.sum((X[j] - Q[i]) ** 2, 1) + np.sum((X[i] - Q[j]) ** 2, 1)
    return bool(np.all(cur <= swp + 1e-12 * (1 + swp)))


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def write_points_csv(path, points: np.ndarray):
    np.savetxt(path, np.atleast_2d(points), delimiter=",", fmt="%.17g")


def read_points_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))


def write_permutation(path, perm: Sequence[int]):
    Path(path).write_text("".join(f"{int(p)}\n" for p in perm))


def read_permutation(path) -> np.ndarray:
    return np.array([int(s) for s in Path(path).read_text().split()], dtype=np.int64)


def load_pair(lagrangian_csv, eulerian_csv, permutation_file=None) -> PointCloudPair:
    Q = read_points_csv(lagrangian_csv)
    X = read_points_csv(eulerian_csv)
    perm = read_permutation(permutation_file) if permutation_file else None
    return PointCloudPair(Q, X, perm)


def save_pair_json(path, pair: PointCloudPair):
    Path(path).write_text(json.dumps(pair.to_json()))
