"""Numerical defaults shared across modules, gathered in dataclasses."""
from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    pole: float = 1e-12            # |eigenvector component| below this makes a ratio undefined
    distinct_gap: float = 1e-8     # relative eigenvalue gap for a well-defined eigenframe
    relations: float = 1e-9        # relative tolerance of invariant relation checks
    omnipotential: float = 1e-9    # pass threshold for verification defects
    shell_crossing: float = 1e-6   # min Hessian eigenvalue treated as loss of invertibility


@dataclass(frozen=True)
class SamplingSpec:
    """Where and how densely a flow is probed during verification."""

    num_points: int = 256
    num_time_pairs: int = 16
    box: tuple[float, float] = (-1.0, 1.0)
    time_range: tuple[float, float] = (0.0, 1.0)
    seed: int = 0


@dataclass(frozen=True)
class WkbConfig:
    grid_n: int = 81
    box: tuple[float, float] = (-1.0, 1.0)
    kappa: float = 50.0
    order: int = 1                # P: highest amplitude order kept
    epsilon: float = 0.05
    branch: int = 2               # eigen-branch the eikonal gradient follows (2 = larger eigenvalue)
    fd_order: int = 6             # finite-difference accuracy on the grid
    margin: int = 4               # nodes skipped at each edge when measuring residuals
    time_horizon: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class MakConfig:
    epsilon_shrink: float = 0.25
    cost_resolution_bits: int = 32
    shuffle_seed: int = 0


DEFAULT_TOLERANCES = Tolerances()


def thread_count() -> int:
    """Worker threads for parallel sweeps, from OMNIFLOW_THREADS (default: CPU count)."""
    raw = os.environ.get("OMNIFLOW_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1
