"""Symmetric matrices, commutators, eigenframes and eigendirection invariants.

The invariants gamma[k, m, n] are elementary symmetric polynomials of degree k in
the component ratios beta_i = v_i[m] / v_i[n] taken over all eigenvectors v_i.
They depend only on the set of eigendirections, not on the eigenvalues.
Indices m, n, k are 1-based throughout, as in the usual matrix notation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES as TOL


class _Pole:
    """Marker for an invariant whose defining ratio has a vanishing denominator."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "POLE"

    def __bool__(self):
        return False

    def __reduce__(self):
        return (_Pole, ())


POLE = _Pole()


def is_pole(x) -> bool:
    return x is POLE


@dataclass(frozen=True, eq=False)
class SymmetricMatrix:
    """Real symmetric d x d matrix; only the upper triangle of the input is read."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        upper = np.triu(a)
        sym = upper + np.triu(a, 1).T
        sym.setflags(write=False)
        object.__setattr__(self, "entries", sym)

    @classmethod
    def from_upper(cls, dim: int, upper: Sequence[float]) -> "SymmetricMatrix":
        """Build from the row-major upper triangle (including the diagonal)."""
        upper = [float(u) for u in upper]
        if len(upper) != dim * (dim + 1) // 2:
            raise ValueError(f"need {dim * (dim + 1) // 2} upper entries for dim {dim}")
        a = np.zeros((dim, dim))
        a[np.triu_indices(dim)] = upper
        return cls(a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __getitem__(self, idx):
        return self.entries[idx]

    def __matmul__(self, other):
        return self.entries @ np.asarray(other)

    def __add__(self, other):
        return SymmetricMatrix(self.entries + np.asarray(other))

    def __mul__(self, s: float):
        return SymmetricMatrix(self.entries * s)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, SymmetricMatrix) and np.array_equal(self.entries, other.entries)

    def __repr__(self):
        return f"SymmetricMatrix({self.entries.tolist()})"

    def to_json(self) -> dict:
        return {"dim": self.dim, "upper": self.entries[np.triu_indices(self.dim)].tolist()}

    @classmethod
    def from_json(cls, data) -> "SymmetricMatrix":
        return cls.from_upper(int(data["dim"]), data["upper"])


def _mat(x) -> np.ndarray:
    return x.entries if isinstance(x, SymmetricMatrix) else np.asarray(x, dtype=float)


# ---------------------------------------------------------------------------
# Commutators
# ---------------------------------------------------------------------------

class Commutator(NamedTuple):
    matrix: np.ndarray
    defect: float


def commutator(a, b) -> Commutator:
    """a b - b a together with the relative defect ||ab - ba|| / (||a|| ||b||)."""
    A, B = _mat(a), _mat(b)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    AB = A @ B
    # antisymmetric by construction: the lower part is the negated transpose
    C = AB - AB.T if _symmetric(A) and _symmetric(B) else AB - B @ A
    na, nb = np.linalg.norm(A), np.linalg.norm(B)
    defect = 0.0 if na == 0 or nb == 0 else float(np.linalg.norm(C) / (na * nb))
    return Commutator(C, defect)


def _symmetric(A: np.ndarray) -> bool:
    return bool(np.array_equal(A, A.T))


def commutation_defect(a, b) -> float:
    return commutator(a, b).defect


def batch_commutation_defect(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Relative commutator defect for stacks of symmetric matrices, shape (..., d, d)."""
    AB = A @ B
    C = AB - np.swapaxes(AB, -1, -2)
    na = np.linalg.norm(A, axis=(-2, -1))
    nb = np.linalg.norm(B, axis=(-2, -1))
    den = na * nb
    out = np.zeros(den.shape)
    ok = den > 0
    out[ok] = np.linalg.norm(C, axis=(-2, -1))[ok] / den[ok]
    return out


# ---------------------------------------------------------------------------
# Eigenframes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EigenFrame:
    eigenvalues: np.ndarray       # ascending
    eigenvectors: np.ndarray      # row i is the unit eigenvector of eigenvalues[i]
    distinct: bool
    min_gap: float

    def vector(self, i: int) -> np.ndarray:
        return self.eigenvectors[i]


def normalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude component (first one on ties) is positive."""
    V = np.array(vectors, dtype=float)
    for row in V:
        mags = np.abs(row)
        lead = int(np.argmax(mags >= mags.max() - 1e-12))
        if row[lead] < 0:
            row *= -1
    return V


def eigenframe(h) -> EigenFrame:
    H = _mat(h)
    w, U = np.linalg.eigh(H)
    V = normalize_signs(U.T)
    gap = float(np.min(np.diff(w))) if len(w) > 1 else float("inf")
    scale = np.linalg.norm(H)
    distinct = bool(gap > TOL.distinct_gap * scale) if scale > 0 else False
    return EigenFrame(w, V, distinct, gap)


# ---------------------------------------------------------------------------
# Invariants
# ---------------------------------------------------------------------------

def elementary_symmetric(values: Sequence[float], k: int) -> float:
    """e_k(values) via the standard O(n k) recurrence."""
    e = [1.0] + [0.0] * k
    for y in values:
        for j in range(k, 0, -1):
            e[j] += e[j - 1] * y
    return e[k]


def _ratios(V: np.ndarray, m: int, n: int):
    den = V[:, n - 1]
    if np.any(np.abs(den) < TOL.pole):
        return POLE
    return V[:, m - 1] / den


def _check_indices(d: int, k: int, m: int, n: int):
    if not 1 <= k <= d:
        raise ValueError(f"k={k} outside 1..{d}")
    if m == n or not (1 <= m <= d and 1 <= n <= d):
        raise ValueError(f"need distinct indices in 1..{d}, got m={m}, n={n}")


def gamma_invariant(h, k: int, m: int, n: int):
    """gamma[k, m, n] from the eigenframe of ``h``, or POLE when a ratio is undefined."""
    frame = h if isinstance(h, EigenFrame) else eigenframe(h)
    d = frame.eigenvectors.shape[0]
    _check_indices(d, k, m, n)
    beta = _ratios(frame.eigenvectors, m, n)
    if beta is POLE:
        return POLE
    return elementary_symmetric(beta, k)


@dataclass(frozen=True, eq=False)
class InvariantSet:
    dim: int
    values: dict = field(default_factory=dict)  # (k, m, n) -> float or POLE
    distinct: bool = True

    def __getitem__(self, key):
        return self.values[key]

    @property
    def has_pole(self) -> bool:
        return any(v is POLE for v in self.values.values())

    def to_json(self) -> list:
        return [
            {"k": k, "m": m, "n": n, "value": None if v is POLE else v, "pole": v is POLE}
            for (k, m, n), v in sorted(self.values.items())
        ]


def invariant_set(h) -> InvariantSet:
    frame = eigenframe(h)
    d = frame.eigenvectors.shape[0]
    vals = {}
    for m in range(1, d + 1):
        for n in range(1, d + 1):
            if m == n:
                continue
            beta = _ratios(frame.eigenvectors, m, n)
            for k in range(1, d + 1):
                vals[(k, m, n)] = POLE if beta is POLE else elementary_symmetric(beta, k)
    return InvariantSet(d, vals, frame.distinct)


# ---------------------------------------------------------------------------
# Closed forms in three dimensions
# ---------------------------------------------------------------------------

def _closed_parts(H: np.ndarray):
    """Shared pieces of the d=3 closed forms for stacks (..., 3, 3)."""
    h11, h22, h33 = H[..., 0, 0], H[..., 1, 1], H[..., 2, 2]
    h12, h13, h23 = H[..., 0, 1], H[..., 0, 2], H[..., 1, 2]
    den = (h22 - h33) * h12 * h13 + (h13**2 - h12**2) * h23
    num_a = (h11 - h22) * h13 * h23 + (h23**2 - h13**2) * h12
    num_b = (h11 - h33) * h12 * h23 + (h23**2 - h12**2) * h13
    return h11, h22, h12, h13, den, num_a, num_b


def gamma3_arrays(H: np.ndarray) -> dict[str, np.ndarray]:
    """Closed-form gamma[1,2,1], gamma[3,2,1], gamma[2,2,1] for stacks of 3x3 matrices.

    Poles are NaN.  Thresholds: 1e-12 ||H|| for H12, 1e-12 ||H||^3 for the cubic
    denominator.
    """
    H = np.asarray(H, dtype=float)
    scale = np.linalg.norm(H, axis=(-2, -1))
    swap = H[..., [1, 0, 2], :][..., :, [1, 0, 2]]

    def g1_g3(M):
        h11, h22, h12, h13, den, num_a, num_b = _closed_parts(M)
        bad = (np.abs(h12) < TOL.pole * scale) | (np.abs(den) < TOL.pole * scale**3) | (scale == 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            g1 = (h22 - h11) / h12 + (h13 / h12) * num_a / den + num_b / den
            g3 = -num_b / den
        g1 = np.where(bad, np.nan, g1)
        g3 = np.where(bad, np.nan, g3)
        return g1, g3

    g1, g3 = g1_g3(H)
    g1_swapped, _ = g1_g3(swap)
    return {"1": g1, "3": g3, "2": g3 * g1_swapped}


def gamma3_closed_form(h, which: int):
    """gamma[which, 2, 1] for a 3x3 matrix straight from its entries, or POLE."""
    H = _mat(h)
    if H.shape != (3, 3):
        raise ValueError("closed forms are for 3x3 matrices")
    if which not in (1, 2, 3):
        raise ValueError("which must be 1, 2 or 3")
    v = float(gamma3_arrays(H)[str(which)])
    return POLE if np.isnan(v) else v


def viete_roots(h) -> np.ndarray:
    """Roots of beta^3 - g1 beta^2 + g2 beta - g3 built from gamma[k, 2, 1]; sorted."""
    g = [gamma_invariant(h, k, 2, 1) for k in (1, 2, 3)]
    if any(x is POLE for x in g):
        raise ValueError("invariants have a pole; cubic undefined")
    r = np.roots([1.0, -g[0], g[1], -g[2]])
    return np.sort(r.real) if np.allclose(r.imag, 0, atol=1e-8 * max(1, np.max(np.abs(r)))) else r


def candidate_frames(h) -> list[np.ndarray]:
    """The two orthonormal frames compatible with gamma[k, 2, 1], k = 1..3.

    Eigenvectors are taken as (1, beta_i, c_i); orthogonality fixes c_i up to a
    common sign, so both choices are returned (rows are unit vectors).
    """
    beta = viete_roots(h)
    if np.iscomplexobj(beta):
        raise ValueError("complex ratios; no real frame")
    A = {(i, j): -(1 + beta[i] * beta[j]) for i in range(3) for j in range(3) if i < j}
    c1_sq = A[(0, 1)] * A[(0, 2)] / A[(1, 2)]
    if c1_sq < 0:
        raise ValueError("ratios incompatible with an orthonormal frame")
    frames = []
    for s in (1.0, -1.0):
        c1 = s * np.sqrt(c1_sq)
        c = np.array([c1, A[(0, 1)] / c1, A[(0, 2)] / c1])
        F = np.stack([np.ones(3), beta, c], axis=1)
        frames.append(normalize_signs(F / np.linalg.norm(F, axis=1, keepdims=True)))
    return frames


def same_frame(U: np.ndarray, V: np.ndarray, tol: float = 1e-8) -> bool:
    """True when the rows of U and V span the same set of lines (any order, any sign)."""
    M = np.abs(U @ V.T)
    return bool(np.all(np.abs(np.max(M, axis=1) - 1) < tol))


# ---------------------------------------------------------------------------
# Relation checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RelationResult:
    relation: str
    residual: float
    scale: float
    status: str   # "pass" | "fail" | "inconclusive"

    def to_json(self) -> dict:
        return {"relation": self.relation, "residual": self.residual, "status": self.status}


def check_relations(h, tol: float = TOL.relations) -> list[RelationResult]:
    """Evaluate every listed algebraic relation between the invariants of ``h``."""
    H = _mat(h)
    d = H.shape[0]
    inv = invariant_set(H)
    g = inv.values
    out: list[RelationResult] = []

    def record(name, lhs_terms, value, target=0.0):
        if any(t is POLE for t in lhs_terms) or not inv.distinct:
            out.append(RelationResult(name, float("nan"), float("nan"), "inconclusive"))
            return
        scale = max(1.0, sum(abs(float(t)) for t in lhs_terms), abs(target))
        res = abs(value() - target)
        out.append(RelationResult(name, float(res), scale, "pass" if res < tol * scale else "fail"))

    idx = range(1, d + 1)
    for m, n in itertools.combinations(idx, 2):
        a, b = g[(d, m, n)], g[(d, n, m)]
        record(f"prodrel[{m}{n}]", [a, b], lambda a=a, b=b: a * b, 1.0)
    for m, l, n in itertools.permutations(idx, 3):
        a, b, c = g[(d, m, l)], g[(d, l, n)], g[(d, m, n)]
        record(f"prodrel3[{m}{l}{n}]", [a * b if a is not POLE and b is not POLE else POLE, c],
               lambda a=a, b=b, c=c: a * b - c)
    for k in range(1, d):
        for m, n in itertools.permutations(idx, 2):
            a, b, c = g[(k, m, n)], g[(d, m, n)], g[(d - k, n, m)]
            prod = POLE if b is POLE or c is POLE else b * c
            record(f"hessdk[k={k},{m}{n}]", [a, prod], lambda a=a, prod=prod: a - prod)
    if d >= 2:
        for n in idx:
            terms = [g[(2, m, n)] for m in idx if m != n]
            record(f"orthogonality[n={n}]", terms, lambda terms=terms: sum(terms), -d * (d - 1) / 2)
    P = np.eye(d)
    for p in range(1, d):
        P = P @ H
        terms = []
        for n in idx:
            for m in idx:
                if m != n:
                    v = g[(1, m, n)]
                    terms.append(POLE if v is POLE else P[m - 1, n - 1] * v)
        record(f"powH[p={p}]", terms, lambda terms=terms: sum(terms))
    if d == 3:
        seen = set()
        for a, b, c in itertools.permutations((1, 2, 3)):
            if c in seen:
                continue  # the relation is symmetric in the first two labels
            seen.add(c)
            t = [g[(1, b, a)], g[(3, b, a)], g[(1, a, b)], g[(3, a, b)]]
            p1, p2 = g[(3, c, a)], g[(3, c, b)]
            prod = POLE if p1 is POLE or p2 is POLE else p1 * p2
            record(f"impdouble[{a}{b}|{c}]", t + [prod], lambda t=t, prod=prod: sum(t) + prod)
    return out


def relations_pass(report: Sequence[RelationResult]) -> bool:
    return all(r.status == "pass" for r in report)


# ---------------------------------------------------------------------------
# Codiagonalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CodiagonalResult:
    codiagonalizable: bool
    defect: float
    diagonal_residual: float   # off-diagonal mass of b in a's eigenframe (NaN when not checked)

    def __bool__(self):
        return self.codiagonalizable


def codiagonalizable(a, b, tol: float = 1e-9) -> CodiagonalResult:
    A, B = _mat(a), _mat(b)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    defect = commutation_defect(A, B)
    ok = defect < tol
    resid = float("nan")
    frame = eigenframe(A)
    if ok and frame.distinct:
        D = frame.eigenvectors @ B @ frame.eigenvectors.T
        nb = np.linalg.norm(B)
        off = D - np.diag(np.diag(D))
        resid = float(np.linalg.norm(off) / nb) if nb > 0 else 0.0
        ok = resid < tol
    return CodiagonalResult(bool(ok), defect, resid)
