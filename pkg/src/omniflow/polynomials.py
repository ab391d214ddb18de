"""Exact sparse polynomials and the homogeneous building blocks of omni-potential flows.

Coefficients are :class:`fractions.Fraction` end to end, so vanishing of a
commutator or of a PDE residual is decided exactly.  Float evaluation over
batches of points goes through a cached numpy form.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .sampling import sphere_points, box_points
from .symmat import SymmetricMatrix

Exponent = tuple[int, ...]


def as_rational(x) -> Fraction:
    """Exact rational from int, Fraction, decimal/fraction string or float (decimal repr)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite coefficient {x!r}")
        return Fraction(repr(float(x)))
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def _is_exact(q: Sequence) -> bool:
    return all(isinstance(v, (int, Fraction, np.integer)) for v in q)


class Polynomial:
    """Sparse multivariate polynomial in ``dim`` variables with rational coefficients."""

    def __init__(self, dim: int, terms: Mapping[Exponent, object] | None = None):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        clean: dict[Exponent, Fraction] = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != dim or any(e < 0 for e in exp):
                raise ValueError(f"bad exponent {exp} for dim {dim}")
            c = as_rational(c)
            if c:
                clean[exp] = clean.get(exp, Fraction(0)) + c
                if not clean[exp]:
                    del clean[exp]
        self.terms = clean

    # -- construction helpers -------------------------------------------------

    @classmethod
    def monomial(cls, exp: Sequence[int], coef=1) -> "Polynomial":
        return _wrap(len(exp), {tuple(exp): as_rational(coef)}, sum(exp))

    @classmethod
    def zero(cls, dim: int) -> "Polynomial":
        return Polynomial(dim)

    def _result(self, terms, degree):
        return _wrap(self.dim, terms, degree)

    # -- structure ------------------------------------------------------------

    @property
    def degree(self) -> int:
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self.terms}) <= 1

    def homogeneous_parts(self) -> list["HomogeneousPolynomial"]:
        by_deg: dict[int, dict] = {}
        for exp, c in self.terms.items():
            by_deg.setdefault(sum(exp), {})[exp] = c
        return [HomogeneousPolynomial(self.dim, n, t) for n, t in sorted(by_deg.items())]

    def coefficient(self, exp: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(exp), Fraction(0))

    # -- arithmetic -----------------------------------------------------------

    def _hdeg(self):
        return self.degree if not isinstance(self, HomogeneousPolynomial) else self.hdegree

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            if other == 0:
                return self
            other = _wrap(self.dim, {(0,) * self.dim: as_rational(other)}, 0)
        _check_dim(self, other)
        terms = dict(self.terms)
        for exp, c in other.terms.items():
            terms[exp] = terms.get(exp, Fraction(0)) + c
        return self._result(terms, _sum_degree(self, other))

    __radd__ = __add__

    def __neg__(self):
        return self._result({e: -c for e, c in self.terms.items()}, _own_degree(self))

    def __sub__(self, other):
        return self + (-other if isinstance(other, Polynomial) else -as_rational(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            _check_dim(self, other)
            terms: dict[Exponent, Fraction] = {}
            for e1, c1 in self.terms.items():
                for e2, c2 in other.terms.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    terms[e] = terms.get(e, Fraction(0)) + c1 * c2
            d1, d2 = _own_degree(self), _own_degree(other)
            deg = d1 + d2 if d1 is not None and d2 is not None else None
            return self._result(terms, deg)
        c = as_rational(other)
        return self._result({e: c * v for e, v in self.terms.items()}, _own_degree(self))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / as_rational(other))

    def __pow__(self, k: int):
        out = _wrap(self.dim, {(0,) * self.dim: Fraction(1)}, 0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.dim == other.dim and self.terms == other.terms
        if other == 0:
            return self.is_zero()
        return NotImplemented

    def __hash__(self):
        return hash((self.dim, frozenset(self.terms.items())))

    def __repr__(self):
        return f"{type(self).__name__}({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for exp in sorted(self.terms, reverse=True):
            c = self.terms[exp]
            mono = "*".join(
                f"q{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(exp) if e
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    # -- calculus -------------------------------------------------------------

    def derivative(self, i: int) -> "Polynomial":
        terms = {}
        for exp, c in self.terms.items():
            if exp[i]:
                e = list(exp)
                e[i] -= 1
                terms[tuple(e)] = c * exp[i]
        d = _own_degree(self)
        return self._result(terms, None if d is None else max(d - 1, 0))

    @cached_property
    def gradient(self) -> tuple["Polynomial", ...]:
        return tuple(self.derivative(i) for i in range(self.dim))

    @cached_property
    def hessian(self) -> tuple[tuple["Polynomial", ...], ...]:
        rows = []
        for i in range(self.dim):
            gi = self.gradient[i]
            rows.append(tuple(gi.derivative(j) for j in range(self.dim)))
        return tuple(rows)

    def laplacian(self) -> "Polynomial":
        out = Polynomial(self.dim)
        for i in range(self.dim):
            out = out + self.hessian[i][i]
        return out

    # -- evaluation -----------------------------------------------------------

    def eval(self, q: Sequence):
        """Value at ``q``; exact when every coordinate is an int or Fraction."""
        if len(q) != self.dim:
            raise ValueError(f"point has dimension {len(q)}, expected {self.dim}")
        if _is_exact(q):
            q = [Fraction(v) for v in q]
            total = Fraction(0)
            for exp, c in self.terms.items():
                m = c
                for v, e in zip(q, exp):
                    if e:
                        m *= v**e
                total += m
            return total
        return float(self.numeric_value(np.asarray(q, dtype=float)[None, :])[0])

    __call__ = eval

    def gradient_at(self, q: Sequence):
        if _is_exact(q):
            return [g.eval(q) for g in self.gradient]
        return self.numeric_gradient(np.asarray(q, dtype=float)[None, :])[0]

    def hessian_at(self, q: Sequence) -> SymmetricMatrix:
        d = self.dim
        if _is_exact(q):
            upper = [self.hessian[i][j].eval(q) for i in range(d) for j in range(i, d)]
            return SymmetricMatrix.from_upper(d, upper)
        return SymmetricMatrix(self.numeric_hessian(np.asarray(q, dtype=float)[None, :])[0])

    @cached_property
    def _numeric(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.terms:
            return np.zeros((0, self.dim), dtype=int), np.zeros(0)
        exps = np.array(list(self.terms.keys()), dtype=int)
        coefs = np.array([float(c) for c in self.terms.values()])
        return exps, coefs

    def numeric_value(self, X: np.ndarray) -> np.ndarray:
        """Float values at the rows of ``X`` (shape (N, dim))."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        exps, coefs = self._numeric
        if coefs.size == 0:
            return np.zeros(X.shape[0])
        mono = np.prod(X[:, None, :] ** exps[None, :, :], axis=2)
        return mono @ coefs

    def numeric_gradient(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([g.numeric_value(X) for g in self.gradient], axis=-1)

    def numeric_hessian(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = self.dim
        out = np.empty((X.shape[0], d, d))
        for i in range(d):
            for j in range(i, d):
                v = self.hessian[i][j].numeric_value(X)
                out[:, i, j] = v
                out[:, j, i] = v
        return out

    # -- variable manipulation ------------------------------------------------

    def permute(self, perm: Sequence[int]) -> "Polynomial":
        """Substitute q_i -> q_perm[i] (0-based)."""
        terms = {}
        for exp, c in self.terms.items():
            e = [0] * self.dim
            for i, k in enumerate(exp):
                e[perm[i]] += k
            terms[tuple(e)] = c
        return self._result(terms, _own_degree(self))

    def restrict(self, keep: Sequence[int]) -> "Polynomial":
        """Set every variable outside ``keep`` to zero; result lives in len(keep) variables."""
        keep = list(keep)
        drop = [i for i in range(self.dim) if i not in keep]
        terms = {}
        for exp, c in self.terms.items():
            if all(exp[i] == 0 for i in drop):
                terms[tuple(exp[i] for i in keep)] = c
        return _wrap(len(keep), terms, _own_degree(self))

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        deg = _own_degree(self)
        return {
            "dim": self.dim,
            "degree": deg if deg is not None else self.degree,
            "terms": [
                {"exp": list(exp), "coef": f"{c.numerator}/{c.denominator}"}
                for exp, c in sorted(self.terms.items())
            ],
        }

    @staticmethod
    def from_json(data: Mapping) -> "Polynomial":
        dim = int(data["dim"])
        terms = {tuple(t["exp"]): Fraction(t["coef"]) for t in data["terms"]}
        degs = {sum(e) for e in terms}
        if len(degs) <= 1:
            return HomogeneousPolynomial(dim, int(data.get("degree", max(degs, default=0))), terms)
        return Polynomial(dim, terms)


class HomogeneousPolynomial(Polynomial):
    """Polynomial whose every monomial has total degree ``degree`` (kept for the zero polynomial too)."""

    def __init__(self, dim: int, degree: int, terms: Mapping[Exponent, object] | None = None):
        super().__init__(dim, terms)
        bad = [e for e in self.terms if sum(e) != degree]
        if bad:
            raise ValueError(f"monomials {bad[:3]} do not have degree {degree}")
        self.hdegree = degree

    @property
    def degree(self) -> int:
        return self.hdegree


def _own_degree(p: Polynomial):
    if isinstance(p, HomogeneousPolynomial):
        return p.hdegree
    return p.degree if p.is_homogeneous() and not p.is_zero() else None


def _sum_degree(a: Polynomial, b: Polynomial):
    da, db = _own_degree(a), _own_degree(b)
    if da is not None and b.is_zero():
        return da
    if db is not None and a.is_zero():
        return db
    return da if da == db else None


def _wrap(dim, terms, degree) -> Polynomial:
    terms = {e: c for e, c in terms.items() if c}
    if degree is not None and all(sum(e) == degree for e in terms):
        return HomogeneousPolynomial(dim, degree, terms)
    return Polynomial(dim, terms)


def _check_dim(a: Polynomial, b: Polynomial):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def variable(dim: int, i: int) -> HomogeneousPolynomial:
    e = [0] * dim
    e[i] = 1
    return HomogeneousPolynomial(dim, 1, {tuple(e): 1})


def squared_norm(dim: int) -> HomogeneousPolynomial:
    return HomogeneousPolynomial(
        dim, 2, {tuple(2 if j == i else 0 for j in range(dim)): 1 for i in range(dim)}
    )


_TERM = re.compile(r"([+-]?)([^+-]+)")
_COEF = re.compile(r"^(\d+(?:\.\d*)?(?:/\d+)?)?\*?")
_FACTOR = re.compile(r"\*?q(\d+)(?:(?:\^|\*\*)(\d+))?")


def parse_polynomial(text: str, dim: int | None = None) -> Polynomial:
    """Parse sums of monomials such as ``"q1q2 + 0.3q1^3"`` or ``"3/2*q1**2*q3"``."""
    src = text.replace(" ", "").replace("**", "^")
    if not src:
        raise ValueError("empty polynomial expression")
    raw: list[tuple[Fraction, dict[int, int]]] = []
    for sign, body in _TERM.findall(src):
        m = _COEF.match(body)
        coef = Fraction(m.group(1)) if m.group(1) else Fraction(1)
        rest = body[m.end():]
        powers: dict[int, int] = {}
        pos = 0
        while pos < len(rest):
            f = _FACTOR.match(rest, pos)
            if not f:
                raise ValueError(f"cannot parse {body!r} in {text!r}")
            idx = int(f.group(1))
            if idx < 1:
                raise ValueError("variables are numbered from q1")
            powers[idx] = powers.get(idx, 0) + int(f.group(2) or 1)
            pos = f.end()
        raw.append((-coef if sign == "-" else coef, powers))
    top = max((max(p, default=0) for _, p in raw), default=0)
    dim = dim or max(top, 1)
    if top > dim:
        raise ValueError(f"expression uses q{top} but dim={dim}")
    terms: dict[Exponent, Fraction] = {}
    for c, powers in raw:
        exp = tuple(powers.get(i + 1, 0) for i in range(dim))
        terms[exp] = terms.get(exp, Fraction(0)) + c
    return _wrap(dim, terms, None) if len({sum(e) for e in terms}) > 1 else _wrap(
        dim, terms, sum(next(iter(terms))) if terms else 0
    )


# ---------------------------------------------------------------------------
# Two-dimensional families for g(q) = (a q1^2 - b q2^2) / (q1 q2)
# ---------------------------------------------------------------------------

def _p2_even_factors(k: int, i: int):
    """Linear factors (const, da, db) and scalar weight of the q1^(2i) q2^(2(k-i)) coefficient."""
    factors = []
    for j in range(i):
        # 2k-1 + 2j(a-1)
        factors.append((Fraction(2 * k - 1 - 2 * j), Fraction(2 * j), Fraction(0)))
    for j in range(k - i):
        factors.append((Fraction(2 * k - 1 - 2 * j), Fraction(0), Fraction(2 * j)))
    weight = Fraction(math.comb(k, i), 2 * k - 1)
    return factors, weight


def _p2_even_build(k, a, b, wrt=None) -> HomogeneousPolynomial:
    a, b = as_rational(a), as_rational(b)
    terms = {}
    for i in range(k + 1):
        factors, weight = _p2_even_factors(k, i)
        vals = [c + da * a + db * b for c, da, db in factors]
        if wrt is None:
            coef = math.prod(vals, start=Fraction(1))
        else:
            slot = 1 if wrt == "a" else 2
            coef = Fraction(0)
            for l, f in enumerate(factors):
                if f[slot]:
                    coef += f[slot] * math.prod(
                        (v for m, v in enumerate(vals) if m != l), start=Fraction(1)
                    )
        terms[(2 * i, 2 * (k - i))] = coef * weight
    return HomogeneousPolynomial(2, 2 * k, terms)


def family_p2_even(k: int, a=0, b=0) -> HomogeneousPolynomial:
    """Degree-2k solution of the 2-D invariant PDE with g = (a q1^2 - b q2^2)/(q1 q2).

    At the isolated parameters listed by :func:`degenerate_parameters` the result is
    the zero polynomial; use :func:`p2_even_solutions` to get the two independent
    derivative solutions there.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    return _p2_even_build(k, a, b)


def family_p2_even_derivatives(k: int, a, b) -> tuple[HomogeneousPolynomial, HomogeneousPolynomial]:
    """Coefficient-wise d/da and d/db of the degree-2k product formula."""
    if k < 2:
        raise ValueError("k must be >= 2")
    return _p2_even_build(k, a, b, "a"), _p2_even_build(k, a, b, "b")


def degenerate_parameters(k: int) -> list[tuple[Fraction, Fraction]]:
    """Parameter pairs (a, b) at which the degree-2k polynomial vanishes identically."""
    out = []
    for jh in range(1, k):
        for j in range(1, k - jh):
            out.append((1 - Fraction(2 * k - 1, 2 * jh), 1 - Fraction(2 * k - 1, 2 * j)))
    return out


def p2_even_solutions(k: int, a, b) -> list[HomogeneousPolynomial]:
    """Independent polynomial solutions of degree 2k: the family member, or the derivative pair."""
    p = family_p2_even(k, a, b)
    if not p.is_zero():
        return [p]
    return list(family_p2_even_derivatives(k, a, b))


def odd_parameter(k: int) -> Fraction:
    """The single value a = b admitting degree-(2k+1) solutions."""
    if k < 2:
        raise ValueError("k must be >= 2")
    return Fraction(-1, k - 1)


def _frak_p(k: int) -> dict[Exponent, Fraction]:
    terms = {}
    coef = Fraction(1)
    for i in range(k):
        if i:
            j = i - 1
            coef *= Fraction((2 * (k - j) + 1) * (k - 1 - j), (j + 1) * (2 * j - 1))
        terms[(2 * i, 2 * (k - i) + 1)] = coef
    return terms


def family_p2_odd(k: int, c1=1, c2=0) -> HomogeneousPolynomial:
    """Odd solution of degree 2k+1, valid for a = b = -1/(k-1).

    ``c1`` multiplies the branch carrying q1^(2k+1) (e.g. q1^5 - 5 q1^3 q2^2 for k=2),
    ``c2`` its mirror image.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    base = _frak_p(k)
    c1, c2 = as_rational(c1), as_rational(c2)
    terms: dict[Exponent, Fraction] = {}
    for (e1, e2), c in base.items():
        terms[(e2, e1)] = terms.get((e2, e1), Fraction(0)) + c1 * c
        terms[(e1, e2)] = terms.get((e1, e2), Fraction(0)) + c2 * c
    return HomogeneousPolynomial(2, 2 * k + 1, terms)


def gexa_invariant(a, b) -> tuple[HomogeneousPolynomial, HomogeneousPolynomial]:
    """Numerator and denominator of g(q) = (a q1^2 - b q2^2) / (q1 q2)."""
    a, b = as_rational(a), as_rational(b)
    num = HomogeneousPolynomial(2, 2, {(2, 0): a, (0, 2): -b})
    den = HomogeneousPolynomial(2, 2, {(1, 1): 1})
    return num, den


def gen2d_residual(p: Polynomial, g_num: Polynomial, g_den: Polynomial) -> Polynomial:
    """den * (d11 - d22) p - num * d12 p, i.e. the invariant PDE with g = num/den cleared."""
    h = p.hessian
    return g_den * (h[0][0] - h[1][1]) - g_num * h[0][1]


# ---------------------------------------------------------------------------
# Symmetric d-dimensional blocks
# ---------------------------------------------------------------------------

def _even_mono(d, powers: Mapping[int, int]) -> Exponent:
    return tuple(2 * powers.get(i, 0) for i in range(d))


def family_pd4(d: int, c) -> HomogeneousPolynomial:
    """sum q_i^4 + c * sum_{i<j} q_i^2 q_j^2."""
    if d < 2:
        raise ValueError("d must be >= 2")
    c = as_rational(c)
    terms = {_even_mono(d, {i: 2}): Fraction(1) for i in range(d)}
    for i in range(d):
        for j in range(i + 1, d):
            terms[_even_mono(d, {i: 1, j: 1})] = c
    return HomogeneousPolynomial(d, 4, terms)


def pd6_coefficients(c) -> tuple[Fraction, Fraction]:
    """(a, b) making the sextic block commute with the quartic one."""
    c = as_rational(c)
    if c == 12 or c == -3:
        raise ValueError(f"c = {c} is excluded (pole of the sextic coefficients)")
    return 15 * c / (12 - c), 75 * c**2 / ((12 - c) * (3 + c))


def family_pd6(d: int, c) -> HomogeneousPolynomial:
    """sum q_i^6 + a sum_{i != j} q_i^4 q_j^2 + b sum_{i<j<k} q_i^2 q_j^2 q_k^2."""
    if d < 2:
        raise ValueError("d must be >= 2")
    a, b = pd6_coefficients(c)
    terms = {_even_mono(d, {i: 3}): Fraction(1) for i in range(d)}
    for i in range(d):
        for j in range(d):
            if i != j:
                terms[_even_mono(d, {i: 2, j: 1})] = a
    for i in range(d):
        for j in range(i + 1, d):
            for k in range(j + 1, d):
                terms[_even_mono(d, {i: 1, j: 1, k: 1})] = b
    return HomogeneousPolynomial(d, 6, terms)


def chi_values(n: int, c) -> list[Fraction]:
    """chi_m = (c (2n + 2 - 3m) + 6 (m - 1)) / m for m = 1..n."""
    c = as_rational(c)
    return [(c * (2 * n + 2 - 3 * m) + 6 * (m - 1)) / m for m in range(1, n + 1)]


def family_p3_2n(n: int, c) -> HomogeneousPolynomial:
    """Symmetric degree-2n block in 3-D whose Hessian commutes with that of family_pd4(3, c)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    chi = chi_values(n, c)
    if any(x == 0 for x in chi):
        m = 1 + next(i for i, x in enumerate(chi) if x == 0)
        raise ValueError(f"chi_{m} vanishes for c = {as_rational(c)}; coefficients undefined")
    prefix = [Fraction(1)]
    for x in chi:
        prefix.append(prefix[-1] * x)
    terms = {}
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            terms[(2 * i, 2 * j, 2 * k)] = prefix[i] * prefix[j] * prefix[k] / prefix[n]
    return HomogeneousPolynomial(3, 2 * n, terms)


def radial_polynomial(d: int, k: int) -> HomogeneousPolynomial:
    """|q|^(2k)."""
    return squared_norm(d) ** k


# ---------------------------------------------------------------------------
# Hessian commutators and convexity
# ---------------------------------------------------------------------------

def commutator_poly(p: Polynomial, r: Polynomial) -> list[list[Polynomial]]:
    """Exact H(p) H(r) - H(r) H(p) as a matrix of polynomials."""
    _check_dim(p, r)
    d = p.dim
    hp, hr = p.hessian, r.hessian
    out = []
    for i in range(d):
        row = []
        for j in range(d):
            acc = Polynomial(d)
            for k in range(d):
                acc = acc + hp[i][k] * hr[k][j] - hr[i][k] * hp[k][j]
            row.append(acc)
        out.append(row)
    return out


def is_zero_matrix(m: Iterable[Iterable[Polynomial]]) -> bool:
    return all(entry.is_zero() for row in m for entry in row)


@dataclass(frozen=True)
class ConvexityVerdict:
    verdict: str  # "convex" | "not-convex" | "undetermined"
    min_eigenvalue: float
    witness: tuple[float, ...] | None
    coefficients_positive: bool
    num_samples: int
    domain: str


def convexity_range_check(
    p: Polynomial,
    num_points: int = 4096,
    seed: int = 0,
    tol: float = 1e-9,
    box: tuple[float, float] | None = None,
) -> ConvexityVerdict:
    """Sampled positive-semidefiniteness test of the Hessian.

    Homogeneous inputs are swept over the unit sphere (the Hessian is homogeneous,
    so this covers all of R^d).  Other inputs need ``box``; without it the verdict
    is ``undetermined``.  A ``not-convex`` verdict carries the witness point.
    """
    positive = bool(p.terms) and all(c > 0 for c in p.terms.values()) and all(
        e % 2 == 0 for exp in p.terms for e in exp
    )
    if box is None and not p.is_homogeneous():
        return ConvexityVerdict("undetermined", float("nan"), None, positive, 0, "R^d")
    if p.degree <= 1:
        return ConvexityVerdict("convex", 0.0, None, positive, 0, "R^d")
    if box is None:
        X = sphere_points(p.dim, num_points, seed)
        domain = "R^d"
    else:
        X = box_points(p.dim, num_points, box, seed)
        domain = f"box {list(box)}"
    H = p.numeric_hessian(X)
    eig = np.linalg.eigvalsh(H)
    mins = eig[:, 0]
    scale = max(float(np.max(np.abs(eig))), np.finfo(float).tiny)
    idx = int(np.argmin(mins))
    m = float(mins[idx])
    if m < -tol * scale:
        return ConvexityVerdict(
            "not-convex", m, tuple(float(v) for v in X[idx]), positive, len(X), domain
        )
    return ConvexityVerdict("convex", m, None, positive, len(X), domain)


def stated_convexity_window(family: str, **params) -> str:
    """Parameter window quoted for each family (a sufficient condition, not a certificate)."""
    if family == "p2-even":
        k = int(params.get("k", 2))
        return f"convex for min(a, b) >= -1/{2 * k - 2} (coefficient positivity)"
    if family == "pd46":
        return "convex for 0 ≤ c̃ < 12"
    if family == "p3-2n":
        n = int(params.get("n", 2))
        if n == 2:
            return "convex for 0 ≤ c̃ (quartic block)"
        return f"convex for 0 ≤ c̃ < {Fraction(6 * (n - 1), n - 2)}"
    if family == "p2-odd":
        return "odd degree: never convex on R^2; convex only on a bounded box for small times"
    return "convex for sufficiently small t (identity-dominated Hessian)"
