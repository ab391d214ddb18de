from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from omniflow import polynomials as P
from omniflow.polynomials import HomogeneousPolynomial, Polynomial, parse_polynomial

small = st.fractions(min_value=-5, max_value=5, max_denominator=7)


@st.composite
def polys(draw, dim=2, max_terms=4, max_deg=4):
    n = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(n):
        exp = tuple(draw(st.integers(0, max_deg)) for _ in range(dim))
        terms[exp] = draw(small)
    return Polynomial(dim, terms)


points = st.tuples(small, small)


@given(polys(), polys(), polys())
def test_ring_axioms(p, q, r):
    assert p + q == q + p
    assert p * q == q * p
    assert p * (q + r) == p * q + p * r
    assert (p - p).is_zero()


@given(polys(), polys(), points)
def test_product_rule_and_exact_eval(p, q, x):
    for i in range(2):
        assert (p * q).derivative(i) == p.derivative(i) * q + p * q.derivative(i)
    assert (p * q).eval(x) == p.eval(x) * q.eval(x)


@given(polys(max_deg=3), points)
def test_hessian_symmetric_and_matches_numeric(p, x):
    h = p.hessian
    assert h[0][1] == h[1][0]
    X = np.array([[float(v) for v in x]])
    exact = np.array([[float(h[i][j].eval(x)) for j in range(2)] for i in range(2)])
    assert np.allclose(p.numeric_hessian(X)[0], exact, rtol=1e-12, atol=1e-9)


@given(polys())
def test_json_roundtrip(p):
    assert Polynomial.from_json(p.to_json()) == p


def test_quartic_family_value_and_second_derivative():
    p = P.family_p2_even(2, 1, 0)
    assert p == parse_polynomial("3q1^4 + 6q1^2q2^2 + q2^4")
    assert p.eval((1, 2)) == 43  # 3 + 24 + 16
    assert p.hessian[0][0].eval((1, 2)) == 84


def test_identity_potential_hessian():
    half = P.squared_norm(3) * Fraction(1, 2)
    H = np.asarray(half.hessian_at((0.3, -1.0, 2.0)))
    assert np.array_equal(H, np.eye(3))
    assert np.array_equal(np.asarray(parse_polynomial("q1^4", 2).hessian_at((1, 1))), [[12, 0], [0, 0]])


def test_even_family_low_degrees():
    a, b = Fraction(2, 3), Fraction(-1, 5)
    p4 = P.family_p2_even(2, a, b)
    assert p4 == Polynomial(2, {(4, 0): 2 * a + 1, (2, 2): 6, (0, 4): 2 * b + 1})
    p6 = P.family_p2_even(3, a, b)
    assert p6 == Polynomial(2, {
        (6, 0): (4 * a + 1) * (2 * a + 3), (4, 2): 15 * (2 * a + 3),
        (2, 4): 15 * (2 * b + 3), (0, 6): (4 * b + 1) * (2 * b + 3),
    })


@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_degenerate_parameters_zero_the_family(k):
    for a, b in P.degenerate_parameters(k):
        assert P.family_p2_even(k, a, b).is_zero()
        num, den = P.gexa_invariant(a, b)
        for s in P.p2_even_solutions(k, a, b):
            assert not s.is_zero()
            assert P.gen2d_residual(s, num, den).is_zero()


def test_degenerate_sextic():
    assert (Fraction(-3, 2), Fraction(-3, 2)) in P.degenerate_parameters(3)
    assert P.family_p2_even(3, Fraction(-3, 2), Fraction(-3, 2)).is_zero()


@given(small, small, st.integers(2, 5))
def test_even_family_solves_invariant_pde(a, b, k):
    num, den = P.gexa_invariant(a, b)
    assert P.gen2d_residual(P.family_p2_even(k, a, b), num, den).is_zero()


def test_odd_family():
    assert P.family_p2_odd(2, 1, 0) == parse_polynomial("q1^5 - 5q1^3q2^2")
    assert P.family_p2_odd(2, 0, 1) == parse_polynomial("-5q1^2q2^3 + q2^5")
    assert P.family_p2_odd(2, 1, 1).eval((1, 1)) == -8


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_odd_family_solves_pde_at_its_parameter(k):
    a = P.odd_parameter(k)
    num, den = P.gexa_invariant(a, a)
    for c1, c2 in [(1, 0), (0, 1), (2, -3)]:
        assert P.gen2d_residual(P.family_p2_odd(k, c1, c2), num, den).is_zero()


def test_symmetric_blocks_special_values():
    q2 = P.squared_norm(3)
    assert P.family_pd4(3, 2) == q2**2
    assert P.pd6_coefficients(2) == (3, 6)
    assert P.family_pd6(3, 2) == q2**3
    assert P.pd6_coefficients(1) == (Fraction(15, 11), Fraction(75, 44))
    assert P.pd6_coefficients(3) == (5, Fraction(25, 2))
    for bad in (12, -3):
        with pytest.raises(ValueError):
            P.family_pd6(3, bad)


def test_recurrence_blocks():
    for c in (Fraction(1, 2), 1, 3, 7):
        assert P.family_p3_2n(2, c) == P.family_pd4(3, c)
        assert P.family_p3_2n(3, c) == P.family_pd6(3, c)
    assert P.chi_values(3, 2) == [10, 5, Fraction(10, 3)]
    with pytest.raises(ValueError):
        P.family_p3_2n(3, 12)


@given(st.fractions(min_value=0, max_value=11, max_denominator=5), st.integers(2, 3))
def test_sextic_commutes_with_quartic(c, d):
    assert P.is_zero_matrix(P.commutator_poly(P.family_pd6(d, c), P.family_pd4(d, c)))


def test_commutator_examples():
    p = parse_polynomial("q1^2q2^2")
    r = parse_polynomial("q1^4", 2)
    C = P.commutator_poly(p, r)
    assert C[0][1] == parse_polynomial("-48q1^3q2")
    assert C[1][0] == -C[0][1]
    assert P.is_zero_matrix(P.commutator_poly(p, p))


def test_parse_forms():
    assert parse_polynomial("q1q2 + 0.3q1^3") == Polynomial(2, {(1, 1): 1, (3, 0): Fraction(3, 10)})
    assert parse_polynomial("3/2*q1**2*q3") == Polynomial(3, {(2, 0, 1): Fraction(3, 2)})
    assert parse_polynomial("q1", 3).dim == 3
    with pytest.raises(ValueError):
        parse_polynomial("q1 + x")
    with pytest.raises(ValueError):
        parse_polynomial("q3", 2)


def test_homogeneous_parts_and_permute():
    p = parse_polynomial("q1 + q1q2 + q2^3")
    parts = p.homogeneous_parts()
    assert [h.degree for h in parts] == [1, 2, 3]
    assert sum(parts, Polynomial(2)) == p
    assert p.permute((1, 0)) == parse_polynomial("q2 + q1q2 + q1^3")


def test_convexity_checks():
    assert P.convexity_range_check(P.family_p2_even(2, 0, 0)).verdict == "convex"
    v = P.convexity_range_check(P.family_pd4(3, 13))
    assert v.verdict == "not-convex" and v.witness is not None
    H = P.family_pd4(3, 13).numeric_hessian(np.array([v.witness]))
    assert np.linalg.eigvalsh(H)[0, 0] < 0
    odd = P.convexity_range_check(P.family_p2_odd(2, 1, 0))
    assert odd.verdict == "not-convex"
    assert P.convexity_range_check(parse_polynomial("q1^3 + q2^2")).verdict == "undetermined"
    assert P.stated_convexity_window("pd46") == "convex for 0 ≤ c̃ < 12"


def test_positive_coefficients_do_not_imply_convexity():
    # near a = b = -1/2 every coefficient is positive but the quartic is not convex
    a = Fraction(-1, 2) + Fraction(1, 100)
    v = P.convexity_range_check(P.family_p2_even(2, a, a))
    assert v.coefficients_positive
    assert v.verdict == "not-convex"


def test_homogeneous_zero_keeps_degree():
    z = HomogeneousPolynomial(2, 6)
    assert z.is_zero() and z.degree == 6
