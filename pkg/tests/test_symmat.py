import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from omniflow import polynomials as P
from omniflow import symmat as S
from omniflow.symmat import POLE, SymmetricMatrix


def random_symmetric(d, seed):
    A = np.random.default_rng(seed).standard_normal((d, d))
    return (A + A.T) / 2


entries = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def well_separated(draw, d):
    """Symmetric matrices with distinct eigenvalues and no near-zero eigenvector components."""
    A = draw(arrays(float, (d, d), elements=entries))
    H = (A + A.T) / 2
    frame = S.eigenframe(H)
    scale = max(np.linalg.norm(H), 1e-300)
    assume(np.min(np.diff(frame.eigenvalues)) > 1e-3 * scale)
    assume(np.min(np.abs(frame.eigenvectors)) > 1e-3)
    return H


def test_symmetric_matrix_basics():
    M = SymmetricMatrix.from_upper(3, [1, 2, 3, 4, 5, 6])
    assert np.array_equal(np.asarray(M), [[1, 2, 3], [2, 4, 5], [3, 5, 6]])
    assert SymmetricMatrix.from_json(M.to_json()) == M
    # only the upper triangle is read
    assert np.array_equal(np.asarray(SymmetricMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))), [[1, 2], [2, 1]])
    with pytest.raises(ValueError):
        SymmetricMatrix(np.ones((2, 3)))


def test_commutator_examples():
    H = random_symmetric(3, 0)
    assert np.all(S.commutator(np.eye(3), H).matrix == 0)
    assert np.all(S.commutator(np.diag([1.0, 2]), np.diag([3.0, 4])).matrix == 0)
    A = np.array([[2.0, 4], [4, 2]])
    B = np.array([[12.0, 0], [0, 0]])
    C = S.commutator(A, B)
    assert C.matrix[0, 1] == -48
    assert np.array_equal(C.matrix, A @ B - B @ A)
    assert not S.codiagonalizable(A, B)
    assert S.codiagonalizable(A, B).defect > 0.1


@given(well_separated(3))
def test_powers_are_codiagonalizable(H):
    assert S.codiagonalizable(H, H @ H, tol=1e-8)


def test_eigenframe_examples():
    f = S.eigenframe(np.diag([3.0, 1.0]))
    assert np.allclose(f.eigenvalues, [1, 3])
    assert np.allclose(np.abs(f.eigenvectors), [[0, 1], [1, 0]])
    f = S.eigenframe(np.array([[0.0, 1], [1, 0]]))
    assert np.allclose(f.eigenvalues, [-1, 1])
    s = np.sqrt(0.5)
    assert np.allclose(f.eigenvectors, [[s, -s], [s, s]]) or np.allclose(f.eigenvectors, [[-s, s], [s, s]])
    H = random_symmetric(3, 4)
    f = S.eigenframe(H)
    for lam, v in zip(f.eigenvalues, f.eigenvectors):
        assert np.linalg.norm(H @ v - lam * v) < 1e-10 * np.linalg.norm(H)


def test_two_dimensional_invariants():
    H = np.array([[3.0, 1], [1, 1]])
    assert S.gamma_invariant(H, 1, 1, 2) == pytest.approx(2.0, rel=1e-12)
    assert S.gamma_invariant(H, 1, 1, 2) == pytest.approx((H[0, 0] - H[1, 1]) / H[0, 1])
    H0 = np.array([[0.4, -0.7], [-0.7, 1.9]])
    vals = [S.gamma_invariant(np.eye(2) + t * H0, 1, 1, 2) for t in (0.1, 0.5, 1.0)]
    assert np.ptp(vals) < 1e-12


@given(well_separated(2))
def test_degenerate_two_dimensional_invariant(H):
    assert abs(S.gamma_invariant(H, 2, 2, 1) + 1) < 1e-12
    assert abs(S.gamma_invariant(H, 2, 1, 2) * S.gamma_invariant(H, 2, 2, 1) - 1) < 1e-9


@pytest.mark.parametrize("d", [2, 3, 4])
def test_identity_and_diagonal_give_poles(d):
    inv = S.invariant_set(np.eye(d))
    assert all(inv[(1, m, n)] is POLE for m in range(1, d + 1) for n in range(1, d + 1) if m != n)
    assert S.gamma3_closed_form(np.diag([1.0, 2, 3]), 1) is POLE if d == 3 else True


@given(well_separated(3))
def test_closed_forms_match_eigendecomposition(H):
    # the closed forms divide by H12 and by a cubic in the entries
    scale = np.linalg.norm(H)
    den = (H[1, 1] - H[2, 2]) * H[0, 1] * H[0, 2] + (H[0, 2] ** 2 - H[0, 1] ** 2) * H[1, 2]
    assume(abs(H[0, 1]) > 1e-3 * scale and abs(den) > 1e-3 * scale**3)
    for k in (1, 2, 3):
        direct = S.gamma_invariant(H, k, 2, 1)
        closed = S.gamma3_closed_form(H, k)
        assert closed == pytest.approx(direct, rel=1e-7, abs=1e-7)


def test_closed_form_on_commuting_blocks():
    c = 1
    p = P.family_pd4(3, c) + P.family_pd6(3, c)
    q1, q2, q3 = 1.0, 2.0, 3.0
    H = np.asarray(p.hessian_at((1, 2, 3)))
    expected = ((6 + 3 * c) * q2**2 - (6 + c) * q1**2) / (2 * c * q1 * q2) \
        + 2 * q2 * (q1**2 - q2**2) / (q1 * (q2**2 - q3**2))
    assert S.gamma_invariant(H, 1, 2, 1) == pytest.approx(expected, rel=1e-9)
    assert S.gamma3_closed_form(H, 1) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("d", [2, 3])
@given(seed=st.integers(0, 10_000))
def test_relations_hold(d, seed):
    H = random_symmetric(d, seed)
    report = S.check_relations(H)
    assert all(r.status in ("pass", "inconclusive") for r in report)
    assert any(r.status == "pass" for r in report)


def test_relation_report_entries():
    H = random_symmetric(3, 7)
    names = {r.relation.split("[")[0] for r in S.check_relations(H)}
    assert names == {"prodrel", "prodrel3", "hessdk", "orthogonality", "powH", "impdouble"}
    assert S.relations_pass(S.check_relations(H))
    # orthogonality sum for d = 3
    for n in (1, 2, 3):
        total = sum(S.gamma_invariant(H, 2, m, n) for m in (1, 2, 3) if m != n)
        assert total == pytest.approx(-3, abs=1e-9)


def test_relations_inconclusive_on_repeated_eigenvalues():
    report = S.check_relations(np.diag([1.0, 1.0, 2.0]))
    assert all(r.status == "inconclusive" for r in report)
    assert not S.relations_pass(report)


@given(well_separated(3))
def test_candidate_frames_contain_true_frame(H):
    frames = S.candidate_frames(H)
    assert len(frames) == 2
    assert any(S.same_frame(F, S.eigenframe(H).eigenvectors, tol=1e-6) for F in frames)
    roots = S.viete_roots(H)
    V = S.eigenframe(H).eigenvectors
    assert np.allclose(np.sort(V[:, 1] / V[:, 0]), roots, rtol=1e-6, atol=1e-6)


def test_elementary_symmetric():
    assert S.elementary_symmetric([1, 2, 3], 1) == 6
    assert S.elementary_symmetric([1, 2, 3], 2) == 11
    assert S.elementary_symmetric([1, 2, 3], 3) == 6


def test_bad_indices():
    with pytest.raises(ValueError):
        S.gamma_invariant(np.eye(2), 1, 1, 1)
    with pytest.raises(ValueError):
        S.gamma_invariant(np.eye(2), 3, 1, 2)
