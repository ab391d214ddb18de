import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from omniflow import flow as F
from omniflow import mak as M
from omniflow.polynomials import parse_polynomial


def cost_of(C, perm):
    return int(C[np.arange(len(perm)), perm].sum())


@settings(max_examples=40)
@given(st.integers(1, 24), st.integers(0, 10_000), st.integers(1, 1000))
def test_solvers_agree_on_random_integer_costs(n, seed, spread):
    C = np.random.default_rng(seed).integers(0, spread, (n, n)).astype(np.int64)
    ph = M.hungarian(C)
    pa, eps, _, _ = M.auction(C)
    r, c = linear_sum_assignment(C)
    assert sorted(ph) == list(range(n)) and sorted(pa) == list(range(n))
    assert cost_of(C, ph) == cost_of(C, pa) == int(C[r, c].sum())
    assert eps < 1.0 / n


def test_hungarian_float_costs():
    C = np.random.default_rng(1).random((40, 40))
    r, c = linear_sum_assignment(C)
    assert C[np.arange(40), M.hungarian(C)].sum() == pytest.approx(C[r, c].sum(), abs=1e-12)


def test_auction_rejects_float_costs():
    with pytest.raises(TypeError):
        M.auction(np.ones((3, 3)))


def test_two_point_swap():
    pair = M.PointCloudPair([[0, 0], [1, 0]], [[1.1, 0], [-0.1, 0]])
    for method in ("auction", "hungarian"):
        a = M.solve_assignment(pair, method)
        assert list(a.permutation) == [1, 0]
        assert a.total_cost == pytest.approx(0.02)


def test_identity_pair():
    Q, h = M.regular_grid(5, 2)
    pair = M.PointCloudPair(Q, Q.copy(), np.arange(25), (5, 5), h)
    rep = M.mak_reconstruct(pair)
    assert rep.match_fraction == 1.0 and rep.total_cost == 0
    assert np.allclose(M.displacement_divergence(pair, rep.assignment), 0)


def test_random_32_point_instance():
    rng = np.random.default_rng(5)
    pair = M.PointCloudPair(rng.random((32, 2)), rng.random((32, 2)))
    a = M.solve_assignment(pair, "auction")
    h = M.solve_assignment(pair, "hungarian")
    assert a.integer_cost == h.integer_cost


def test_generate_pair_time_zero_and_displacements():
    phi0 = parse_polynomial("q1q2 + 0.3q1^3")
    flow = F.zeldovich_flow(phi0)
    p0 = M.generate_pair(flow, 8, t=0.0)
    assert np.array_equal(p0.lagrangian, p0.eulerian)
    t = 0.2
    pair = M.generate_pair(flow, 16, t=t)
    assert np.allclose(pair.eulerian - pair.lagrangian, t * phi0.numeric_gradient(pair.lagrangian))


def test_generate_pair_refuses_shell_crossing():
    flow = F.zeldovich_flow(parse_polynomial("q1q2 + 0.3q1^3"))
    with pytest.raises(M.ShellCrossingError, match="q="):
        M.generate_pair(flow, 16, t=0.9)


@pytest.mark.parametrize("flow,grid_n", [
    (F.zeldovich_flow(parse_polynomial("q1q2 + 0.3q1^3 - 0.2q2^4"), T=0.2), 16),
    (F.control_flow(T=0.2), 16),
    (F.polydd_flow(), 8),
])
def test_reconstruction_is_exact(flow, grid_n):
    pair = M.shuffle_pair(M.generate_pair(flow, grid_n), seed=3)
    ra = M.mak_reconstruct(pair, "auction")
    rh = M.mak_reconstruct(pair, "hungarian")
    assert ra.match_fraction == 1.0 and rh.match_fraction == 1.0
    assert ra.integer_cost == rh.integer_cost
    assert M.no_improving_swaps(pair, ra.assignment.permutation)


def test_shuffle_keeps_optimal_cost():
    flow = F.zeldovich_flow(parse_polynomial("q1q2 + 0.3q1^3"), T=0.2)
    pair = M.generate_pair(flow, 12)
    base = M.mak_reconstruct(pair)
    for seed in (1, 2):
        shuffled = M.mak_reconstruct(M.shuffle_pair(pair, seed))
        assert shuffled.match_fraction == 1.0
        assert shuffled.integer_cost == base.integer_cost


def test_swap_check_detects_suboptimal_pairing():
    pair = M.PointCloudPair([[0, 0], [1, 0]], [[1.1, 0], [-0.1, 0]])
    assert not M.no_improving_swaps(pair, np.array([0, 1]), samples=50)
    assert M.no_improving_swaps(pair, np.array([1, 0]), samples=50)


def test_divergence_matches_laplacian_at_second_order():
    phi0 = parse_polynomial("q1^2q2 + 0.5q2^3 + 0.3q1^4 - 0.2q1q2^3 + q1q2")
    t = 0.1
    flow = F.zeldovich_flow(phi0, T=t)
    errs = []
    for n in (16, 32, 64):
        pair = M.generate_pair(flow, n)
        div = M.displacement_divergence(pair, pair.true_permutation)
        exact = -t * phi0.laplacian().numeric_value(pair.lagrangian)
        errs.append(np.max(np.abs(div - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.8)


def test_radial_divergence_is_radially_symmetric():
    flow = F.radial_flow(2, T=0.1)
    pair = M.generate_pair(flow, 16)
    div = M.displacement_divergence(pair, pair.true_permutation)
    t = 0.1
    exact = -t * 16 * np.sum(pair.lagrangian**2, axis=1)
    bound = np.max(np.abs(div - exact))
    r = np.round(np.linalg.norm(pair.lagrangian, axis=1), 12)
    # away from the one-sided edge stencils the difference error is uniform
    edge = np.max(np.abs(pair.lagrangian), axis=1) > 1 - pair.spacing
    for radius in np.unique(r):
        on = r == radius
        assert np.ptp(div[on]) <= 2 * bound
        if np.any(on & ~edge):
            assert np.ptp(div[on & ~edge]) < 1e-12


def test_file_roundtrips(tmp_path):
    flow = F.zeldovich_flow(parse_polynomial("q1q2"), T=0.3)
    pair = M.shuffle_pair(M.generate_pair(flow, 4), seed=1)
    M.write_points_csv(tmp_path / "q.csv", pair.lagrangian)
    M.write_points_csv(tmp_path / "x.csv", pair.eulerian)
    M.write_permutation(tmp_path / "p.txt", pair.true_permutation)
    back = M.load_pair(tmp_path / "q.csv", tmp_path / "x.csv", tmp_path / "p.txt")
    assert np.array_equal(back.lagrangian, pair.lagrangian)
    assert np.array_equal(back.eulerian, pair.eulerian)
    assert np.array_equal(back.true_permutation, pair.true_permutation)
    M.save_pair_json(tmp_path / "pair.json", pair)
    import json

    again = M.PointCloudPair.from_json(json.loads((tmp_path / "pair.json").read_text()))
    assert again.grid_shape == pair.grid_shape and np.array_equal(again.eulerian, pair.eulerian)


def test_mismatched_clouds_rejected():
    with pytest.raises(ValueError):
        M.PointCloudPair(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        M.PointCloudPair([[np.nan, 0]], [[0, 0]])
