"""Acceptance suite: one check per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear inline) or
``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from omniflow import flow as F
from omniflow import mak as M
from omniflow import polynomials as P
from omniflow import symmat as S
from omniflow import wkb2d as W
from omniflow.config import SamplingSpec

CTILDES = [Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3), Fraction(5), Fraction(11)]


def report(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    return line


def random_phi0(seed: int, dim: int = 2) -> P.Polynomial:
    """Random polynomial of degree <= 4 with terms of every degree 2..4."""
    rng = np.random.default_rng(seed)
    terms = {}
    for exp in itertools.product(range(5), repeat=dim):
        if 2 <= sum(exp) <= 4:
            terms[exp] = Fraction(int(rng.integers(-20, 21)), 20)
    return P.Polynomial(dim, terms)


# --- criteria ---------------------------------------------------------------

def criterion_1():
    t0 = time.perf_counter()
    bad = []
    for d, c in itertools.product((3, 4), CTILDES):
        if not P.is_zero_matrix(P.commutator_poly(P.family_pd6(d, c), P.family_pd4(d, c))):
            bad.append(("pd6", d, c))
    for n, c in itertools.product(range(2, 7), CTILDES):
        if not P.is_zero_matrix(P.commutator_poly(P.family_p3_2n(n, c), P.family_pd4(3, c))):
            bad.append(("p3-2n", n, c))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 10
    return ok, f"{12 + 30 - len(bad)}/42 commutators exactly zero in {elapsed:.2f} s"


def criterion_2():
    cs = [Fraction(1, 3), Fraction(1), Fraction(5, 2), Fraction(7), Fraction(-1, 4)]
    equal = [P.family_p3_2n(3, c) == P.family_pd6(3, c) for c in cs]
    return all(equal), f"{sum(equal)}/5 coefficient tables identical"


def criterion_3():
    params = [(0, 0), (1, 0), (1, 1), (Fraction(-1, 4), Fraction(-1, 4))]
    total = zero = 0
    for k, (a, b) in itertools.product(range(2, 7), params):
        num, den = P.gexa_invariant(a, b)
        for p in P.p2_even_solutions(k, a, b):
            total += 1
            zero += P.gen2d_residual(p, num, den).is_zero() and not p.is_zero()
    return zero == total, f"{zero}/{total} cleared residuals are the zero polynomial"


def criterion_4():
    a = b = Fraction(-3, 2)
    vanishes = P.family_p2_even(3, a, b).is_zero()
    num, den = P.gexa_invariant(a, b)
    derivs = P.family_p2_even_derivatives(3, a, b)
    solved = [not p.is_zero() and P.gen2d_residual(p, num, den).is_zero() for p in derivs]
    return vanishes and all(solved), f"family vanishes: {vanishes}; derivative solutions exact: {solved}"


def criterion_5():
    rng = np.random.default_rng(2024)
    worst = 0.0
    count = 0
    for c in (1, 3):
        flow = F.polydd_flow(3, c, mu4=(0, 1), mu6=(0, 0, 1), T=0.2)
        n = 0
        while n < 20:
            q = rng.uniform(-1, 1, 3)
            q1, q2, q3 = q
            if min(abs(q1), abs(q2)) < 0.05 or abs(q2**2 - q3**2) < 0.05:
                continue
            t = float(rng.uniform(0.01, 0.2))
            got = S.gamma_invariant(flow.hessian(q, t)[0], 1, 2, 1)
            want = ((6 + 3 * c) * q2**2 - (6 + c) * q1**2) / (2 * c * q1 * q2) \
                + 2 * q2 * (q1**2 - q2**2) / (q1 * (q2**2 - q3**2))
            worst = max(worst, abs(got - want) / abs(want))
            n += 1
            count += 1
    return worst < 1e-8, f"max relative error {worst:.2e} over {count} points"


def criterion_6():
    rng = np.random.default_rng(6)
    failures = 0
    checked = 0
    worst_deg = 0.0
    for d in (2, 3):
        n = 0
        while n < 100:
            A = rng.standard_normal((d, d))
            H = (A + A.T) / 2
            if not S.eigenframe(H).distinct:
                continue
            rel = S.check_relations(H, tol=1e-9)
            checked += len(rel)
            failures += sum(r.status != "pass" for r in rel)
            if d == 2:
                worst_deg = max(worst_deg, abs(S.gamma_invariant(H, 2, 2, 1) + 1))
            n += 1
    ok = failures == 0 and worst_deg < 1e-12
    return ok, f"{checked - failures}/{checked} relations pass; max |gamma(2,2)_21 + 1| = {worst_deg:.1e}"


def omnipotential_flows():
    """Constructed flows with T inside the sampled convexity window."""
    flows = {}
    for seed in (0, 1, 2):
        z = F.zeldovich_flow(random_phi0(seed))
        flows[f"zeldovich[{seed}]"] = z.with_time_range(F.convex_time_horizon(z, 1.0))
    flows["exa2d(a=1,b=0)"] = F.exa2d_flow(1, 0, ks=(2, 3))
    flows["exa2d(a=b=1)"] = F.exa2d_flow(1, 1, ks=(2, 3))
    flows["polydd(d=3,c=3)"] = F.polydd_flow(3, 3)
    flows["xpoly(n<=4,c=1)"] = F.xpoly_flow(1, 4)
    return flows


def criterion_7():
    t0 = time.perf_counter()
    worst = ("", 0.0)
    convex = True
    for name, flow in omnipotential_flows().items():
        r = F.verify_omnipotential(flow, SamplingSpec(256, 16, time_range=flow.time_range))
        convex &= r.convexity_ok
        if r.max_defect() >= worst[1]:
            worst = (name, r.max_defect())
    ctl = F.verify_omnipotential(F.control_flow(), SamplingSpec(256, 16, time_range=(0.0, 0.2)))
    elapsed = time.perf_counter() - t0
    ok = convex and worst[1] < 1e-9 and ctl.max_defect() > 1e-4 and elapsed < 60
    return ok, (f"max defect {worst[1]:.1e} ({worst[0]}); control defect {ctl.max_defect():.2e}; "
                f"{elapsed:.1f} s")


def criterion_8(patch=None):
    patch = patch or W.build_patch(P.parse_polynomial("q1q2 + 0.3q1^3", 2))
    s0 = W.kappa_sweep(patch, (25, 50, 100, 200), order=0).slope
    s1 = W.kappa_sweep(patch, (25, 50, 100, 200), order=1).slope
    defects = []
    for eps in (0.05, 0.005, 0.0005):
        a = W.assemble_wkb_flow(patch, 50.0, eps, num_points=256, num_time_pairs=16)
        defects.append(a.report.max_defect() if a.report.convexity_ok else float("inf"))
    ok = abs(s0) <= 0.3 and abs(s1 + 1) <= 0.3 and defects[0] <= 1e-3 and defects[0] > defects[1] > defects[2]
    return ok, (f"slope P=0 {s0:+.3f}, P=1 {s1:+.3f}; defects "
                + ", ".join(f"{d:.1e}" for d in defects))


def criterion_9():
    worst_ms = 0.0
    matches = []
    equal = True
    for name, flow in omnipotential_flows().items():
        grid_n = 16 if flow.dim == 2 else 8
        pair = M.shuffle_pair(M.generate_pair(flow, grid_n), seed=0)
        t0 = time.perf_counter()
        ra = M.mak_reconstruct(pair, "auction")
        rh = M.mak_reconstruct(pair, "hungarian")
        worst_ms = max(worst_ms, (time.perf_counter() - t0) * 1e3)
        matches.append(ra.match_fraction == 1.0 and rh.match_fraction == 1.0)
        equal &= ra.integer_cost == rh.integer_cost
    # divergence of the displacement against -t laplacian(phi0) on refined grids
    phi0 = random_phi0(0)
    z = F.zeldovich_flow(phi0)
    t = F.convex_time_horizon(z, 1.0)
    errs = []
    for n in (16, 32, 64):
        pair = M.shuffle_pair(M.generate_pair(z, n, t=t), seed=1)
        rec = M.mak_reconstruct(pair, "auction")
        div = M.displacement_divergence(pair, rec.assignment)
        exact = -t * phi0.laplacian().numeric_value(pair.lagrangian)
        errs.append(float(np.max(np.abs(div - exact))))
    orders = [float(np.log2(errs[i] / errs[i + 1])) for i in range(2)]
    ok = all(matches) and equal and worst_ms < 120_000 and min(orders) >= 1.8
    return ok, (f"{sum(matches)}/{len(matches)} exact reconstructions; solver costs equal: {equal}; "
                f"slowest {worst_ms / 1e3:.1f} s; divergence orders {orders[0]:.2f}, {orders[1]:.2f}")


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}


# --- pytest entry points ----------------------------------------------------

def _run(number, capsys, *args):
    ok, detail = CRITERIA[number](*args)
    with capsys.disabled():
        print()
        report(number, ok, detail)
    assert ok, detail


@pytest.mark.parametrize("number", [1, 2, 3, 4, 5, 6, 7, 9])
def test_criterion(number, capsys):
    _run(number, capsys)


def test_criterion_8(capsys, cubic_patch):
    _run(8, capsys, cubic_patch)


if __name__ == "__main__":
    results = [CRITERIA[k]() for k in sorted(CRITERIA)]
    for k, (ok, detail) in zip(sorted(CRITERIA), results):
        report(k, ok, detail)
    raise SystemExit(0 if all(ok for ok, _ in results) else 1)
