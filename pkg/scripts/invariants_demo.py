"""Frame invariants along trajectories of the symmetric 3-D flow, and the relation report
for a random matrix."""
import numpy as np

from omniflow import flow, symmat


def main():
    fl = flow.polydd_flow(3, 3)
    times = np.linspace(0.01, fl.time_range[1], 6)
    rng = np.random.default_rng(0)
    print("q                         drift      g1        g2        g3")
    for q in rng.uniform(-1, 1, (5, 3)):
        d = flow.g_invariant_along_trajectory(fl, q, times)
        g = ", ".join(f"{v:+.4f}" for v in d.mean)
        print(f"{np.array2string(q, precision=3):<25} {d.drift:.1e}  {g}")

    A = rng.standard_normal((3, 3))
    H = (A + A.T) / 2
    for r in symmat.check_relations(H):
        print(f"{r.relation:<22} {r.residual:.2e}  {r.status}")


if __name__ == "__main__":
    main()
