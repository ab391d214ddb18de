"""Residual of the truncated WKB term against kappa, for amplitude orders 0 and 1.

Writes a CSV (kappa, residual_P0, residual_P1) and prints the fitted log2 slopes.
"""
import argparse
import csv

from omniflow import wkb2d
from omniflow.config import WkbConfig
from omniflow.polynomials import parse_polynomial


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--phi0", default="q1q2 + 0.3q1^3")
    ap.add_argument("--grid-n", type=int, default=81)
    ap.add_argument("--kappas", default="25,50,100,200,400")
    ap.add_argument("--out", default="kappa_sweep.csv")
    args = ap.parse_args()

    kappas = [float(k) for k in args.kappas.split(",")]
    patch = wkb2d.build_patch(parse_polynomial(args.phi0, 2), WkbConfig(grid_n=args.grid_n))
    sweeps = [wkb2d.kappa_sweep(patch, kappas, order=p) for p in (0, 1)]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kappa", "residual_P0", "residual_P1"])
        for row in zip(kappas, sweeps[0].residuals, sweeps[1].residuals):
            w.writerow(row)
    for s in sweeps:
        print(f"P={s.order}: slope {s.slope:+.3f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
