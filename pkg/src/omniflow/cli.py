"""Command-line front end: construct, verify, wkb, reconstruct, invariants.

Every run writes one JSON document holding the resolved configuration, a
timestamp and the result.  Exit codes: 0 pass, 1 defect found, 2 bad input.
"""
from __future__ import annotations

import os

from .config import thread_count

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, str(thread_count()))

import argparse
import json
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import flow as F
from . import mak as M
from . import polynomials as P
from . import symmat as S
from .config import DEFAULT_TOLERANCES as TOL, MakConfig, SamplingSpec, WkbConfig

FAMILIES = ("zeldovich", "zeldovich-type", "radial", "p2-even", "p2-odd", "pd46", "p3-2n")

EXIT_PASS, EXIT_DEFECT, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def interval(text: str) -> tuple[float, float]:
    vals = float_list(text)
    if len(vals) != 2 or vals[0] >= vals[1]:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi' with lo < hi, got {text!r}")
    return vals[0], vals[1]


def load_polynomial(text: str, dim: int | None = None) -> P.Polynomial:
    """A polynomial from a JSON file, a text file, or an inline expression."""
    path = Path(text)
    if path.suffix in (".json", ".txt") or path.is_file():
        if not path.is_file():
            raise ConfigError(f"polynomial file not found: {text}")
        raw = path.read_text()
        if path.suffix == ".json":
            data = json.loads(raw)
            return P.Polynomial.from_json(data.get("poly", data))
        text = raw.strip()
    try:
        return P.parse_polynomial(text, dim)
    except ValueError as exc:
        raise ConfigError(f"cannot parse polynomial {text!r}: {exc}") from exc


def load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def load_flow(path: str) -> F.FlowPotential:
    data = load_json(path)
    try:
        if "result" in data:
            data = data["result"]
        return F.flow_from_json(data.get("flow", data))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path} does not hold a flow description: {exc}") from exc


def _plain(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def resolved_config(args: argparse.Namespace) -> dict:
    skip = {"func", "stdout"}
    return {k: _plain(v) for k, v in sorted(vars(args).items()) if k not in skip}


def emit(args, result: dict) -> None:
    doc = {
        "tool": "omniflow",
        "version": __version__,
        "command": args.command,
        "config": resolved_config(args),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "result": result,
    }
    text = json.dumps(doc, sort_keys=True, indent=2, default=_plain, allow_nan=True)
    if args.stdout or not args.out:
        sys.stdout.write(text + "\n")
    if args.out:
        Path(args.out).write_text(text + "\n")


def note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _finite_points(flow: F.FlowPotential, spec: SamplingSpec, seed: int) -> np.ndarray:
    """Sample points, dropping any where a block is undefined (gridded terms near edges)."""
    from .sampling import box_points

    X = box_points(flow.dim, 4 * spec.num_points, spec.box, seed)
    H = flow.hessian(X, spec.time_range[1])
    X = X[np.all(np.isfinite(H.reshape(len(X), -1)), axis=1)]
    if len(X) < spec.num_points:
        raise ConfigError("too few points in the sampling box where the flow is defined")
    return X[: spec.num_points]


# ---------------------------------------------------------------------------
# construct
# ---------------------------------------------------------------------------

def build_family(args) -> tuple[F.FlowPotential, list[P.Polynomial]]:
    fam = args.family
    T = args.T if args.T is not None else 1.0
    if fam in ("zeldovich", "zeldovich-type"):
        if not args.phi0:
            raise ConfigError(f"--phi0 is required for family {fam}")
        phi0 = load_polynomial(args.phi0, args.dim)
        if fam == "zeldovich":
            return F.zeldovich_flow(phi0, T), [phi0]
        mu = args.mu if args.mu is not None else [1.0, 0.5]
        eta = args.eta if args.eta is not None else [0.0, 1.0]
        return F.zeldovich_type_flow(phi0, mu, eta, T), [phi0]
    if fam == "radial":
        dim = args.dim or 2
        k = args.k or 2
        fl = F.radial_flow(dim, powers=((k, (0.0, 1.0)),), T=T)
        return fl, [b for b, _ in fl.blocks]
    if fam == "p2-even":
        k = args.k or 2
        fl = F.exa2d_flow(args.a, args.b, ks=(k,), T=T)
        return fl, [b for b, _ in fl.blocks]
    if fam == "p2-odd":
        k = args.k or 2
        p = P.family_p2_odd(k, args.c1, args.c2)
        fl = F.FlowPotential(2, F.TimePolynomial([1.0]), ((p, F.TimePolynomial([0.0, 1.0])),),
                             "polynomial-family", (0.0, T))
        return fl, [p]
    if fam == "pd46":
        fl = F.polydd_flow(args.dim or 3, args.ctilde, T=T)
        return fl, [b for b, _ in fl.blocks]
    if fam == "p3-2n":
        fl = F.xpoly_flow(args.ctilde, n_max=args.n or 3, T=T)
        return fl, [b for b, _ in fl.blocks]
    raise ConfigError(f"unknown family {fam!r}; choose from {', '.join(FAMILIES)}")


def cmd_construct(args) -> int:
    flow, blocks = build_family(args)
    if args.T is None:
        T = F.convex_time_horizon(flow, args.t_max, tuple(args.box), seed=args.seed)
        if T <= 0:
            raise ConfigError("no convex time window found on the sampling box")
        flow = flow.with_time_range(T)
    params = {"k": args.k, "n": args.n or 3}
    stated = P.stated_convexity_window(args.family, **{k: v for k, v in params.items() if v is not None})
    verdicts = []
    for b in blocks:
        v = P.convexity_range_check(b, seed=args.seed, box=None if b.is_homogeneous() else tuple(args.box))
        verdicts.append({"degree": b.degree, "verdict": v.verdict, "min_eigenvalue": v.min_eigenvalue,
                         "witness": v.witness})
    note(stated)
    if args.flow_out:
        Path(args.flow_out).write_text(json.dumps(F.flow_to_json(flow), sort_keys=True, default=_plain))
    emit(args, {
        "flow": F.flow_to_json(flow),
        "convexity": {"stated": stated, "blocks": verdicts, "time_horizon": flow.time_range[1]},
    })
    return EXIT_PASS


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    flow = load_flow(args.flow)
    tr = tuple(args.t_range) if args.t_range else flow.time_range
    spec = SamplingSpec(args.num_points, args.num_time_pairs, tuple(args.box), tr, args.seed)
    X = _finite_points(flow, spec, args.seed)
    report = F.verify_omnipotential(flow, spec, points=X)
    ok = report.passed(args.tol)
    out = report.to_json()
    out["tolerance"] = args.tol
    out["passed"] = ok
    if not ok:
        note(f"defect {report.max_defect():.3g} >= {args.tol:g} at q={report.worst_point}, t={report.worst_times}")
    emit(args, out)
    return EXIT_PASS if ok else EXIT_DEFECT


# ---------------------------------------------------------------------------
# wkb
# ---------------------------------------------------------------------------

def cmd_wkb(args) -> int:
    from . import wkb2d as W

    phi0 = load_polynomial(args.phi0, 2)
    cfg = WkbConfig(grid_n=args.grid_n, box=tuple(args.box), kappa=args.kappa, order=args.order,
                    epsilon=args.epsilon, branch=args.branch, margin=args.margin, time_horizon=args.T,
                    seed=args.seed)
    patch = W.build_patch(phi0, cfg)
    if args.patch_out:
        if str(args.patch_out).endswith(".csv"):
            patch.write_csv(args.patch_out)
        else:
            Path(args.patch_out).write_text(json.dumps(patch.to_json(), sort_keys=True))
    result = {
        "eikonal_residual": patch.eikonal_residual,
        "alignment_residual": patch.alignment_residual,
        "valid_fraction": float(patch.valid.mean()),
    }
    if args.kappa_sweep:
        sweep = W.kappa_sweep(patch, args.kappa_sweep, args.order, args.margin)
        result["kappa_sweep"] = sweep.to_json()
    asm = W.assemble_wkb_flow(patch, cfg.kappa, cfg.epsilon, T=cfg.time_horizon, order=cfg.order,
                              num_points=args.num_points, num_time_pairs=args.num_time_pairs, seed=args.seed,
                              margin=args.margin)
    result.update(asm.summary())
    if args.flow_out:
        Path(args.flow_out).write_text(json.dumps(F.flow_to_json(asm.flow), sort_keys=True))
    ok = asm.report.passed(args.tol)
    result["tolerance"] = args.tol
    result["passed"] = ok
    emit(args, result)
    return EXIT_PASS if ok else EXIT_DEFECT


# ---------------------------------------------------------------------------
# reconstruct
# ---------------------------------------------------------------------------

def cmd_reconstruct(args) -> int:
    cfg = MakConfig(shuffle_seed=args.seed)
    if args.flow:
        flow = load_flow(args.flow)
        t = args.t if args.t is not None else flow.time_range[1]
        try:
            pair = M.generate_pair(flow, args.grid_n, tuple(args.box), t)
        except M.ShellCrossingError as exc:
            raise ConfigError(f"refusing to build point clouds: {exc}") from exc
        pair = M.shuffle_pair(pair, cfg.shuffle_seed)
    elif args.lagrangian and args.eulerian:
        pair = M.load_pair(args.lagrangian, args.eulerian, args.permutation)
    else:
        raise ConfigError("give --flow, or both --lagrangian and --eulerian")
    solvers = ["auction", "hungarian"] if args.solver == "both" else [args.solver]
    reports = {s: M.mak_reconstruct(pair, s, cfg) for s in solvers}
    result = {s: r.to_json() for s, r in reports.items()}
    ok = all(r.match_fraction in (None, 1.0) for r in reports.values())
    if len(reports) == 2:
        same = reports["auction"].integer_cost == reports["hungarian"].integer_cost
        result["costs_equal"] = same
        ok &= same
    main = reports[solvers[0]]
    result["no_improving_swaps"] = M.no_improving_swaps(pair, main.assignment.permutation, seed=args.seed)
    ok &= result["no_improving_swaps"]
    if args.divergence_out:
        if pair.grid_shape is None:
            raise ConfigError("divergence needs Lagrangian points on a regular grid (use --flow)")
        div = M.displacement_divergence(pair, main.assignment)
        np.savetxt(args.divergence_out, np.column_stack([pair.lagrangian, div]), delimiter=",", fmt="%.17g")
    if args.permutation_out:
        M.write_permutation(args.permutation_out, main.assignment.permutation)
    result["passed"] = bool(ok)
    emit(args, result)
    return EXIT_PASS if ok else EXIT_DEFECT


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------

def parse_matrix(text: str) -> np.ndarray:
    """'[[..],[..]]' JSON, a JSON file, or rows separated by ';' with ',' between entries."""
    src = Path(text).read_text() if Path(text).is_file() else text
    try:
        data = json.loads(src)
        if isinstance(data, dict):
            return np.asarray(S.SymmetricMatrix.from_json(data))
        A = np.asarray(data, dtype=float)
    except json.JSONDecodeError:
        try:
            A = np.array([[float(v) for v in row.split(",")] for row in src.strip().split(";")])
        except ValueError as exc:
            raise ConfigError(f"cannot parse matrix {text!r}") from exc
    if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A, A.T, rtol=0, atol=1e-14):
        raise ConfigError("matrix must be square and symmetric")
    return A


def _random_symmetric(d: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    return (A + A.T) / 2


def cmd_invariants(args) -> int:
    if args.flow:
        flow = load_flow(args.flow)
        if not args.point:
            raise ConfigError("--point is required with --flow")
        q = np.asarray(args.point, dtype=float)
        if q.size != flow.dim:
            raise ConfigError(f"--point needs {flow.dim} coordinates")
        t0, t1 = args.t_range if args.t_range else flow.time_range
        times = np.linspace(t0, t1, args.num_times).tolist()
        drift = F.g_invariant_along_trajectory(flow, q, times)
        table = []
        for t, v in zip(times, drift.values):
            H = flow.hessian(q, t)[0]
            table.append({"t": t, "g": v, "invariants": S.invariant_set(H).to_json()})
        ok = drift.drift < args.tol
        emit(args, {"table": table, "mean": drift.mean, "drift": drift.drift, "poles": drift.poles,
                    "tolerance": args.tol, "passed": ok})
        return EXIT_PASS if ok else EXIT_DEFECT
    if args.matrix:
        H = parse_matrix(args.matrix)
    elif args.random:
        H = _random_symmetric(args.random, args.seed)
    else:
        raise ConfigError("give --matrix, --random D or --flow")
    inv = S.invariant_set(H)
    rel = S.check_relations(H, args.tol)
    # poles and repeated eigenvalues make a relation inconclusive, which is not a defect
    ok = not any(r.status == "fail" for r in rel)
    emit(args, {
        "matrix": H.tolist(),
        "distinct_eigenvalues": inv.distinct,
        "invariants": inv.to_json(),
        "relations": [r.to_json() for r in rel],
        "inconclusive": sum(r.status == "inconclusive" for r in rel),
        "passed": ok,
    })
    return EXIT_PASS if ok else EXIT_DEFECT


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omniflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="write the JSON report here")
        p.add_argument("--stdout", action="store_true", help="print the report even when --out is given")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--box", type=interval, default=(-1.0, 1.0), help="sampling box 'lo,hi'")

    p = sub.add_parser("construct", help="build a flow from a named family")
    common(p)
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--phi0", help="initial potential: inline expression or .json/.txt file")
    p.add_argument("--dim", type=int)
    p.add_argument("--ctilde", type=rational, default=Fraction(3))
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--a", type=rational, default=Fraction(0))
    p.add_argument("--b", type=rational, default=Fraction(0))
    p.add_argument("--c1", type=rational, default=Fraction(1))
    p.add_argument("--c2", type=rational, default=Fraction(0))
    p.add_argument("--mu", type=float_list, help="coefficients of the |q|^2/2 factor (zeldovich-type)")
    p.add_argument("--eta", type=float_list, help="coefficients of the phi0 factor (zeldovich-type)")
    p.add_argument("--T", type=float, help="time horizon; default: sampled convexity window")
    p.add_argument("--t-max", type=float, default=1.0, help="upper bound when searching for T")
    p.add_argument("--flow-out", help="also write the bare flow description here")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify", help="check omni-potentiality of a flow file")
    common(p)
    p.add_argument("--flow", required=True)
    p.add_argument("--num-points", type=int, default=256)
    p.add_argument("--num-time-pairs", type=int, default=16)
    p.add_argument("--t-range", type=interval)
    p.add_argument("--tol", type=float, default=TOL.omnipotential)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("wkb", help="short-wavelength omni-potential flow around phi0 (2-D)")
    common(p)
    p.add_argument("--phi0", required=True)
    p.add_argument("--kappa", type=float, default=50.0)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--order", type=int, choices=(0, 1), default=1)
    p.add_argument("--grid-n", type=int, default=81)
    p.add_argument("--branch", type=int, choices=(1, 2), default=2)
    p.add_argument("--margin", type=int, default=4)
    p.add_argument("--T", type=float, default=1.0, help="initial time horizon (shrunk until convex)")
    p.add_argument("--kappa-sweep", type=float_list)
    p.add_argument("--num-points", type=int, default=256)
    p.add_argument("--num-time-pairs", type=int, default=16)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--patch-out", help="patch fields as .csv or .json")
    p.add_argument("--flow-out")
    p.set_defaults(func=cmd_wkb)

    p = sub.add_parser("reconstruct", help="recover the Lagrangian map by optimal assignment")
    common(p)
    p.add_argument("--flow")
    p.add_argument("--lagrangian")
    p.add_argument("--eulerian")
    p.add_argument("--permutation")
    p.add_argument("--grid-n", type=int, default=16)
    p.add_argument("--t", type=float)
    p.add_argument("--solver", choices=("auction", "hungarian", "both"), default="auction")
    p.add_argument("--divergence-out")
    p.add_argument("--permutation-out")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("invariants", help="eigendirection invariants of a matrix or along a trajectory")
    common(p)
    p.add_argument("--matrix")
    p.add_argument("--random", type=int, metavar="D", help="use a random symmetric DxD matrix")
    p.add_argument("--flow")
    p.add_argument("--point", type=float_list)
    p.add_argument("--t-range", type=interval)
    p.add_argument("--num-times", type=int, default=9)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_invariants)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    if args.command == "invariants" and args.tol is None:
        args.tol = 1e-8 if args.flow else TOL.relations
    try:
        return args.func(args)
    except ConfigError as exc:
        note(f"error: {exc}")
        return EXIT_CONFIG
    except (ValueError, ZeroDivisionError, ArithmeticError) as exc:
        note(f"error: {type(exc).__name__}: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
