"""Command line entry point: gen, coreset, solve, eval, bench."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import secrets
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .coreset import DEFAULT_GAMMA_CONST, coreset_for, load_coreset, save_coreset
from .euclid import euclid_eps, solve_continuous, solve_discrete
from .flow import AssignmentSolution, cap_assign
from .fpt import solve_general, split_eps
from .generate import CAPACITY_MODES, FAMILIES, GenSpec, generate
from .instance import INFEASIBLE, InfeasibleError, InstanceError, load_instance, save_instance
from .nets import NetBudgetError
from .oracle import OracleLimitError, exact_solve, grid_continuous_opt
from .projection import ProjectionError

log = logging.getLogger("capclust")

EXIT_OK, EXIT_INFEASIBLE, EXIT_BUDGET, EXIT_INPUT = 0, 2, 3, 4
ALGOS = ("exact", "fpt-general", "euclid-cont", "euclid-disc")


def coreset_eps(algo: str, eps: float) -> float:
    """Coreset accuracy each solver asks for at overall accuracy eps."""
    if algo == "fpt-general":
        return split_eps(eps)[0]
    if algo in ("euclid-cont", "euclid-disc"):
        return euclid_eps(eps)
    return eps


def run_solver(inst, algo, eps, seed, opts=None, coreset=None) -> AssignmentSolution:
    """Dispatch to a solver; ``opts`` holds optional CLI settings by dest name."""
    opts = opts or {}
    budget = opts.get("budget")
    gamma_const = opts.get("gamma_const", DEFAULT_GAMMA_CONST)
    bic = opts.get("bicriteria", "auto")
    if algo == "exact":
        res = exact_solve(inst)
        if res.solution is None:
            raise InfeasibleError("no feasible k-subset")
        sol = res.solution
        sol.info.update(algo="exact", evaluations=res.evaluations)
        return sol
    if algo == "fpt-general":
        kw = {}
        if opts.get("max_color_rounds"):
            kw["max_color_rounds"] = opts["max_color_rounds"]
        if budget:
            kw["max_evaluations"] = budget
        return solve_general(inst, eps, seed, gamma_const=gamma_const, bicriteria=bic, coreset=coreset, **kw)
    if algo == "euclid-cont":
        kw = {}
        if opts.get("subset_budget"):
            kw["subset_budget"] = opts["subset_budget"]
        return solve_continuous(
            inst, eps, seed, budget, gamma_const=gamma_const, bicriteria=bic, coreset=coreset, **kw
        )
    if algo == "euclid-disc":
        kw = {}
        if opts.get("net_cell_budget"):
            kw["net_budget"] = opts["net_cell_budget"]
        return solve_discrete(
            inst, eps, seed, budget, gamma_const=gamma_const, bicriteria=bic, coreset=coreset, **kw
        )
    raise ValueError(f"unknown algorithm {algo!r}")


def solution_to_dict(sol: AssignmentSolution, seed=None) -> dict:
    feasible = sol.cost is not INFEASIBLE
    out = {
        "algo": sol.info.get("algo"),
        "centers": [int(c) for c in sol.centers],
        "cost": float(sol.cost) if feasible else None,
        "feasible": feasible,
        "best_effort": bool(sol.best_effort),
        "seed": seed,
        "assignment": [[int(c), int(f), [a.numerator, a.denominator]] for c, f, a in sol.triples],
    }
    if sol.center_coords is not None:
        out["center_coords"] = np.asarray(sol.center_coords).tolist()
    out["info"] = {k: _plain(v) for k, v in sol.info.items()}
    return out


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def _write_json(obj, path) -> None:
    text = json.dumps(obj, indent=1)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text)


def _opts(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(32)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


# -- commands ---------------------------------------------------------------------


def cmd_gen(args) -> int:
    seed = _seed(args)
    out = Path(args.out)
    specs = [
        GenSpec(
            family=args.family,
            n=args.n,
            m=args.m,
            k=args.k,
            d=args.d,
            objective=args.objective,
            capacity=args.capacity,
            integer=args.integer,
            spread=args.spread,
            colocated=args.colocated,
            seed=seed + i,
        )
        for i in range(args.count)
    ]
    if args.count == 1 and out.suffix == ".json":
        save_instance(generate(specs[0]), out)
        return EXIT_OK
    out.mkdir(parents=True, exist_ok=True)
    for i, spec in enumerate(specs):
        save_instance(generate(spec), out / f"{args.family}_{i:03d}.json")
    return EXIT_OK


def cmd_coreset(args) -> int:
    seed = _seed(args)
    inst = load_instance(args.instance)
    W = coreset_for(inst, coreset_eps(args.algo, args.eps), seed, args.gamma_const, bicriteria=args.bicriteria, r=args.r)
    if args.out in (None, "-"):
        from .coreset import coreset_to_dict

        print(json.dumps(coreset_to_dict(W)))
    else:
        save_coreset(W, args.out)
    print(f"coreset: {len(W)} points, weight {W.total_weight()}", file=sys.stderr)
    return EXIT_OK


def cmd_solve(args) -> int:
    seed = _seed(args)
    inst = load_instance(args.instance)
    W = load_coreset(args.from_coreset) if args.from_coreset else None
    sol = run_solver(inst, args.algo, args.eps, seed, _opts(args), W)
    _write_json(solution_to_dict(sol, seed), args.out)
    print(f"cost: {sol.cost}", file=sys.stderr)
    return EXIT_BUDGET if sol.best_effort else EXIT_OK


def _read_centers(spec: str) -> list:
    p = Path(spec)
    if p.exists():
        data = json.loads(p.read_text())
        return list(data["centers"] if isinstance(data, dict) else data)
    return [int(x) for x in spec.split(",") if x.strip()]


def cmd_eval(args) -> int:
    inst = load_instance(args.instance)
    sol = cap_assign(inst, _read_centers(args.centers))
    sol.info["algo"] = "eval"
    if args.out:
        _write_json(solution_to_dict(sol), args.out)
    if sol.cost is INFEASIBLE:
        print("cost: infeasible")
        return EXIT_INFEASIBLE
    print(f"cost: {sol.cost!r}")
    return EXIT_OK


def _bench_one(task):
    path, algo, eps, seed, with_oracle, opts = task
    inst = load_instance(path)
    row = dict(instance=Path(path).stem, algo=algo, seed=seed, cost=None, oracle=None, ratio=None)
    t = time.perf_counter()
    try:
        sol = run_solver(inst, algo, eps, seed, opts)
        row["cost"] = float(sol.cost)
        row["coreset_size"] = sol.info.get("coreset_size")
        row["best_effort"] = bool(sol.best_effort)
    except (InfeasibleError, InstanceError, ValueError) as exc:
        row["error"] = str(exc)
    row["wall_time"] = time.perf_counter() - t
    if with_oracle and row["cost"] is not None:
        try:
            if algo == "euclid-cont":
                row["oracle"] = grid_continuous_opt(inst, rel_gap=0.01).lower
                row["oracle_kind"] = "grid-lower"
            else:
                res = exact_solve(inst)
                row["oracle"] = None if res.cost is INFEASIBLE else float(res.cost)
                row["oracle_kind"] = "exact"
        except OracleLimitError:
            pass
        if row["oracle"]:
            row["ratio"] = row["cost"] / row["oracle"]
        elif row["oracle"] == 0:
            row["ratio"] = 1.0 if row["cost"] == 0 else float("inf")
    return row


def _expand(paths) -> list:
    out = []
    for p in paths:
        if os.path.isdir(p):
            out.extend(sorted(glob.glob(os.path.join(p, "*.json"))))
        else:
            out.extend(sorted(glob.glob(p)) or [p])
    return out


def format_table(rows) -> str:
    cols = ["instance", "algo", "cost", "oracle", "ratio", "coreset_size", "wall_time", "seed"]

    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)

    body = [[fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
    for algo in sorted({r["algo"] for r in rows}):
        ratios = np.array([r["ratio"] for r in rows if r["algo"] == algo and r["ratio"] is not None])
        if ratios.size:
            p50, p90 = np.percentile(ratios, [50, 90])
            lines.append(
                f"{algo}: n={ratios.size} ratio p50={p50:.4f} p90={p90:.4f} max={ratios.max():.4f}"
            )
    return "\n".join(lines)


def cmd_bench(args) -> int:
    seed = _seed(args)
    paths = _expand(args.instances)
    if not paths:
        raise InstanceError("no instance files found")
    algos = args.algo.split(",")
    tasks = [(p, a, args.eps, seed, not args.no_oracle, _opts(args)) for p in paths for a in algos]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            rows = list(ex.map(_bench_one, tasks))
    else:
        rows = [_bench_one(t) for t in tasks]
    rows.sort(key=lambda r: (r["instance"], r["algo"]))
    print(format_table(rows))
    with open(args.out, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (drawn and printed if omitted)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--eps", type=float, default=0.5, help="accuracy parameter in (0, 1]")
    common.add_argument("--algo", default="fpt-general", help="one of: " + ", ".join(ALGOS))
    common.add_argument("--gamma-const", type=float, default=DEFAULT_GAMMA_CONST, help="ring sample-size constant")
    common.add_argument("--budget", type=int, default=None, help="max candidate-set evaluations")
    common.add_argument("--bicriteria", default="auto", help="auto, greedy, exact or file:<path>")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="capclust", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate synthetic instances")
    g.add_argument("--family", choices=FAMILIES, default="uniform")
    g.add_argument("--n", type=int, default=20, help="clients")
    g.add_argument("--m", type=int, default=5, help="facilities")
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--d", type=int, default=2, help="dimension")
    g.add_argument("--objective", choices=("median", "means"), default="median")
    g.add_argument("--capacity", choices=CAPACITY_MODES, default="uniform")
    g.add_argument("--integer", action="store_true", help="integer coordinates")
    g.add_argument("--spread", type=float, default=0.05, help="blob standard deviation")
    g.add_argument("--colocated", action="store_true", help="facilities at the client points")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out", required=True, help="file (.json) or directory")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("coreset", parents=[common], help="build the coreset a solver would use")
    c.add_argument("instance")
    c.add_argument("--r", type=int, default=None, help="override the ring sample size")
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_coreset)

    s = sub.add_parser("solve", parents=[common], help="solve an instance")
    s.add_argument("instance")
    s.add_argument("--max-color-rounds", type=int, default=None)
    s.add_argument("--subset-budget", type=int, default=None)
    s.add_argument("--net-cell-budget", type=int, default=None)
    s.add_argument("--from-coreset", default=None, help="coreset file from the coreset command")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("eval", parents=[common], help="cost of given centers")
    e.add_argument("instance")
    e.add_argument("centers", help="comma separated ids, or a solution / JSON list file")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", parents=[common], help="ratio table over instance files")
    b.add_argument("instances", nargs="+", help="files, globs or directories")
    b.add_argument("--no-oracle", action="store_true")
    b.add_argument("--out", default="bench.jsonl", help="JSON lines output")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if any(a not in ALGOS for a in args.algo.split(",")):
        print(f"error: unknown algorithm {args.algo!r}", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NetBudgetError, ProjectionError, OracleLimitError) as exc:
        print(f"budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InstanceError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
