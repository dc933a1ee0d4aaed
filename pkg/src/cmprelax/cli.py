"""Command-line entry point: gen, bound, bench, graph, complete.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import bounds
from .completion import psd_complete_arrowhead, verify_completion
from .components import ConnectedComponents, gamma_partial
from .errors import InputError, NumericalBreakdown, PreconditionError
from .model import FAMILIES, eval_objective, load_instance, make_instance, repair, save_instance
from .relax import BUILDERS, build, extract_candidate
from .solver import SUSPECTED_UNBOUNDED, SolveSettings, solve
from .specgraph import arrowhead_spec_graph, biconnected_components, is_block_clique, is_chordal

log = logging.getLogger("cmprelax")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def parse_seeds(text: str) -> list:
    """'0-9', '1,4,7' or a mix such as '0-2,5'."""
    seeds = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = part.split("-")
                seeds.extend(range(int(lo), int(hi) + 1))
            elif part:
                seeds.append(int(part))
    except ValueError:
        raise UsageError(f"cannot parse seed list {text!r}") from None
    if not seeds or min(seeds) < 0:
        raise UsageError(f"seed list {text!r} is empty or negative")
    return seeds


def parse_type(text: str, family: str | None = None):
    """'F1:2_5_5_1' (or '2_5_5_1' with a default family) -> (family, scheme, n1, n2, S)."""
    fam, _, body = text.rpartition(":")
    fam = (fam or family or "").upper()
    if fam not in FAMILIES:
        raise UsageError(f"instance type {text!r} needs a family among {FAMILIES}")
    try:
        n1, n2, S, scheme = (int(v) for v in body.split("_"))
    except ValueError:
        raise UsageError(f"instance type {text!r} is not of the form n1_n2_S_scheme") from None
    if scheme not in (1, 2):
        raise UsageError(f"scheme must be 1 or 2 in {text!r}")
    return fam, scheme, n1, n2, S


def _settings(args) -> SolveSettings:
    try:
        return SolveSettings(max_iterations=args.max_iter, eps_primal=args.tol, eps_dual=args.tol, eps_gap=args.tol)
    except InputError as exc:
        raise UsageError(str(exc)) from None


def _write_csv(rows, path, fields=None):
    fields = fields or list(dict.fromkeys(k for r in rows for k in r))
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    finally:
        if path:
            fh.close()


# ---------------------------------------------------------------- commands

def cmd_gen(args):
    fam = args.family.upper()
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    for seed in parse_seeds(args.seeds):
        inst = make_instance(fam, args.scheme, args.n1, args.n2, args.S, seed, args.eps)
        path = out / f"{fam}_{inst.type_name}_seed{seed}.json"
        save_instance(inst, path)
        print(path)
    return 0


def _instances(args):
    if args.instances:
        return [(str(p), load_instance(p)) for p in args.instances]
    fam = args.family.upper()
    return [(f"{fam}_{args.n1}_{args.n2}_{args.S}_{args.scheme}_seed{s}",
             make_instance(fam, args.scheme, args.n1, args.n2, args.S, s, args.eps))
            for s in parse_seeds(args.seeds)]


def cmd_bound(args):
    settings = _settings(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in BUILDERS:
            raise UsageError(f"unknown method {m!r}; expected one of {sorted(BUILDERS)}")
    rows = []
    for name, inst in _instances(args):
        for m in methods:
            t0 = time.perf_counter()
            cp = build(inst, m)
            t1 = time.perf_counter()
            log.info("%s %s: cells %s", name, cp.method, ",".join(sorted(set(cp.flags))))
            try:
                res = solve(cp, settings)
            except NumericalBreakdown as exc:
                raise NumericalBreakdown(f"{name} / {m}: {exc}", exc.iteration) from exc
            value = -np.inf if res.status == SUSPECTED_UNBOUNDED else res.objective
            ub = float("nan")
            if res.status != SUSPECTED_UNBOUNDED and inst.family in FAMILIES:
                ub = eval_objective(inst, repair(inst, extract_candidate(cp, inst, res.x)))
            rows.append({"instance": name, "method": m, "kind": cp.kind, "exact": cp.all_exact,
                         "status": res.status, "value": value, "repaired": ub, "iterations": res.iterations,
                         "solve_time": res.solve_time, "model_time": t1 - t0})
    agg = []
    for m in methods:
        vals = [r["value"] for r in rows if r["method"] == m]
        agg.append({"instance": "mean", "method": m, "value": float(np.mean(vals)),
                    "status": f"{sum(r['status'] == 'Optimal' for r in rows if r['method'] == m)}/{len(vals)} optimal"})
    _write_csv(rows + agg, args.out)
    return 0


def cmd_bench(args):
    settings = _settings(args)
    types = [parse_type(t, args.family) for t in args.types.split(",")] if args.types else \
        [parse_type(f"{args.n1}_{args.n2}_{args.S}_{args.scheme}", args.family)]
    seeds = parse_seeds(args.seeds)
    jobs = [(fam, sch, n1, n2, S, seed, args.eps) for fam, sch, n1, n2, S in types for seed in seeds]
    config = bounds.ReportConfig(oracle=not args.no_oracle, settings=settings)
    t0 = time.perf_counter()
    reports = bounds.run_batch(jobs, config, workers=args.workers)
    log.info("bench of %d instances took %.1f s", len(jobs), time.perf_counter() - t0)
    gap_rows, time_rows = [], []
    for r in reports:
        g = r.gaps()
        gap_rows.append({"family": r.family, "instance": r.name, "seed": r.seed, "cpi": r.cpi,
                         "inner_method": r.inner_method, "inner": r.inner, "UB": r.ub, "IUB": r.iub,
                         "oracle": r.oracle, "oracle_level": r.oracle_level, "UB_gap": g["UB"], "I_gap": g["I"],
                         "IUB_gap": g["IUB"], "oracle_gap": g["oracle"],
                         "status": ";".join(f"{k}={v}" for k, v in r.status.items())})
        time_rows.append({"family": r.family, "instance": r.name, "seed": r.seed, "solve_time": r.solve_time,
                          "model_time": r.model_time, "total_time": r.total_time})
    agg = bounds.aggregate(reports)
    for a in agg:
        gap_rows.append({"family": a["family"], "instance": a["instance"], "seed": "mean",
                         **{k: a[k] for k in ("UB_gap", "I_gap", "IUB_gap", "oracle_gap")},
                         "status": "solved UB/I/IUB/oracle = " + "/".join(
                             str(a[f"{k}_solved"]) for k in ("UB", "I", "IUB", "oracle"))})
        time_rows.append({"family": a["family"], "instance": a["instance"], "seed": "mean",
                          **{k: a[k] for k in ("solve_time", "model_time", "total_time")}})
    prefix = args.out or "bench"
    _write_csv(gap_rows, f"{prefix}_gaps.csv")
    _write_csv(time_rows, f"{prefix}_times.csv")
    print(f"{prefix}_gaps.csv")
    print(f"{prefix}_times.csv")
    return 0


def cmd_graph(args):
    G = arrowhead_spec_graph(args.n1, args.n2, args.S)
    chordal, witness = is_chordal(G)
    out = {"n1": args.n1, "n2": args.n2, "S": args.S, "vertices": G.n, "edges": len(G.edges()),
           "chordal": chordal, "elimination_order" if chordal else "chordless_cycle": witness,
           "block_clique": is_block_clique(G), "blocks": [sorted(b) for b in biconnected_components(G)]}
    text = json.dumps(out, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_complete(args):
    try:
        with open(args.input) as fh:
            cc = ConnectedComponents.from_json(json.load(fh))
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.input}") from None
    M = psd_complete_arrowhead(cc)
    rep = verify_completion(gamma_partial(cc), M, "psd")
    out = {"completion": M.tolist(), "ok": rep.ok, "agreement": rep.agreement, "lambda_min": rep.lambda_min,
           "violations": rep.violations}
    text = json.dumps(out, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0 if rep.ok else 2


# ---------------------------------------------------------------- parser

def _common(p, seeds=True):
    p.add_argument("--family", default="f1", type=str.lower, choices=["f1", "f2", "f3"])
    p.add_argument("--scheme", type=int, default=1, choices=[1, 2])
    p.add_argument("--n1", type=int, default=2)
    p.add_argument("--n2", type=int, default=5)
    p.add_argument("--S", type=int, default=5)
    p.add_argument("--eps", type=float, default=0.1)
    if seeds:
        p.add_argument("--seeds", default="0-9")


def _solver_flags(p):
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=50000)


def make_parser():
    p = _Parser(prog="cmprelax", description="Sparse conic bounds for two-stage structured QCQPs")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    verbose = _Parser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", help="log cone flags and timings")

    g = sub.add_parser("gen", parents=[verbose], help="write JSON instances, one per seed")
    _common(g)
    g.add_argument("--out", help="output directory")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bound", parents=[verbose], help="solve programs on instances and write CSV")
    b.add_argument("instances", nargs="*", help="instance JSON files (default: generate from flags)")
    _common(b)
    _solver_flags(b)
    b.add_argument("--methods", default="full_dnn,cpi")
    b.add_argument("--out", help="CSV path (default stdout)")
    b.set_defaults(func=cmd_bound)

    c = sub.add_parser("bench", parents=[verbose], help="gap and timing benchmark over instance types and seeds")
    _common(c)
    _solver_flags(c)
    c.add_argument("--types", help="comma list like F1:2_5_5_1,F2:3_5_3_1")
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--no-oracle", action="store_true")
    c.add_argument("--out", help="CSV prefix; writes PREFIX_gaps.csv and PREFIX_times.csv")
    c.set_defaults(func=cmd_bench)

    gr = sub.add_parser("graph", parents=[verbose], help="chordality and block-clique analysis of the arrowhead graph")
    gr.add_argument("--n1", type=int, default=2)
    gr.add_argument("--n2", type=int, default=2)
    gr.add_argument("--S", type=int, default=2)
    gr.add_argument("--out")
    gr.set_defaults(func=cmd_graph)

    co = sub.add_parser("complete", parents=[verbose], help="PSD completion of connected components read from JSON")
    co.add_argument("input")
    co.add_argument("--out")
    co.set_defaults(func=cmd_complete)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        if getattr(args, "workers", 1) < 1:
            raise UsageError("--workers must be positive")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InputError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalBreakdown as exc:
        print(f"numerical failure: {exc} (iteration {exc.iteration})", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
