"""Command line interface.

Subcommands: gen, detect-triangles, reduce, params-check, color, verify,
experiment.  `--json` switches machine output; exit code 0 only when the
requested check or coloring verdict is OK, 1 on violations/failures,
2 on usage errors.  NIBBLE3_WORKERS sets the default worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import hypergraph as hg
from .experiment import results_csv, results_json, run_experiment, run_pipeline
from .finisher import STATUS_OK
from .generators import KINDS, GeneratorSpec, generate
from .nibble import ListAssignment, RunConfig
from .params import (check_constraints, claim31_report, derive, from_log10_delta,
                     paper_assignment)
from .preprocess import codegree_reduce
from .triangles import find_triangles
from .verify import verify_coloring


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("NIBBLE3_WORKERS", "1")))
    except ValueError:
        return 1


def _load_lists(path: str) -> ListAssignment:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return ListAssignment(palette=data["palette"],
                          lists=tuple(tuple(l) for l in data["lists"]))


def _emit(obj, as_json: bool) -> None:
    if as_json:
        print(json.dumps(obj, sort_keys=True, indent=2, default=str))
    else:
        print(obj)


def cmd_gen(args) -> int:
    spec = GeneratorSpec(
        kind=args.kind, n=args.n, edges3=args.edges,
        max_degree=args.max_degree, edges2=args.edges2, p2=args.p2,
        seed=args.seed)
    h = generate(spec)
    text = hg.serialize(h)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        prof = h.profile()
        print(f"wrote {args.out}: n={h.n} m3={len(h.edges3)} m2={len(h.edges2)} "
              f"delta3={prof.delta3} delta2={prof.delta2} codegree={prof.codegree_max}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_detect(args) -> int:
    h = hg.load(args.file)
    wits = find_triangles(h, limit=args.limit)
    if args.json:
        _emit([w.to_dict() for w in wits], True)
    else:
        for w in wits:
            print(f"{w.kind}: vertices={w.vertices} edges={w.edges}")
        print(f"{len(wits)} triangle(s) found" + (" (truncated)" if args.limit and len(wits) == args.limit else ""))
    return 1 if wits else 0


def cmd_reduce(args) -> int:
    h = hg.load(args.file)
    delta = args.delta if args.delta is not None else h.profile().delta3
    hp, report = codegree_reduce(h, delta)
    if args.out:
        hg.save(hp, args.out)
    if args.json:
        _emit(report.to_dict(), True)
    else:
        print(f"threshold={report.threshold} pairs_replaced={len(report.pairs_replaced)} "
              f"edges3_removed={report.edges3_removed} edges2_added={report.edges2_added}")
        print(f"before: {report.profile_before}")
        print(f"after:  {report.profile_after}")
    return 0


def cmd_params_check(args) -> int:
    if args.log10_delta is not None:
        p = from_log10_delta(args.log10_delta, delta2=args.delta2)
    elif args.omega is not None:
        p = derive(args.delta, args.delta2 if args.delta2 is not None else 0,
                   args.codegree, args.epsilon, args.omega, args.p_hat, args.omega0)
    else:
        if args.delta is None:
            print("params-check requires --delta or --log10-delta", file=sys.stderr)
            return 2
        p = paper_assignment(args.delta, delta2=args.delta2)
    report = check_constraints(p)
    claim = claim31_report(p)
    if args.json:
        _emit({"parameters": p.to_dict(),
               "report": report.to_dict(),
               "claim31": {k: v.to_dict() for k, v in claim.items()}}, True)
    else:
        print(f"regime={report.regime} sanity={report.sanity}")
        for c in report.checks:
            mark = "ok " if c.satisfied else "VIOLATED"
            print(f"  {c.name:4s} {mark} slack={c.slack:+.4g} {c.note}")
        for name, c in claim.items():
            mark = "ok " if c.satisfied else "VIOLATED"
            print(f"  claim:{name:22s} {mark}")
        print("all satisfied" if report.all_satisfied else "violations present")
    return 0 if report.all_satisfied else 1


def _parse_practical(text: str) -> dict:
    try:
        c, t, theta, p_hat = text.split(",")
        return dict(colors=int(c), iterations=int(t),
                    theta=float(theta), p_hat=float(p_hat))
    except ValueError:
        raise SystemExit(f"--practical expects C,T,theta,phat, got {text!r}")


def cmd_color(args) -> int:
    h = hg.load(args.file)
    if args.practical:
        cfg = RunConfig(**_parse_practical(args.practical))
    else:
        cfg = RunConfig.tuned(max(h.profile().delta3, 3))
    overrides = dict(q_mode=args.q_mode, workers=args.workers,
                     debug_invariants=args.debug_invariants,
                     check_triangle_free=not args.unsafe)
    if args.palette:
        overrides["colors"] = args.palette
    cfg = replace(cfg, **overrides)
    lists = _load_lists(args.lists) if args.lists else ListAssignment.uniform(h.n, cfg.colors)
    res, trace, coloring = run_pipeline(
        h, cfg, args.seed, lists=lists, finisher=args.finisher,
        budget=args.mt_budget, collect_trace=bool(args.trace))
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            json.dump({"config": {k: v for k, v in cfg.__dict__.items() if k != "envelopes"},
                       "seed": args.seed, "iterations": trace,
                       "result": res.to_dict()}, fh, sort_keys=True, separators=(",", ":"))
    if args.coloring_out and coloring is not None:
        with open(args.coloring_out, "w", encoding="utf-8") as fh:
            json.dump({"coloring": [int(c) for c in coloring]}, fh)
    if args.json:
        _emit(res.to_dict(), True)
    else:
        print(f"colored {res.colored_fraction:.1%} in {res.iterations_run} rounds; "
              f"finisher={res.finisher_status} resamples={res.resamples}; "
              f"verified={res.verified} colors_used={res.colors_used}")
    return 0 if (res.finisher_status == STATUS_OK and res.verified) else 1


def cmd_verify(args) -> int:
    h = hg.load(args.file)
    with open(args.coloring, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    coloring = np.array(data["coloring"], dtype=np.int64)
    lists = _load_lists(args.lists) if args.lists else None
    verdict = verify_coloring(h, lists, coloring)
    _emit(verdict.to_dict() if args.json else
          ("OK" if verdict.ok else f"VIOLATION: {verdict.reason} at {verdict.witness}"),
          args.json)
    return 0 if verdict.ok else 1


def cmd_experiment(args) -> int:
    spec = GeneratorSpec(kind=args.kind, n=args.n, edges3=args.edges,
                         max_degree=args.max_degree, edges2=args.edges2,
                         p2=args.p2, seed=0)
    if args.practical:
        cfg = RunConfig(**_parse_practical(args.practical))
    else:
        cfg = RunConfig.tuned(args.max_degree or 10)
    seeds = range(args.seed, args.seed + args.runs)
    rows, summary = run_experiment(spec, cfg, seeds, reduce_first=args.reduce,
                                   finisher=args.finisher, budget=args.mt_budget,
                                   workers=args.workers)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(results_csv(rows))
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            fh.write(results_json(rows, summary))
    if args.json:
        _emit(summary, True)
    else:
        print(f"runs={summary['runs']} successes={summary['successes']} "
              f"rate={summary['success_rate']:.1%} "
              f"mean_colors={summary['mean_colors_used']:.1f} "
              f"shape_ratio={summary['bound_shape_ratio']}")
    return 0 if summary["successes"] == summary["runs"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nibble3", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--kind", choices=KINDS, required=True)
    g.add_argument("-n", type=int, required=True)
    g.add_argument("--edges", type=int, default=None)
    g.add_argument("--max-degree", type=int, default=None)
    g.add_argument("--edges2", type=int, default=None)
    g.add_argument("--p2", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gen)

    d = sub.add_parser("detect-triangles", help="find triangles")
    d.add_argument("file")
    d.add_argument("--limit", type=int, default=None)
    d.add_argument("--json", action="store_true")
    d.set_defaults(func=cmd_detect)

    r = sub.add_parser("reduce", help="codegree reduction")
    r.add_argument("file")
    r.add_argument("--delta", type=int, default=None)
    r.add_argument("--out", default=None)
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_reduce)

    p = sub.add_parser("params-check", help="evaluate the constraint system")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--log10-delta", type=float, default=None)
    p.add_argument("--delta2", type=float, default=None)
    p.add_argument("--codegree", type=float, default=0)
    p.add_argument("--epsilon", type=float, default=1 / 40)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--p-hat", type=float, default=None)
    p.add_argument("--omega0", type=float, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_params_check)

    c = sub.add_parser("color", help="run the coloring pipeline")
    c.add_argument("file")
    c.add_argument("--lists", default=None)
    c.add_argument("--palette", type=int, default=None)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--q-mode", choices=("exact", "bound", "mc"), default="bound")
    c.add_argument("--practical", default=None, metavar="C,T,theta,phat")
    c.add_argument("--trace", default=None)
    c.add_argument("--coloring-out", default=None)
    c.add_argument("--debug-invariants", action="store_true")
    c.add_argument("--unsafe", action="store_true",
                   help="skip the triangle-freeness check of the input")
    c.add_argument("--finisher", choices=("mt", "greedy"), default="mt")
    c.add_argument("--mt-budget", type=int, default=1_000_000)
    c.add_argument("--workers", type=int, default=_default_workers())
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_color)

    v = sub.add_parser("verify", help="verify a coloring file")
    v.add_argument("file")
    v.add_argument("--coloring", required=True)
    v.add_argument("--lists", default=None)
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("experiment", help="run a seeded experiment batch")
    e.add_argument("--kind", choices=KINDS, required=True)
    e.add_argument("-n", type=int, required=True)
    e.add_argument("--edges", type=int, default=None)
    e.add_argument("--max-degree", type=int, default=None)
    e.add_argument("--edges2", type=int, default=None)
    e.add_argument("--p2", type=float, default=0.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--runs", type=int, default=10)
    e.add_argument("--reduce", action="store_true")
    e.add_argument("--practical", default=None, metavar="C,T,theta,phat")
    e.add_argument("--finisher", choices=("mt", "greedy"), default="mt")
    e.add_argument("--mt-budget", type=int, default=1_000_000)
    e.add_argument("--workers", type=int, default=_default_workers())
    e.add_argument("--csv", default=None)
    e.add_argument("--json-out", default=None)
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
