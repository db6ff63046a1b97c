"""Experiment orchestration: generate, reduce, color, finish, verify.

Each seed runs an independent pipeline; the verifier verdict is always
recomputed from the hypergraph, the lists, and the final coloring, never
taken from engine bookkeeping.  Seeds can be dispatched to a process
pool; results are ordered by seed either way.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .finisher import STATUS_OK, finish
from .generators import GeneratorSpec, generate
from .hypergraph import DegreeProfile, RankedHypergraph
from .nibble import ListAssignment, RunConfig, run
from .preprocess import codegree_reduce, lift_coloring
from .verify import independent_set_from_coloring, verify_coloring


@dataclass
class ExperimentResult:
    seed: int
    n: int
    profile: dict
    colors: int
    colored_fraction: float
    iterations_run: int
    finisher_status: str
    resamples: int
    verified: bool
    colors_used: int
    independent_set: int
    wall_time: float
    error: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def run_pipeline(h: RankedHypergraph, cfg: RunConfig, seed: int,
                 lists: ListAssignment | None = None,
                 reduce_first: bool = False,
                 finisher: str = "mt", budget: int = 1_000_000,
                 collect_trace: bool = False) -> tuple:
    """One full coloring pipeline on a prepared instance.

    Returns (ExperimentResult, trace, coloring array or None).
    """
    t0 = time.perf_counter()
    target = h
    original = h
    if reduce_first:
        target, _report = codegree_reduce(h, h.profile().delta3)
    if lists is None:
        lists = ListAssignment.uniform(target.n, cfg.colors)
    result = run(target, lists, cfg, seed)
    state = result.state
    uncolored_after = int(state.uncolored.sum())
    colored_frac = 1.0 - uncolored_after / target.n if target.n else 1.0
    fin = finish(state, mode=finisher, rng_seed=seed, budget=budget)
    verified = False
    colors_used = 0
    iset = 0
    coloring = None
    if fin.status == STATUS_OK:
        coloring = np.array([fin.coloring[v] for v in range(target.n)], dtype=np.int64)
        verdict = verify_coloring(target, lists, coloring)
        verified = bool(verdict.ok)
        if verified and reduce_first:
            verified = lift_coloring(original, target, coloring)
        if verified:
            colors_used = len(set(int(c) for c in coloring)) if target.n else 0
            iset = len(independent_set_from_coloring(original, coloring)) if target.n else 0
    res = ExperimentResult(
        seed=seed, n=h.n, profile=vars(h.profile()), colors=cfg.colors,
        colored_fraction=colored_frac, iterations_run=len(result.trace),
        finisher_status=fin.status, resamples=fin.resamples,
        verified=verified, colors_used=colors_used, independent_set=iset,
        wall_time=time.perf_counter() - t0,
    )
    return res, (result.trace if collect_trace else None), coloring


def _one_seed(args) -> dict:
    spec_dict, cfg_dict, seed, reduce_first, finisher, budget = args
    spec = GeneratorSpec(**spec_dict)
    cfg = RunConfig(**cfg_dict)
    try:
        h = generate(spec)
        res, _, _ = run_pipeline(h, cfg, seed, reduce_first=reduce_first,
                                 finisher=finisher, budget=budget)
    except Exception as exc:  # individual seed failures recorded, not fatal
        res = ExperimentResult(
            seed=seed, n=spec.n, profile={}, colors=cfg_dict.get("colors", 0),
            colored_fraction=0.0, iterations_run=0, finisher_status="error",
            resamples=0, verified=False, colors_used=0, independent_set=0,
            wall_time=0.0, error=f"{type(exc).__name__}: {exc}")
    return res.to_dict()


def _theorem_shape(profile: dict) -> float | None:
    """max(Delta2/log Delta2, sqrt(Delta/log Delta)), the bound's shape."""
    terms = []
    d3 = profile.get("delta3", 0)
    d2 = profile.get("delta2", 0)
    if d3 > 2:
        terms.append(float(np.sqrt(d3 / np.log(d3))))
    if d2 > 2:
        terms.append(d2 / float(np.log(d2)))
    return max(terms) if terms else None


def run_experiment(spec: GeneratorSpec, cfg: RunConfig, seeds,
                   reduce_first: bool = False, finisher: str = "mt",
                   budget: int = 1_000_000, workers: int = 1) -> tuple:
    """Pipeline per seed (instance regenerated per seed); returns
    (results, summary)."""
    seeds = list(seeds)
    spec_dicts = []
    for s in seeds:
        d = asdict(spec)
        d["seed"] = s
        spec_dicts.append(d)
    cfg_dict = asdict(cfg)
    cfg_dict.pop("envelopes", None)
    jobs = [(sd, cfg_dict, s, reduce_first, finisher, budget)
            for sd, s in zip(spec_dicts, seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_one_seed, jobs))
    else:
        rows = [_one_seed(j) for j in jobs]
    rows.sort(key=lambda r: r["seed"])

    ok = [r for r in rows if r["verified"]]
    summary = {
        "runs": len(rows),
        "successes": len(ok),
        "success_rate": len(ok) / len(rows) if rows else 1.0,
        "mean_colored_fraction": float(np.mean([r["colored_fraction"] for r in rows])) if rows else 1.0,
        "mean_colors_used": float(np.mean([r["colors_used"] for r in ok])) if ok else 0.0,
        "errors": [r["error"] for r in rows if r["error"]],
    }
    shapes = [_theorem_shape(r["profile"]) for r in ok]
    ratios = [r["colors_used"] / s for r, s in zip(ok, shapes) if s]
    summary["bound_shape_ratio"] = float(np.mean(ratios)) if ratios else None
    return rows, summary


def results_csv(rows: list) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    fields = [k for k in rows[0] if k != "profile"]
    writer = csv.DictWriter(buf, fieldnames=fields)
    writer.writeheader()
    for r in rows:
        writer.writerow({k: r[k] for k in fields})
    return buf.getvalue()


def results_json(rows: list, summary: dict) -> str:
    return json.dumps({"results": rows, "summary": summary},
                      sort_keys=True, indent=2)
