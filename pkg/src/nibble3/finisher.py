"""Finishing step: color the residual vertices left after the rounds.

Residual weights are normalized into per-vertex distributions (frozen
and zero-weight colors excluded), every residual vertex draws a color,
and bad events (a residual 3-edge going monochromatic, or both ends of
a conflict-graph edge taking its color) are eliminated by resampling
the involved vertices, lowest-indexed event first.  A report evaluates
the asymmetric-local-lemma premises (event probability and
dependency-neighborhood sums, both against 1/4); when they hold the
loop clears quickly, and when the budget runs out the caller falls back
to a greedy completion instead of crashing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .nibble import PHASE_FINISH, ListAssignment, NibbleState
from .verify import UNCOLORED

STATUS_OK = "ok"
STATUS_FALLBACK = "fallback_needed"
STATUS_INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class NormalizedDistribution:
    """Residual sampling distributions p*_u over support colors."""

    support: dict          # u -> tuple of colors
    probabilities: dict    # u -> np.ndarray aligned with support
    mass: dict             # u -> residual weight sum before normalizing
    starved: tuple         # vertices whose residual mass fell below the floor
    floor: float

    def vertices(self) -> list:
        return sorted(self.support)


@dataclass(frozen=True, order=True)
class BadEvent:
    """kind "A": residual 3-edge monochromatic; kind "B": both ends of a
    color-c conflict edge colored c."""

    kind: str
    color: int
    vertices: tuple

    def to_dict(self) -> dict:
        return {"kind": self.kind, "color": self.color, "vertices": list(self.vertices)}


@dataclass
class FinisherResult:
    status: str
    coloring: dict | None
    resamples: int = 0
    note: str = ""
    witness: int | None = None


def normalize(state: NibbleState, floor: float = 1e-6) -> NormalizedDistribution:
    """Per-vertex distributions over non-frozen positive-weight colors.

    Vertices whose residual mass is below `floor` are flagged starved
    and carry no distribution; the greedy fallback handles them.
    """
    support = {}
    probabilities = {}
    mass = {}
    starved = []
    for u in (int(x) for x in np.flatnonzero(state.uncolored)):
        row = state.weights[u]
        cols = [c for c in np.flatnonzero(row > 0) if not state.frozen[u, c]]
        z = float(row[cols].sum()) if cols else 0.0
        mass[u] = z
        if z < floor:
            starved.append(u)
            continue
        p = row[cols] / z
        assert abs(p.sum() - 1.0) <= 1e-12
        support[u] = tuple(int(c) for c in cols)
        probabilities[u] = p
    return NormalizedDistribution(
        support=support, probabilities=probabilities, mass=mass,
        starved=tuple(starved), floor=floor,
    )


def _all_events(state: NibbleState) -> list:
    events = []
    for e in state.edges3:
        events.append(BadEvent(kind="A", color=-1,
                               vertices=tuple(int(x) for x in e)))
    for c in range(state.palette):
        for (u, v) in state.gc_edges(c):
            events.append(BadEvent(kind="B", color=c, vertices=(u, v)))
    events.sort()
    return events


def find_bad_events(state: NibbleState, assignment: dict) -> list:
    """Violated events under `assignment` (a color per residual vertex)."""
    bad = []
    for ev in _all_events(state):
        cs = [assignment[v] for v in ev.vertices]
        if ev.kind == "A":
            if cs[0] == cs[1] == cs[2]:
                bad.append(ev)
        else:
            if cs[0] == ev.color and cs[1] == ev.color:
                bad.append(ev)
    return bad


def _draw(dist: NormalizedDistribution, u: int, seed: int, counter: int) -> int:
    x = rng.uniform(seed, PHASE_FINISH, u, counter)
    cum = 0.0
    support = dist.support[u]
    probs = dist.probabilities[u]
    for c, p in zip(support, probs):
        cum += p
        if x < cum:
            return c
    return support[-1]


def resample_until_clear(state: NibbleState, dist: NormalizedDistribution,
                         rng_seed: int, budget: int = 1_000_000) -> FinisherResult:
    """Sample residual colors and resample bad events until none remain.

    Only the selected event's vertices are redrawn at each step.  Returns
    the full coloring (engine partial merged in) on success and
    `fallback_needed` when the budget is exhausted or some residual
    vertex has no distribution; never raises on hard instances.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    residual = [int(u) for u in np.flatnonzero(state.uncolored)]
    if dist.starved or any(u not in dist.support for u in residual):
        missing = dist.starved or tuple(u for u in residual if u not in dist.support)
        return FinisherResult(status=STATUS_FALLBACK, coloring=None,
                              note=f"starved vertices {list(missing)[:8]} have no distribution")
    counters = {u: 0 for u in residual}
    assignment = {u: _draw(dist, u, rng_seed, 0) for u in residual}
    resamples = 0
    while True:
        bad = find_bad_events(state, assignment)
        if not bad:
            full = {int(v): int(state.coloring[v]) for v in range(state.n)
                    if state.coloring[v] != UNCOLORED}
            full.update(assignment)
            return FinisherResult(status=STATUS_OK, coloring=full, resamples=resamples)
        if resamples >= budget:
            return FinisherResult(status=STATUS_FALLBACK, coloring=None,
                                  resamples=resamples, note="resample budget exhausted")
        ev = bad[0]
        for v in ev.vertices:
            counters[v] += 1
            assignment[v] = _draw(dist, v, rng_seed, counters[v])
        resamples += 1


@dataclass
class LLLReport:
    """Evaluated local-lemma premises for the residual instance.

    `neighborhood` sums include every event sharing a vertex with the
    event in question, the event itself included; that is what the
    finishing-step arithmetic bounds, and it only over-counts the
    lemma's D_i sum, so certification here implies the premises.
    """

    events: int
    max_event_prob: float
    max_neighborhood_sum: float
    prob_condition: bool         # every Pr[event] <= 1/4
    neighborhood_condition: bool  # every dependency sum <= 1/4
    starved: tuple = ()

    @property
    def certified(self) -> bool:
        return self.prob_condition and self.neighborhood_condition and not self.starved

    def to_dict(self) -> dict:
        return {
            "events": self.events,
            "max_event_prob": self.max_event_prob,
            "max_neighborhood_sum": self.max_neighborhood_sum,
            "prob_condition": self.prob_condition,
            "neighborhood_condition": self.neighborhood_condition,
            "starved": list(self.starved),
            "certified": self.certified,
        }


def _event_probability(ev: BadEvent, dist: NormalizedDistribution,
                       palette: int) -> float:
    def pstar(u: int) -> np.ndarray:
        out = np.zeros(palette)
        out[list(dist.support[u])] = dist.probabilities[u]
        return out

    rows = [pstar(v) for v in ev.vertices]
    if ev.kind == "A":
        return float((rows[0] * rows[1] * rows[2]).sum())
    return float(rows[0][ev.color] * rows[1][ev.color])


def lll_condition_report(state: NibbleState, dist: NormalizedDistribution) -> LLLReport:
    """Pr[A_uvw] = sum_c p*_u p*_v p*_w, Pr[B_uv,c] = p*_u(c) p*_v(c), and
    per-event dependency-neighborhood sums, each compared against 1/4."""
    events = _all_events(state)
    involved = {v for ev in events for v in ev.vertices}
    if any(v not in dist.support for v in involved):
        missing = tuple(sorted(v for v in involved if v not in dist.support))
        return LLLReport(events=len(events), max_event_prob=float("inf"),
                         max_neighborhood_sum=float("inf"),
                         prob_condition=False, neighborhood_condition=False,
                         starved=missing)
    if not events:
        return LLLReport(events=0, max_event_prob=0.0, max_neighborhood_sum=0.0,
                         prob_condition=True, neighborhood_condition=True)
    probs = [_event_probability(ev, dist, state.palette) for ev in events]
    by_vertex = {}
    for idx, ev in enumerate(events):
        for v in ev.vertices:
            by_vertex.setdefault(v, []).append(idx)
    max_nb = 0.0
    for idx, ev in enumerate(events):
        nbrs = set()
        for v in ev.vertices:
            nbrs.update(by_vertex[v])
        s = sum(probs[j] for j in nbrs)
        if s > max_nb:
            max_nb = s
    mx = max(probs)
    return LLLReport(
        events=len(events), max_event_prob=mx, max_neighborhood_sum=max_nb,
        prob_condition=mx <= 0.25, neighborhood_condition=max_nb <= 0.25,
    )


def greedy_fallback(state: NibbleState, lists: ListAssignment | None = None) -> FinisherResult:
    """Deterministic completion: residual vertices in decreasing residual
    constraint degree each take their smallest list color that conflicts
    with nothing already colored (3-edges of the original instance, its
    2-edges, and the per-color conflict graphs).  Returns `infeasible`
    with a witness vertex when some vertex has no available color."""
    lists = lists if lists is not None else state.lists
    h = state.hypergraph
    residual = [int(u) for u in np.flatnonzero(state.uncolored)]
    deg = {}
    for u in residual:
        d = len(state.inc3[u])
        for adj in state.gc_adj:
            d += len(adj.get(u, ()))
        deg[u] = d
    order = sorted(residual, key=lambda u: (-deg[u], u))
    coloring = state.coloring.copy()
    for u in order:
        chosen = None
        for c in lists.lists[u]:
            ok = True
            for (a, b) in h.edges2_at(u):
                v = b if a == u else a
                if coloring[v] == c:
                    ok = False
                    break
            if ok:
                for e in h.edges3_at(u):
                    others = [v for v in e if v != u]
                    if coloring[others[0]] == c and coloring[others[1]] == c:
                        ok = False
                        break
            if ok:
                for v in state.gc_adj[c].get(u, ()):
                    if coloring[v] == c:
                        ok = False
                        break
            if ok:
                chosen = c
                break
        if chosen is None:
            return FinisherResult(status=STATUS_INFEASIBLE, coloring=None,
                                  witness=u, note=f"no list color available at {u}")
        coloring[u] = chosen
    full = {v: int(coloring[v]) for v in range(state.n)}
    return FinisherResult(status=STATUS_OK, coloring=full)


def finish(state: NibbleState, mode: str = "mt", rng_seed: int = 0,
           budget: int = 1_000_000, floor: float = 1e-6) -> FinisherResult:
    """Complete a partial coloring: resampling first (mode "mt"), greedy
    completion as fallback or when asked ("greedy")."""
    if not state.uncolored.any():
        full = {v: int(state.coloring[v]) for v in range(state.n)}
        return FinisherResult(status=STATUS_OK, coloring=full)
    if mode == "greedy":
        return greedy_fallback(state)
    if mode != "mt":
        raise ValueError(f"unknown finisher mode {mode!r}")
    dist = normalize(state, floor=floor)
    result = resample_until_clear(state, dist, rng_seed, budget)
    if result.status == STATUS_OK:
        return result
    fallback = greedy_fallback(state)
    if fallback.status == STATUS_OK:
        fallback.note = f"after {result.note or 'resampling failure'}"
    return fallback
