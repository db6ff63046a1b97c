"""The iterative semi-random coloring engine.

Each round, every (vertex, color) cell is activated independently with
probability theta * p_u(c); a color is lost at u when some constraint
through u (a 3-edge, or an edge of the color's conflict graph) is fully
activated elsewhere.  Weights are renormalized so cell expectations are
martingales: cells below the cap are divided by their survival
probability when they survive and zeroed otherwise; cells at or above
the cap flip a biased coin between the cap value and zero, and the cap
cells form the frozen set B(u), never assignable afterwards.  Activated
surviving colors color their vertex, and each 3-edge that loses one
vertex to color c leaves behind a c-conflict edge on the other two.

All randomness is counter-keyed by (seed, iteration, phase, vertex,
color), so replays and worker counts cannot change a single draw.
"""

from __future__ import annotations

import json
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from . import rng
from .hypergraph import RankedHypergraph
from .params import ParameterError, Parameters
from .triangles import find_triangles
from .verify import UNCOLORED, verify_partial

PHASE_GAMMA = 1
PHASE_ETA = 2
PHASE_QMC = 3
PHASE_FINISH = 4

QMODE_EXACT = "exact"
QMODE_BOUND = "bound"
QMODE_MC = "mc"

TAG_UNSET = 0
TAG_EXACT = 1
TAG_BOUND = 2
TAG_MC = 3

# fixed accumulation grid so float reductions are identical for any
# worker count: chunk boundaries never depend on cfg.workers
_CHUNK = 4096


class TriangleFound(ValueError):
    def __init__(self, witness):
        super().__init__(f"input is not triangle-free: {witness.to_dict()}")
        self.witness = witness


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True)
class ListAssignment:
    """Per-vertex color lists over a global palette 0..palette-1."""

    palette: int
    lists: tuple

    def __post_init__(self):
        for u, lst in enumerate(self.lists):
            for c in lst:
                if not (0 <= c < self.palette):
                    raise ParameterError(f"color {c} at vertex {u} outside palette")

    @property
    def size(self) -> int:
        return len(self.lists[0]) if self.lists else 0

    @classmethod
    def uniform(cls, n: int, colors: int) -> "ListAssignment":
        base = tuple(range(colors))
        return cls(palette=colors, lists=tuple(base for _ in range(n)))

    @classmethod
    def random(cls, n: int, colors: int, palette: int, seed: int) -> "ListAssignment":
        if palette < colors:
            raise ParameterError("palette smaller than list size")
        lists = []
        for u in range(n):
            order = sorted(range(palette), key=lambda c: rng.key_hash(seed, u, c))
            lists.append(tuple(sorted(order[:colors])))
        return cls(palette=palette, lists=tuple(lists))


@dataclass(frozen=True)
class EnvelopeParams:
    """Constants for the report-only drift envelopes (P1)-(P6)."""

    delta: float
    epsilon: float
    omega: float
    omega1: float
    omega2: float
    omega6: float

    @classmethod
    def from_parameters(cls, p: Parameters) -> "EnvelopeParams":
        def f(x):
            try:
                return float(x)
            except OverflowError:
                return float("inf")
        return cls(delta=f(p.delta), epsilon=f(p.epsilon), omega=f(p.omega),
                   omega1=f(p.omega1), omega2=f(p.omega2), omega6=f(p.omega6))


@dataclass(frozen=True)
class RunConfig:
    """Engine parameters: palette size, rounds, activation scale, cap."""

    colors: int
    iterations: int
    theta: float
    p_hat: float
    q_mode: str = QMODE_BOUND
    component_cap: int = 20
    mc_samples: int = 100_000
    workers: int = 1
    debug_invariants: bool = False
    check_triangle_free: bool = True
    envelopes: EnvelopeParams | None = None

    def __post_init__(self):
        if self.colors < 1 or self.iterations < 0:
            raise ParameterError("colors must be >= 1 and iterations >= 0")
        if not (0 < self.theta <= 1):
            raise ParameterError(f"theta must be in (0, 1], got {self.theta}")
        if not (0 < self.p_hat <= 1):
            raise ParameterError(f"p_hat must be in (0, 1], got {self.p_hat}")
        if self.theta * self.p_hat > 1 + 1e-12:
            raise ParameterError("theta * p_hat exceeds 1: activation probability invalid")
        if self.q_mode not in (QMODE_BOUND, QMODE_EXACT, QMODE_MC):
            raise ParameterError(f"unknown q mode {self.q_mode!r}")

    @classmethod
    def from_parameters(cls, p: Parameters, **overrides) -> "RunConfig":
        base = dict(
            colors=p.colors_int(),
            iterations=p.iterations_int(),
            theta=float(p.theta),
            p_hat=float(p.p_hat),
            envelopes=EnvelopeParams.from_parameters(p),
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def tuned(cls, delta: int, k: float = 5.0, theta: float = 0.25,
              cap_ratio: float = 4.0, **overrides) -> "RunConfig":
        """Practical desk-scale parameters: C = ceil(k*sqrt(delta/ln delta)),
        enough rounds for the residual to shrink to a few percent, and a
        weight cap a few times the initial 1/C."""
        d = max(int(delta), 3)
        colors = max(2, int(np.ceil(k * np.sqrt(d / np.log(d)))))
        base = dict(
            colors=colors,
            iterations=int(np.ceil(4.0 / theta)),
            theta=theta,
            p_hat=min(1.0, cap_ratio / colors),
        )
        base.update(overrides)
        return cls(**base)


@dataclass
class ActivationSample:
    """One round's activation draws; eta coins are recorded lazily."""

    seed: int
    iteration: int
    by_vertex: dict
    by_color: dict
    eta: dict = field(default_factory=dict)


@dataclass
class SurvivalTable:
    """Per-cell survival probabilities with per-cell provenance tags."""

    q: np.ndarray        # (n, palette) float, NaN where not computed
    tag: np.ndarray      # (n, palette) uint8, TAG_* codes
    stderr: dict = field(default_factory=dict)   # (u, c) -> MC standard error


@dataclass
class IterationStats:
    """Measured state quantities at the start of an iteration, along with
    the round's outcome and report-only envelope violation counts."""

    iteration: int
    uncolored: int
    colored_this_round: int = 0
    starved: int = 0
    w_sum: np.ndarray | None = None
    e_u: np.ndarray | None = None
    f_u: np.ndarray | None = None
    h_u: np.ndarray | None = None
    d_h: np.ndarray | None = None
    d_gc_max: np.ndarray | None = None
    e_uvw: np.ndarray | None = None
    envelope_violations: dict | None = None

    def aggregates(self) -> dict:
        out = {}
        for name in ("w_sum", "e_u", "f_u", "h_u", "d_h", "d_gc_max", "e_uvw"):
            arr = getattr(self, name)
            if arr is None or len(arr) == 0:
                out[name] = [0.0, 0.0, 0.0]
            else:
                out[name] = [float(arr.min()), float(arr.mean()), float(arr.max())]
        return out

    def to_dict(self) -> dict:
        return {
            "i": self.iteration,
            "uncolored": self.uncolored,
            "colored_round": self.colored_this_round,
            "starved": self.starved,
            "stats": self.aggregates(),
            "envelopes": self.envelope_violations,
        }


@dataclass
class NibbleState:
    """Mutable snapshot between iterations; `iterate` returns a new one."""

    hypergraph: RankedHypergraph
    lists: ListAssignment
    theta: float
    p_hat: float
    iteration: int
    weights: np.ndarray          # (n, palette)
    frozen: np.ndarray           # (n, palette) bool: the B(u) flags
    coloring: np.ndarray         # (n,) int, UNCOLORED where unset
    uncolored: np.ndarray        # (n,) bool
    edges3: np.ndarray           # (m_i, 3) active induced 3-edges
    gc_adj: list                 # per color: dict vertex -> set of neighbors
    h0: np.ndarray               # initial per-vertex entropy, for (P4)
    starved: frozenset = frozenset()
    _pair_index: dict | None = None
    _inc3: list | None = None

    @property
    def n(self) -> int:
        return self.hypergraph.n

    @property
    def palette(self) -> int:
        return self.lists.palette

    def uncolored_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.uncolored)

    @property
    def pair_index(self) -> dict:
        """pair (v,w) -> list of third vertices over active 3-edges."""
        if self._pair_index is None:
            idx = {}
            for (a, b, c) in self.edges3:
                a, b, c = int(a), int(b), int(c)
                idx.setdefault((a, b), []).append(c)
                idx.setdefault((a, c), []).append(b)
                idx.setdefault((b, c), []).append(a)
            self._pair_index = idx
        return self._pair_index

    @property
    def inc3(self) -> list:
        """Per-vertex list of active 3-edge rows."""
        if self._inc3 is None:
            inc = [[] for _ in range(self.n)]
            for row, e in enumerate(self.edges3):
                for v in e:
                    inc[int(v)].append(row)
            self._inc3 = inc
        return self._inc3

    def gc_edges(self, c: int) -> list:
        """Canonical sorted edge list of color graph c."""
        adj = self.gc_adj[c]
        return sorted(
            (u, v) for u in adj for v in adj[u] if u < v
        )


# -- initialization ----------------------------------------------------------


def init(h: RankedHypergraph, lists: ListAssignment, cfg: RunConfig) -> NibbleState:
    """Initial state: weight 1/C on every list color, conflict graphs
    seeded with a copy of the input 2-edges for every color, no frozen
    colors, everything uncolored.

    Rejects inputs containing a triangle (unless the config disables the
    check) and list sizes that are non-uniform or exceed the cap budget
    (1/C must not exceed p_hat, or the cap coin probability would pass 1).
    """
    n = h.n
    sizes = {len(lst) for lst in lists.lists} if n else {cfg.colors}
    if sizes != {cfg.colors}:
        raise ParameterError(f"every list must have exactly {cfg.colors} colors, saw sizes {sorted(sizes)}")
    if 1.0 / cfg.colors > cfg.p_hat + 1e-12:
        raise ParameterError(
            f"initial weight 1/C = {1.0 / cfg.colors:.6g} exceeds p_hat = {cfg.p_hat:.6g}")
    if cfg.check_triangle_free:
        wits = find_triangles(h, limit=1)
        if wits:
            raise TriangleFound(wits[0])

    weights = np.zeros((n, lists.palette), dtype=np.float64)
    for u, lst in enumerate(lists.lists):
        weights[u, list(lst)] = 1.0 / cfg.colors
    gc_adj = []
    base = defaultdict(set)
    for (u, v) in h.edges2:
        base[u].add(v)
        base[v].add(u)
    for _ in range(lists.palette):
        gc_adj.append({u: set(vs) for u, vs in base.items()})
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(weights > 0, np.log(np.where(weights > 0, weights, 1.0)), 0.0)
    h0 = -(weights * logs).sum(axis=1)
    return NibbleState(
        hypergraph=h, lists=lists, theta=cfg.theta, p_hat=cfg.p_hat,
        iteration=0, weights=weights,
        frozen=np.zeros((n, lists.palette), dtype=bool),
        coloring=np.full(n, UNCOLORED, dtype=np.int64),
        uncolored=np.ones(n, dtype=bool),
        edges3=np.array(h.edges3, dtype=np.int64).reshape(-1, 3),
        gc_adj=gc_adj, h0=h0,
    )


# -- per-phase operations ----------------------------------------------------


def sample_activations(state: NibbleState, rng_seed: int) -> ActivationSample:
    """Independent Bernoulli(theta * p_u(c)) draws for all live cells."""
    theta = state.theta
    if theta * state.weights.max(initial=0.0) > 1 + 1e-12:
        raise ParameterError("theta * p exceeds 1 for some cell")
    uv = state.uncolored_vertices()
    by_vertex: dict = {}
    by_color: dict = defaultdict(set)
    if len(uv):
        u01 = rng.uniform_array(
            rng_seed, state.iteration, PHASE_GAMMA,
            uv[:, None], np.arange(state.palette)[None, :],
        )
        hits = u01 < theta * state.weights[uv]
        for i, u in enumerate(uv):
            cs = np.flatnonzero(hits[i])
            if len(cs):
                by_vertex[int(u)] = tuple(int(c) for c in cs)
                for c in cs:
                    by_color[int(c)].add(int(u))
    return ActivationSample(seed=rng_seed, iteration=state.iteration,
                            by_vertex=by_vertex, by_color=dict(by_color))


def lost_colors(state: NibbleState, sample: ActivationSample) -> dict:
    """L(u): colors with a fully activated constraint at u."""
    lost = defaultdict(set)
    pair_index = state.pair_index
    for c, active in sample.by_color.items():
        ordered = sorted(active)
        for v, w in combinations(ordered, 2):
            for third in pair_index.get((v, w), ()):
                lost[third].add(c)
        adj = state.gc_adj[c]
        for v in ordered:
            for u in adj.get(v, ()):
                lost[u].add(c)
    return dict(lost)


# -- survival probabilities --------------------------------------------------


class ComponentTooLarge(Exception):
    def __init__(self, size):
        self.size = size


def link_constraints(state: NibbleState, u: int, c: int) -> tuple:
    """Pair constraints (from active 3-edges at u) and forced-zero
    singletons (conflict-graph neighbors) with positive weight."""
    col = state.weights[:, c]
    pairs = set()
    for row in state.inc3[int(u)]:
        e = state.edges3[row]
        v, w = (int(x) for x in e if int(x) != int(u))
        if col[v] > 0 and col[w] > 0:
            pairs.add((v, w) if v < w else (w, v))
    singles = {int(v) for v in state.gc_adj[c].get(int(u), ()) if col[int(v)] > 0}
    return sorted(pairs), sorted(singles)


def _independence_probability(vertices: list, adj: dict, pr: dict) -> float:
    """Pr[the activated subset spans no constraint edge], by branching on
    a maximum-degree vertex; exact, exponential only in pathological
    components (callers cap component size)."""
    live = {v: set(adj[v]) for v in vertices}

    def rec(live_adj: dict) -> float:
        best, bdeg = None, 0
        for v in live_adj:
            d = len(live_adj[v])
            if d > bdeg or (d == bdeg and best is not None and d > 0 and v < best):
                best, bdeg = v, d
        if bdeg == 0:
            return 1.0
        v = best
        rest = {x: live_adj[x] - {v} for x in live_adj if x != v}
        p_off = (1.0 - pr[v]) * rec(rest)
        nbrs = live_adj[v]
        factor = 1.0
        for w in nbrs:
            factor *= 1.0 - pr[w]
        rest2 = {x: live_adj[x] - nbrs - {v} for x in live_adj if x != v and x not in nbrs}
        p_on = pr[v] * factor * rec(rest2)
        return p_off + p_on

    return rec(live)


def _component_mc(vertices: list, edges: list, pr: dict, key: int, samples: int) -> tuple:
    """Monte Carlo estimate of the component independence probability."""
    gen = np.random.Generator(np.random.Philox(key=key))
    vs = list(vertices)
    probs = np.array([pr[v] for v in vs])
    index = {v: i for i, v in enumerate(vs)}
    e = np.array([(index[a], index[b]) for a, b in edges], dtype=np.int64)
    ok = np.zeros(samples, dtype=bool)
    block = 1 << 14
    done = 0
    good = 0
    while done < samples:
        take = min(block, samples - done)
        bits = gen.random((take, len(vs))) < probs[None, :]
        viol = (bits[:, e[:, 0]] & bits[:, e[:, 1]]).any(axis=1)
        good += int((~viol).sum())
        done += take
    est = good / samples
    se = float(np.sqrt(max(est * (1 - est), 1e-12) / samples))
    return est, se


def link_survival(pairs: list, singles: list, activation: dict,
                  component_cap: int = 20, mc_key: int | None = None,
                  mc_samples: int = 100_000) -> tuple:
    """Exact survival probability of one link.

    `activation[v]` is the activation probability theta*p_v(c).  Returns
    (q, tag, stderr); components above `component_cap` fall back to
    Monte Carlo when `mc_key` is given and raise otherwise.
    """
    q = 1.0
    forced = set(singles)
    for v in sorted(forced):
        q *= 1.0 - activation[v]
    edges = [(a, b) for (a, b) in pairs if a not in forced and b not in forced]
    adj = defaultdict(set)
    verts = set()
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
        verts.update((a, b))
    seen = set()
    tag, stderr = TAG_EXACT, 0.0
    rel_var = 0.0
    for start in sorted(verts):
        if start in seen:
            continue
        comp = []
        stack = [start]
        seen.add(start)
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        comp.sort()
        if len(comp) <= component_cap:
            q *= _independence_probability(comp, adj, activation)
        else:
            if mc_key is None:
                raise ComponentTooLarge(len(comp))
            comp_set = set(comp)
            comp_edges = [e for e in edges if e[0] in comp_set]
            est, se = _component_mc(comp, comp_edges, activation, mc_key, mc_samples)
            q *= est
            tag = TAG_MC
            if est > 0:
                rel_var += (se / est) ** 2
    if tag == TAG_MC:
        stderr = q * float(np.sqrt(rel_var))
    return q, tag, stderr


def survival_prob(state: NibbleState, u: int, c: int, mode: str = QMODE_EXACT,
                  *, rng_seed: int = 0, component_cap: int = 20,
                  mc_samples: int = 100_000) -> float:
    """Survival probability of color c at vertex u for the current round.

    A fixed number given the state (it does not depend on the round's
    draws).  Raises if c is frozen at u: survival is defined on
    non-frozen colors only.
    """
    if state.frozen[u, c]:
        raise ParameterError(f"color {c} is frozen at vertex {u}: survival undefined")
    pairs, singles = link_constraints(state, u, c)
    theta = state.theta
    col = state.weights[:, c]
    involved = {v for p in pairs for v in p} | set(singles)
    activation = {v: theta * float(col[v]) for v in involved}
    if mode == QMODE_BOUND:
        e_uc = sum(col[a] * col[b] for a, b in pairs)
        f_uc = sum(col[v] for v in singles)
        return float(min(1.0, max(0.0, 1.0 - theta * theta * e_uc - theta * f_uc)))
    if mode == QMODE_MC:
        verts = sorted(involved)
        key = rng.spawn_key(rng_seed, state.iteration, PHASE_QMC, u, c)
        pr = dict(activation)
        edges = list(pairs) + [(v, v) for v in ()]  # pairs only; singles handled below
        # treat singles as pairs with a always-on partner: simpler to sample directly
        gen = np.random.Generator(np.random.Philox(key=key))
        if not verts:
            return 1.0
        probs = np.array([pr[v] for v in verts])
        index = {v: i for i, v in enumerate(verts)}
        pe = np.array([(index[a], index[b]) for a, b in pairs], dtype=np.int64).reshape(-1, 2)
        sg = np.array([index[v] for v in singles], dtype=np.int64)
        good = 0
        done = 0
        block = 1 << 14
        while done < mc_samples:
            take = min(block, mc_samples - done)
            bits = gen.random((take, len(verts))) < probs[None, :]
            viol = np.zeros(take, dtype=bool)
            if len(pe):
                viol |= (bits[:, pe[:, 0]] & bits[:, pe[:, 1]]).any(axis=1)
            if len(sg):
                viol |= bits[:, sg].any(axis=1)
            good += int((~viol).sum())
            done += take
        return good / mc_samples
    if mode == QMODE_EXACT:
        key = rng.spawn_key(rng_seed, state.iteration, PHASE_QMC, u, c)
        q, _, _ = link_survival(pairs, singles, activation,
                                component_cap=component_cap,
                                mc_key=key, mc_samples=mc_samples)
        return q
    raise ParameterError(f"unknown survival mode {mode!r}")


def _bound_tables(state: NibbleState, pool: ThreadPoolExecutor | None) -> tuple:
    """Vectorized e_u(c) and f_u(c) matrices with a fixed chunk grid."""
    n, P = state.weights.shape
    W = state.weights
    E = np.zeros((n, P))
    F = np.zeros((n, P))
    m = state.edges3

    def edge_chunk(lo: int, hi: int) -> np.ndarray:
        part = np.zeros((n, P))
        block = m[lo:hi]
        pvw = W[block[:, 1]] * W[block[:, 2]]
        puw = W[block[:, 0]] * W[block[:, 2]]
        puv = W[block[:, 0]] * W[block[:, 1]]
        np.add.at(part, block[:, 0], pvw)
        np.add.at(part, block[:, 1], puw)
        np.add.at(part, block[:, 2], puv)
        return part

    bounds = [(lo, min(lo + _CHUNK, len(m))) for lo in range(0, len(m), _CHUNK)]
    parts = pool.map(lambda b: edge_chunk(*b), bounds) if pool else (edge_chunk(*b) for b in bounds)
    for part in parts:
        E += part

    for c in range(P):
        edges = state.gc_edges(c)
        if not edges:
            continue
        arr = np.array(edges, dtype=np.int64)
        col = W[:, c]
        np.add.at(F[:, c], arr[:, 0], col[arr[:, 1]])
        np.add.at(F[:, c], arr[:, 1], col[arr[:, 0]])
    return E, F


def survival_table(state: NibbleState, cfg: RunConfig, rng_seed: int = 0) -> SurvivalTable:
    """Survival probabilities for every live (u, c) cell, per cfg.q_mode."""
    n, P = state.weights.shape
    q = np.full((n, P), np.nan)
    tag = np.zeros((n, P), dtype=np.uint8)
    stderr: dict = {}
    live = state.uncolored[:, None] & (state.weights > 0) & ~state.frozen
    theta = state.theta

    if cfg.q_mode == QMODE_BOUND:
        pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
        try:
            E, F = _bound_tables(state, pool)
        finally:
            if pool:
                pool.shutdown()
        vals = np.clip(1.0 - theta * theta * E - theta * F, 0.0, 1.0)
        q[live] = vals[live]
        tag[live] = TAG_BOUND
        return SurvivalTable(q=q, tag=tag, stderr=stderr)

    cells = [(int(u), int(c)) for u, c in zip(*np.nonzero(live))]

    def solve(cell):
        u, c = cell
        pairs, singles = link_constraints(state, u, c)
        col = state.weights[:, c]
        involved = {v for p in pairs for v in p} | set(singles)
        activation = {v: theta * float(col[v]) for v in involved}
        if cfg.q_mode == QMODE_MC:
            val = survival_prob(state, u, c, QMODE_MC, rng_seed=rng_seed,
                                mc_samples=cfg.mc_samples)
            return cell, val, TAG_MC, float(np.sqrt(max(val * (1 - val), 1e-12) / cfg.mc_samples))
        key = rng.spawn_key(rng_seed, state.iteration, PHASE_QMC, u, c)
        val, t, se = link_survival(pairs, singles, activation,
                                   component_cap=cfg.component_cap,
                                   mc_key=key, mc_samples=cfg.mc_samples)
        return cell, val, t, se

    if cfg.workers > 1 and len(cells) > 64:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(solve, cells))
    else:
        results = [solve(cell) for cell in cells]
    for (u, c), val, t, se in results:
        q[u, c] = val
        tag[u, c] = t
        if t == TAG_MC:
            stderr[(u, c)] = se
    return SurvivalTable(q=q, tag=tag, stderr=stderr)


# -- weight update, assignment, graph maintenance ----------------------------


def update_weights(state: NibbleState, sample: ActivationSample,
                   survival: SurvivalTable, lost: dict | None = None) -> tuple:
    """Renormalized weights and the next frozen sets.

    Cells with p/q < p_hat keep p/q when the color survives and drop to
    zero otherwise; cells at the cap boundary (or already frozen, or
    with q = 0) flip the biased cap coin.  Frozen flags are set exactly
    where the coin emits the cap, never by float comparison.
    """
    if lost is None:
        lost = lost_colors(state, sample)
    n, P = state.weights.shape
    W, B, Q = state.weights, state.frozen, survival.q
    p_hat = state.p_hat
    live = state.uncolored[:, None] & (W > 0)

    lost_mask = np.zeros((n, P), dtype=bool)
    for u, cs in lost.items():
        lost_mask[u, list(cs)] = True

    qv = np.where(np.isnan(Q), 0.0, Q)
    flip2 = live & (B | (W >= p_hat * qv))
    flip1 = live & ~flip2

    new_w = np.zeros_like(W)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(flip1 & (qv > 0), W / np.where(qv > 0, qv, 1.0), 0.0)
    surv1 = flip1 & ~lost_mask
    new_w[surv1] = ratio[surv1]

    new_frozen = np.zeros_like(B)
    us, cs = np.nonzero(flip2)
    if len(us):
        u01 = rng.uniform_array(sample.seed, state.iteration, PHASE_ETA, us, cs)
        heads = u01 < W[us, cs] / p_hat
        new_w[us[heads], cs[heads]] = p_hat
        new_frozen[us[heads], cs[heads]] = True
        for u, c, head in zip(us, cs, heads):
            sample.eta[(int(u), int(c))] = int(head)
    # weights of colored vertices play no further role; keep rows zeroed
    new_w[~state.uncolored] = 0.0
    new_frozen[~state.uncolored] = False
    return new_w, new_frozen


def assign_colors(state: NibbleState, sample: ActivationSample,
                  lost: dict | None = None) -> dict:
    """Vertices colored this round: smallest activated surviving color."""
    if lost is None:
        lost = lost_colors(state, sample)
    newly = {}
    for u in sorted(sample.by_vertex):
        dead = lost.get(u, ())
        for c in sorted(sample.by_vertex[u]):
            if not state.frozen[u, c] and c not in dead:
                newly[u] = c
                break
    return newly


def update_color_graphs(state: NibbleState, newly: dict) -> list:
    """Next round's conflict graphs: for each active 3-edge losing exactly
    one vertex to color c, join the surviving pair in graph c; then drop
    every newly colored vertex from all graphs."""
    new_adj = [{u: set(vs) for u, vs in adj.items()} for adj in state.gc_adj]
    for w in sorted(newly):
        c = newly[w]
        adj = new_adj[c]
        for row in state.inc3[w]:
            e = state.edges3[row]
            a, b = (int(x) for x in e if int(x) != w)
            if a in newly or b in newly:
                continue
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
    for adj in new_adj:
        for w in newly:
            if w in adj:
                del adj[w]
        for u in list(adj):
            adj[u] -= newly.keys()
            if not adj[u]:
                del adj[u]
    return new_adj


# -- instrumentation ---------------------------------------------------------


def measure(state: NibbleState, envelopes: EnvelopeParams | None = None) -> IterationStats:
    """Start-of-round measurements of the tracked quantities, with
    report-only envelope comparisons when constants are available."""
    W = state.weights
    uv = state.uncolored_vertices()
    m = state.edges3
    n = state.n

    w_sum = W[uv].sum(axis=1) if len(uv) else np.zeros(0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(W > 0, np.log(np.where(W > 0, W, 1.0)), 0.0)
    h_all = -(W * logs).sum(axis=1)
    h_u = h_all[uv] if len(uv) else np.zeros(0)

    if len(m):
        e_rows = (W[m[:, 0]] * W[m[:, 1]] * W[m[:, 2]]).sum(axis=1)
        e_acc = np.zeros(n)
        for k in range(3):
            np.add.at(e_acc, m[:, k], e_rows)
        d_acc = np.zeros(n, dtype=np.int64)
        for k in range(3):
            np.add.at(d_acc, m[:, k], 1)
    else:
        e_rows = np.zeros(0)
        e_acc = np.zeros(n)
        d_acc = np.zeros(n, dtype=np.int64)

    f_acc = np.zeros(n)
    dgc = np.zeros(n, dtype=np.int64)
    for c, adj in enumerate(state.gc_adj):
        col = W[:, c]
        for u, vs in adj.items():
            s = 0.0
            for v in vs:
                s += col[v]
            f_acc[u] += col[u] * s
            if len(vs) > dgc[u]:
                dgc[u] = len(vs)

    stats = IterationStats(
        iteration=state.iteration,
        uncolored=int(len(uv)),
        starved=len(state.starved),
        w_sum=w_sum,
        e_u=e_acc[uv] if len(uv) else np.zeros(0),
        f_u=f_acc[uv] if len(uv) else np.zeros(0),
        h_u=h_u,
        d_h=d_acc[uv].astype(np.float64) if len(uv) else np.zeros(0),
        d_gc_max=dgc[uv].astype(np.float64) if len(uv) else np.zeros(0),
        e_uvw=e_rows,
    )
    if envelopes is not None and len(uv):
        i = state.iteration
        th = state.theta
        ev = envelopes
        geom4 = sum((1 - th / 4) ** j for j in range(i))
        stats.envelope_violations = {
            "P1": int((np.abs(1 - stats.w_sum) > i / ev.omega1 + 1e-12).sum()) if ev.omega1 > 0 else None,
            "P2": int((stats.e_u > (1 - th / 3) ** i * ev.omega + i / ev.omega2 + 1e-12).sum()) if ev.omega2 > 0 else None,
            "P3": int((stats.f_u > 8 * (1 - th / 4) ** i * ev.omega + 1e-12).sum()),
            "P4": int((stats.h_u < state.h0[uv] - 21 * ev.epsilon * geom4 - 1e-12).sum()),
            "P5": int((stats.d_h > (1 - th / 3) ** i * ev.delta + 1e-12).sum()),
            "P6": int((stats.d_gc_max > 3 * ev.omega6 * i * th * ev.delta * state.p_hat + 1e-12).sum()),
        }
    return stats


# -- iteration and full runs -------------------------------------------------


def _debug_checks(prev: NibbleState, state: NibbleState) -> None:
    v = verify_partial(state.hypergraph, state.lists, state.coloring)
    if not v.ok:
        raise InvariantViolation(f"partial coloring violation: {v.reason} at {v.witness}")
    if state.weights.min(initial=0.0) < 0 or state.weights.max(initial=0.0) > state.p_hat + 1e-15:
        raise InvariantViolation("weight escaped [0, p_hat]")
    if np.any(state.frozen & ~np.isclose(state.weights, state.p_hat)):
        raise InvariantViolation("frozen flag without cap weight")
    if np.any(state.uncolored & ~prev.uncolored):
        raise InvariantViolation("uncolored set is not monotone decreasing")
    for c, adj in enumerate(state.gc_adj):
        for u, vs in adj.items():
            if not state.uncolored[u] or any(not state.uncolored[v] for v in vs):
                raise InvariantViolation(f"conflict graph {c} touches a colored vertex")
    for c in range(state.palette):
        union = RankedHypergraph(
            state.n,
            [tuple(int(x) for x in e) for e in state.edges3],
            state.gc_edges(c),
        )
        wits = find_triangles(union, limit=1)
        if wits:
            raise InvariantViolation(
                f"triangle appeared in H_i united with conflict graph {c}: {wits[0].to_dict()}")


def iterate(state: NibbleState, rng_seed: int, cfg: RunConfig) -> tuple:
    """One full round; returns the next state and this round's stats."""
    stats = measure(state, cfg.envelopes)
    sample = sample_activations(state, rng_seed)
    lost = lost_colors(state, sample)
    survival = survival_table(state, cfg, rng_seed)
    new_w, new_frozen = update_weights(state, sample, survival, lost)
    newly = assign_colors(state, sample, lost)
    gc_adj = update_color_graphs(state, newly)

    coloring = state.coloring.copy()
    uncolored = state.uncolored.copy()
    for u, c in newly.items():
        coloring[u] = c
        uncolored[u] = False
    new_w[~uncolored] = 0.0
    new_frozen[~uncolored] = False
    if len(state.edges3):
        keep = uncolored[state.edges3].all(axis=1)
        edges3 = state.edges3[keep]
    else:
        edges3 = state.edges3
    starved = frozenset(
        int(u) for u in np.flatnonzero(uncolored & (new_w.sum(axis=1) <= 0)))
    nxt = NibbleState(
        hypergraph=state.hypergraph, lists=state.lists,
        theta=state.theta, p_hat=state.p_hat,
        iteration=state.iteration + 1,
        weights=new_w, frozen=new_frozen,
        coloring=coloring, uncolored=uncolored,
        edges3=edges3, gc_adj=gc_adj, h0=state.h0,
        starved=starved,
    )
    stats.colored_this_round = len(newly)
    if cfg.debug_invariants:
        _debug_checks(state, nxt)
    return nxt, stats


@dataclass
class RunResult:
    coloring: np.ndarray
    state: NibbleState
    trace: list

    def trace_bytes(self) -> bytes:
        return json.dumps(self.trace, sort_keys=True,
                          separators=(",", ":")).encode("utf-8")


def run(h: RankedHypergraph, lists: ListAssignment, cfg: RunConfig,
        rng_seed: int) -> RunResult:
    """T rounds (early stop once everything is colored); the trace holds
    one stats record per executed round."""
    state = init(h, lists, cfg)
    trace = []
    for _ in range(cfg.iterations):
        if not state.uncolored.any():
            break
        state, stats = iterate(state, rng_seed, cfg)
        trace.append(stats.to_dict())
    return RunResult(coloring=state.coloring.copy(), state=state, trace=trace)
