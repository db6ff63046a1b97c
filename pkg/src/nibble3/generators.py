"""Seed-deterministic instance generators.

Kinds:
  partial_steiner        pair-disjoint random greedy triple packing
  random3                uniform distinct triples
  random_rank3           triples plus random 2-edges
  triangle_free_filtered incremental generation rejecting any edge whose
                         insertion would create a triangle
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import rng
from .hypergraph import HypergraphBuilder, RankedHypergraph
from .triangles import _slot_ok

KINDS = ("partial_steiner", "random3", "random_rank3", "triangle_free_filtered")


class GeneratorError(ValueError):
    def __init__(self, message: str, stats: dict | None = None):
        super().__init__(message)
        self.stats = stats or {}


@dataclass(frozen=True)
class GeneratorSpec:
    """What to generate: the structural kind, size, and density targets.

    Exactly one of `edges3` (triple count) or `max_degree` (3-degree
    target, giving roughly n*max_degree/3 triples) must be set; 2-edges
    come from `edges2` (count) or `p2` (pair density).
    """

    kind: str
    n: int
    edges3: int | None = None
    max_degree: int | None = None
    edges2: int | None = None
    p2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeneratorError(f"unknown generator kind {self.kind!r}")
        if self.n < 0:
            raise GeneratorError("n must be nonnegative")
        if (self.edges3 is None) == (self.max_degree is None):
            raise GeneratorError("set exactly one of edges3 or max_degree")

    def target_edges3(self) -> int:
        if self.edges3 is not None:
            return self.edges3
        # a degree target saturates: aim below the cap-packing limit so
        # rejection sampling terminates, with the max degree still ~ cap
        return int(0.8 * self.n * self.max_degree / 3)

    def target_edges2(self) -> int:
        if self.edges2 is not None:
            return self.edges2
        return int(round(self.p2 * self.n * (self.n - 1) / 2))


class _IncrementalTriangleFilter:
    """Pair-coverage index answering "would this edge create a triangle".

    A new edge can only appear as one of the three witness edges, through
    one of its own vertex pairs; candidate third vertices are the common
    coverage-graph neighbors of that pair, and the full definition check
    runs on every covering-edge combination.
    """

    def __init__(self, n: int):
        self.n = n
        self.cover = {}
        self.padj = [set() for _ in range(n)]

    def add(self, edge: tuple) -> None:
        for (a, b) in combinations(edge, 2):
            self.cover.setdefault((a, b), []).append(edge)
            self.padj[a].add(b)
            self.padj[b].add(a)

    def creates_triangle(self, edge: tuple) -> bool:
        ev = set(edge)
        for (x, y) in combinations(edge, 2):
            for w in self.padj[x] & self.padj[y]:
                if w in ev:
                    continue
                for f in self.cover.get((min(y, w), max(y, w)), ()):
                    if f == edge:
                        continue
                    for g in self.cover.get((min(x, w), max(x, w)), ()):
                        if g == edge or g == f:
                            continue
                        if _slot_ok((x, y, w), edge, f, g):
                            return True
        return False


class _TripleStream:
    """Buffered distinct-vertex triple proposals from one generator."""

    def __init__(self, gen: np.random.Generator, n: int, block: int = 4096):
        self.gen = gen
        self.n = n
        self.block = block
        self._buf: list = []

    def __next__(self) -> tuple:
        while not self._buf:
            raw = self.gen.integers(0, self.n, size=(self.block, 3))
            ok = ((raw[:, 0] != raw[:, 1]) & (raw[:, 0] != raw[:, 2])
                  & (raw[:, 1] != raw[:, 2]))
            raw = np.sort(raw[ok], axis=1)
            self._buf = [tuple(int(x) for x in row) for row in raw[::-1]]
        return self._buf.pop()


def _pick_pair(gen: np.random.Generator, n: int) -> tuple:
    a = int(gen.integers(n))
    b = a
    while b == a:
        b = int(gen.integers(n))
    return (min(a, b), max(a, b))


def _steiner_attempt(n: int, target: int, max_degree, key: int) -> list:
    gen = np.random.Generator(np.random.Philox(key=key))
    stream = _TripleStream(gen, n)
    used_pairs = set()
    degree = [0] * n
    triples = []
    budget = 200 * max(target, 1)
    while len(triples) < target and budget > 0:
        budget -= 1
        t = next(stream)
        pairs = ((t[0], t[1]), (t[0], t[2]), (t[1], t[2]))
        if any(p in used_pairs for p in pairs):
            continue
        if max_degree is not None and any(degree[v] >= max_degree for v in t):
            continue
        used_pairs.update(pairs)
        for v in t:
            degree[v] += 1
        triples.append(t)
    return triples


def generate(spec: GeneratorSpec) -> RankedHypergraph:
    """Instance for `spec`; deterministic in `spec.seed`.

    Raises `GeneratorError` (with partial statistics) on infeasible
    targets or when rejection sampling stalls.
    """
    n = spec.n
    target3 = spec.target_edges3()
    target2 = spec.target_edges2()
    if n < 3 and target3 > 0:
        raise GeneratorError("need at least 3 vertices for 3-edges")
    max_triples = n * (n - 1) * (n - 2) // 6
    if target3 > max_triples:
        raise GeneratorError(f"edges3 target {target3} exceeds {max_triples}")
    if target2 > n * (n - 1) // 2:
        raise GeneratorError(f"edges2 target {target2} exceeds maximum")

    if spec.kind == "partial_steiner":
        if target3 > n * (n - 1) // 6:
            raise GeneratorError(
                f"pair-disjoint packing of {target3} triples impossible on {n} points")
        best: list = []
        for restart in range(60):
            triples = _steiner_attempt(
                n, target3, spec.max_degree, rng.spawn_key(spec.seed, restart))
            if len(triples) >= target3:
                best = triples
                break
            if len(triples) > len(best):
                best = triples
        if len(best) < target3:
            raise GeneratorError(
                f"packing stalled at {len(best)}/{target3} triples",
                stats={"achieved": len(best), "target": target3})
        b = HypergraphBuilder(n)
        for t in sorted(best):
            b.add_edge3(*t)
        return b.build()

    gen = np.random.Generator(np.random.Philox(key=rng.spawn_key(spec.seed)))

    if spec.kind in ("random3", "random_rank3"):
        b = HypergraphBuilder(n)
        stream = _TripleStream(gen, n)
        triples = set()
        degree = [0] * n
        budget = 200 * max(target3, 1)
        while len(triples) < target3 and budget > 0:
            budget -= 1
            t = next(stream)
            if t in triples:
                continue
            if spec.max_degree is not None and any(degree[v] >= spec.max_degree for v in t):
                continue
            triples.add(t)
            for v in t:
                degree[v] += 1
        if len(triples) < target3:
            raise GeneratorError("triple sampling stalled",
                                 stats={"achieved": len(triples), "target": target3})
        pairs = set()
        budget = 200 * max(target2, 1)
        while len(pairs) < target2 and budget > 0:
            budget -= 1
            pairs.add(_pick_pair(gen, n))
        if len(pairs) < target2:
            raise GeneratorError("pair sampling stalled",
                                 stats={"achieved": len(pairs), "target": target2})
        for t in sorted(triples):
            b.add_edge3(*t)
        for p in sorted(pairs):
            b.add_edge2(*p)
        return b.build()

    # triangle_free_filtered
    filt = _IncrementalTriangleFilter(n)
    b = HypergraphBuilder(n)
    degree = [0] * n
    pairs = set()
    budget = 400 * max(target2, 1)
    while len(pairs) < target2 and budget > 0:
        budget -= 1
        p = _pick_pair(gen, n)
        if p in pairs or filt.creates_triangle(p):
            continue
        pairs.add(p)
        filt.add(p)
        b.add_edge2(*p)
    if len(pairs) < target2:
        raise GeneratorError("2-edge generation stalled under triangle filter",
                             stats={"achieved2": len(pairs), "target2": target2})
    stream = _TripleStream(gen, n)
    triples = set()
    budget = 400 * max(target3, 1)
    while len(triples) < target3 and budget > 0:
        budget -= 1
        t = next(stream)
        if t in triples:
            continue
        if spec.max_degree is not None and any(degree[v] >= spec.max_degree for v in t):
            continue
        if filt.creates_triangle(t):
            continue
        triples.add(t)
        filt.add(t)
        for v in t:
            degree[v] += 1
        b.add_edge3(*t)
    if len(triples) < target3:
        raise GeneratorError(
            "3-edge generation stalled under triangle filter",
            stats={"achieved": len(triples), "target": target3,
                   "achieved2": len(pairs)})
    return b.build()
