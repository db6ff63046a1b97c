"""Triangle detection and classification for rank-3 hypergraphs.

A triangle is three distinct edges e, f, g and three distinct vertices
u, v, w with u,v in e, v,w in f, w,u in g, and no vertex of {u,v,w}
lying in all three edges.  For 3-uniform edge triples the isomorphism
types are the loose triangle (6 vertices), F5 (5 vertices), and
K4-minus (4 vertices); witnesses built from 2-edges only are ordinary
graph triangles, and anything combining both sizes is "mixed".
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations

from .hypergraph import RankedHypergraph

KIND_C3 = "C3"
KIND_F5 = "F5"
KIND_K4MINUS = "K4minus"
KIND_MIXED = "mixed"
KIND_GRAPH = "graph"


@dataclass(frozen=True)
class TriangleWitness:
    """One triangle: vertex triple, the three distinct edges, and its kind."""

    vertices: tuple
    edges: tuple
    kind: str

    def key(self):
        return (self.edges, self.vertices)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "vertices": list(self.vertices),
            "edges": [list(e) for e in self.edges],
        }


def classify(edges: tuple) -> str:
    """Kind of a witness given its canonical (sorted) edge triple."""
    sizes = sorted(len(e) for e in edges)
    if sizes == [2, 2, 2]:
        return KIND_GRAPH
    if sizes != [3, 3, 3]:
        return KIND_MIXED
    union = set(edges[0]) | set(edges[1]) | set(edges[2])
    if len(union) == 6:
        return KIND_C3
    if len(union) == 5:
        return KIND_F5
    return KIND_K4MINUS


def _slot_ok(verts: tuple, e: tuple, f: tuple, g: tuple) -> bool:
    """Definition check for an assigned witness (u,v in e, v,w in f, w,u in g)."""
    u, v, w = verts
    if not (u in e and v in e and v in f and w in f and w in g and u in g):
        return False
    common = set(e) & set(f) & set(g)
    return not (common & {u, v, w})


def _witness(u: int, v: int, w: int, e: tuple, f: tuple, g: tuple) -> TriangleWitness:
    verts = tuple(sorted((u, v, w)))
    es = tuple(sorted((e, f, g), key=lambda x: (len(x), x)))
    return TriangleWitness(vertices=verts, edges=es, kind=classify(es))


def find_triangles(h: RankedHypergraph, limit: int | None = None) -> list:
    """Up to `limit` triangle witnesses (all of them when limit is None).

    Enumerates vertex triples whose three pairs are each covered by some
    edge (two-hop join over the pair-coverage graph), then tests every
    combination of distinct covering edges against the definition.
    Output is deduplicated on (edge triple, vertex triple) and sorted
    canonically when complete.
    """
    if limit is not None and limit < 1:
        return []
    cover = {}
    for e in h.edges3:
        for p in combinations(e, 2):
            cover.setdefault(p, []).append(e)
    for e in h.edges2:
        cover.setdefault(e, []).append(e)
    adj = [set() for _ in range(h.n)]
    for (x, y) in cover:
        adj[x].add(y)
        adj[y].add(x)

    found = {}
    truncated = False

    def scan_triple(a: int, b: int, c: int) -> bool:
        # roles fixed as u=a, v=b, w=c; every pair->edge bijection is tried,
        # which covers all witness orientations of the unordered triple
        for e in cover.get((a, b), ()):
            for f in cover.get((b, c), ()):
                if f == e:
                    continue
                for g in cover.get((a, c), ()):
                    if g == e or g == f:
                        continue
                    if _slot_ok((a, b, c), e, f, g):
                        wit = _witness(a, b, c, e, f, g)
                        found.setdefault(wit.key(), wit)
                        if limit is not None and len(found) >= limit:
                            return True
        return False

    for a in range(h.n):
        if truncated:
            break
        na = adj[a]
        for b in sorted(x for x in na if x > a):
            for c in sorted(x for x in (na & adj[b]) if x > b):
                if scan_triple(a, b, c):
                    truncated = True
                    break
            if truncated:
                break
    out = list(found.values())
    if not truncated:
        out.sort(key=TriangleWitness.key)
    return out[:limit] if limit is not None else out


def is_triangle_free(h: RankedHypergraph) -> bool:
    return not find_triangles(h, limit=1)


def find_triangles_brute(h: RankedHypergraph) -> list:
    """Independent oracle: scan all edge triples and vertex assignments.

    Tries every role order of every edge triple; u ranges over e&g,
    v over e&f, w over f&g, which is exactly where the definition allows
    them.  Much slower than `find_triangles`; for small instances and
    cross-checks only.
    """
    edges = list(h.edges3) + list(h.edges2)
    esets = [set(e) for e in edges]
    found = {}
    for i, j, k in combinations(range(len(edges)), 3):
        for (x, y, z) in permutations((i, j, k)):
            us = esets[x] & esets[z]
            vs = esets[x] & esets[y]
            ws = esets[y] & esets[z]
            if not (us and vs and ws):
                continue
            common = esets[x] & esets[y] & esets[z]
            for u in us:
                for v in vs:
                    if v == u:
                        continue
                    for w in ws:
                        if w == u or w == v:
                            continue
                        if not ({u, v, w} & common):
                            wit = _witness(u, v, w, edges[x], edges[y], edges[z])
                            found.setdefault(wit.key(), wit)
    out = list(found.values())
    out.sort(key=TriangleWitness.key)
    return out
