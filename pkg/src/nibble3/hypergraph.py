"""Rank-3 hypergraph representation and file I/O.

Vertices are dense integer ids 0..n-1.  Edges are stored canonically
sorted, duplicates are rejected, and degree/codegree indexes are built
incrementally so queries are O(1).  Instances are immutable once built;
use `HypergraphBuilder` (or the `from_edges` convenience constructor)
to assemble one.

Text format: first line ``n m2 m3``; then m2 lines ``2 u v``; then m3
lines ``3 u v w``.  Lines starting with ``#`` are comments.  All indices
are 0-based decimal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


class HypergraphError(ValueError):
    """Invalid vertex, duplicate edge, or malformed input."""


class ParseError(HypergraphError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class DegreeProfile:
    """Maximum 3-degree, 2-degree, and pair codegree of an instance."""

    delta3: int
    delta2: int
    codegree_max: int


class RankedHypergraph:
    """Immutable rank-3 hypergraph with degree and codegree indexes."""

    __slots__ = (
        "n", "edges3", "edges2", "_set3", "_set2",
        "_inc3", "_inc2", "_codeg", "_pair_edges",
    )

    def __init__(self, n: int, edges3: Sequence[tuple], edges2: Sequence[tuple]):
        """Build from canonical edge lists; prefer `from_edges` / builder."""
        self.n = n
        self.edges3 = tuple(edges3)
        self.edges2 = tuple(edges2)
        self._set3 = frozenset(self.edges3)
        self._set2 = frozenset(self.edges2)
        self._inc3 = [[] for _ in range(n)]
        self._inc2 = [[] for _ in range(n)]
        self._codeg = {}
        self._pair_edges = {}
        for idx, e in enumerate(self.edges3):
            for v in e:
                self._inc3[v].append(idx)
            for p in ((e[0], e[1]), (e[0], e[2]), (e[1], e[2])):
                self._codeg[p] = self._codeg.get(p, 0) + 1
                self._pair_edges.setdefault(p, []).append(idx)
        for idx, e in enumerate(self.edges2):
            for v in e:
                self._inc2[v].append(idx)

    @classmethod
    def from_edges(cls, n: int, edges3: Iterable = (), edges2: Iterable = ()) -> "RankedHypergraph":
        b = HypergraphBuilder(n)
        for e in edges3:
            b.add_edge3(*e)
        for e in edges2:
            b.add_edge2(*e)
        return b.build()

    # -- basic queries ---------------------------------------------------

    def _check_vertex(self, u: int) -> None:
        if not (0 <= u < self.n):
            raise HypergraphError(f"vertex {u} out of range [0, {self.n})")

    def degree3(self, u: int) -> int:
        """Number of 3-edges containing u."""
        self._check_vertex(u)
        return len(self._inc3[u])

    def degree2(self, u: int) -> int:
        """Number of 2-edges containing u."""
        self._check_vertex(u)
        return len(self._inc2[u])

    def codegree(self, u: int, v: int) -> int:
        """Number of 3-edges containing both u and v."""
        if u == v:
            raise HypergraphError("codegree requires two distinct vertices")
        self._check_vertex(u)
        self._check_vertex(v)
        return self._codeg.get((min(u, v), max(u, v)), 0)

    def edges3_at(self, u: int) -> list:
        return [self.edges3[i] for i in self._inc3[u]]

    def edges2_at(self, u: int) -> list:
        return [self.edges2[i] for i in self._inc2[u]]

    def edges3_covering(self, u: int, v: int) -> list:
        """3-edges containing both u and v."""
        key = (min(u, v), max(u, v))
        return [self.edges3[i] for i in self._pair_edges.get(key, [])]

    def has_edge2(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._set2

    def neighbors3(self, u: int) -> set:
        """Vertices sharing a 3-edge with u (N_H(u))."""
        out = set()
        for i in self._inc3[u]:
            out.update(self.edges3[i])
        out.discard(u)
        return out

    def pair_neighbors(self, u: int, v: int) -> set:
        """Third vertices of 3-edges through the pair u,v (N_H(u,v))."""
        out = set()
        for e in self.edges3_covering(u, v):
            out.update(e)
        out.discard(u)
        out.discard(v)
        return out

    def profile(self) -> DegreeProfile:
        d3 = max((len(x) for x in self._inc3), default=0)
        d2 = max((len(x) for x in self._inc2), default=0)
        cd = max(self._codeg.values(), default=0)
        return DegreeProfile(delta3=d3, delta2=d2, codegree_max=cd)

    def induce(self, subset: Iterable[int]) -> "RankedHypergraph":
        """Subhypergraph of edges fully inside `subset`; vertex ids preserved."""
        keep = set(subset)
        for u in keep:
            self._check_vertex(u)
        e3 = [e for e in self.edges3 if e[0] in keep and e[1] in keep and e[2] in keep]
        e2 = [e for e in self.edges2 if e[0] in keep and e[1] in keep]
        return RankedHypergraph(self.n, e3, e2)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RankedHypergraph)
            and self.n == other.n
            and self._set3 == other._set3
            and self._set2 == other._set2
        )

    def __hash__(self):
        return hash((self.n, self._set3, self._set2))

    def __repr__(self) -> str:
        return f"RankedHypergraph(n={self.n}, m3={len(self.edges3)}, m2={len(self.edges2)})"


class HypergraphBuilder:
    """Mutable assembler; the only way to construct edge sets."""

    def __init__(self, n: int):
        if n < 0:
            raise HypergraphError("vertex count must be nonnegative")
        self.n = n
        self._edges3 = set()
        self._edges2 = set()

    def _norm(self, verts: tuple) -> tuple:
        for v in verts:
            if not (0 <= v < self.n):
                raise HypergraphError(f"vertex {v} out of range [0, {self.n})")
        if len(set(verts)) != len(verts):
            raise HypergraphError(f"edge {verts} has repeated vertices")
        return tuple(sorted(verts))

    def add_edge3(self, u: int, v: int, w: int) -> tuple:
        e = self._norm((u, v, w))
        if e in self._edges3:
            raise HypergraphError(f"duplicate 3-edge {e}")
        self._edges3.add(e)
        return e

    def add_edge2(self, u: int, v: int) -> tuple:
        e = self._norm((u, v))
        if e in self._edges2:
            raise HypergraphError(f"duplicate 2-edge {e}")
        self._edges2.add(e)
        return e

    def has_edge3(self, u: int, v: int, w: int) -> bool:
        return tuple(sorted((u, v, w))) in self._edges3

    def has_edge2(self, u: int, v: int) -> bool:
        return tuple(sorted((u, v))) in self._edges2

    def build(self) -> RankedHypergraph:
        return RankedHypergraph(self.n, sorted(self._edges3), sorted(self._edges2))


# -- text format -----------------------------------------------------------


def parse(text: str | bytes) -> RankedHypergraph:
    """Parse the `n m2 m3` text format; errors carry the 1-based line number."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    header = None
    b = None
    m2 = m3 = 0
    seen2 = seen3 = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if header is None:
            if len(fields) != 3:
                raise ParseError("header must be 'n m2 m3'", lineno)
            try:
                n, m2, m3 = (int(x) for x in fields)
            except ValueError:
                raise ParseError("header fields must be integers", lineno) from None
            if n < 0 or m2 < 0 or m3 < 0:
                raise ParseError("header fields must be nonnegative", lineno)
            header = (n, m2, m3)
            b = HypergraphBuilder(n)
            continue
        try:
            vals = [int(x) for x in fields]
        except ValueError:
            raise ParseError("edge fields must be integers", lineno) from None
        try:
            if vals[0] == 2 and len(vals) == 3:
                b.add_edge2(vals[1], vals[2])
                seen2 += 1
            elif vals[0] == 3 and len(vals) == 4:
                b.add_edge3(vals[1], vals[2], vals[3])
                seen3 += 1
            else:
                raise ParseError(f"malformed edge line {fields}", lineno)
        except HypergraphError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), lineno) from None
    if header is None:
        raise ParseError("empty input", 1)
    if seen2 != m2 or seen3 != m3:
        raise ParseError(
            f"header announced m2={m2} m3={m3} but found {seen2} and {seen3}",
            len(text.splitlines()) or 1,
        )
    return b.build()


def serialize(h: RankedHypergraph) -> str:
    """Canonical text serialization; `parse(serialize(h)) == h`."""
    lines = [f"{h.n} {len(h.edges2)} {len(h.edges3)}"]
    for (u, v) in h.edges2:
        lines.append(f"2 {u} {v}")
    for (u, v, w) in h.edges3:
        lines.append(f"3 {u} {v} {w}")
    return "\n".join(lines) + "\n"


def load(path: str) -> RankedHypergraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


def save(h: RankedHypergraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(h))
