"""Independent proper-coloring verification and independent-set extraction.

The verifier reads only the hypergraph, the lists, and the coloring; it
shares no bookkeeping with the coloring engine.  A proper coloring has
no monochromatic edge: every 3-edge sees at least two colors and every
2-edge sees two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .hypergraph import RankedHypergraph

UNCOLORED = -1


@dataclass(frozen=True)
class Verdict:
    ok: bool
    witness: tuple | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict:
        return {"ok": self.ok, "witness": self.witness, "reason": self.reason}


@lru_cache(maxsize=64)
def _edge_arrays(h: RankedHypergraph):
    e3 = np.array(h.edges3, dtype=np.int64).reshape(-1, 3)
    e2 = np.array(h.edges2, dtype=np.int64).reshape(-1, 2)
    return e3, e2


def _lists_seq(lists):
    return lists.lists if hasattr(lists, "lists") else lists


def _as_color_array(h: RankedHypergraph, coloring) -> np.ndarray:
    arr = np.asarray(coloring, dtype=np.int64)
    if arr.shape != (h.n,):
        raise ValueError(f"coloring must assign all {h.n} vertices, got shape {arr.shape}")
    return arr


def verify_coloring(h: RankedHypergraph, lists, coloring) -> Verdict:
    """Verdict on a total coloring: proper on all edges and inside lists.

    `lists` may be None (no list constraint), a per-vertex sequence of
    allowed colors, or any object with a `.lists` attribute.
    """
    colors = _as_color_array(h, coloring)
    if np.any(colors == UNCOLORED):
        u = int(np.argmax(colors == UNCOLORED))
        return Verdict(False, ("vertex", u), "vertex uncolored")
    if lists is not None:
        seq = _lists_seq(lists)
        for u in range(h.n):
            if int(colors[u]) not in seq[u]:
                return Verdict(False, ("vertex", u), "color not in list")
    return verify_coloring_properness(h, colors)


def verify_coloring_properness(h: RankedHypergraph, coloring) -> Verdict:
    """Properness only (no list membership); accepts partial = improper."""
    colors = _as_color_array(h, coloring)
    e3, e2 = _edge_arrays(h)
    if len(e3):
        c = colors[e3]
        bad = (c[:, 0] == c[:, 1]) & (c[:, 1] == c[:, 2]) & (c[:, 0] != UNCOLORED)
        if bad.any():
            i = int(np.argmax(bad))
            return Verdict(False, ("edge3", h.edges3[i]), "monochromatic 3-edge")
    if len(e2):
        c = colors[e2]
        bad = (c[:, 0] == c[:, 1]) & (c[:, 0] != UNCOLORED)
        if bad.any():
            i = int(np.argmax(bad))
            return Verdict(False, ("edge2", h.edges2[i]), "monochromatic 2-edge")
    return Verdict(True)


def verify_partial(h: RankedHypergraph, lists, coloring) -> Verdict:
    """Partial-coloring check: no fully colored monochromatic 3-edge, no
    colored monochromatic 2-edge, and every assigned color is in its list."""
    colors = _as_color_array(h, coloring)
    if lists is not None:
        seq = _lists_seq(lists)
        for u in np.flatnonzero(colors != UNCOLORED):
            if int(colors[u]) not in seq[int(u)]:
                return Verdict(False, ("vertex", int(u)), "color not in list")
    return verify_coloring_properness(h, colors)


def independent_set_from_coloring(h: RankedHypergraph, coloring) -> set:
    """Largest color class of a verified proper coloring.

    Contains no complete edge of `h` and has size at least
    ceil(n / #used colors).  Raises on an improper input coloring.
    """
    colors = _as_color_array(h, coloring)
    verdict = verify_coloring(h, None, colors)
    if not verdict.ok:
        raise ValueError(f"coloring is not proper: {verdict.reason} at {verdict.witness}")
    used, counts = np.unique(colors, return_counts=True)
    best = used[np.argmax(counts)]
    cls = set(int(v) for v in np.flatnonzero(colors == best))
    for e in h.edges3:
        assert not all(v in cls for v in e)
    for e in h.edges2:
        assert not all(v in cls for v in e)
    assert len(cls) >= math.ceil(h.n / len(used)) if h.n else True
    return cls
