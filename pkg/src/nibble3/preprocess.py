"""Codegree reduction: replace high-codegree pairs by 2-edges.

Pairs whose codegree reaches ceil(delta**0.6) have all their 3-edges
removed and a single 2-edge added instead, so the surviving 3-edges
satisfy the codegree hypothesis of the nibble while any proper coloring
of the reduced instance stays proper on the original (the 2-edge is a
strictly stronger constraint than the removed 3-edges).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .hypergraph import DegreeProfile, HypergraphBuilder, HypergraphError, RankedHypergraph
from .verify import verify_coloring_properness


@dataclass(frozen=True)
class ReductionReport:
    threshold: int
    pairs_replaced: tuple
    edges3_removed: int
    edges2_added: int
    profile_before: DegreeProfile
    profile_after: DegreeProfile

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "pairs_replaced": [list(p) for p in self.pairs_replaced],
            "edges3_removed": self.edges3_removed,
            "edges2_added": self.edges2_added,
            "profile_before": vars(self.profile_before),
            "profile_after": vars(self.profile_after),
        }


def codegree_reduce(h: RankedHypergraph, delta: int) -> tuple:
    """Reduce every pair with codegree >= ceil(delta**0.6) to a 2-edge.

    `delta` must be at least the maximum 3-degree of `h`.  Returns the
    reduced hypergraph and a `ReductionReport`.  Replaced pairs are
    selected in one global pass over the input codegree index.
    """
    before = h.profile()
    if delta < before.delta3:
        raise HypergraphError(
            f"delta={delta} is below the actual maximum 3-degree {before.delta3}"
        )
    threshold = math.ceil(delta ** 0.6)
    replaced = sorted(
        pair for pair in h._codeg if h._codeg[pair] >= threshold
    )
    replaced_set = set(replaced)

    b = HypergraphBuilder(h.n)
    removed = 0
    for e in h.edges3:
        pairs = ((e[0], e[1]), (e[0], e[2]), (e[1], e[2]))
        if any(p in replaced_set for p in pairs):
            removed += 1
        else:
            b.add_edge3(*e)
    for e in h.edges2:
        b.add_edge2(*e)
    added = 0
    for (u, v) in replaced:
        if not b.has_edge2(u, v):
            b.add_edge2(u, v)
            added += 1
    hp = b.build()
    after = hp.profile()

    # sanity bounds from the construction: surviving codegrees fell below
    # the cutoff, and each vertex gains at most 2*delta/threshold new pairs
    assert after.codegree_max < threshold or threshold == 0
    per_vertex = {}
    for (u, v) in replaced:
        per_vertex[u] = per_vertex.get(u, 0) + 1
        per_vertex[v] = per_vertex.get(v, 0) + 1
    if threshold > 0:
        cap = 2 * delta / (delta ** 0.6) if delta > 0 else 0
        assert all(k <= cap for k in per_vertex.values())

    report = ReductionReport(
        threshold=threshold,
        pairs_replaced=tuple(replaced),
        edges3_removed=removed,
        edges2_added=added,
        profile_before=before,
        profile_after=after,
    )
    return hp, report


def lift_coloring(h: RankedHypergraph, hp: RankedHypergraph, coloring) -> bool:
    """True iff `coloring` is proper for the reduced instance `hp`.

    When it is, it is also proper for the original `h` (every removed
    3-edge contains a replaced pair whose 2-edge forbids equal colors);
    that containment is asserted rather than trusted.
    """
    if h.n != hp.n:
        raise HypergraphError(f"vertex count mismatch: {h.n} != {hp.n}")
    ok = verify_coloring_properness(hp, coloring).ok
    if ok:
        lifted = verify_coloring_properness(h, coloring)
        assert lifted.ok, f"reduction lift failed at {lifted.witness}"
    return ok


def suggested_rebalanced_delta(delta: int, delta2_after: int, c0: float = 1 / 86000.0) -> float:
    """Computed suggestion for a larger working degree bound.

    Solves x = delta2_after**2 / (c0 * log x) by fixed point when the
    reduced 2-degree exceeds sqrt(c0 * delta * log delta); reported only,
    never enforced.
    """
    if delta2_after <= 0 or delta < 3:
        return float(delta)
    target = delta2_after ** 2 / c0
    x = max(float(delta), 3.0)
    for _ in range(200):
        nx = target / math.log(x)
        if abs(nx - x) <= 1e-9 * max(1.0, x):
            x = nx
            break
        x = nx
    return max(x, float(delta))
