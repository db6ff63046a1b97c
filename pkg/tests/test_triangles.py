import numpy as np
import pytest

from nibble3 import hypergraph as hg
from nibble3 import triangles as tri


def _kinds(h):
    return sorted(w.kind for w in tri.find_triangles(h))


def test_loose_triangle_catalog():
    # {abc, cde, efa} on a..f = 0..5
    h = hg.RankedHypergraph.from_edges(6, edges3=[(0, 1, 2), (2, 3, 4), (4, 5, 0)])
    wits = tri.find_triangles(h)
    assert len(wits) == 1
    assert wits[0].kind == tri.KIND_C3
    assert wits[0].vertices == (0, 2, 4)


def test_k4minus_catalog():
    # {abc, bcd, abd}
    h = hg.RankedHypergraph.from_edges(4, edges3=[(0, 1, 2), (1, 2, 3), (0, 1, 3)])
    assert tri.KIND_K4MINUS in _kinds(h)


def test_f5_catalog():
    # {abc, bcd, aed}
    h = hg.RankedHypergraph.from_edges(5, edges3=[(0, 1, 2), (1, 2, 3), (0, 4, 3)])
    assert set(_kinds(h)) == {tri.KIND_F5}


def test_single_edge_no_triangle():
    h = hg.RankedHypergraph.from_edges(3, edges3=[(0, 1, 2)])
    assert tri.find_triangles(h) == []
    assert tri.is_triangle_free(h)


def test_graph_triangle():
    h = hg.RankedHypergraph.from_edges(3, edges2=[(0, 1), (1, 2), (0, 2)])
    wits = tri.find_triangles(h)
    assert len(wits) == 1 and wits[0].kind == tri.KIND_GRAPH


def test_mixed_triangle():
    # 3-edge 012, 3-edge 123 sharing pair, 2-edge (0,3) closing the walk
    h = hg.RankedHypergraph.from_edges(4, edges3=[(0, 1, 2), (1, 2, 3)], edges2=[(0, 3)])
    kinds = _kinds(h)
    assert tri.KIND_MIXED in kinds


def test_shared_pair_two_edges_triangle_free():
    h = hg.RankedHypergraph.from_edges(4, edges3=[(0, 1, 2), (0, 1, 3)])
    assert tri.is_triangle_free(h)


def test_limit_semantics():
    h = hg.RankedHypergraph.from_edges(6, edges3=[(0, 1, 2), (2, 3, 4), (4, 5, 0),
                                                  (1, 3, 5)])
    all_wits = tri.find_triangles(h)
    assert len(all_wits) >= 2
    assert len(tri.find_triangles(h, limit=1)) == 1
    assert tri.find_triangles(h, limit=0) == []


def _random_h(gen, n_max=25):
    n = int(gen.integers(4, n_max + 1))
    m3 = int(gen.integers(0, 16))
    m2 = int(gen.integers(0, 7))
    b = hg.HypergraphBuilder(n)
    for _ in range(m3):
        t = tuple(sorted(gen.choice(n, 3, replace=False).tolist()))
        if not b.has_edge3(*t):
            b.add_edge3(*t)
    for _ in range(m2):
        p = tuple(sorted(gen.choice(n, 2, replace=False).tolist()))
        if not b.has_edge2(*p):
            b.add_edge2(*p)
    return b.build()


def test_matches_brute_force_on_random_instances():
    gen = np.random.default_rng(10)
    for _ in range(60):
        h = _random_h(gen)
        fast = {w.key() for w in tri.find_triangles(h)}
        brute = {w.key() for w in tri.find_triangles_brute(h)}
        assert fast == brute


def test_kinds_match_brute_force():
    gen = np.random.default_rng(11)
    for _ in range(30):
        h = _random_h(gen, n_max=12)
        fast = {(w.key(), w.kind) for w in tri.find_triangles(h)}
        brute = {(w.key(), w.kind) for w in tri.find_triangles_brute(h)}
        assert fast == brute


def test_isomorphism_invariance():
    gen = np.random.default_rng(12)
    for _ in range(20):
        h = _random_h(gen, n_max=12)
        perm = gen.permutation(h.n)
        h2 = hg.RankedHypergraph.from_edges(
            h.n,
            [tuple(sorted(int(perm[v]) for v in e)) for e in h.edges3],
            [tuple(sorted(int(perm[v]) for v in e)) for e in h.edges2])
        wits = {w.key() for w in tri.find_triangles(h)}
        mapped = set()
        for (edges, verts) in wits:
            me = tuple(sorted((tuple(sorted(int(perm[v]) for v in e)) for e in edges),
                              key=lambda x: (len(x), x)))
            mv = tuple(sorted(int(perm[v]) for v in verts))
            mapped.add((me, mv))
        assert mapped == {w.key() for w in tri.find_triangles(h2)}


def test_linear_systems_have_only_loose_witnesses():
    # codegree <= 1 rules out K4minus and F5 (both need a pair in two edges)
    from nibble3.generators import GeneratorSpec, generate
    for seed in range(5):
        h = generate(GeneratorSpec(kind="partial_steiner", n=19, edges3=18, seed=seed))
        assert h.profile().codegree_max <= 1
        kinds = {w.kind for w in tri.find_triangles(h)}
        assert kinds <= {tri.KIND_C3}


def test_witness_invariants():
    gen = np.random.default_rng(13)
    for _ in range(20):
        h = _random_h(gen)
        for w in tri.find_triangles(h):
            u, v, x = w.vertices
            assert len({u, v, x}) == 3
            assert len(set(w.edges)) == 3
            common = set(w.edges[0]) & set(w.edges[1]) & set(w.edges[2])
            assert not (common & set(w.vertices))
            for e in w.edges:
                covered = sum(1 for p in ((u, v), (v, x), (u, x))
                              if p[0] in e and p[1] in e)
                assert covered >= 1
