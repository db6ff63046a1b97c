import numpy as np
import pytest

from nibble3 import hypergraph as hg
from nibble3.generators import GeneratorSpec, generate
from nibble3.nibble import (QMODE_BOUND, QMODE_EXACT, QMODE_MC, TAG_EXACT,
                            ActivationSample, ListAssignment, NibbleState,
                            RunConfig, TriangleFound, assign_colors, init,
                            iterate, link_survival, lost_colors, run,
                            sample_activations, survival_prob, survival_table,
                            update_color_graphs, update_weights)
from nibble3.params import ParameterError
from nibble3.verify import UNCOLORED, verify_partial


def small_cfg(**kw):
    base = dict(colors=4, iterations=8, theta=0.25, p_hat=0.5,
                check_triangle_free=False)
    base.update(kw)
    return RunConfig(**base)


def make_state(n, edges3=(), edges2=(), colors=4, theta=0.25, p_hat=0.5,
               weights=None, frozen_cells=(), gc_extra=(), coloring=None):
    """Assemble a state directly for unit tests; p_hat below 1/colors is
    applied after init so cap-boundary cases can be staged."""
    h = hg.RankedHypergraph.from_edges(n, edges3, edges2)
    lists = ListAssignment.uniform(n, colors)
    cfg = RunConfig(colors=colors, iterations=4, theta=theta,
                    p_hat=max(p_hat, 1.0 / colors),
                    check_triangle_free=False)
    state = init(h, lists, cfg)
    state.p_hat = p_hat
    if weights is not None:
        state.weights = np.array(weights, dtype=np.float64)
    for (u, c) in frozen_cells:
        state.frozen[u, c] = True
        state.weights[u, c] = p_hat
    for (c, u, v) in gc_extra:
        state.gc_adj[c].setdefault(u, set()).add(v)
        state.gc_adj[c].setdefault(v, set()).add(u)
    if coloring is not None:
        for u, c in coloring.items():
            state.coloring[u] = c
            state.uncolored[u] = False
            state.weights[u] = 0.0
    return state


# -- init ---------------------------------------------------------------------

def test_init_uniform_weights():
    state = make_state(3, colors=2)
    assert np.allclose(state.weights[:, :2], 0.5)
    assert not state.frozen.any()
    assert state.uncolored.all()


def test_init_2edge_copied_to_every_color_graph():
    state = make_state(4, edges2=[(1, 2)], colors=3)
    for c in range(3):
        assert 2 in state.gc_adj[c][1]
        assert 1 in state.gc_adj[c][2]


def test_init_rejects_triangle_with_witness():
    h = hg.RankedHypergraph.from_edges(6, edges3=[(0, 1, 2), (2, 3, 4), (4, 5, 0)])
    cfg = RunConfig(colors=4, iterations=2, theta=0.25, p_hat=0.5)
    with pytest.raises(TriangleFound) as err:
        init(h, ListAssignment.uniform(6, 4), cfg)
    assert err.value.witness.kind == "C3"


def test_init_rejects_cap_below_initial_weight():
    h = hg.RankedHypergraph.from_edges(3, edges3=[(0, 1, 2)])
    cfg = RunConfig(colors=2, iterations=2, theta=0.25, p_hat=0.4)
    with pytest.raises(ParameterError):
        init(h, ListAssignment.uniform(3, 2), cfg)


def test_init_rejects_nonuniform_lists():
    h = hg.RankedHypergraph.from_edges(3, edges3=[(0, 1, 2)])
    lists = ListAssignment(palette=4, lists=((0, 1), (0, 1, 2), (1, 3)))
    cfg = RunConfig(colors=2, iterations=2, theta=0.25, p_hat=0.5,
                    check_triangle_free=False)
    with pytest.raises(ParameterError):
        init(h, lists, cfg)


# -- sampling -----------------------------------------------------------------

def test_zero_weight_never_activates():
    state = make_state(5, colors=3)
    state.weights[:, 2] = 0.0
    for seed in range(50):
        sample = sample_activations(state, seed)
        assert 2 not in sample.by_color


def test_sampling_deterministic():
    state = make_state(30, edges3=[(0, 1, 2)], colors=4)
    a = sample_activations(state, 7)
    b = sample_activations(state, 7)
    assert a.by_vertex == b.by_vertex and a.by_color == b.by_color


def test_sampling_empirical_rate():
    state = make_state(40, colors=4, theta=0.16, p_hat=0.5)
    state.weights[:, :] = 0.0
    state.weights[:, 0] = 0.25  # activation probability 0.04 per vertex
    n_draws = 2500 * 40
    hits = 0
    for seed in range(2500):
        sample = sample_activations(state, seed)
        hits += len(sample.by_color.get(0, ()))
    rate = hits / n_draws
    se = np.sqrt(0.04 * 0.96 / n_draws)
    assert abs(rate - 0.04) < 4 * se


# -- lost colors --------------------------------------------------------------

def test_lost_by_3edge_pair():
    state = make_state(4, edges3=[(0, 1, 2)])
    sample = ActivationSample(seed=0, iteration=0,
                              by_vertex={1: (3,), 2: (3,)},
                              by_color={3: {1, 2}})
    lost = lost_colors(state, sample)
    assert lost == {0: {3}}


def test_lost_by_conflict_edge():
    state = make_state(4, gc_extra=[(2, 0, 1)])
    sample = ActivationSample(seed=0, iteration=0,
                              by_vertex={1: (2,)}, by_color={2: {1}})
    lost = lost_colors(state, sample)
    assert lost == {0: {2}}


def test_no_activation_no_loss():
    state = make_state(6, edges3=[(0, 1, 2), (3, 4, 5)])
    sample = ActivationSample(seed=0, iteration=0, by_vertex={}, by_color={})
    assert lost_colors(state, sample) == {}


# -- survival probabilities ---------------------------------------------------

def test_survival_single_edge():
    state = make_state(3, edges3=[(0, 1, 2)], colors=2, theta=0.25, p_hat=0.5)
    q = survival_prob(state, 0, 0, QMODE_EXACT)
    assert abs(q - (1 - 0.25 ** 2 * 0.5 * 0.5)) < 1e-15


def test_survival_single_conflict_edge():
    state = make_state(2, colors=2, gc_extra=[(0, 0, 1)])
    q = survival_prob(state, 0, 0, QMODE_EXACT)
    assert abs(q - (1 - 0.25 * 0.5)) < 1e-15


def test_survival_two_edges_sharing_vertex():
    # edges uvw, uvx sharing v: q = (1-a_v) + a_v(1-a_w)(1-a_x)
    state = make_state(4, edges3=[(0, 1, 2), (0, 1, 3)], colors=2)
    a = 0.25 * 0.5
    expect = (1 - a) + a * (1 - a) * (1 - a)
    q = survival_prob(state, 0, 0, QMODE_EXACT)
    assert abs(q - expect) < 1e-15


def test_survival_frozen_cell_rejected():
    state = make_state(3, edges3=[(0, 1, 2)], frozen_cells=[(0, 1)])
    with pytest.raises(ParameterError):
        survival_prob(state, 0, 1, QMODE_EXACT)


def _enumerate_link(pairs, singles, act):
    verts = sorted({v for p in pairs for v in p} | set(singles))
    total = 0.0
    for mask in range(1 << len(verts)):
        on = {v for i, v in enumerate(verts) if mask >> i & 1}
        prob = 1.0
        for i, v in enumerate(verts):
            prob *= act[v] if v in on else 1 - act[v]
        if any(a in on and b in on for a, b in pairs):
            continue
        if any(v in on for v in singles):
            continue
        total += prob
    return total


def test_link_survival_matches_enumeration():
    gen = np.random.default_rng(3)
    for _ in range(200):
        nv = int(gen.integers(0, 13))
        verts = list(range(nv))
        pairs = set()
        for _ in range(int(gen.integers(0, 10))):
            if nv >= 2:
                a, b = gen.choice(nv, 2, replace=False)
                pairs.add((min(int(a), int(b)), max(int(a), int(b))))
        k = min(int(gen.integers(0, 3)), nv)
        singles = sorted(set(
            int(v) for v in gen.choice(nv, k, replace=False))) if nv else []
        act = {v: float(gen.uniform(0, 0.4)) for v in verts}
        q, tag, se = link_survival(sorted(pairs), singles, act)
        assert tag == TAG_EXACT
        assert abs(q - _enumerate_link(sorted(pairs), singles, act)) < 1e-12


def test_exact_at_least_bound():
    gen = np.random.default_rng(4)
    for seed in range(100):
        n = 10
        edges = set()
        for _ in range(6):
            t = tuple(sorted(gen.choice(n, 3, replace=False).tolist()))
            edges.add(t)
        state = make_state(n, edges3=sorted(edges), colors=3)
        state.weights[:, :3] = gen.uniform(0, 0.5, size=(n, 3))
        for c in range(3):
            exact = survival_prob(state, 0, c, QMODE_EXACT)
            bound = survival_prob(state, 0, c, QMODE_BOUND)
            assert exact >= bound - 1e-12


def test_survival_monte_carlo_close():
    state = make_state(4, edges3=[(0, 1, 2), (0, 1, 3)], colors=2)
    exact = survival_prob(state, 0, 0, QMODE_EXACT)
    mc = survival_prob(state, 0, 0, QMODE_MC, rng_seed=5, mc_samples=200_000)
    assert abs(mc - exact) < 4 * np.sqrt(exact * (1 - exact) / 200_000) + 1e-9


def test_survival_table_modes_agree_on_tags():
    state = make_state(5, edges3=[(0, 1, 2), (2, 3, 4)], colors=3)
    t_exact = survival_table(state, small_cfg(colors=3, q_mode=QMODE_EXACT))
    t_bound = survival_table(state, small_cfg(colors=3, q_mode=QMODE_BOUND))
    live = state.uncolored[:, None] & (state.weights > 0) & ~state.frozen
    assert np.all(t_exact.q[live] >= t_bound.q[live] - 1e-12)
    assert np.all(~np.isnan(t_exact.q[live]))


# -- weight update ------------------------------------------------------------

def test_flip1_arithmetic():
    # p=0.1, q=0.8, cap 0.2: survives -> 0.125
    state = make_state(2, colors=2, p_hat=0.2)
    state.weights[:] = 0.1
    surv = survival_table(state, small_cfg(colors=2, p_hat=0.2))
    surv.q[:] = 0.8
    sample = ActivationSample(seed=0, iteration=0, by_vertex={}, by_color={})
    w, fz = update_weights(state, sample, surv, lost={})
    assert np.allclose(w[state.uncolored][:, :2], 0.125)
    assert not fz.any()


def test_flip1_lost_color_zeroed():
    state = make_state(2, colors=2, p_hat=0.2)
    state.weights[:] = 0.1
    surv = survival_table(state, small_cfg(colors=2, p_hat=0.2))
    surv.q[:] = 0.8
    sample = ActivationSample(seed=0, iteration=0, by_vertex={}, by_color={})
    w, _ = update_weights(state, sample, surv, lost={0: {1}})
    assert w[0, 1] == 0.0 and abs(w[0, 0] - 0.125) < 1e-15


def test_flip2_coin_and_freeze():
    # p=0.19, q=0.8: p/q = 0.2375 >= 0.2 -> coin with Pr[head] = 0.95
    state = make_state(1, colors=2, p_hat=0.2)
    state.weights[:] = 0.19
    surv = survival_table(state, small_cfg(colors=2, p_hat=0.2))
    surv.q[:] = 0.8
    heads = zeros = 0
    for seed in range(4000):
        sample = ActivationSample(seed=seed, iteration=0, by_vertex={}, by_color={})
        w, fz = update_weights(state, sample, surv, lost={})
        for c in range(2):
            assert sample.eta[(0, c)] in (0, 1)
            if fz[0, c]:
                assert w[0, c] == 0.2
                heads += 1
            else:
                assert w[0, c] == 0.0
                zeros += 1
    rate = heads / (heads + zeros)
    assert abs(rate - 0.95) < 0.02


def test_zero_q_routes_to_flip2():
    state = make_state(1, colors=2, p_hat=0.5)
    state.weights[:] = 0.3
    surv = survival_table(state, small_cfg(colors=2))
    surv.q[:] = 0.0
    sample = ActivationSample(seed=1, iteration=0, by_vertex={}, by_color={})
    w, fz = update_weights(state, sample, surv, lost={})
    assert set(np.unique(w[0, :2])) <= {0.0, 0.5}
    assert all((0, c) in sample.eta for c in range(2))


def test_frozen_cells_absorbing():
    state = make_state(1, colors=2, p_hat=0.5, frozen_cells=[(0, 1)])
    surv = survival_table(state, small_cfg(colors=2))
    for seed in range(20):
        sample = ActivationSample(seed=seed, iteration=0, by_vertex={}, by_color={})
        w, fz = update_weights(state, sample, surv, lost={})
        assert fz[0, 1] and w[0, 1] == 0.5


def test_weight_range_invariant_random_runs():
    for seed in range(10):
        h = generate(GeneratorSpec(kind="triangle_free_filtered", n=25,
                                   max_degree=5, seed=seed))
        cfg = small_cfg(colors=5, p_hat=0.3, iterations=6)
        lists = ListAssignment.uniform(h.n, 5)
        state = init(h, lists, cfg)
        for _ in range(cfg.iterations):
            state, _ = iterate(state, seed, cfg)
            assert state.weights.min() >= 0.0
            assert state.weights.max() <= cfg.p_hat + 1e-15
            assert np.all(state.weights[state.frozen] == cfg.p_hat)


# -- assignment and conflict graphs -------------------------------------------

def test_assign_no_activation_stays_uncolored():
    state = make_state(3, edges3=[(0, 1, 2)])
    sample = ActivationSample(seed=0, iteration=0, by_vertex={}, by_color={})
    assert assign_colors(state, sample, lost={}) == {}


def test_assign_lost_color_not_used():
    state = make_state(3, edges3=[(0, 1, 2)])
    sample = ActivationSample(seed=0, iteration=0,
                              by_vertex={0: (1,)}, by_color={1: {0}})
    assert assign_colors(state, sample, lost={0: {1}}) == {}


def test_assign_smallest_survivor():
    state = make_state(3)
    sample = ActivationSample(seed=0, iteration=0,
                              by_vertex={0: (3, 7 % 4, 2)}, by_color={})
    newly = assign_colors(state, sample, lost={})
    assert newly[0] == min(sample.by_vertex[0])


def test_assign_skips_frozen():
    state = make_state(3, frozen_cells=[(0, 1)])
    sample = ActivationSample(seed=0, iteration=0,
                              by_vertex={0: (1, 2)}, by_color={})
    assert assign_colors(state, sample, lost={})[0] == 2


def test_update_color_graphs_rule():
    state = make_state(4, edges3=[(0, 1, 2)])
    adj = update_color_graphs(state, {2: 3})
    assert 1 in adj[3][0] and 0 in adj[3][1]
    assert all(0 not in a and 1 not in a or c == 3 for c, a in enumerate(adj))


def test_update_color_graphs_two_colored_no_edge():
    state = make_state(4, edges3=[(0, 1, 2)])
    adj = update_color_graphs(state, {2: 3, 1: 0})
    # v colored too: no pair left; colored vertices removed everywhere
    assert 0 not in adj[3].get(1, set())
    for c in range(4):
        assert 1 not in adj[c] and 2 not in adj[c]


def test_update_color_graphs_no_duplicate():
    state = make_state(4, edges3=[(0, 1, 2)], gc_extra=[(3, 0, 1)])
    adj = update_color_graphs(state, {2: 3})
    assert adj[3][0] == {1}


# -- iterate / run ------------------------------------------------------------

def test_iterate_empty_hypergraph_flip1_keeps_weights():
    state = make_state(6, colors=3, p_hat=0.5)
    cfg = small_cfg(colors=3, q_mode=QMODE_EXACT)
    nxt, stats = iterate(state, 11, cfg)
    # q == 1 everywhere: weights unchanged for uncolored vertices
    for u in range(6):
        if nxt.uncolored[u]:
            assert np.allclose(nxt.weights[u, :3], 1 / 3)
        else:
            assert nxt.coloring[u] != UNCOLORED


def test_single_edge_properness_over_seeds():
    h = hg.RankedHypergraph.from_edges(3, edges3=[(0, 1, 2)])
    lists = ListAssignment.uniform(3, 2)
    cfg = RunConfig(colors=2, iterations=12, theta=0.4, p_hat=0.6,
                    check_triangle_free=False, q_mode=QMODE_EXACT)
    for seed in range(100):
        res = run(h, lists, cfg, seed)
        assert verify_partial(h, lists, res.coloring).ok


def test_run_deterministic_trace():
    h = generate(GeneratorSpec(kind="triangle_free_filtered", n=30,
                               max_degree=5, seed=2))
    cfg = small_cfg(colors=5, p_hat=0.3, iterations=6)
    lists = ListAssignment.uniform(h.n, 5)
    a = run(h, lists, cfg, 123)
    b = run(h, lists, cfg, 123)
    assert a.trace_bytes() == b.trace_bytes()
    assert np.array_equal(a.coloring, b.coloring)
    c = run(h, lists, cfg, 124)
    assert a.trace_bytes() != c.trace_bytes()


def test_run_worker_count_invariance():
    h = generate(GeneratorSpec(kind="triangle_free_filtered", n=30,
                               max_degree=5, seed=3))
    lists = ListAssignment.uniform(h.n, 5)
    traces = []
    for workers in (1, 2, 4):
        for q_mode in (QMODE_BOUND, QMODE_EXACT):
            cfg = small_cfg(colors=5, p_hat=0.3, iterations=5,
                            q_mode=q_mode, workers=workers)
            traces.append((q_mode, run(h, lists, cfg, 55).trace_bytes()))
    by_mode = {}
    for q_mode, t in traces:
        by_mode.setdefault(q_mode, set()).add(t)
    for mode, ts in by_mode.items():
        assert len(ts) == 1, f"{mode} trace depends on worker count"


def test_debug_invariants_clean_run():
    h = generate(GeneratorSpec(kind="triangle_free_filtered", n=24,
                               max_degree=5, seed=4))
    cfg = small_cfg(colors=5, p_hat=0.3, iterations=6, debug_invariants=True,
                    check_triangle_free=True)
    res = run(h, ListAssignment.uniform(h.n, 5), cfg, 9)
    assert res.trace  # completed without InvariantViolation


def test_uncolored_monotone_and_gc_endpoints():
    h = generate(GeneratorSpec(kind="triangle_free_filtered", n=30,
                               max_degree=6, seed=5))
    cfg = small_cfg(colors=6, p_hat=0.3, iterations=8)
    state = init(h, ListAssignment.uniform(h.n, 6), cfg)
    prev = state.uncolored.copy()
    for _ in range(cfg.iterations):
        state, _ = iterate(state, 31, cfg)
        assert np.all(prev | ~state.uncolored)  # subset
        for c in range(6):
            for u, vs in state.gc_adj[c].items():
                assert state.uncolored[u]
                assert all(state.uncolored[v] for v in vs)
        prev = state.uncolored.copy()


def test_starved_flagging():
    state = make_state(2, colors=2, p_hat=0.5)
    state.weights[0] = 0.0
    surv = survival_table(state, small_cfg(colors=2))
    sample = ActivationSample(seed=0, iteration=0, by_vertex={}, by_color={})
    w, fz = update_weights(state, sample, surv, lost={})
    assert w[0].sum() == 0.0  # vertex 0 has nowhere to go; finisher's problem


def test_stats_shapes_and_entropy():
    state = make_state(4, edges3=[(0, 1, 2)], colors=4)
    from nibble3.nibble import measure
    stats = measure(state)
    assert stats.uncolored == 4
    # h_u = -sum p log p = log 4 at uniform 1/4
    assert np.allclose(stats.h_u, np.log(4))
    assert np.allclose(stats.w_sum, 1.0)
