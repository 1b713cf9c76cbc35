from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phoenixtr.model import AnchorRecord, GlobalFit, LocalFit, SegmentId, compose_fit, global_from_local
from phoenixtr.reconstruct import (
    AnchorStore,
    FitGraph,
    assign_timestamps,
    build_anchor_store,
    build_fit_graph,
    mote_alpha_hints,
    phoenix,
    rgtr_baseline,
)

from helpers import clocks, global_records, pair_records, synthetic_records


def S(m, r=0):
    return SegmentId(m, r)


def test_store_empty_and_global():
    assert build_anchor_store([]) == AnchorStore()
    st_ = build_anchor_store([AnchorRecord(S(1, 0), 5.0, S(1, 0), 1000.0)])
    assert st_.global_refs == {S(1, 0): [(5.0, 1000.0)]} and st_.pairs == {}


def test_store_orients_pairs_by_smaller_segment():
    a, b = S(1, 0), S(2, 0)
    recs = [AnchorRecord(a, 10.0, b, 20.0), AnchorRecord(b, 31.0, a, 21.0)]
    store = build_anchor_store(recs)
    assert store.pairs == {(a, b): [(10.0, 20.0), (21.0, 31.0)]}
    assert store.segments == {a, b}


def test_graph_edges_and_drops():
    a, b, c = S(1, 0), S(2, 0), S(3, 0)
    store = AnchorStore(pairs={(a, b): [(0, 1), (1, 2), (2, 3)], (a, c): [(0, 1), (1, 2)]})
    g = build_fit_graph(store)
    assert set(g.edges) == {(a, b)} and g.edges[(a, b)].chi == 0.0
    assert g.diagnostics.dropped_edges == {(a, c): "InsufficientPoints"}
    assert g.vertices == {a, b, c}


def chain_records(truth, segs, gts_seg, noise=0.0, rng=None):
    recs = global_records(truth, gts_seg, truth[gts_seg][1] + 21600.0 * np.arange(1, 6))
    for u, v in zip(segs, segs[1:]):
        t0 = max(truth[u][1], truth[v][1]) + 100.0
        recs += pair_records(truth, u, v, t0 + 3600.0 * np.arange(6), noise, rng)
    return recs


def test_chain_of_five():
    truth = clocks(5, seed=1)
    segs = sorted(truth)
    g = build_fit_graph(build_anchor_store(chain_records(truth, segs, segs[2])))
    assert len(g.edges) == 4 and g.gts_nodes == {segs[2]}


def test_single_gts_segment():
    truth = clocks(3, seed=2)
    segs = sorted(truth)
    recs = global_records(truth, segs[0], truth[segs[0]][1] + np.arange(1, 5) * 100.0)
    recs.append(AnchorRecord(segs[1], 1.0, segs[2], 2.0))  # too few points for an edge
    store = build_anchor_store(recs)
    fits = phoenix(build_fit_graph(store))
    assert not fits[segs[0]].is_sentinel and fits[segs[0]].parent is None
    assert fits[segs[1]].is_sentinel and fits[segs[2]].is_sentinel


def test_noiseless_chain_recovers_known_skews():
    g_seg, a_seg, b_seg = S(0, 0), S(1, 0), S(2, 0)
    truth = {g_seg: (1.0, 0.0), a_seg: (1 / (1 + 50e-6), 1000.0), b_seg: (1 / (1 + 60e-6), 5000.0)}
    fits = phoenix(build_fit_graph(build_anchor_store(chain_records(truth, [g_seg, a_seg, b_seg], g_seg))))
    for s in (a_seg, b_seg):
        assert fits[s].alpha == pytest.approx(truth[s][0], rel=1e-9)
        assert fits[s].beta == pytest.approx(truth[s][1], rel=1e-9)
    assert fits[b_seg].path == (b_seg, a_seg, g_seg)


def lf(chi, df=2):
    return LocalFit(a=1.0, b=0.0, chi=chi, df=df, n=df + 2)


def test_diamond_prefers_lower_chi_path():
    g, p, q, t = S(0), S(1), S(2), S(3)
    graph = FitGraph(
        vertices={g, p, q, t},
        edges={(g, p): lf(1.0), (p, t): lf(1.0), (g, q): lf(0.1), (q, t): lf(0.1)},
        gts_fits={g: lf(0.1)},
    )
    fits = phoenix(graph)
    assert fits[t].path == (t, q, g)
    assert fits[t].chi == pytest.approx(0.1)


def test_transitive_path_may_replace_direct_fit():
    g, h = S(0), S(1)
    graph = FitGraph(vertices={g, h}, edges={(g, h): lf(0.0)}, gts_fits={g: lf(0.0), h: lf(5.0)})
    fits = phoenix(graph)
    assert fits[h].parent == g


def test_queue_variants_agree_on_noiseless_data():
    recs, truth = synthetic_records(120, seed=3, noise=0.0)
    g = build_fit_graph(build_anchor_store(recs))
    fifo = phoenix(g)
    prio = phoenix(build_fit_graph(build_anchor_store(recs)), queue="priority")
    for s in fifo:
        assert fifo[s].is_sentinel == prio[s].is_sentinel
        if not fifo[s].is_sentinel:
            assert fifo[s].alpha == pytest.approx(truth[s][0], rel=1e-9)
            assert prio[s].beta == pytest.approx(truth[s][1], rel=1e-9)
    with pytest.raises(ValueError):
        phoenix(g, queue="lifo")


def check_paths(graph: FitGraph, fits: dict[SegmentId, GlobalFit]) -> None:
    """Each fit's recorded parent chain is a simple path of graph edges ending at
    a gts node, and replaying the composition along it gives the stored fit."""
    for s, f in fits.items():
        if f.is_sentinel:
            continue
        path = f.path
        assert path[0] == s and path[-1] in graph.gts_nodes
        assert len(path) == len(set(path)) <= len(graph.vertices)
        replay = global_from_local(path[-1], graph.gts_fits[path[-1]])
        for q, c in zip(path[::-1], path[-2::-1]):
            replay = compose_fit(replay, graph.edge(q, c), q, c)
        assert (replay.alpha, replay.beta, replay.df, replay.path) == (f.alpha, f.beta, f.df, f.path)
        # chi is the df-weighted mean of the pieces
        parts = [graph.gts_fits[path[-1]]] + [graph.edge(u, v) for u, v in zip(path, path[1:])]
        assert f.chi == pytest.approx(sum(p.df * p.chi for p in parts) / f.df, rel=1e-9)


@given(st.integers(20, 150), st.integers(0, 10_000), st.sampled_from([0.0, 0.003, 0.05]))
def test_paths_valid_and_acceptance_monotone(n, seed, noise):
    recs, _ = synthetic_records(n, seed=seed, noise=noise, gts_every=15)
    graph = build_fit_graph(build_anchor_store(recs))
    fits = phoenix(graph)
    check_paths(graph, fits)
    last: dict[SegmentId, float] = {}
    for seg, chi, _parent in graph.diagnostics.acceptance_log:
        if seg in last:
            assert chi < last[seg]
        last[seg] = chi
    assert set(graph.diagnostics.unreachable) == {s for s, f in fits.items() if f.is_sentinel}


def test_paths_valid_on_simulated_trace(small_trace):
    graph = build_fit_graph(build_anchor_store(small_trace.anchors))
    check_paths(graph, phoenix(graph))


def test_deterministic_output():
    recs, _ = synthetic_records(80, seed=9, noise=0.003)
    a = phoenix(build_fit_graph(build_anchor_store(recs)))
    b = phoenix(build_fit_graph(build_anchor_store(list(recs))))
    assert a == b


def test_gts_node_residual_consistency():
    truth = clocks(1, seed=4)
    s = next(iter(truth))
    rng = np.random.default_rng(0)
    recs = [AnchorRecord(r.receiver, r.lc_r, r.sender, r.lc_s + rng.normal(0, 0.01))
            for r in global_records(truth, s, truth[s][1] + 3600.0 * np.arange(1, 30))]
    store = build_anchor_store(recs)
    graph = build_fit_graph(store)
    fit = phoenix(graph)[s]
    pts = np.array(store.global_refs[s])
    rms2 = np.mean((fit.alpha * pts[:, 0] + fit.beta - pts[:, 1]) ** 2)
    assert rms2 == pytest.approx(fit.chi * fit.df / len(pts), rel=0.2)


def test_assign_timestamps_and_loss():
    a, b = S(1), S(2)
    fits = {a: GlobalFit(1.0, 10.0, 0.0, 1, (a,)), b: GlobalFit.sentinel(b)}
    est, rep = assign_timestamps([(a, 1.0), (a, 2.0)], fits)
    assert est == [11.0, 12.0] and rep.loss_pct == 0.0
    est, rep = assign_timestamps([(a, 1.0), (b, 1.0)], fits)
    assert est == [11.0, None] and rep.loss_pct == 50.0 and rep.lost_by_segment == {b: 1}
    _, rep = assign_timestamps([(S(9), 1.0)], fits)
    assert rep.lost == 1


def test_rgtr_direct_and_hinted():
    a, b = S(1, 0), S(1, 1)
    store = AnchorStore(global_refs={a: [(0.0, 1000.0), (100.0, 1100.0)], b: [(50.0, 2000.0)]})
    fits = rgtr_baseline(store)
    assert fits[a].alpha == pytest.approx(1.0) and fits[a].beta == pytest.approx(1000.0)
    assert fits[b].beta == pytest.approx(1950.0)
    assert mote_alpha_hints(fits) == {1: pytest.approx(1.0)}
    lone = rgtr_baseline(AnchorStore(global_refs={b: [(50.0, 2000.0)]}))
    assert lone[b].is_sentinel
    hinted = rgtr_baseline(AnchorStore(global_refs={b: [(50.0, 2000.0)]}), {1: 1.0})
    assert hinted[b].beta == 1950.0
