"""Synthetic anchor sets with known per-segment clocks."""

from __future__ import annotations

import numpy as np

from phoenixtr.model import AnchorRecord, SegmentId


def clocks(n: int, seed: int = 0) -> dict[SegmentId, tuple[float, float]]:
    """Per-segment (alpha, beta) with gts = alpha * lc + beta."""
    rng = np.random.default_rng(seed)
    out = {}
    for i in range(n):
        skew = rng.uniform(40, 70)
        out[SegmentId(i // 4, i % 4)] = (1.0 / (1.0 + skew * 1e-6), float(rng.uniform(0, 1e6)))
    return out


def pair_records(truth, u, v, times, noise=0.0, rng=None):
    """Records with ``u`` receiving ``v``'s beacons at the given global times."""
    (au, bu), (av, bv) = truth[u], truth[v]
    recs = []
    for t in times:
        d = rng.normal(0, noise) if noise else 0.0
        recs.append(AnchorRecord(u, (t + d - bu) / au, v, (t - bv) / av))
    return recs


def global_records(truth, s, times):
    a, b = truth[s]
    return [AnchorRecord(s, (t - b) / a, s, t) for t in times]


def synthetic_records(n: int, seed: int = 0, degree: int = 4, points: int = 5,
                      noise: float = 0.003, gts_every: int = 25) -> tuple[list[AnchorRecord], dict]:
    """A locally connected random graph: each segment links to ``degree``
    others among its 20 index neighbours; every ``gts_every``-th segment has
    global references."""
    rng = np.random.default_rng(seed)
    truth = clocks(n, seed)
    segs = sorted(truth)
    recs: list[AnchorRecord] = []
    seen = set()
    for i, u in enumerate(segs):
        lo, hi = max(0, i - 10), min(n, i + 11)
        for j in rng.choice(np.arange(lo, hi), size=min(degree, hi - lo), replace=False):
            v = segs[int(j)]
            if v == u or (min(u, v), max(u, v)) in seen:
                continue
            seen.add((min(u, v), max(u, v)))
            t0 = max(truth[u][1], truth[v][1]) + rng.uniform(1e3, 1e4)
            recs += pair_records(truth, u, v, t0 + 21600.0 * np.arange(points), noise, rng)
        if i % gts_every == 0:
            recs += global_records(truth, u, truth[u][1] + 21600.0 * np.arange(1, 9))
    return recs, truth
