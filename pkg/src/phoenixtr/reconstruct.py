"""Segment fit graph, the epidemic label-correcting reconstruction, and the
direct-fit (RGTR-style) baseline."""

from __future__ import annotations

import heapq
import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from statistics import fmean
from typing import Iterable, Mapping, Optional, Sequence

from .model import (
    CHI_MAX,
    DEFAULT_MIN_FIT_POINTS,
    AnchorRecord,
    GlobalFit,
    LocalFit,
    ReconstructionError,
    SegmentId,
    ZeroSlope,
    compose_fit,
    fit_llse,
    global_from_local,
)

logger = logging.getLogger(__name__)

Pair = tuple[SegmentId, SegmentId]


@dataclass
class AnchorStore:
    pairs: dict[Pair, list[tuple[float, float]]] = field(default_factory=dict)
    global_refs: dict[SegmentId, list[tuple[float, float]]] = field(default_factory=dict)

    @property
    def segments(self) -> set[SegmentId]:
        segs = set(self.global_refs)
        for i, j in self.pairs:
            segs.add(i)
            segs.add(j)
        return segs


def build_anchor_store(records: Iterable[AnchorRecord]) -> AnchorStore:
    """Bucket records: self-pairs become global refs, everything else lands under
    its canonical ``(smaller, larger)`` pair with ``x`` read from the smaller
    segment's clock."""
    store = AnchorStore()
    for rec in records:
        if rec.receiver == rec.sender:
            store.global_refs.setdefault(rec.receiver, []).append((rec.lc_r, rec.lc_s))
        elif rec.receiver < rec.sender:
            store.pairs.setdefault((rec.receiver, rec.sender), []).append((rec.lc_r, rec.lc_s))
        else:
            store.pairs.setdefault((rec.sender, rec.receiver), []).append((rec.lc_s, rec.lc_r))
    return store


@dataclass
class FitDiagnostics:
    dropped_edges: dict[Pair, str] = field(default_factory=dict)
    dropped_gts: dict[SegmentId, str] = field(default_factory=dict)
    unreachable: list[SegmentId] = field(default_factory=list)
    # (segment, chi, parent) in acceptance order
    acceptance_log: list[tuple[SegmentId, float, Optional[SegmentId]]] = field(default_factory=list)


@dataclass
class FitGraph:
    vertices: set[SegmentId]
    edges: dict[Pair, LocalFit]
    gts_fits: dict[SegmentId, LocalFit]
    diagnostics: FitDiagnostics = field(default_factory=FitDiagnostics)

    @property
    def gts_nodes(self) -> set[SegmentId]:
        return set(self.gts_fits)

    def neighbors(self) -> dict[SegmentId, list[SegmentId]]:
        adj: dict[SegmentId, list[SegmentId]] = defaultdict(list)
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return {s: sorted(ns) for s, ns in adj.items()}

    def edge(self, u: SegmentId, v: SegmentId) -> LocalFit:
        return self.edges[(u, v) if u < v else (v, u)]


def build_fit_graph(store: AnchorStore, min_points: int = DEFAULT_MIN_FIT_POINTS) -> FitGraph:
    diag = FitDiagnostics()
    edges: dict[Pair, LocalFit] = {}
    for pair, pts in store.pairs.items():
        try:
            edges[pair] = fit_llse(pts, min_points)
        except ReconstructionError as exc:
            diag.dropped_edges[pair] = type(exc).__name__
    gts: dict[SegmentId, LocalFit] = {}
    for seg, pts in store.global_refs.items():
        try:
            gts[seg] = fit_llse(pts, min_points)
        except ReconstructionError as exc:
            diag.dropped_gts[seg] = type(exc).__name__
    return FitGraph(vertices=store.segments, edges=edges, gts_fits=gts, diagnostics=diag)


def phoenix(graph: FitGraph, queue: str = "fifo") -> dict[SegmentId, GlobalFit]:
    """Propagate global time from segments with direct references to every
    segment reachable through pairwise fits, keeping per segment the path with
    the lowest df-weighted residual variance.

    ``queue`` selects the work-list discipline: ``"fifo"`` (default) or
    ``"priority"`` (lowest chi first).  A segment already waiting in the
    work list is not added twice; when dequeued it uses its latest fit.
    """
    if queue not in ("fifo", "priority"):
        raise ValueError(f"unknown queue discipline {queue!r}")
    diag = graph.diagnostics
    diag.acceptance_log.clear()
    fits: dict[SegmentId, GlobalFit] = {s: GlobalFit.sentinel(s) for s in sorted(graph.vertices)}
    adj = graph.neighbors()

    pending: set[SegmentId] = set()
    fifo: deque[SegmentId] = deque()
    heap: list[tuple[float, SegmentId]] = []

    def push(s: SegmentId) -> None:
        if s in pending:
            if queue == "priority":
                heapq.heappush(heap, (fits[s].chi, s))
            return
        pending.add(s)
        if queue == "fifo":
            fifo.append(s)
        else:
            heapq.heappush(heap, (fits[s].chi, s))

    def pop() -> SegmentId:
        if queue == "fifo":
            s = fifo.popleft()
        else:
            while True:
                chi, s = heapq.heappop(heap)
                if s in pending and chi == fits[s].chi:
                    break
        pending.discard(s)
        return s

    for g in sorted(graph.gts_fits):
        fits[g] = global_from_local(g, graph.gts_fits[g])
        diag.acceptance_log.append((g, fits[g].chi, None))
        push(g)

    while pending:
        q = pop()
        gf_q = fits[q]
        for c in adj.get(q, ()):
            if c in gf_q.ancestors:
                continue  # would revisit a segment already on q's path
            lf = graph.edge(q, c)
            try:
                cand = compose_fit(gf_q, lf, q, c)
            except ZeroSlope:
                continue
            if cand.chi < fits[c].chi:
                fits[c] = cand
                diag.acceptance_log.append((c, cand.chi, q))
                push(c)

    diag.unreachable = [s for s, f in fits.items() if f.is_sentinel]
    return fits


@dataclass
class DataLossReport:
    lost: int
    total: int
    lost_by_segment: dict[SegmentId, int] = field(default_factory=dict)

    @property
    def loss_pct(self) -> float:
        return 100.0 * self.lost / self.total if self.total else 0.0


def assign_timestamps(
    samples: Sequence[tuple[SegmentId, float]],
    fits: Mapping[SegmentId, GlobalFit],
) -> tuple[list[Optional[float]], DataLossReport]:
    out: list[Optional[float]] = []
    lost_by: dict[SegmentId, int] = defaultdict(int)
    for sample in samples:
        seg, lc = sample[0], sample[1]
        fit = fits.get(seg)
        if fit is None or fit.is_sentinel:
            out.append(None)
            lost_by[seg] += 1
        else:
            out.append(fit.alpha * lc + fit.beta)
    lost = sum(lost_by.values())
    return out, DataLossReport(lost=lost, total=len(out), lost_by_segment=dict(lost_by))


def mote_alpha_hints(direct: Mapping[SegmentId, GlobalFit]) -> dict[int, float]:
    """Mean alpha of each mote's directly fitted segments."""
    per_mote: dict[int, list[float]] = defaultdict(list)
    for seg, fit in direct.items():
        if not fit.is_sentinel:
            per_mote[seg.mote_id].append(fit.alpha)
    return {m: fmean(alphas) for m, alphas in sorted(per_mote.items())}


def rgtr_baseline(
    store: AnchorStore,
    alpha_hints: Optional[Mapping[int, Optional[float]]] = None,
) -> dict[SegmentId, GlobalFit]:
    """Direct per-segment reconstruction from global references only.

    Two or more references give a least-squares fit; a single reference plus
    a per-mote skew hint gives the intercept.  Hints default to
    :func:`mote_alpha_hints` over the directly fitted segments.
    """
    fits: dict[SegmentId, GlobalFit] = {s: GlobalFit.sentinel(s) for s in sorted(store.segments)}
    for seg in sorted(store.global_refs):
        pts = store.global_refs[seg]
        if len(pts) < 2:
            continue
        try:
            fits[seg] = global_from_local(seg, fit_llse(pts, min_points=2))
        except ReconstructionError:
            pass
    hints = mote_alpha_hints(fits) if alpha_hints is None else alpha_hints
    for seg in sorted(store.global_refs):
        pts = store.global_refs[seg]
        alpha = hints.get(seg.mote_id)
        if len(pts) == 1 and alpha is not None:
            lc, gts = pts[0]
            fits[seg] = GlobalFit(alpha=alpha, beta=gts - alpha * lc, chi=0.0, df=0, path=(seg,))
    return fits
