"""In-process glue: reconstruct a trace and score it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .metrics import EvalReport, evaluate
from .model import DEFAULT_MIN_FIT_POINTS, AnchorRecord, GlobalFit, SegmentId
from .reconstruct import (
    DataLossReport,
    FitDiagnostics,
    FitGraph,
    assign_timestamps,
    build_anchor_store,
    build_fit_graph,
    phoenix,
    rgtr_baseline,
)
from .sim.config import SimConfig
from .sim.engine import SimTrace, run_simulation
from .sim.topology import Topology

ALGORITHMS = ("phoenix", "rgtr")


@dataclass
class Reconstruction:
    algo: str
    fits: dict[SegmentId, GlobalFit]
    estimates: list[Optional[float]]
    loss: DataLossReport
    graph: Optional[FitGraph] = None

    @property
    def diagnostics(self) -> Optional[FitDiagnostics]:
        return self.graph.diagnostics if self.graph is not None else None


def reconstruct(
    anchors: Iterable[AnchorRecord],
    samples: Sequence[tuple],
    algo: str = "phoenix",
    min_points: int = DEFAULT_MIN_FIT_POINTS,
    queue: str = "fifo",
) -> Reconstruction:
    """Fit every segment and timestamp ``samples`` (``(segment, lc, ...)`` tuples).

    ``rgtr`` uses only the global (self) rows of ``anchors``.  Segments that
    appear only in ``samples`` are reported as lost.
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}")
    store = build_anchor_store(anchors)
    graph = None
    if algo == "phoenix":
        graph = build_fit_graph(store, min_points)
        fits = phoenix(graph, queue=queue)
    else:
        fits = rgtr_baseline(store)
    for s in samples:
        if s[0] not in fits:
            fits[s[0]] = GlobalFit.sentinel(s[0])
    fits = dict(sorted(fits.items()))
    estimates, loss = assign_timestamps(samples, fits)
    return Reconstruction(algo=algo, fits=fits, estimates=estimates, loss=loss, graph=graph)


def diagnostics_payload(rec: Reconstruction) -> dict:
    out: dict = {
        "algo": rec.algo,
        "segments": len(rec.fits),
        "reconstructed": sum(1 for f in rec.fits.values() if not f.is_sentinel),
        "samples_total": rec.loss.total,
        "samples_lost": rec.loss.lost,
        "lost_by_segment": {str(s): n for s, n in sorted(rec.loss.lost_by_segment.items())},
        "unreachable": [str(s) for s, f in rec.fits.items() if f.is_sentinel],
    }
    if rec.graph is not None:
        d = rec.graph.diagnostics
        out.update({
            "edges": len(rec.graph.edges),
            "gts_nodes": len(rec.graph.gts_fits),
            "dropped_edges": {f"{i}|{j}": why for (i, j), why in sorted(d.dropped_edges.items())},
            "dropped_gts": {str(s): why for s, why in sorted(d.dropped_gts.items())},
            "acceptances": len(d.acceptance_log),
        })
    return out


def score(trace: SimTrace, rec: Reconstruction) -> EvalReport:
    return evaluate(trace.samples, rec.estimates, rec.loss, rec.fits, trace.truth, trace.accounting)


def run_once(
    config: SimConfig,
    topology: Topology,
    algo: str = "phoenix",
    min_points: int = DEFAULT_MIN_FIT_POINTS,
    queue: str = "fifo",
) -> tuple[SimTrace, Reconstruction, EvalReport]:
    trace = run_simulation(config, topology)
    anchors = trace.base_refs if algo == "rgtr" and trace.base_refs else trace.anchors
    rec = reconstruct(anchors, trace.samples, algo, min_points, queue)
    return trace, rec, score(trace, rec)
