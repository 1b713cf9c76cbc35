"""Reboot-tolerant global timestamp reconstruction for sensor-network data."""

from __future__ import annotations

__version__ = "0.1.0"

from .model import (
    AnchorRecord,
    GlobalFit,
    LocalFit,
    ReconstructionError,
    SegmentId,
    compose_fit,
    estimate_gts,
    fit_llse,
)
from .reconstruct import (
    AnchorStore,
    FitGraph,
    assign_timestamps,
    build_anchor_store,
    build_fit_graph,
    phoenix,
    rgtr_baseline,
)

__all__ = [
    "AnchorRecord", "AnchorStore", "FitGraph", "GlobalFit", "LocalFit", "ReconstructionError",
    "SegmentId", "__version__", "assign_timestamps", "build_anchor_store", "build_fit_graph",
    "compose_fit", "estimate_gts", "fit_llse", "phoenix", "rgtr_baseline",
]
