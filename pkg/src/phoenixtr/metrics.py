"""Evaluation metrics: data loss, PPM error, space overhead, duty cycle, and
the per-segment alpha/beta error split."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Mapping, Optional, Sequence

import numpy as np

from .model import GlobalFit, SegmentId
from .reconstruct import DataLossReport


class MetricError(ValueError):
    pass


class ZeroElapsed(MetricError):
    pass


class EmptyTrace(MetricError):
    pass


class NoOverlap(MetricError):
    pass


def ppm_error(assigned: float, truth: float, t_delta: float) -> float:
    if not t_delta > 0:
        raise ZeroElapsed(f"elapsed time {t_delta} since segment start is not positive")
    return abs(assigned - truth) / t_delta * 1e6


def data_loss(report: DataLossReport) -> float:
    if report.total == 0:
        raise EmptyTrace("no samples recorded")
    return 100.0 * report.lost / report.total


def space_overhead(anchor_bytes: int, sample_bytes: int) -> float:
    total = anchor_bytes + sample_bytes
    return 100.0 * anchor_bytes / total if total else 0.0


def duty_cycle(radio_on: float, elapsed: float) -> float:
    if not elapsed > 0:
        raise MetricError("elapsed time must be positive")
    return 100.0 * radio_on / elapsed


def alpha_beta_errors(
    estimated: Mapping[SegmentId, GlobalFit],
    truth: Mapping[SegmentId, object],
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Median and standard deviation of absolute per-segment errors.

    ``truth`` values need ``alpha`` and ``beta`` attributes.  Alpha error is
    ``|alpha_hat - alpha| / alpha`` in ppm; beta error is ``|beta_hat - beta|``
    in seconds.  Standard deviations are population (ddof=0).
    """
    a_err, b_err = [], []
    for seg in sorted(estimated):
        fit = estimated[seg]
        t = truth.get(seg)
        if t is None or fit.is_sentinel:
            continue
        a_err.append(abs(fit.alpha - t.alpha) / t.alpha * 1e6)
        b_err.append(abs(fit.beta - t.beta))
    if not a_err:
        raise NoOverlap("no segment has both an estimate and ground truth")
    a, b = np.asarray(a_err), np.asarray(b_err)
    return (float(np.median(a)), float(np.std(a))), (float(np.median(b)), float(np.std(b)))


def summarize(values: Sequence[float]) -> dict[str, float]:
    if len(values) == 0:
        return {"median": math.nan, "p99": math.nan, "mean": math.nan}
    arr = np.asarray(values, dtype=np.float64)
    return {
        "median": float(np.median(arr)),
        "p99": float(np.percentile(arr, 99)),
        "mean": float(np.mean(arr)),
    }


@dataclass
class EvalReport:
    data_loss_pct: float
    samples_total: int
    samples_lost: int
    ppm_errors: list[float]
    ppm_median: float
    ppm_p99: float
    ppm_mean: float
    zero_elapsed: int
    alpha_err_median_ppm: float
    alpha_err_std_ppm: float
    beta_err_median_s: float
    beta_err_std_s: float
    space_overhead_pct: float
    duty_cycle_pct: float
    beacon_duty_pct: float
    segments_total: int = 0
    segments_reconstructed: int = 0

    def to_json(self) -> str:
        # json writes floats with repr, so values read back bit-identical
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        data = json.loads(text)
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown report fields {sorted(unknown)}")
        return cls(**data)

    def summary_row(self) -> dict[str, object]:
        """All scalar fields; the per-sample list is left out."""
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "ppm_errors"}


def evaluate(
    samples: Sequence[tuple],
    estimates: Sequence[Optional[float]],
    loss: DataLossReport,
    fits: Mapping[SegmentId, GlobalFit],
    truth: Mapping[SegmentId, object],
    accounting: Mapping[int, object],
) -> EvalReport:
    """Score a reconstruction.

    True global time and elapsed time are recomputed from the per-segment
    truth (``alpha * lc + beta``) so that results are identical whether the
    inputs came from memory or from files.  Samples at a segment's first
    instant are counted in ``zero_elapsed`` and left out of PPM aggregates.
    """
    ppm: list[float] = []
    zero = 0
    for s, est in zip(samples, estimates):
        if est is None:
            continue
        t = truth[s[0]]
        t_delta = t.alpha * s[1]
        try:
            ppm.append(ppm_error(est, t_delta + t.beta, t_delta))
        except ZeroElapsed:
            zero += 1
    summ = summarize(ppm)
    try:
        (a_med, a_std), (b_med, b_std) = alpha_beta_errors(fits, truth)
    except NoOverlap:
        a_med = a_std = b_med = b_std = math.nan

    anchor_b = sum(a.anchor_bytes for a in accounting.values())
    sample_b = sum(a.sample_bytes for a in accounting.values())
    alive = sum(a.alive_s for a in accounting.values())
    radio = sum(a.radio_on_s for a in accounting.values())
    beacon = sum(a.beacon_s for a in accounting.values())
    return EvalReport(
        data_loss_pct=data_loss(loss),
        samples_total=loss.total,
        samples_lost=loss.lost,
        ppm_errors=ppm,
        ppm_median=summ["median"],
        ppm_p99=summ["p99"],
        ppm_mean=summ["mean"],
        zero_elapsed=zero,
        alpha_err_median_ppm=a_med,
        alpha_err_std_ppm=a_std,
        beta_err_median_s=b_med,
        beta_err_std_s=b_std,
        space_overhead_pct=space_overhead(anchor_b, sample_b),
        duty_cycle_pct=duty_cycle(radio, alive) if alive > 0 else 0.0,
        beacon_duty_pct=duty_cycle(beacon, alive) if alive > 0 else 0.0,
        segments_total=len(fits),
        segments_reconstructed=sum(1 for f in fits.values() if not f.is_sentinel),
    )
