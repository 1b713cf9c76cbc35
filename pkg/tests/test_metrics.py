from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phoenixtr.metrics import (
    EmptyTrace,
    EvalReport,
    NoOverlap,
    ZeroElapsed,
    alpha_beta_errors,
    data_loss,
    duty_cycle,
    ppm_error,
    space_overhead,
    summarize,
)
from phoenixtr.model import GlobalFit, SegmentId
from phoenixtr.pipeline import reconstruct, score
from phoenixtr.reconstruct import DataLossReport
from phoenixtr.sim.engine import SegmentTruth


def test_ppm_error_examples():
    assert ppm_error(1001.0, 1000.0, 1e6) == pytest.approx(1.0)
    assert ppm_error(5.0, 5.0, 10.0) == 0.0
    with pytest.raises(ZeroElapsed):
        ppm_error(1.0, 1.0, 0.0)


@given(st.floats(-1e6, 1e6), st.floats(-100, 100), st.floats(1e-3, 1e8))
def test_ppm_scale_consistent(truth, err, t_delta):
    assert ppm_error(truth + 2 * err, truth, 2 * t_delta) == pytest.approx(
        ppm_error(truth + err, truth, t_delta), rel=1e-6, abs=1e-6)


def test_rate_metrics():
    assert data_loss(DataLossReport(0, 10)) == 0.0
    assert data_loss(DataLossReport(1, 4)) == 25.0
    with pytest.raises(EmptyTrace):
        data_loss(DataLossReport(0, 0))
    assert space_overhead(0, 100) == 0.0
    assert space_overhead(50, 50) == 50.0
    assert duty_cycle(0.0, 10.0) == 0.0 and duty_cycle(10.0, 10.0) == 100.0


def truth_of(alpha, beta):
    return SegmentTruth(SegmentId(0, 0), alpha, beta, 0.0, 0.0, 0.0)


def test_alpha_beta_errors():
    s = SegmentId(0, 0)
    perfect = {s: GlobalFit(1.0, 5.0, 0.0, 1, (s,))}
    assert alpha_beta_errors(perfect, {s: truth_of(1.0, 5.0)}) == ((0.0, 0.0), (0.0, 0.0))
    off = {s: GlobalFit(1.000006, 7.0, 0.0, 1, (s,))}
    (a_med, _), (b_med, _) = alpha_beta_errors(off, {s: truth_of(1.0, 5.0)})
    assert a_med == pytest.approx(6.0) and b_med == pytest.approx(2.0)
    with pytest.raises(NoOverlap):
        alpha_beta_errors({s: GlobalFit.sentinel(s)}, {s: truth_of(1.0, 5.0)})


@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=200), st.randoms())
def test_summaries_permutation_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a, b = summarize(values), summarize(shuffled)
    for k in a:
        assert a[k] == pytest.approx(b[k], rel=1e-12, abs=1e-12)


def test_report_round_trip_and_recompute(small_trace):
    rec = reconstruct(small_trace.anchors, small_trace.samples)
    rep = score(small_trace, rec)
    assert 0 <= rep.data_loss_pct <= 100 and 0 <= rep.space_overhead_pct <= 100
    assert 0 <= rep.duty_cycle_pct <= 100
    back = EvalReport.from_json(rep.to_json())
    assert back == rep
    summ = summarize(back.ppm_errors)
    assert (summ["median"], summ["p99"], summ["mean"]) == (rep.ppm_median, rep.ppm_p99, rep.ppm_mean)
    assert rep.samples_total == len(small_trace.samples)
    row = rep.summary_row()
    assert "ppm_errors" not in row and row["data_loss_pct"] == rep.data_loss_pct


def test_noiseless_run_has_tiny_ppm(noiseless_trace):
    rep = score(noiseless_trace, reconstruct(noiseless_trace.anchors, noiseless_trace.samples))
    assert rep.ppm_errors and max(rep.ppm_errors) < 1e-3
