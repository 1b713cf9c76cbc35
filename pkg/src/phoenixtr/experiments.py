"""Scripted parameter sweeps.

Each scenario maps ``(base config, parameter value, seed)`` to one simulated
run and returns a flat row of config knobs plus metrics.  Runs are isolated
and deterministic, so they can execute in any order or in parallel.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .io import config_items
from .metrics import EvalReport
from .model import AnchorRecord
from .pipeline import reconstruct, score
from .sim.config import DAY, HOUR, SimConfig
from .sim.engine import run_simulation
from .sim.radio import link_prr
from .sim.topology import Topology, generate_topology

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scale:
    duration_days: float
    motes: int
    topology: str = "uniform-random"
    extent: float = 200.0


DESK = Scale(duration_days=60, motes=20)
PAPER = Scale(duration_days=365, motes=53)

# Emulated Olin deployment: 19 motes, 21 days, 4-hour basestation downloads,
# segment lengths with a mean of 5.7 days (lognormal sigma 1: median = mean / e^0.5).
OLIN = Scale(duration_days=21, motes=19, topology="grid", extent=100.0)
OLIN_SEGMENT_MODEL = "lognormal:median=298678:sigma=1.0"
OLIN_ABSENCE_START = 1 * DAY

FAULT = (3600.0, 600.0)


@dataclass(frozen=True)
class RunSpec:
    scenario: str
    value: Any
    rep: int
    seed: int
    config: SimConfig
    scale: Scale
    min_points: int = 3


@dataclass(frozen=True)
class Scenario:
    name: str
    param: str
    desk_values: tuple
    paper_values: tuple
    apply: Callable[[SimConfig, Any, int, Scale], SimConfig]
    runner: Optional[Callable[[RunSpec], dict]] = None
    scale: Optional[Scale] = None
    doc: str = ""


def _gps_absence(cfg: SimConfig, days, seed: int, scale: Scale) -> SimConfig:
    length = float(days) * DAY
    if length <= 0:
        return cfg.replace(gps_outage=None)
    start = float(np.random.default_rng([seed, 1]).uniform(0.0, max(cfg.duration - length, 0.0)))
    return cfg.replace(gps_outage=(start, length))


def _t_wakeup(cfg: SimConfig, hours, seed: int, scale: Scale) -> SimConfig:
    return cfg.replace(t_wakeup=float(hours) * HOUR)


def _numseg(cfg: SimConfig, n, seed: int, scale: Scale) -> SimConfig:
    return cfg.replace(numseg=int(n))


def _eviction(cfg: SimConfig, policy, seed: int, scale: Scale) -> SimConfig:
    return cfg.replace(eviction_policy=str(policy))


def _density(cfg: SimConfig, cutoff, seed: int, scale: Scale) -> SimConfig:
    # links below the PRR cutoff are removed; every audible neighbour is tracked
    return cfg.replace(prr_cutoff=float(cutoff), early_exit=False, numseg=scale.motes)


def _fault(cfg: SimConfig, days, seed: int, scale: Scale) -> SimConfig:
    length = min(float(days) * DAY, cfg.duration)
    if length <= 0:
        return cfg.replace(gps_fault=None)
    return cfg.replace(gps_fault=(cfg.duration - length, length, *FAULT))


def _basestation(cfg: SimConfig, days, seed: int, scale: Scale) -> SimConfig:
    return cfg.replace(
        segment_model=OLIN_SEGMENT_MODEL,
        basestation_interval=4 * HOUR,
        t_sync=4 * HOUR,
        gps_outage=(OLIN_ABSENCE_START, float(days) * DAY) if float(days) > 0 else None,
    )


def _topology(spec: RunSpec) -> Topology:
    return generate_topology(spec.scale.topology, spec.scale.motes, spec.scale.extent, seed=spec.seed)


def _report_fields(report: EvalReport, prefix: str = "") -> dict:
    return {prefix + k: v for k, v in report.summary_row().items()}


def run_report(spec: RunSpec) -> EvalReport:
    """Full Phoenix report for one run, including per-sample PPM errors."""
    trace = run_simulation(spec.config, _topology(spec))
    return score(trace, reconstruct(trace.anchors, trace.samples, "phoenix", spec.min_points))


def _run_default(spec: RunSpec) -> dict:
    row = _report_fields(run_report(spec))
    row["mean_degree"] = _mean_degree(spec.config, _topology(spec))
    return row


def _run_basestation(spec: RunSpec) -> dict:
    """Phoenix on the surviving anchors vs. direct fits on surviving downloads."""
    topo = _topology(spec)
    trace = run_simulation(spec.config, topo)
    rec = reconstruct(trace.anchors, trace.samples, "phoenix", spec.min_points)
    row = _report_fields(score(trace, rec))
    outage = spec.config.gps_outage
    refs: list[AnchorRecord] = [
        r for r in trace.base_refs
        if outage is None or not outage[0] <= r.lc_s < outage[0] + outage[1]
    ]
    base = reconstruct(refs, trace.samples, "rgtr")
    row.update(_report_fields(score(trace, base), "rgtr_"))
    row["mean_degree"] = _mean_degree(spec.config, topo)
    return row


def _mean_degree(cfg: SimConfig, topo: Topology) -> float:
    ids = topo.ids
    deg = 0
    for r in ids:
        for s in ids:
            if r == s:
                continue
            prr = cfg.prr_override if cfg.prr_override is not None else link_prr(topo.distance(r, s), cfg.path_loss)
            deg += prr > 0 and prr >= cfg.prr_cutoff
    return deg / len(ids)


SCENARIOS: dict[str, Scenario] = {s.name: s for s in [
    Scenario("gps-absence", "outage_days", (0, 10, 20, 30, 40), tuple(range(0, 151, 10)), _gps_absence,
             doc="GPS mote loses its time source for a randomly placed window"),
    Scenario("t-wakeup", "t_wakeup_hours", (1, 2, 4, 6, 12, 24), (1, 2, 4, 6, 12, 24), _t_wakeup),
    Scenario("numseg", "numseg", (1, 2, 4, 8), (1, 2, 4, 8, 16), _numseg),
    Scenario("eviction", "eviction_policy", ("FCFS", "LLC", "RAND"), ("FCFS", "LLC", "RAND"), _eviction),
    Scenario("density", "prr_cutoff", (0.01, 0.2, 0.4, 0.6, 0.8), (0.01, 0.2, 0.4, 0.6, 0.8), _density,
             doc="links below the PRR cutoff are removed; all audible neighbours tracked"),
    Scenario("fault-injection", "fault_days", (0, 7, 14, 21), (0, 32, 64, 96, 128), _fault,
             doc="Normal(3600 s, 600 s) offsets on GPS refs for the final N days"),
    Scenario("basestation-absence", "absence_days", (0, 2, 4, 6, 8, 10, 12, 14, 16, 18),
             (0, 2, 4, 6, 8, 10, 12, 14, 16, 18), _basestation, runner=_run_basestation, scale=OLIN,
             doc="Olin-style emulation; compares against direct fits to basestation downloads"),
]}


def base_config(scale: Scale, base: Optional[SimConfig] = None) -> SimConfig:
    cfg = base or SimConfig()
    return cfg.replace(duration=scale.duration_days * DAY)


def plan(
    scenario: str,
    reps: int,
    seed_base: int = 0,
    values: Optional[Sequence] = None,
    paper_scale: bool = False,
    base: Optional[SimConfig] = None,
    min_points: int = 3,
) -> list[RunSpec]:
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    sc = SCENARIOS[scenario]
    scale = sc.scale or (PAPER if paper_scale else DESK)
    cfg0 = base_config(scale, base)
    if values is None:
        values = sc.paper_values if paper_scale else sc.desk_values
    specs = []
    for value in values:
        for rep in range(reps):
            seed = seed_base + rep
            cfg = sc.apply(cfg0.replace(seed=seed), value, seed, scale)
            specs.append(RunSpec(scenario, value, rep, seed, cfg, scale, min_points))
    return specs


def execute(spec: RunSpec) -> dict:
    sc = SCENARIOS[spec.scenario]
    metrics = (sc.runner or _run_default)(spec)
    row: dict[str, Any] = {
        "scenario": spec.scenario, "param": sc.param, "value": spec.value,
        "rep": spec.rep, "seed": spec.seed, "motes": spec.scale.motes,
        "topology": spec.scale.topology, "extent_m": spec.scale.extent,
        "min_fit_points": spec.min_points,
    }
    row.update(dict(config_items(spec.config)))
    row.update(metrics)
    return row


def run_sweep(specs: Sequence[RunSpec], jobs: int = 1) -> list[dict]:
    if jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(execute, specs))
    else:
        rows = []
        for i, spec in enumerate(specs):
            logger.info("run %d/%d: %s=%s rep=%d", i + 1, len(specs), spec.scenario, spec.value, spec.rep)
            rows.append(execute(spec))
    keyed = sorted(zip(specs, rows), key=lambda p: (_sort_key(p[0].value), p[0].rep))
    return [r for _, r in keyed]


def _sort_key(value):
    return (0, float(value), "") if isinstance(value, (int, float)) else (1, 0.0, str(value))
