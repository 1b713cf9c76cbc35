"""Deterministic discrete-event simulation of a beaconing, rebooting mote network.

Every mote's lifecycle (segment lengths, downtimes, per-segment skew and
beacon phase) is drawn up front from its own random stream, so changing a
protocol knob such as ``numseg`` leaves the clock ground truth untouched.
Listening windows, GPS synchronisations and basestation contacts are then
processed in global-time order from an event queue.  Beacons only matter when
somebody is listening, so they are enumerated per window rather than queued
individually.

Local clocks tick in integer microseconds: scheduled events (beacons, samples,
GPS syncs) fall on exact microsecond readings and a receiver's clock is read
by truncation.  ``exact_timestamps`` disables the truncation.
"""

from __future__ import annotations

import bisect
import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ..model import AnchorRecord, SegmentId
from .config import ConfigError, SimConfig
from .radio import link_prr
from .topology import Topology

logger = logging.getLogger(__name__)

US = 1_000_000


def _us(seconds: float) -> int:
    return int(round(seconds * US))


@dataclass(frozen=True)
class SegmentTruth:
    segment: SegmentId
    alpha: float
    beta: float
    end: float
    skew_ppm: float
    phase: float

    def real(self, lc: float) -> float:
        return self.alpha * lc + self.beta

    def local(self, t: float) -> float:
        return (t - self.beta) / self.alpha


class Sample(NamedTuple):
    segment: SegmentId
    lc: float
    true_gts: float


@dataclass
class MoteAccounting:
    listen_s: float = 0.0
    beacons: int = 0
    beacon_airtime: float = 0.0
    anchors: int = 0
    anchor_bytes: int = 0
    samples: int = 0
    sample_bytes: int = 0
    alive_s: float = 0.0

    @property
    def beacon_s(self) -> float:
        return self.beacons * self.beacon_airtime

    @property
    def radio_on_s(self) -> float:
        return self.listen_s + self.beacon_s


@dataclass
class SimTrace:
    config: SimConfig
    topology: Topology
    anchors: list[AnchorRecord]
    samples: list[Sample]
    truth: dict[SegmentId, SegmentTruth]
    accounting: dict[int, MoteAccounting]
    base_refs: list[AnchorRecord] = field(default_factory=list)


def eviction_select(
    slots: dict[SegmentId, float],
    heard: list[tuple[SegmentId, float]],
    policy: str,
    *,
    numseg: int,
    now: float,
    timeout: float,
    rng: Optional[np.random.Generator] = None,
) -> dict[SegmentId, float]:
    """Drop stale slots, then fill vacancies from ``heard`` ``(segment, lc)`` candidates.

    ``slots`` maps tracked segments to the time they were last heard.  FCFS
    takes candidates in the order heard, RAND uniformly at random, LLC the one
    with the highest local clock.  Returns a new mapping.
    """
    out = {s: t for s, t in slots.items() if now - t <= timeout}
    cands: dict[SegmentId, float] = {}
    for seg, lc in heard:
        if seg not in out and seg not in cands:
            cands[seg] = lc
    while len(out) < numseg and cands:
        if policy == "FCFS":
            pick = next(iter(cands))
        elif policy == "RAND":
            if rng is None:
                raise ValueError("RAND eviction needs an rng")
            pick = list(cands)[int(rng.integers(len(cands)))]
        elif policy == "LLC":
            pick = max(cands, key=cands.__getitem__)
        else:
            raise ValueError(f"unknown eviction policy {policy!r}")
        del cands[pick]
        out[pick] = now
    return out


class _Mote:
    def __init__(self, mote_id: int, segments: list[SegmentTruth]):
        self.id = mote_id
        self.segments = segments
        self.boots = [s.beta for s in segments]
        self.slots: dict[SegmentId, float] = {}
        # candidates heard recently, for RAND/LLC: segment -> (lc, last heard)
        self.pool: dict[SegmentId, tuple[float, float]] = {}
        self.acct = MoteAccounting()

    def overlapping(self, t0: float, t1: float) -> list[SegmentTruth]:
        i = max(bisect.bisect_right(self.boots, t0) - 1, 0)
        out = []
        while i < len(self.segments) and self.segments[i].beta <= t1:
            if self.segments[i].end > t0:
                out.append(self.segments[i])
            i += 1
        return out


def _lifecycle(mote_id: int, cfg: SimConfig, rng: np.random.Generator) -> list[SegmentTruth]:
    model = cfg.build_segment_model()
    t_beacon_us = _us(cfg.t_beacon)
    segs = []
    boot_us, rc = 0, 0
    while boot_us < _us(cfg.duration):
        boot = boot_us / US
        length = model.sample(rng)
        skew = float(rng.uniform(*cfg.skew_ppm_range))
        phase = int(rng.integers(0, t_beacon_us)) / US
        down = float(rng.uniform(*cfg.downtime_range)) if rng.random() < cfg.p_down else 0.0
        end = min(boot + length, cfg.duration)
        segs.append(SegmentTruth(
            segment=SegmentId(mote_id, rc), alpha=1.0 / (1.0 + skew * 1e-6), beta=boot,
            end=end, skew_ppm=skew, phase=phase,
        ))
        boot_us = math.ceil((boot + length + down) * US)
        rc += 1
    return segs


def _periodic_local(seg: SegmentTruth, first: float, period: float, end: float) -> np.ndarray:
    """Local readings ``first + k*period`` (k >= 0, exact microseconds) whose real time is < ``end``."""
    span = seg.local(end)
    if span <= first:
        return np.empty(0)
    first_us, period_us = _us(first), _us(period)
    count = int(math.floor((span - first) / period)) + 2
    lc = (first_us + period_us * np.arange(count, dtype=np.int64)) / US
    return lc[seg.alpha * lc + seg.beta < end]


class _Simulation:
    WINDOW, SYNC, BASE = 0, 1, 2

    def __init__(self, cfg: SimConfig, topo: Topology):
        self.cfg = cfg
        self.topo = topo
        ids = sorted(topo.ids)
        root = np.random.SeedSequence(cfg.seed)
        life_ss, chan_ss, evict_ss, gps_ss = root.spawn(4)
        life = [np.random.default_rng(s) for s in life_ss.spawn(len(ids))]
        self.chan = {m: np.random.default_rng(s) for m, s in zip(ids, chan_ss.spawn(len(ids)))}
        self.evict = {m: np.random.default_rng(s) for m, s in zip(ids, evict_ss.spawn(len(ids)))}
        self.gps_rng = np.random.default_rng(gps_ss)
        self.motes = {m: _Mote(m, _lifecycle(m, cfg, r)) for m, r in zip(ids, life)}

        self.neighbors: dict[int, list[tuple[int, float]]] = {}
        for r in ids:
            nbrs = []
            for s in ids:
                if s == r:
                    continue
                if cfg.prr_override is not None:
                    prr = cfg.prr_override
                else:
                    prr = link_prr(topo.distance(r, s), cfg.path_loss)
                if prr > 0 and prr >= cfg.prr_cutoff:
                    nbrs.append((s, prr))
            self.neighbors[r] = nbrs

        self.anchors: list[AnchorRecord] = []
        self.base_refs: list[AnchorRecord] = []
        self.events: list[tuple[float, int, int, int, int, int]] = []
        self._seq = 0

    def _push(self, t: float, kind: int, mote: int, seg_idx: int, k: int) -> None:
        heapq.heappush(self.events, (t, kind, mote, self._seq, seg_idx, k))
        self._seq += 1

    def _read_clock(self, seg: SegmentTruth, t: float) -> float:
        lc = seg.local(t)
        if self.cfg.exact_timestamps:
            return lc
        return math.floor(lc * US) / US

    def _quantize_global(self, t: float) -> float:
        return t if self.cfg.exact_timestamps else round(t * US) / US

    def run(self) -> SimTrace:
        cfg = self.cfg
        samples: list[Sample] = []
        truth: dict[SegmentId, SegmentTruth] = {}
        for m in self.motes.values():
            for idx, seg in enumerate(m.segments):
                truth[seg.segment] = seg
                self._push(seg.beta, self.WINDOW, m.id, idx, 0)
                if m.id == self.topo.gps_mote:
                    first = _periodic_local(seg, cfg.t_sync, cfg.t_sync, seg.end)
                    if first.size:
                        self._push(seg.real(first[0]), self.SYNC, m.id, idx, 1)
                self._account_segment(m, seg, samples)
        if cfg.basestation_interval is not None:
            self._push(cfg.basestation_interval, self.BASE, -1, -1, 1)

        while self.events:
            t, kind, mote, _, idx, k = heapq.heappop(self.events)
            if kind == self.WINDOW:
                self._window(self.motes[mote], idx, k, t)
            elif kind == self.SYNC:
                self._sync(self.motes[mote], idx, k, t)
            else:
                self._basestation(k, t)

        return SimTrace(
            config=cfg, topology=self.topo, anchors=self.anchors, samples=samples,
            truth=truth, accounting={m.id: m.acct for m in self.motes.values()},
            base_refs=self.base_refs,
        )

    def _account_segment(self, m: _Mote, seg: SegmentTruth, samples: list[Sample]) -> None:
        cfg = self.cfg
        acct = m.acct
        acct.alive_s += seg.end - seg.beta
        acct.beacon_airtime = cfg.beacon_airtime
        acct.beacons += len(_periodic_local(seg, seg.phase, cfg.t_beacon, seg.end))
        lcs = _periodic_local(seg, cfg.sample_interval, cfg.sample_interval, seg.end)
        acct.samples += len(lcs)
        acct.sample_bytes += len(lcs) * cfg.sample_bytes
        sid = seg.segment
        samples.extend(Sample(sid, lc, seg.alpha * lc + seg.beta) for lc in lcs.tolist())

    def _record(self, m: _Mote, rec: AnchorRecord) -> None:
        self.anchors.append(rec)
        m.acct.anchors += 1
        m.acct.anchor_bytes += self.cfg.anchor_record_bytes

    def _window(self, m: _Mote, idx: int, k: int, w0: float) -> None:
        cfg = self.cfg
        seg = m.segments[idx]
        if k == 0:
            m.slots, m.pool = {}, {}
        nxt = seg.real(k * cfg.t_wakeup + cfg.t_wakeup)
        if nxt < seg.end:
            self._push(nxt, self.WINDOW, m.id, idx, k + 1)
        w1 = min(w0 + cfg.t_listen, seg.end)
        if w1 <= w0:
            return
        timeout = cfg.eviction_timeout_factor * cfg.t_wakeup
        policy = cfg.eviction_policy
        rng = self.chan[m.id]
        dmin, dmax = cfg.comm_delay_range

        receptions = []
        for s_id, prr in self.neighbors[m.id]:
            for sseg in self.motes[s_id].overlapping(w0 - dmax, w1):
                lo = sseg.local(max(w0 - dmax, sseg.beta))
                hi = sseg.local(min(w1, sseg.end))
                k0 = max(math.ceil((lo - sseg.phase) / cfg.t_beacon) - 1, 0)
                k1 = math.floor((hi - sseg.phase) / cfg.t_beacon)
                for kb in range(k0, k1 + 1):
                    lc_s = (_us(sseg.phase) + kb * _us(cfg.t_beacon)) / US
                    t_send = sseg.real(lc_s)
                    if t_send >= sseg.end or t_send > w1:
                        continue
                    delay = float(rng.uniform(dmin, dmax)) if dmax > dmin else dmin
                    t_recv = t_send + delay
                    if not w0 <= t_recv <= w1:
                        continue
                    if rng.random() >= prr:
                        continue
                    receptions.append((t_recv, sseg.segment, lc_s))
        receptions.sort()

        m.slots = {s: t for s, t in m.slots.items() if w0 - t <= timeout}
        heard: set[SegmentId] = set()
        buffered: dict[SegmentId, AnchorRecord] = {}
        captured = 0
        radio_off = w1
        for t_recv, sender, lc_s in receptions:
            if sender in heard or sender in buffered:
                continue
            rec = AnchorRecord(seg.segment, self._read_clock(seg, t_recv), sender, lc_s)
            if sender in m.slots:
                m.slots[sender] = t_recv
                heard.add(sender)
                self._record(m, rec)
                captured += 1
            elif policy == "FCFS":
                if len(m.slots) < cfg.numseg:
                    m.slots = eviction_select(m.slots, [(sender, lc_s)], policy, numseg=cfg.numseg,
                                              now=t_recv, timeout=timeout)
                    heard.add(sender)
                    self._record(m, rec)
                    captured += 1
            else:
                m.pool[sender] = (lc_s, t_recv)
                if len(m.slots) < cfg.numseg:
                    buffered[sender] = rec
            vacancies = cfg.numseg - len(m.slots)
            if cfg.early_exit and captured + min(vacancies, len(buffered)) >= cfg.numseg:
                radio_off = t_recv
                break

        if policy != "FCFS":
            m.pool = {s: v for s, v in m.pool.items() if radio_off - v[1] <= timeout}
            before = set(m.slots)
            m.slots = eviction_select(
                m.slots, [(s, v[0]) for s, v in m.pool.items()], policy, numseg=cfg.numseg,
                now=radio_off, timeout=timeout, rng=self.evict[m.id],
            )
            for s in m.slots:
                if s not in before and s in buffered:
                    self._record(m, buffered[s])
        m.acct.listen_s += radio_off - w0

    def _sync(self, m: _Mote, idx: int, k: int, t: float) -> None:
        cfg = self.cfg
        seg = m.segments[idx]
        nxt = (k + 1) * _us(cfg.t_sync) / US
        if seg.real(nxt) < seg.end:
            self._push(seg.real(nxt), self.SYNC, m.id, idx, k + 1)
        if cfg.gps_outage is not None:
            start, length = cfg.gps_outage
            if start <= t < start + length:
                return
        lc = k * _us(cfg.t_sync) / US
        gts = t
        if cfg.gps_fault is not None:
            start, length, mu, sigma = cfg.gps_fault
            if start <= t < start + length:
                gts += float(self.gps_rng.normal(mu, sigma))
        self._record(m, AnchorRecord(seg.segment, lc, seg.segment, self._quantize_global(gts)))

    def _basestation(self, k: int, t: float) -> None:
        cfg = self.cfg
        nxt = (k + 1) * cfg.basestation_interval
        if nxt < cfg.duration:
            self._push(nxt, self.BASE, -1, -1, k + 1)
        for m in self.motes.values():
            for seg in m.overlapping(t, t):
                if seg.beta <= t < seg.end:
                    self.base_refs.append(AnchorRecord(
                        seg.segment, self._read_clock(seg, t), seg.segment, self._quantize_global(t)))


def run_simulation(config: SimConfig, topology: Topology) -> SimTrace:
    config.validate()
    if len(topology.motes) < 1:
        raise ConfigError("empty topology")
    return _Simulation(config, topology).run()
