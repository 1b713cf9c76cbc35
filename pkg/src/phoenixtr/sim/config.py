"""Simulation parameters and the segment-length models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

DAY = 86400.0
HOUR = 3600.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PathLoss:
    pr_d0_dbm: float = -59.28
    eta: float = 2.04
    sigma_db: float = 6.28
    d0_m: float = 2.0
    sensitivity_dbm: float = -94.0


class SegmentModel:
    """Draws segment lengths in seconds.

    Parsed from a spec string:

    * ``lognormal:median=<s>:sigma=<shape>``
    * ``fixed:length=<s>``
    * ``empirical:path=<file>`` -- one length (seconds) per line; draws by
      inverse-ECDF over the sorted lengths.
    """

    def __init__(self, spec: str):
        self.spec = spec
        kind, _, rest = spec.partition(":")
        params: dict[str, str] = {}
        for part in filter(None, rest.split(":")):
            key, sep, val = part.partition("=")
            if not sep:
                raise ConfigError(f"segment model parameter {part!r} is not key=value")
            params[key] = val
        self.kind = kind
        try:
            if kind == "lognormal":
                self.median = float(params.pop("median", 4 * DAY))
                self.sigma = float(params.pop("sigma", 1.0))
                if self.median <= 0 or self.sigma < 0:
                    raise ConfigError("lognormal needs median > 0 and sigma >= 0")
            elif kind == "fixed":
                self.length = float(params.pop("length"))
                if self.length <= 0:
                    raise ConfigError("fixed length must be positive")
            elif kind == "empirical":
                path = Path(params.pop("path"))
                lengths = [float(x) for x in path.read_text().split() if x.strip()]
                if not lengths or min(lengths) <= 0:
                    raise ConfigError(f"{path}: need positive segment lengths")
                self.lengths = np.sort(np.asarray(lengths))
            else:
                raise ConfigError(f"unknown segment model {kind!r}")
        except KeyError as exc:
            raise ConfigError(f"segment model {spec!r} missing {exc}") from None
        except OSError as exc:
            raise ConfigError(str(exc)) from None
        if params:
            raise ConfigError(f"segment model {spec!r}: unknown parameters {sorted(params)}")

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "lognormal":
            return float(self.median * math.exp(self.sigma * rng.standard_normal()))
        if self.kind == "fixed":
            return self.length
        return float(self.lengths[rng.integers(len(self.lengths))])

    def __repr__(self) -> str:
        return f"SegmentModel({self.spec!r})"


@dataclass(frozen=True)
class SimConfig:
    duration: float = 365 * DAY
    sample_interval: float = 600.0
    sample_bytes: int = 26
    t_beacon: float = 30.0
    t_wakeup: float = 6 * HOUR
    t_listen: float = 30.0
    t_sync: float = 6 * HOUR
    skew_ppm_range: tuple[float, float] = (40.0, 70.0)
    p_down: float = 0.2
    downtime_range: tuple[float, float] = (0.0, 4 * HOUR)
    comm_delay_range: tuple[float, float] = (0.005, 0.015)
    path_loss: PathLoss = field(default_factory=PathLoss)
    numseg: int = 4
    eviction_policy: str = "FCFS"
    eviction_timeout_factor: float = 3.0
    # (start, length) in seconds of global time
    gps_outage: Optional[tuple[float, float]] = None
    # (start, length, mu, sigma) in seconds
    gps_fault: Optional[tuple[float, float, float, float]] = None
    anchor_record_bytes: int = 16
    beacon_airtime: float = 0.0225
    seed: int = 0
    segment_model: str = "lognormal:median=345600:sigma=1.0"
    prr_cutoff: float = 0.01
    prr_override: Optional[float] = None
    early_exit: bool = True
    exact_timestamps: bool = False
    # global refs recorded for every live mote (emulated basestation downloads)
    basestation_interval: Optional[float] = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for name in ("duration", "sample_interval", "t_beacon", "t_wakeup", "t_listen",
                     "t_sync", "beacon_airtime"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.numseg < 1:
            raise ConfigError("numseg must be >= 1")
        for name in ("skew_ppm_range", "downtime_range", "comm_delay_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ConfigError(f"{name} must be an ordered non-negative range")
        if not 0.0 <= self.p_down <= 1.0:
            raise ConfigError("p_down must be a probability")
        if self.eviction_policy not in ("FCFS", "RAND", "LLC"):
            raise ConfigError(f"unknown eviction policy {self.eviction_policy!r}")
        if self.eviction_timeout_factor <= 0:
            raise ConfigError("eviction_timeout_factor must be positive")
        if self.comm_delay_range[1] >= self.t_listen:
            raise ConfigError("communication delay must be shorter than t_listen")
        if self.prr_override is not None and not 0.0 <= self.prr_override <= 1.0:
            raise ConfigError("prr_override must be a probability")
        if not 0.0 <= self.prr_cutoff <= 1.0:
            raise ConfigError("prr_cutoff must be a probability")
        if self.basestation_interval is not None and self.basestation_interval <= 0:
            raise ConfigError("basestation_interval must be positive")
        for name in ("gps_outage", "gps_fault"):
            window = getattr(self, name)
            if window is not None and (window[0] < 0 or window[1] < 0):
                raise ConfigError(f"{name} start/length must be non-negative")
        if self.gps_fault is not None and self.gps_fault[3] < 0:
            raise ConfigError("gps_fault sigma must be non-negative")
        self.build_segment_model()

    def build_segment_model(self) -> SegmentModel:
        return SegmentModel(self.segment_model)

    def replace(self, **changes) -> "SimConfig":
        return replace(self, **changes)


def config_field_names() -> list[str]:
    """Flat key names as used in config files (path-loss keys are dotted)."""
    names = []
    for f in fields(SimConfig):
        if f.name == "path_loss":
            names.extend(f"path_loss.{p.name}" for p in fields(PathLoss))
        else:
            names.append(f.name)
    return names
