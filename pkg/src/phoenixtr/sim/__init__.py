from .config import DAY, HOUR, ConfigError, PathLoss, SegmentModel, SimConfig
from .engine import MoteAccounting, Sample, SegmentTruth, SimTrace, eviction_select, run_simulation
from .radio import link_prr, received_power
from .topology import BadFile, Topology, generate_topology, read_topology, write_topology

__all__ = [
    "DAY", "HOUR", "BadFile", "ConfigError", "MoteAccounting", "PathLoss", "Sample",
    "SegmentModel", "SegmentTruth", "SimConfig", "SimTrace", "Topology", "eviction_select",
    "generate_topology", "link_prr", "read_topology", "received_power", "run_simulation",
    "write_topology",
]
