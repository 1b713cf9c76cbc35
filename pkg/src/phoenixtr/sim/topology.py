"""Mote placement: grid, uniform-random, or loaded from a topology file."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class BadFile(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    motes: tuple[tuple[int, float, float], ...]
    gps_mote: int

    def __post_init__(self) -> None:
        ids = [m[0] for m in self.motes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate mote ids")
        if self.gps_mote not in ids:
            raise ValueError(f"gps mote {self.gps_mote} not in topology")

    @property
    def ids(self) -> list[int]:
        return [m[0] for m in self.motes]

    def distance(self, a: int, b: int) -> float:
        pos = {m[0]: (m[1], m[2]) for m in self.motes}
        (xa, ya), (xb, yb) = pos[a], pos[b]
        return math.hypot(xa - xb, ya - yb)


def generate_topology(kind: str, n: int, extent: float = 200.0, seed: int = 0,
                      path: str | Path | None = None) -> Topology:
    """Build a topology; the GPS mote is the lowest id.

    ``grid`` places motes row-major on a ``ceil(sqrt(n))``-wide square lattice
    whose spacing is ``extent / (side - 1)``.  ``uniform-random`` draws
    positions uniformly from ``[0, extent]^2``.  ``file`` reads ``path``.
    """
    if kind == "file":
        if path is None:
            raise BadFile("kind=file needs a path")
        return read_topology(path)
    if n < 2:
        raise ValueError("need at least two motes")
    if kind == "grid":
        side = math.ceil(math.sqrt(n))
        spacing = extent / (side - 1)
        motes = tuple((i, (i % side) * spacing, (i // side) * spacing) for i in range(n))
    elif kind == "uniform-random":
        rng = np.random.default_rng(seed)
        xy = rng.uniform(0.0, extent, size=(n, 2))
        motes = tuple((i, float(x), float(y)) for i, (x, y) in enumerate(xy))
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    return Topology(motes=motes, gps_mote=0)


TOPOLOGY_COLUMNS = ["mote_id", "x_m", "y_m", "role"]


def dumps_topology(topo: Topology) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TOPOLOGY_COLUMNS)
    for mote_id, x, y in topo.motes:
        w.writerow([mote_id, repr(float(x)), repr(float(y)), "gps" if mote_id == topo.gps_mote else "mote"])
    return buf.getvalue()


def loads_topology(text: str, source: str = "<string>") -> Topology:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != TOPOLOGY_COLUMNS:
        raise BadFile(f"{source}: header must be {','.join(TOPOLOGY_COLUMNS)}")
    motes, gps = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            mote_id, x, y, role = row
            if role not in ("gps", "mote"):
                raise ValueError(f"role {role!r}")
            motes.append((int(mote_id), float(x), float(y)))
        except ValueError as exc:
            raise BadFile(f"{source}:{lineno}: {exc}") from None
        if role == "gps":
            gps.append(int(mote_id))
    if len(gps) != 1:
        raise BadFile(f"{source}: exactly one gps mote required, found {len(gps)}")
    try:
        return Topology(motes=tuple(motes), gps_mote=gps[0])
    except ValueError as exc:
        raise BadFile(f"{source}: {exc}") from None


def write_topology(topo: Topology, path: str | Path) -> None:
    Path(path).write_text(dumps_topology(topo), encoding="utf-8")


def read_topology(path: str | Path) -> Topology:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise BadFile(str(exc)) from None
    return loads_topology(text, str(path))
