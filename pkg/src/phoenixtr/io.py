"""On-disk formats: anchors, samples, truth, accounting, config, and results.

All tables are UTF-8 CSV with a header row, ``\\n`` line endings and ``,``
delimiters.  Clock values are integer microseconds on disk and float seconds
in memory; conversion rounds half-to-even.  Floats that must survive a round
trip (skew factors) are written with ``repr``.  See ``docs/formats.md``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from .model import AnchorRecord, GlobalFit, SegmentId
from .sim.config import ConfigError, PathLoss, SimConfig, config_field_names
from .sim.engine import MoteAccounting, Sample, SegmentTruth

US = 1_000_000


class FormatError(ValueError):
    pass


class ParseError(FormatError):
    def __init__(self, source: str, line: int, msg: str):
        super().__init__(f"{source}:{line}: {msg}")
        self.line = line


class SchemaError(FormatError):
    def __init__(self, source: str, missing: Sequence[str], extra: Sequence[str]):
        super().__init__(f"{source}: missing columns {list(missing)}, unexpected columns {list(extra)}")
        self.missing = list(missing)
        self.extra = list(extra)


class RangeError(ParseError):
    pass


def to_us(seconds: float) -> int:
    """Nearest microsecond, ties to even.

    When ``seconds`` came from :func:`from_us` the original integer is returned
    even where ``seconds * 1e6`` rounds to a neighbour (large epoch values).
    """
    n = round(seconds * US)
    for c in (n, n - 1, n + 1):
        if c / US == seconds:
            return c
    return n


def from_us(us: int) -> float:
    return us / US


ANCHOR_COLUMNS = ["moteid_r", "rc_r", "lc_r_us", "moteid_s", "rc_s", "lc_s_us"]
SAMPLE_COLUMNS = ["moteid", "rc", "lc_us", "payload_bytes"]
SAMPLE_TRUTH_COLUMN = "true_gts_us"
TRUTH_COLUMNS = ["moteid", "rc", "alpha", "beta_us", "end_us", "skew_ppm"]
ACCOUNTING_COLUMNS = ["moteid", "listen_s", "beacons", "beacon_airtime", "anchors",
                      "anchor_bytes", "samples", "sample_bytes", "alive_s"]
FIT_COLUMNS = ["moteid", "rc", "alpha", "beta", "chi", "df", "path"]
TIMESTAMP_COLUMNS = ["moteid", "rc", "lc_us", "gts_us"]


def _write_table(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def _read_table(path: str | Path, columns: Sequence[str],
                optional: Sequence[str] = ()) -> tuple[list[str], Iterable[tuple[int, list[str]]]]:
    source = str(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError:
        raise
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(source, columns, [])
        missing = [c for c in columns if c not in header]
        extra = [c for c in header if c not in columns and c not in optional]
        if missing or extra or header[: len(columns)] != list(columns):
            raise SchemaError(source, missing, extra or [c for c in header if c not in columns])
        rows = [(lineno, row) for lineno, row in enumerate(reader, start=2) if row]
    for lineno, row in rows:
        if len(row) != len(header):
            raise ParseError(source, lineno, f"expected {len(header)} fields, got {len(row)}")
    return header, rows


def _int(source: str, lineno: int, text: str, name: str, nonneg: bool = True) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ParseError(source, lineno, f"{name}: not an integer: {text!r}") from None
    if nonneg and value < 0:
        raise RangeError(source, lineno, f"{name} is negative: {value}")
    return value


def _float(source: str, lineno: int, text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(source, lineno, f"{name}: not a number: {text!r}") from None


# -- anchors -----------------------------------------------------------------

def write_anchors(path: str | Path, records: Iterable[AnchorRecord]) -> None:
    _write_table(path, ANCHOR_COLUMNS, (
        (r.receiver.mote_id, r.receiver.reboot_count, to_us(r.lc_r),
         r.sender.mote_id, r.sender.reboot_count, to_us(r.lc_s))
        for r in records
    ))


def read_anchors(path: str | Path) -> list[AnchorRecord]:
    src = str(path)
    _, rows = _read_table(path, ANCHOR_COLUMNS)
    out = []
    for ln, row in rows:
        mr, rr, lr, ms, rs, ls = (_int(src, ln, v, c) for v, c in zip(row, ANCHOR_COLUMNS))
        out.append(AnchorRecord(SegmentId(mr, rr), from_us(lr), SegmentId(ms, rs), from_us(ls)))
    return out


# -- samples -----------------------------------------------------------------

def write_samples(path: str | Path, samples: Iterable[Sample | tuple], payload_bytes: int = 26,
                  with_truth: bool = True) -> None:
    cols = SAMPLE_COLUMNS + ([SAMPLE_TRUTH_COLUMN] if with_truth else [])
    def rows():
        for s in samples:
            row = [s[0].mote_id, s[0].reboot_count, to_us(s[1]), payload_bytes]
            if with_truth:
                row.append(to_us(s[2]))
            yield row
    _write_table(path, cols, rows())


def read_samples(path: str | Path, with_truth: bool = False) -> list[tuple]:
    """Read a sample file.

    The truth column is accepted but ignored unless ``with_truth`` is set;
    reconstruction always reads with the default.  Returns ``(segment, lc)``
    or ``(segment, lc, true_gts)`` tuples.
    """
    src = str(path)
    header, rows = _read_table(path, SAMPLE_COLUMNS, optional=[SAMPLE_TRUTH_COLUMN])
    has_truth = SAMPLE_TRUTH_COLUMN in header
    if with_truth and not has_truth:
        raise SchemaError(src, [SAMPLE_TRUTH_COLUMN], [])
    out: list[tuple] = []
    for ln, row in rows:
        seg = SegmentId(_int(src, ln, row[0], "moteid"), _int(src, ln, row[1], "rc"))
        lc = from_us(_int(src, ln, row[2], "lc_us"))
        _int(src, ln, row[3], "payload_bytes")
        if with_truth:
            out.append((seg, lc, from_us(_int(src, ln, row[4], SAMPLE_TRUTH_COLUMN))))
        else:
            out.append((seg, lc))
    return out


# -- truth -------------------------------------------------------------------

def write_truth(path: str | Path, truth: dict[SegmentId, SegmentTruth]) -> None:
    _write_table(path, TRUTH_COLUMNS, (
        (s.mote_id, s.reboot_count, repr(t.alpha), to_us(t.beta), to_us(t.end), repr(t.skew_ppm))
        for s, t in sorted(truth.items())
    ))


def read_truth(path: str | Path) -> dict[SegmentId, SegmentTruth]:
    """Per-segment ground truth; ``phase`` is not stored and reads back as 0."""
    src = str(path)
    _, rows = _read_table(path, TRUTH_COLUMNS)
    out = {}
    for ln, row in rows:
        seg = SegmentId(_int(src, ln, row[0], "moteid"), _int(src, ln, row[1], "rc"))
        out[seg] = SegmentTruth(
            segment=seg, alpha=_float(src, ln, row[2], "alpha"),
            beta=from_us(_int(src, ln, row[3], "beta_us")),
            end=from_us(_int(src, ln, row[4], "end_us")),
            skew_ppm=_float(src, ln, row[5], "skew_ppm"), phase=0.0,
        )
    return out


# -- accounting --------------------------------------------------------------

def write_accounting(path: str | Path, accounting: dict[int, MoteAccounting]) -> None:
    _write_table(path, ACCOUNTING_COLUMNS, (
        (m, repr(a.listen_s), a.beacons, repr(a.beacon_airtime), a.anchors, a.anchor_bytes,
         a.samples, a.sample_bytes, repr(a.alive_s))
        for m, a in sorted(accounting.items())
    ))


def read_accounting(path: str | Path) -> dict[int, MoteAccounting]:
    src = str(path)
    _, rows = _read_table(path, ACCOUNTING_COLUMNS)
    out = {}
    for ln, row in rows:
        out[_int(src, ln, row[0], "moteid")] = MoteAccounting(
            listen_s=_float(src, ln, row[1], "listen_s"),
            beacons=_int(src, ln, row[2], "beacons"),
            beacon_airtime=_float(src, ln, row[3], "beacon_airtime"),
            anchors=_int(src, ln, row[4], "anchors"),
            anchor_bytes=_int(src, ln, row[5], "anchor_bytes"),
            samples=_int(src, ln, row[6], "samples"),
            sample_bytes=_int(src, ln, row[7], "sample_bytes"),
            alive_s=_float(src, ln, row[8], "alive_s"),
        )
    return out


# -- reconstruction results --------------------------------------------------

def write_fits(path: str | Path, fits: dict[SegmentId, GlobalFit]) -> None:
    def rows():
        for seg, f in sorted(fits.items()):
            if f.is_sentinel:
                yield (seg.mote_id, seg.reboot_count, "", "", "", "", "")
            else:
                yield (seg.mote_id, seg.reboot_count, repr(f.alpha), repr(f.beta), repr(f.chi),
                       f.df, ";".join(str(p) for p in f.path))
    _write_table(path, FIT_COLUMNS, rows())


def read_fits(path: str | Path) -> dict[SegmentId, GlobalFit]:
    src = str(path)
    _, rows = _read_table(path, FIT_COLUMNS)
    out = {}
    for ln, row in rows:
        seg = SegmentId(_int(src, ln, row[0], "moteid"), _int(src, ln, row[1], "rc"))
        if row[2] == "":
            out[seg] = GlobalFit.sentinel(seg)
            continue
        try:
            path_ = tuple(SegmentId.parse(p) for p in row[6].split(";"))
        except ValueError:
            raise ParseError(src, ln, f"bad path {row[6]!r}") from None
        if path_[0] != seg:
            raise ParseError(src, ln, "path must start at the segment itself")
        out[seg] = GlobalFit(alpha=_float(src, ln, row[2], "alpha"), beta=_float(src, ln, row[3], "beta"),
                             chi=_float(src, ln, row[4], "chi"), df=_int(src, ln, row[5], "df"), path=path_)
    return out


def write_timestamps(path: str | Path, samples: Sequence[tuple], estimates: Sequence[Optional[float]]) -> None:
    _write_table(path, TIMESTAMP_COLUMNS, (
        (s[0].mote_id, s[0].reboot_count, to_us(s[1]), "" if e is None else to_us(e))
        for s, e in zip(samples, estimates)
    ))


def read_timestamps(path: str | Path) -> list[tuple[SegmentId, float, Optional[float]]]:
    src = str(path)
    _, rows = _read_table(path, TIMESTAMP_COLUMNS)
    out = []
    for ln, row in rows:
        seg = SegmentId(_int(src, ln, row[0], "moteid"), _int(src, ln, row[1], "rc"))
        gts = None if row[3] == "" else from_us(_int(src, ln, row[3], "gts_us"))
        out.append((seg, from_us(_int(src, ln, row[2], "lc_us")), gts))
    return out


def write_json(path: str | Path, payload: Any) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- config ------------------------------------------------------------------

def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_items(cfg: SimConfig) -> list[tuple[str, str]]:
    """Flat ``(key, value-text)`` pairs in declaration order."""
    items = []
    for f in dataclasses.fields(SimConfig):
        value = getattr(cfg, f.name)
        if f.name == "path_loss":
            for p in dataclasses.fields(PathLoss):
                items.append((f"path_loss.{p.name}", _format_value(getattr(value, p.name))))
        else:
            items.append((f.name, _format_value(value)))
    return items


def dumps_config(cfg: SimConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config_items(cfg))


_TUPLE_ARITY = {"skew_ppm_range": 2, "downtime_range": 2, "comm_delay_range": 2,
                "gps_outage": 2, "gps_fault": 4}
_OPTIONAL = {"gps_outage", "gps_fault", "prr_override", "basestation_interval"}


def _parse_value(key: str, text: str, default: Any) -> Any:
    text = text.strip()
    if key in _OPTIONAL and text.lower() == "none":
        return None
    if key in _TUPLE_ARITY:
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != _TUPLE_ARITY[key]:
            raise ValueError(f"expected {_TUPLE_ARITY[key]} comma-separated numbers")
        return tuple(float(p) for p in parts)
    if isinstance(default, bool):
        if text.lower() not in ("true", "false"):
            raise ValueError("expected true or false")
        return text.lower() == "true"
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float) or key in _OPTIONAL:
        return float(text)
    return text


def loads_config(text: str, source: str = "<config>", base: Optional[SimConfig] = None) -> SimConfig:
    """Parse ``key = value`` lines (``#`` starts a comment).  Unknown keys are errors."""
    base = base or SimConfig()
    known = set(config_field_names())
    defaults = {f.name: getattr(base, f.name) for f in dataclasses.fields(SimConfig)}
    pl_defaults = dataclasses.asdict(base.path_loss)
    changes: dict[str, Any] = {}
    pl_changes: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ParseError(source, lineno, "expected key = value")
        if key not in known:
            raise ParseError(source, lineno, f"unknown key {key!r}")
        try:
            if key.startswith("path_loss."):
                name = key.split(".", 1)[1]
                pl_changes[name] = _parse_value(key, value, pl_defaults[name])
            else:
                changes[key] = _parse_value(key, value, defaults[key])
        except ValueError as exc:
            raise ParseError(source, lineno, f"{key}: {exc}") from None
    if pl_changes:
        changes["path_loss"] = dataclasses.replace(base.path_loss, **pl_changes)
    try:
        return dataclasses.replace(base, **changes)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def write_config(path: str | Path, cfg: SimConfig) -> None:
    Path(path).write_text(dumps_config(cfg), encoding="utf-8")


def read_config(path: str | Path, base: Optional[SimConfig] = None) -> SimConfig:
    return loads_config(Path(path).read_text(encoding="utf-8"), str(path), base)
