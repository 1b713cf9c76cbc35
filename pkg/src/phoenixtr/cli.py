"""phoenixtr command line.

Exit codes: 0 success, 1 invalid flags or configuration, 2 I/O failure.
Every command writes ``manifest.json`` next to its outputs; ``phoenixtr rerun``
replays a manifest and checks the outputs hash the same.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from . import __version__
from . import io as fmt
from .experiments import DESK, PAPER, SCENARIOS, plan, run_sweep
from .metrics import MetricError, evaluate
from .model import DEFAULT_MIN_FIT_POINTS
from .pipeline import ALGORITHMS, diagnostics_payload, reconstruct
from .reconstruct import assign_timestamps
from .sim.config import DAY, ConfigError, SimConfig
from .sim.engine import run_simulation
from .sim.topology import BadFile, generate_topology, read_topology, write_topology

logger = logging.getLogger("phoenixtr")

OUT_ENV = "PHOENIXTR_OUT"
EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2; 2 is reserved for I/O
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _out_dir(args, command: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, ".")) / command


def _stage(out: Path) -> Path:
    """Outputs are written to a scratch directory and moved into place only on
    success, so a failed command never leaves partial results."""
    out.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))


def _commit(tmp: Path, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for f in sorted(tmp.iterdir()):
        os.replace(f, out / f.name)
    tmp.rmdir()


def _write_manifest(out: Path, command: str, args: dict, inputs: dict[str, str],
                    config: Optional[SimConfig] = None) -> None:
    outputs = {p.name: _sha256(p) for p in sorted(out.iterdir()) if p.name != "manifest.json"}
    payload = {
        "tool": "phoenixtr",
        "version": __version__,
        "command": command,
        "args": args,
        "seed": args.get("seed", args.get("seed_base")),
        "inputs": {k: {"path": v, "sha256": _sha256(Path(v))} for k, v in sorted(inputs.items())},
        "config": dict(fmt.config_items(config)) if config is not None else None,
        "outputs": outputs,
    }
    fmt.write_json(out / "manifest.json", payload)


def _load_config(path: Optional[str], sets: Sequence[str], base: Optional[SimConfig] = None) -> SimConfig:
    try:
        cfg = fmt.read_config(path, base) if path else (base or SimConfig())
        if sets:
            cfg = fmt.loads_config("\n".join(sets), "--set", cfg)
    except fmt.FormatError as exc:
        raise UsageError(str(exc)) from None
    return cfg


# -- commands ----------------------------------------------------------------

def cmd_gen_topology(args) -> tuple[dict, dict, Optional[SimConfig]]:
    if args.kind == "file":
        raise UsageError("gen-topology generates grid or uniform-random layouts")
    topo = generate_topology(args.kind, args.n, args.extent, seed=args.seed)
    write_topology(topo, args._stage / "topology.csv")
    return {"kind": args.kind, "n": args.n, "extent": args.extent, "seed": args.seed}, {}, None


def cmd_simulate(args):
    cfg = _load_config(args.config, args.set)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    inputs = {}
    if args.topology:
        topo = read_topology(args.topology)
        inputs["topology"] = str(Path(args.topology).resolve())
    else:
        topo = generate_topology("uniform-random", args.motes, args.extent, seed=cfg.seed)
    if args.config:
        inputs["config"] = str(Path(args.config).resolve())
    trace = run_simulation(cfg, topo)
    d = args._stage
    fmt.write_anchors(d / "anchors.csv", trace.anchors)
    fmt.write_samples(d / "samples.csv", trace.samples, cfg.sample_bytes, with_truth=True)
    fmt.write_truth(d / "truth.csv", trace.truth)
    fmt.write_accounting(d / "accounting.csv", trace.accounting)
    write_topology(topo, d / "topology.csv")
    fmt.write_config(d / "config.txt", cfg)
    if trace.base_refs:
        fmt.write_anchors(d / "basestation_refs.csv", trace.base_refs)
    logger.info("simulated %d segments, %d anchors, %d samples",
                len(trace.truth), len(trace.anchors), len(trace.samples))
    return ({"config": inputs.get("config"), "set": list(args.set), "seed": cfg.seed,
             "topology": inputs.get("topology"), "motes": args.motes, "extent": args.extent},
            inputs, cfg)


def cmd_reconstruct(args):
    anchors = fmt.read_anchors(args.anchors)
    samples = fmt.read_samples(args.samples)  # truth column, if any, is never read
    rec = reconstruct(anchors, samples, args.algo, args.min_points, args.queue)
    d = args._stage
    fmt.write_fits(d / "fits.csv", rec.fits)
    fmt.write_timestamps(d / "timestamps.csv", samples, rec.estimates)
    fmt.write_json(d / "diagnostics.json", diagnostics_payload(rec))
    logger.info("%s: %d/%d samples lost (%.3f%%)", args.algo, rec.loss.lost, rec.loss.total, rec.loss.loss_pct)
    inputs = {"anchors": str(Path(args.anchors).resolve()), "samples": str(Path(args.samples).resolve())}
    return ({"anchors": inputs["anchors"], "samples": inputs["samples"], "algo": args.algo,
             "min_points": args.min_points, "queue": args.queue}, inputs, None)


def cmd_evaluate(args):
    rdir = Path(args.reconstruction)
    truth_path = Path(args.truth)
    acct_path = Path(args.accounting) if args.accounting else truth_path.with_name("accounting.csv")
    fits = fmt.read_fits(rdir / "fits.csv")
    samples = [(seg, lc) for seg, lc, _ in fmt.read_timestamps(rdir / "timestamps.csv")]
    truth = fmt.read_truth(truth_path)
    accounting = fmt.read_accounting(acct_path)
    missing = sorted({s[0] for s in samples} - set(truth))
    if missing:
        raise UsageError(f"truth file has no entry for segments {[str(s) for s in missing[:5]]}")
    # estimates are recomputed from the full-precision fits, not the rounded timestamps
    estimates, loss = assign_timestamps(samples, fits)
    report = evaluate(samples, estimates, loss, fits, truth, accounting)
    d = args._stage
    (d / "report.json").write_text(report.to_json(), encoding="utf-8")
    _write_rows(d / "report_row.csv", [report.summary_row()])
    logger.info("data loss %.3f%%, ppm p99 %.3f, space %.2f%%, duty %.3f%%", report.data_loss_pct,
                report.ppm_p99, report.space_overhead_pct, report.duty_cycle_pct)
    inputs = {"fits": str((rdir / "fits.csv").resolve()), "timestamps": str((rdir / "timestamps.csv").resolve()),
              "truth": str(truth_path.resolve()), "accounting": str(acct_path.resolve())}
    return ({"reconstruction": str(rdir.resolve()), "truth": inputs["truth"],
             "accounting": inputs["accounting"]}, inputs, None)


def _parse_values(text: Optional[str]) -> Optional[list]:
    if text is None:
        return None
    out: list[Any] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        try:
            num = float(part)
            out.append(int(num) if num.is_integer() and "." not in part else num)
        except ValueError:
            out.append(part)
    if not out:
        raise UsageError("--values is empty")
    return out


def cmd_sweep(args):
    base = _load_config(args.config, args.set)
    values = _parse_values(args.values)
    specs = plan(args.scenario, args.reps, args.seed_base, values, args.paper_scale, base, args.min_points)
    if args.duration_days is not None:
        specs = [dataclasses.replace(s, config=s.config.replace(duration=args.duration_days * DAY))
                 for s in specs]
    rows = run_sweep(specs, jobs=args.jobs)
    _write_rows(args._stage / "sweep.csv", rows)
    inputs = {"config": str(Path(args.config).resolve())} if args.config else {}
    return ({"scenario": args.scenario, "reps": args.reps, "seed_base": args.seed_base,
             "values": args.values, "paper_scale": args.paper_scale, "config": inputs.get("config"),
             "set": list(args.set), "min_points": args.min_points, "duration_days": args.duration_days,
             "jobs": args.jobs}, inputs, base)


def _fmt_cell(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return "" if v is None else str(v)


def _write_rows(path: Path, rows: list[dict]) -> None:
    columns: list[str] = []
    for r in rows:
        columns.extend(k for k in r if k not in columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt_cell(r.get(c)) for c in columns])


COMMANDS: dict[str, Callable] = {
    "gen-topology": cmd_gen_topology,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def cmd_rerun(args) -> int:
    manifest = fmt.read_json(args.manifest)
    command = manifest.get("command")
    if command not in COMMANDS:
        raise UsageError(f"manifest names unknown command {command!r}")
    for name, ref in manifest["inputs"].items():
        if _sha256(Path(ref["path"])) != ref["sha256"]:
            raise UsageError(f"input {name} ({ref['path']}) changed since the manifest was written")
    out = Path(args.out) if args.out else Path(args.manifest).resolve().parent.with_name(
        Path(args.manifest).resolve().parent.name + "-rerun")
    ns = _namespace_from_manifest(command, manifest["args"])
    ns.out = str(out)
    _run_command(command, ns)
    produced = fmt.read_json(out / "manifest.json")["outputs"]
    if produced != manifest["outputs"]:
        diff = sorted(k for k in set(produced) | set(manifest["outputs"])
                      if produced.get(k) != manifest["outputs"].get(k))
        print(f"rerun outputs differ: {diff}", file=sys.stderr)
        return EXIT_USAGE
    print(f"rerun reproduced {len(produced)} outputs byte-identically in {out}")
    return EXIT_OK


def _namespace_from_manifest(command: str, margs: dict) -> argparse.Namespace:
    parser = build_parser()
    argv = [command]
    for key, value in margs.items():
        if value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        if value is True:
            argv.append(flag)
        elif isinstance(value, list):
            for v in value:
                argv += [flag, str(v)]
        else:
            argv += [flag, str(value)]
    return parser.parse_args(argv)


def _run_command(command: str, args) -> int:
    out = _out_dir(args, command)
    args._stage = _stage(out)
    try:
        margs, inputs, cfg = COMMANDS[command](args)
        _write_manifest(args._stage, command, margs, inputs, cfg)
    except BaseException:
        shutil.rmtree(args._stage, ignore_errors=True)
        raise
    _commit(args._stage, out)
    print(out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    d = SimConfig()
    fmt_cls = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="phoenixtr", description="Reboot-tolerant timestamp reconstruction for sensor networks.",
                formatter_class=fmt_cls)
    p.add_argument("--version", action="version", version=f"phoenixtr {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def out_flag(sp):
        sp.add_argument("--out", default=None,
                        help=f"output directory (default: ${OUT_ENV}/<command>, or ./<command>)")

    g = sub.add_parser("gen-topology", help="write a topology file", formatter_class=fmt_cls)
    g.add_argument("--kind", choices=["grid", "uniform-random"], default="uniform-random")
    g.add_argument("--n", type=int, default=DESK.motes, help="number of motes")
    g.add_argument("--extent", type=float, default=DESK.extent, help="side of the square field, metres")
    g.add_argument("--seed", type=int, default=0)
    out_flag(g)

    config_help = (f"key = value config file; keys mirror SimConfig (defaults: duration={d.duration:g}s, "
                   f"sample_interval={d.sample_interval:g}s, t_beacon={d.t_beacon:g}s, "
                   f"t_wakeup={d.t_wakeup:g}s, t_listen={d.t_listen:g}s, t_sync={d.t_sync:g}s, "
                   f"numseg={d.numseg}, eviction_policy={d.eviction_policy}, "
                   f"skew_ppm_range={d.skew_ppm_range}, p_down={d.p_down}, "
                   f"comm_delay_range={d.comm_delay_range})")

    s = sub.add_parser("simulate", help="simulate a deployment and write its trace", formatter_class=fmt_cls)
    s.add_argument("--config", default=None, help=config_help)
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    s.add_argument("--topology", default=None, help="topology CSV (default: generated uniform-random)")
    s.add_argument("--motes", type=int, default=DESK.motes, help="motes when no topology file is given")
    s.add_argument("--extent", type=float, default=DESK.extent, help="field side in metres when generating")
    s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    out_flag(s)

    r = sub.add_parser("reconstruct", help="fit segments and timestamp samples", formatter_class=fmt_cls)
    r.add_argument("--anchors", required=True, help="anchors CSV")
    r.add_argument("--samples", required=True, help="samples CSV (a truth column is ignored)")
    r.add_argument("--algo", choices=ALGORITHMS, default="phoenix")
    r.add_argument("--min-points", type=int, default=DEFAULT_MIN_FIT_POINTS, help="minimum anchors per fit")
    r.add_argument("--queue", choices=["fifo", "priority"], default="fifo", help="work-list discipline")
    out_flag(r)

    e = sub.add_parser("evaluate", help="score a reconstruction against ground truth", formatter_class=fmt_cls)
    e.add_argument("--reconstruction", required=True, help="directory written by reconstruct")
    e.add_argument("--truth", required=True, help="truth CSV written by simulate")
    e.add_argument("--accounting", default=None, help="accounting CSV (default: next to the truth file)")
    out_flag(e)

    w = sub.add_parser("sweep", help="run a scripted parameter sweep", formatter_class=fmt_cls)
    w.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    w.add_argument("--config", default=None, help="base config file")
    w.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    w.add_argument("--reps", type=int, default=10, help="repetitions per value")
    w.add_argument("--seed-base", type=int, default=0, help="rep k uses seed seed_base + k")
    w.add_argument("--values", default=None, help="comma-separated parameter values (default: per scenario)")
    w.add_argument("--paper-scale", action="store_true",
                   help=f"{PAPER.duration_days:g} days and {PAPER.motes} motes instead of "
                        f"{DESK.duration_days:g} days and {DESK.motes} motes")
    w.add_argument("--duration-days", type=float, default=None, help="override simulated duration")
    w.add_argument("--min-points", type=int, default=DEFAULT_MIN_FIT_POINTS, help="minimum anchors per fit")
    w.add_argument("--jobs", type=int, default=1, help="parallel repetitions")
    out_flag(w)

    rr = sub.add_parser("rerun", help="replay a manifest and verify byte-identical outputs",
                        formatter_class=fmt_cls)
    rr.add_argument("manifest")
    rr.add_argument("--out", default=None, help="output directory (default: <dir>-rerun)")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and flag errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "rerun":
            return cmd_rerun(args)
        if getattr(args, "reps", 1) < 1 or getattr(args, "jobs", 1) < 1:
            raise UsageError("--reps and --jobs must be >= 1")
        return _run_command(args.command, args)
    except (fmt.FormatError, BadFile) as exc:
        print(f"phoenixtr: bad input file: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ConfigError, MetricError, ValueError) as exc:
        print(f"phoenixtr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"phoenixtr: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
