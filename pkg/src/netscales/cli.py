"""Batch command line: synth, detect, spectrum, rolling.

Exit codes: 0 success, 1 invalid input or flags, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .graph import CsvSchema, ParseError, TemporalGraph, read_csv, rebin, write_csv
from .mcmc import ChainConfig, geometric_schedule, run
from .plot import spectrogram_svg
from .spectrum import DOMINANT_MODES, MDL, rolling_dominant, spectrogram
from .synth import ConfigError, check_feasible, load_config, sample_overlay

MANIFEST_SCHEMA = 1
JOBS_ENV = "NETSCALES_JOBS"


class UsageError(Exception):
    """Invalid flags or inputs; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(x):
    return f"{x:.9g}"


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _positive(name):
    def conv(s):
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {s!r}") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1, got {v}")
        return v
    return conv


def _default_jobs():
    raw = os.environ.get(JOBS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None


def parse_beta_schedule(text: str, sweeps: int):
    """``anneal[:start:end]``, ``constant:BETA`` or ``sweep:beta,sweep:beta,...``."""
    try:
        if text.startswith("anneal"):
            parts = text.split(":")
            start, end = (float(parts[1]), float(parts[2])) if len(parts) == 3 else (1.0, 0.05)
            if len(parts) not in (1, 3):
                raise ValueError
            if start <= 0 or end <= 0:
                raise UsageError("--beta-schedule: temperatures must be > 0")
            return start, geometric_schedule(sweeps, start, end)
        if text.startswith("constant"):
            beta = float(text.split(":")[1]) if ":" in text else 1.0
            if beta <= 0:
                raise UsageError("--beta-schedule: temperature must be > 0")
            return beta, None
        pairs = []
        for item in text.split(","):
            s, b = item.split(":")
            pairs.append((int(s), float(b)))
    except (ValueError, IndexError):
        raise UsageError(f"--beta-schedule: cannot parse {text!r}") from None
    if any(b <= 0 for _, b in pairs) or any(s < 0 for s, _ in pairs):
        raise UsageError("--beta-schedule: sweeps must be >= 0 and temperatures > 0")
    pairs.sort()
    return pairs[0][1], tuple(pairs)


# ---------------------------------------------------------------- manifest

class Run:
    """Collects what a command read and wrote, then emits the manifest."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.t0 = time.perf_counter()
        self.inputs: list[dict] = []
        self.outputs: list[str] = []

    def read(self, path):
        self.inputs.append({"path": str(path), "sha256": _sha256(path)})

    def wrote(self, path):
        self.outputs.append(str(path))

    def digest(self):
        skip = {"func", "jobs", "out", "out_prefix", "svg", "trace", "manifest"}
        flags = {k: v for k, v in sorted(vars(self.args).items()) if k not in skip}
        payload = json.dumps(
            {"command": self.command, "flags": flags, "inputs": [i["sha256"] for i in self.inputs]},
            sort_keys=True, default=str,
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def finish(self, path, seed=None):
        doc = {
            "schema_version": MANIFEST_SCHEMA,
            "command": self.command,
            "inputs": self.inputs,
            "config_digest": self.digest(),
            "seed": seed,
            "version": __version__,
            "wall_time": float(_fmt(time.perf_counter() - self.t0)),
            "outputs": self.outputs,
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")
        return doc


def _manifest_path(args, primary):
    return args.manifest or f"{primary}.manifest.json"


# ---------------------------------------------------------------- input helpers

def _load_graph(args, rec: Run) -> TemporalGraph:
    schema = CsvSchema(
        header=args.header,
        delimiter=args.delimiter,
        time_format=args.time_format,
        time_unit=args.time_unit,
    )
    g, _ = read_csv(args.data, schema)
    rec.read(args.data)
    if args.num_steps is not None:
        if args.num_steps < g.T:
            raise UsageError(f"--num-steps {args.num_steps} is below the data span T={g.T}")
        g = TemporalGraph(g.N, args.num_steps, g.src, g.dst, g.t)
    return rebin(g, args.rebin)


def _add_input_flags(p):
    p.add_argument("data", help="edge list CSV: source,target,timestamp")
    p.add_argument("--header", action="store_true", help="skip the first row")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--time-format", choices=("int", "iso"), default="int")
    p.add_argument("--time-unit", default="day",
                   help="bin size for ISO timestamps (second..week)")
    p.add_argument("--num-steps", type=_positive("--num-steps"), default=None,
                   help="total steps T when trailing steps carry no events")
    p.add_argument("--rebin", type=_positive("--rebin"), default=1,
                   help="merge this many consecutive steps into one")
    p.add_argument("--jobs", type=_positive("--jobs"), default=None,
                   help=f"worker processes (default: ${JOBS_ENV} or 1)")
    p.add_argument("--manifest", default=None, help="manifest path")


# ---------------------------------------------------------------- commands

def cmd_synth(args):
    rec = Run("synth", args)
    configs, seed = load_config(args.config)
    rec.read(args.config)
    if args.seed is not None:
        seed = args.seed
    check_feasible(configs)
    g = sample_overlay(configs, seed)
    buf = io.StringIO()
    write_csv(g, buf)
    Path(args.out).write_text(buf.getvalue())
    rec.wrote(args.out)
    rec.finish(_manifest_path(args, args.out), seed)
    print(f"N={g.N} T={g.T} M={g.M}")


def cmd_detect(args):
    rec = Run("detect", args)
    g = _load_graph(args, rec)
    beta, sched = parse_beta_schedule(args.beta_schedule, args.sweeps)
    cfg = ChainConfig(beta=beta, sweeps=args.sweeps, seed=args.seed, anneal=sched,
                      chains=args.chains, patience=args.patience, init=args.init)
    res = run(g, cfg, jobs=args.jobs)
    doc = res.to_dict(trace_every=0)
    doc["rebin"] = args.rebin
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    rec.wrote(args.out)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("sweep", "bits", "best_bits"))
            for i, (b, bb) in enumerate(zip(res.trace, res.best_trace)):
                if i % args.trace_every == 0:
                    w.writerow((i, _fmt(b), _fmt(bb)))
        rec.wrote(args.trace)
    rec.finish(_manifest_path(args, args.out), args.seed)
    print(f"bits={_fmt(res.best_bits)} z={len(res.best_widths)}")
    print("boundaries=" + ",".join(map(str, doc["boundaries"])))


def cmd_spectrum(args):
    rec = Run("spectrum", args)
    g = _load_graph(args, rec)
    dmax = args.delta_max or g.T
    if dmax > g.T:
        raise UsageError(f"--delta-max {dmax} exceeds T={g.T}")
    spec = spectrogram(g, range(1, dmax + 1), jobs=args.jobs)
    csv_path = f"{args.out_prefix}.csv"
    json_path = f"{args.out_prefix}.minima.json"
    buf = io.StringIO()
    spec.write_csv(buf)
    Path(csv_path).write_text(buf.getvalue())
    doc = spec.minima_dict()
    doc["dominant"] = {"mode": args.mode, "delta": spec.dominant(args.mode)}
    Path(json_path).write_text(json.dumps(doc, indent=2) + "\n")
    rec.wrote(csv_path)
    rec.wrote(json_path)
    if args.svg:
        Path(args.svg).write_text(spectrogram_svg(spec))
        rec.wrote(args.svg)
    rec.finish(_manifest_path(args, csv_path))
    top = ", ".join(f"{d}:{_fmt(p)}" for d, p in spec.minima[:5])
    print(f"mdl_delta={spec.mdl_delta} dominant={spec.dominant(args.mode)} top=[{top}]")


def cmd_rolling(args):
    rec = Run("rolling", args)
    g = _load_graph(args, rec)
    if args.window > g.T:
        raise UsageError(f"--window {args.window} exceeds T={g.T}")
    if args.shock_time is not None and not 0 <= args.shock_time < g.T:
        raise UsageError(f"--shock-time must lie in [0, {g.T})")
    series = rolling_dominant(g, args.window, args.step, args.mode, args.delta_max,
                              args.shock_time, jobs=args.jobs)
    buf = io.StringIO()
    series.write_csv(buf)
    Path(args.out).write_text(buf.getvalue())
    rec.wrote(args.out)
    rec.finish(_manifest_path(args, args.out))
    print(f"windows={len(series.starts)}")


def build_parser():
    ap = _Parser(prog="netscales", description="Change points and timescale spectra of "
                 "temporal networks by description-length minimization.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="sample a temporal network from a JSON config")
    p.add_argument("config", help="JSON config (N, T, seed, processes)")
    p.add_argument("-o", "--out", required=True, help="edge list CSV to write")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--manifest", default=None, help="manifest path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="MCMC change-point detection")
    _add_input_flags(p)
    p.add_argument("-o", "--out", required=True, help="result JSON")
    p.add_argument("--sweeps", type=_positive("--sweeps"), default=1000)
    p.add_argument("--chains", type=_positive("--chains"), default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta-schedule", default="anneal",
                   help="anneal[:start:end], constant[:beta] or sweep:beta,...")
    p.add_argument("--init", choices=("single", "singletons"), default="single")
    p.add_argument("--patience", type=_positive("--patience"), default=None,
                   help="stop after this many sweeps without improvement")
    p.add_argument("--trace", default=None, help="per-sweep trace CSV")
    p.add_argument("--trace-every", type=_positive("--trace-every"), default=1)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("spectrum", help="fixed-window description-length spectrum")
    _add_input_flags(p)
    p.add_argument("-o", "--out-prefix", required=True,
                   help="writes PREFIX.csv and PREFIX.minima.json")
    p.add_argument("--delta-max", type=_positive("--delta-max"), default=None)
    p.add_argument("--mode", choices=DOMINANT_MODES, default=MDL)
    p.add_argument("--svg", default=None, help="two-panel spectrogram SVG")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("rolling", help="dominant timescale over rolling slices")
    _add_input_flags(p)
    p.add_argument("-o", "--out", required=True, help="series CSV")
    p.add_argument("--window", type=_positive("--window"), required=True)
    p.add_argument("--step", type=_positive("--step"), default=1)
    p.add_argument("--mode", choices=DOMINANT_MODES, default=MDL)
    p.add_argument("--delta-max", type=_positive("--delta-max"), default=None)
    p.add_argument("--shock-time", type=int, default=None)
    p.set_defaults(func=cmd_rolling)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        if getattr(args, "jobs", 1) is None:
            args.jobs = _default_jobs()
        args.func(args)
    except (UsageError, ConfigError, ParseError, ValueError) as exc:
        print(f"netscales {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"netscales {args.command}: runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
