"""Command-line front end.

``nfisac <subcommand> --config <path> --out <dir> [--sizes lo:hi:step] [--seed u64]``

Subcommands map one-to-one onto the simulation products: ``gen-codebook``
(codebook JSON), ``map`` (coverage CSV), ``sense`` (single-scenario
metrics), ``sweep`` (detection vs codebook size), ``combiners``
(digital-filter comparison on one codebook), ``e2e`` (sensing-aided
throughput table).  All outputs are deterministic functions of the
resolved config and seed; the resolved config is echoed next to every
output.  NFISAC_THREADS caps trial parallelism (0 = auto).
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

from .codebook import load_codebook, save_codebook
from .config import ConfigError, RunConfig, parse_config, write_config_echo
from .harness import (
    SensingRig,
    build_codebook,
    coverage_map,
    default_user_grid,
    detection_metrics,
    e2e_throughput,
    run_trials,
    size_sweep,
)
from .report import (
    write_coverage_csv,
    write_e2e_csv,
    write_e2e_json,
    write_metrics_csv,
    write_metrics_json,
)


def _parse_sizes(spec: str) -> list[int]:
    try:
        lo, hi, step = (int(p) for p in spec.split(":"))
    except ValueError:
        raise ConfigError(f"--sizes expects lo:hi:step, got {spec!r}")
    if step <= 0 or lo < 1 or hi < lo:
        raise ConfigError(f"--sizes values out of order: {spec!r}")
    return list(range(lo, hi + 1, step))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nfisac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, extra in (
        ("gen-codebook", ()),
        ("map", ("codebook",)),
        ("sense", ()),
        ("sweep", ("sizes",)),
        ("combiners", ()),
        ("e2e", ()),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override montecarlo.seed")
        if "sizes" in extra:
            p.add_argument("--sizes", default="3:90:3", help="codebook sizes lo:hi:step")
        if "codebook" in extra:
            p.add_argument("--codebook", default=None, help="reuse an emitted codebook JSON")
    return parser


def _load(args) -> tuple[RunConfig, Path]:
    config = parse_config(args.config)
    if args.seed is not None:
        config.resolved["montecarlo"]["seed"] = args.seed
    out_dir = Path(args.out)
    return config, out_dir


def _finish(config: RunConfig, out_dir: Path, writers) -> None:
    # all validation and computation precede the first write: no partial outputs
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config_echo(config, out_dir / "resolved_config.json")
    for write in writers:
        write(out_dir)


def _cmd_gen_codebook(args) -> None:
    config, out_dir = _load(args)
    codebook = build_codebook(config.scenario())
    _finish(config, out_dir, [lambda d: save_codebook(codebook, d / "codebook.json")])


def _cmd_map(args) -> None:
    config, out_dir = _load(args)
    scenario = config.scenario()
    codebook = load_codebook(args.codebook) if args.codebook else build_codebook(scenario)
    cov = coverage_map(codebook, scenario.roi, scenario.grid, scenario.array)
    _finish(config, out_dir, [lambda d: write_coverage_csv(cov, d / "coverage.csv")])


def _cmd_sense(args) -> None:
    config, out_dir = _load(args)
    scenario = config.scenario()
    start = time.perf_counter()
    rig = SensingRig.build(scenario)
    results = run_trials(rig)
    report = detection_metrics(
        results,
        method=scenario.codebook_method,
        size=rig.size,
        runtime_s=time.perf_counter() - start,
        config_digest=config.digest,
    )
    _finish(
        config,
        out_dir,
        [
            lambda d: write_metrics_csv([report], d / "metrics.csv"),
            lambda d: write_metrics_json([report], d / "metrics.json"),
        ],
    )


def _cmd_sweep(args) -> None:
    config, out_dir = _load(args)
    scenario = config.scenario()
    sizes = _parse_sizes(args.sizes)
    reports = size_sweep(scenario, sizes, config.codebook_methods())
    _finish(
        config,
        out_dir,
        [
            lambda d: write_metrics_csv(reports, d / "sweep.csv"),
            lambda d: write_metrics_json(reports, d / "sweep.json"),
        ],
    )


def _cmd_combiners(args) -> None:
    config, out_dir = _load(args)
    scenario = config.scenario()
    reports = []
    for method in ("mrc", "es", "combined", "flat"):
        start = time.perf_counter()
        rig = SensingRig.build(scenario, combiner_method=method)
        results = run_trials(rig)
        reports.append(
            detection_metrics(
                results,
                method=method,
                size=rig.size,
                runtime_s=time.perf_counter() - start,
                config_digest=config.digest,
            )
        )
    _finish(
        config,
        out_dir,
        [
            lambda d: write_metrics_csv(reports, d / "combiners.csv"),
            lambda d: write_metrics_json(reports, d / "combiners.json"),
        ],
    )


def _cmd_e2e(args) -> None:
    config, out_dir = _load(args)
    scenario = config.scenario()
    n_users = config.resolved["montecarlo"]["n_users"]
    users = default_user_grid(scenario.roi, max(2, math.isqrt(n_users)))
    rows = e2e_throughput(scenario, users)
    _finish(
        config,
        out_dir,
        [
            lambda d: write_e2e_csv(rows, d / "e2e.csv"),
            lambda d: write_e2e_json(rows, d / "e2e.json"),
        ],
    )


_COMMANDS = {
    "gen-codebook": _cmd_gen_codebook,
    "map": _cmd_map,
    "sense": _cmd_sense,
    "sweep": _cmd_sweep,
    "combiners": _cmd_combiners,
    "e2e": _cmd_e2e,
}


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _COMMANDS[args.command](args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"nfisac {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
