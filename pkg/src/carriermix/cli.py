"""Command-line entry point.

    carriermix simulate [--config PATH] [--scenario ID ...] [--seed N]
                        [--out DIR] [--format csv|md|both] [--workers N]
                        [--preferences CSV] [--export-orders]
    carriermix coverage --results CSV --reference CSV [--out DIR]
                        [--format csv|md|both]

Without ``--config`` the path in ``$CARRIERMIX_CONFIG`` is used, falling
back to the bundled four-network configuration.

Exit codes: 0 success, 1 configuration / IO / scenario error,
2 far-rural deviation gate failed in at least one replication (all results
are still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .choice import read_preferences
from .config import DEFAULT_CONFIG, ConfigError, SimulationConfig, load_config
from .coverage import ZONE_CLASSES, CoverageError, coverage, read_counts_csv
from .orders import write_orders_csv
from .reporting import (
    calibration_csv,
    coverage_csv,
    coverage_markdown,
    scenario_csv,
    scenario_markdown,
    selections_csv,
)
from .scenarios import ScenarioFailure, calibrated_cards, run_suite, scenario_orders

CONFIG_ENV = "CARRIERMIX_CONFIG"
MANIFEST = "manifest.json"
EXIT_OK, EXIT_ERROR, EXIT_DEVIATION = 0, 1, 2
# anything matching these in --out belongs to us and is cleared before a new run
OWNED_PATTERNS = ("calibration.csv", "scenario_*.csv", "scenario_*.md", "orders_*.csv", MANIFEST)


def _config_path(flag: str | None) -> Path:
    if flag:
        return Path(flag)
    env = os.environ.get(CONFIG_ENV)
    return Path(env) if env else DEFAULT_CONFIG


def _clear_previous(out: Path) -> None:
    old = out / MANIFEST
    listed: list[str] = []
    if old.exists():
        try:
            listed = json.loads(old.read_text()).get("files", [])
        except (ValueError, OSError):
            listed = []
    stale = {out / name for name in listed}
    for pattern in OWNED_PATTERNS:
        stale.update(out.glob(pattern))
    for p in stale:
        if p.is_file() and p.resolve().parent == out.resolve():
            p.unlink()


def _manifest_id(config_text: str, seed: int | None, scenario_ids: list[str]) -> str:
    h = hashlib.sha256()
    h.update(config_text.encode())
    h.update(json.dumps([seed, scenario_ids, __version__]).encode())
    return h.hexdigest()[:16]


def cmd_simulate(args: argparse.Namespace) -> int:
    config_path = _config_path(args.config)
    try:
        config: SimulationConfig = load_config(config_path)
        preferences = read_preferences(args.preferences) if args.preferences else None
    except (ConfigError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR

    scenarios = list(config.scenarios)
    if args.scenario:
        known = {s.id for s in scenarios}
        unknown = [s for s in args.scenario if s not in known]
        if unknown:
            print(f"error: unknown scenario id(s): {', '.join(unknown)}", file=sys.stderr)
            return EXIT_ERROR
        scenarios = [config.scenario(s) for s in args.scenario]
    if not scenarios:
        print("error: configuration defines no scenarios", file=sys.stderr)
        return EXIT_ERROR

    t0 = time.perf_counter()
    try:
        _, calibration = calibrated_cards(config)
    except ValueError as e:
        print(f"error: calibration failed: {e}", file=sys.stderr)
        return EXIT_ERROR
    results = run_suite(scenarios, config, seed=args.seed, workers=args.workers,
                        preferences=preferences)
    compute_s = time.perf_counter() - t0

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _clear_previous(out)
    except OSError as e:
        print(f"error: cannot prepare {out}: {e}", file=sys.stderr)
        return EXIT_ERROR

    files: list[str] = []
    outputs: dict[str, list[str]] = {}

    def write(name: str, text: str) -> str:
        (out / name).write_text(text)
        files.append(name)
        return name

    write("calibration.csv", calibration_csv(calibration))
    failures, deviation_flags = [], {}
    for res in results:
        if isinstance(res, ScenarioFailure):
            failures.append({"scenario": res.scenario_id, "error": res.error})
            continue
        sid = res.scenario_id
        names = []
        if args.format in ("csv", "both"):
            names.append(write(f"scenario_{sid}.csv", scenario_csv(res)))
        if args.format in ("md", "both"):
            names.append(write(f"scenario_{sid}.md", scenario_markdown(res)))
        names.append(write(f"scenario_{sid}_selections.csv", selections_csv(res)))
        if args.export_orders:
            scenario = config.scenario(sid)
            for rep in range(res.replications):
                name = f"orders_{sid}_r{rep + 1}.csv"
                write_orders_csv(scenario_orders(scenario, config, rep, args.seed), out / name)
                files.append(name)
                names.append(name)
        outputs[sid] = names
        deviation_flags[sid] = res.deviation_flag

    manifest = {
        "manifest_id": _manifest_id(config_path.read_text(), args.seed, [s.id for s in scenarios]),
        "tool_version": __version__,
        "config": str(config_path),
        "master_seed": args.seed if args.seed is not None else config.master_seed,
        "scenarios": [s.id for s in scenarios],
        "calibration": "calibration.csv",
        "outputs": outputs,
        "deviation_flags": deviation_flags,
        "failures": failures,
        "durations_s": {"compute": round(compute_s, 3), "total": round(time.perf_counter() - t0, 3)},
        "files": files,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")

    for res in results:
        if isinstance(res, ScenarioFailure):
            print(f"scenario {res.scenario_id}: FAILED: {res.error}")
            continue
        flag = "  DEVIATION GATE FAILED" if res.deviation_flag else ""
        per_net = ", ".join(f"{n}={res.mean_dropped(n):g}" for n in res.networks)
        print(f"scenario {res.scenario_id} ({res.label}): dropped {res.total_dropped():g} [{per_net}]{flag}")
    print(f"wrote {len(files) + 1} files to {out}")

    if failures:
        return EXIT_ERROR
    if any(deviation_flags.values()):
        return EXIT_DEVIATION
    return EXIT_OK


def cmd_coverage(args: argparse.Namespace) -> int:
    try:
        simulated = read_counts_csv(args.results)
        reference = read_counts_csv(args.reference)
    except (OSError, CoverageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        print(f"error: cannot prepare {out}: {e}", file=sys.stderr)
        return EXIT_ERROR
    for zc in ZONE_CLASSES:
        try:
            table = coverage(simulated, reference, zc)
        except CoverageError as e:
            print(f"{zc}: skipped ({e})")
            continue
        if args.format in ("csv", "both"):
            (out / f"coverage_{zc}.csv").write_text(coverage_csv(table))
        if args.format in ("md", "both"):
            (out / f"coverage_{zc}.md").write_text(coverage_markdown(table))
        avg = ", ".join(
            f"{n}=absent" if n in table.absent_networks
            else f"{n}={'-' if table.average[n] is None else format(table.average[n], '.2f')}"
            for n in table.networks
        )
        print(f"{zc}: average coverage {avg}")
        for c, n, b, v in table.not_covered:
            print(f"  not covered: {c}/{n} band {b} ({v:g} simulated, no reference)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carriermix", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="calibrate tariffs and run scenarios")
    sim.add_argument("--config", help=f"configuration file (default: ${CONFIG_ENV} or bundled)")
    sim.add_argument("--scenario", action="append", help="scenario id; repeatable (default: all)")
    sim.add_argument("--seed", type=int, help="master seed override")
    sim.add_argument("--out", default="results", help="output directory (default: results)")
    sim.add_argument("--format", choices=("csv", "md", "both"), default="both")
    sim.add_argument("--workers", type=int, default=1, help="worker threads for replications")
    sim.add_argument("--preferences", help="client preference CSV overriding synthesized clients")
    sim.add_argument("--export-orders", action="store_true", help="also write generated orders")
    sim.set_defaults(func=cmd_simulate)

    cov = sub.add_parser("coverage", help="coverage of reference orders by simulated selections")
    cov.add_argument("--results", required=True, help="scenario_<id>_selections.csv")
    cov.add_argument("--reference", required=True, help="reference counts CSV")
    cov.add_argument("--out", default="coverage", help="output directory (default: coverage)")
    cov.add_argument("--format", choices=("csv", "md", "both"), default="both")
    cov.set_defaults(func=cmd_coverage)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
