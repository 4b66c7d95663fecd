"""Command-line front end.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime
failure, 3 audit violation.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path
from typing import Sequence

from . import audit
from .baselines import SchemeChoice
from .config import ConfigError, ScenarioConfig, dump_config, load_config
from .constellation import PRESETS, load_dish_catalog
from .engine import run_scenario, summary_text, write_outputs

OUT_DIR_ENV = "SUSCO_OUT_DIR"
DEFAULT_OUT_DIR = "susco-out"
SWEEPABLE = ("budget", "unreliable_failure_rate", "unreliable_fraction", "scheme")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VIOLATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"susco: {msg}", file=sys.stderr)


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR)


def _load(path: str, seed: int | None = None, scheme: str | None = None,
          intervals: int | None = None) -> ScenarioConfig:
    """Load and fully validate a config, dish catalog included."""
    cfg = load_config(path)
    changes = {}
    if seed is not None:
        changes["rng_seed"] = seed
    if scheme is not None:
        changes["scheme"] = SchemeChoice(scheme)
    if intervals is not None:
        changes["num_intervals"] = intervals
    cfg = cfg.replace(**changes) if changes else cfg
    catalog = cfg.catalog_path
    if not catalog.is_file():
        raise ConfigError(f"dish catalog not found: {catalog}")
    try:
        if not load_dish_catalog(catalog):
            raise ConfigError(f"dish catalog is empty: {catalog}")
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad dish catalog {catalog}: {exc}") from None
    return cfg


def _run_one(cfg: ScenarioConfig, out: Path) -> dict[str, float]:
    result = run_scenario(cfg)
    write_outputs(result, out)
    (out / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
    return result.summary()


def cmd_run(args) -> int:
    cfg = _load(args.config, args.seed, args.scheme, args.intervals)
    out = _out_dir(args.out_dir)
    summary = _run_one(cfg, out)
    sys.stdout.write(summary_text(summary))
    print(f"outputs written to {out}")
    return EXIT_OK


def _sweep_values(param: str, raw: str) -> list:
    values = [v.strip() for v in raw.split(",") if v.strip()]
    if not values:
        raise UsageError("empty value list")
    if param == "scheme":
        try:
            return [SchemeChoice(v.lower()) for v in values]
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        return [float(v) for v in values]
    except ValueError as exc:
        raise UsageError(f"non-numeric sweep value: {exc}") from None


def _apply_param(cfg: ScenarioConfig, param: str, value) -> ScenarioConfig:
    field = "budget_factor" if param == "budget" else param
    return cfg.replace(**{field: value})


def _seeds(raw: str) -> list[int]:
    try:
        seeds = [int(s) for s in raw.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad seed list: {exc}") from None
    if not seeds:
        raise UsageError("empty seed list")
    return seeds


def cmd_sweep(args) -> int:
    if args.param not in SWEEPABLE:
        raise UsageError(f"unknown sweep parameter {args.param!r}; choose from {', '.join(SWEEPABLE)}")
    values = _sweep_values(args.param, args.values)
    seeds = _seeds(args.seeds)
    base = _load(args.config, intervals=args.intervals)
    cells = [(v, s, _apply_param(base, args.param, v).replace(rng_seed=s)) for v in values for s in seeds]
    out = _out_dir(args.out_dir)
    rows = []
    for value, seed, cfg in cells:
        label = value.value if isinstance(value, SchemeChoice) else f"{value:g}"
        cell_dir = out / f"{args.param}={label}" / f"seed={seed}"
        summary = _run_one(cfg, cell_dir)
        rows.append({"param": args.param, "value": label, "seed": seed, **summary})
        print(f"{args.param}={label} seed={seed}: failed_offload_pct={summary.get('failed_offload_pct', 0.0):.4g}")
    columns = list(dict.fromkeys(k for r in rows for k in r))
    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", restval="")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    print(f"{len(rows)} cells written to {out}")
    return EXIT_OK


def cmd_audit(args) -> int:
    if args.instances < 1:
        raise UsageError("--instances must be >= 1")
    checks = tuple(c.strip() for c in args.checks.split(",") if c.strip()) if args.checks else audit.CHECKS
    unknown = set(checks) - set(audit.CHECKS)
    if unknown:
        raise UsageError(f"unknown checks {sorted(unknown)}; choose from {', '.join(audit.CHECKS)}")
    report, worst = audit.run_audit(args.instances, args.seed, checks)
    for line in report.lines():
        print(line)
    if report.ok:
        print("audit passed")
        return EXIT_OK
    out = _out_dir(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump = out / "audit_violation.json"
    audit.dump_instance(worst, report.findings, dump)
    for f in report.findings[:5]:
        cite = f" ({f.constraint})" if f.constraint is not None else ""
        print(f"violation [{f.check}{cite}] seed {f.seed}: {f.detail}")
    print(f"audit failed: {len(report.findings)} violations; reproducing instance in {dump}")
    return EXIT_VIOLATION


def cmd_presets(args) -> int:
    print(f"{'name':<12} {'planes':>6} {'per_plane':>9} {'sats':>5} {'alt_km':>7} {'incl_deg':>8} {'min_el':>6}")
    for name, c in PRESETS.items():
        print(f"{name:<12} {c.num_orbits:>6} {c.sats_per_orbit:>9} {c.size:>5} {c.altitude:>7g} "
              f"{c.inclination:>8g} {c.min_elevation:>6g}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    print(f"{args.config}: ok ({cfg.preset_name}, {cfg.constellation.size} satellites, "
          f"scheme {cfg.scheme.value}, {cfg.num_intervals} intervals, catalog {cfg.catalog_path})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="susco", description="Collaborative LEO data offloading simulator")
    sub = p.add_subparsers(dest="command", required=True)
    schemes = [s.value for s in SchemeChoice]

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--scheme", choices=schemes)
    run.add_argument("--intervals", type=int)
    run.add_argument("--out-dir", help=f"output folder (default ${OUT_DIR_ENV} or {DEFAULT_OUT_DIR})")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a parameter x seed grid")
    sweep.add_argument("config")
    sweep.add_argument("--param", required=True, help=", ".join(SWEEPABLE))
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--seeds", default="0", help="comma-separated seeds")
    sweep.add_argument("--intervals", type=int)
    sweep.add_argument("--out-dir")
    sweep.set_defaults(func=cmd_sweep)

    aud = sub.add_parser("audit", help="check mechanism properties on random auctions")
    aud.add_argument("--instances", type=int, default=10000)
    aud.add_argument("--seed", type=int, default=0)
    aud.add_argument("--checks", help="comma-separated subset of " + ", ".join(audit.CHECKS))
    aud.add_argument("--out-dir")
    aud.set_defaults(func=cmd_audit)

    pre = sub.add_parser("presets", help="list constellation presets")
    pre.set_defaults(func=cmd_presets)

    val = sub.add_parser("validate-config", help="check a config file and its dish catalog")
    val.add_argument("config")
    val.set_defaults(func=cmd_validate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        _err(f"runtime failure: {type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
