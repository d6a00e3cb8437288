"""Command-line entry point: ``pacsuper <experiment> --config FILE``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .batch import MONITOR_COLUMNS, run_batch
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config
from .coverage import SUPERMARTINGALE_COLUMNS, run_bandit, run_coverage_grid, run_supermartingale
from .io import SCHEMA_VERSION, write_csv, write_json
from .tightness import COLUMNS as TIGHTNESS_COLUMNS
from .tightness import run_tightness

FIRST_VIOLATION_COLUMNS = {"lambda": float, "m": int, "count": int}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pacsuper", description="Monte Carlo checks of anytime PAC-Bayes certificates.")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="{" + ",".join(EXPERIMENTS) + "}")
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--output", help="output directory (overrides run.output_path)")
        p.add_argument("--workers", type=int)
    return parser


def _envelope(cfg: ExperimentConfig, reports: list) -> dict:
    return {"spec_version": SCHEMA_VERSION, "experiment": cfg.experiment, "config": cfg.to_dict(), "reports": reports}


def run(cfg: ExperimentConfig) -> str:
    """Run one experiment, write its files, return the summary line."""
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    exp = cfg.experiment
    if exp in ("coverage", "online"):
        if exp == "online":
            cfg = replace(cfg, target="online")
        reports = run_coverage_grid(cfg)
        rows = [
            {"lambda": r.lam, "m": m, "count": c}
            for r in reports
            for m, c in sorted(r.first_violation_histogram.items())
        ]
        write_csv(out / "first_violations.csv", rows, list(FIRST_VIOLATION_COLUMNS))
        write_json(out / "report.json", _envelope(cfg, [r.to_dict() for r in reports]))
        parts = [f"lambda={r.lam:g} freq={r.violation_freq:.4f} ({r.violations_anytime}/{r.trials})" for r in reports]
        ok = all(r.within() for r in reports)
        return f"{exp} target={cfg.target} delta={cfg.delta:g} " + "; ".join(parts) + (" ok" if ok else " EXCEEDS")
    if exp == "bandit":
        r = run_bandit(cfg)
        write_json(out / "report.json", _envelope(cfg, [r.to_dict()]))
        return (
            f"bandit freq={r.violation_freq:.4f} ({r.violations_anytime}/{r.trials}) bound={r.extras['certificate']['value']:.6g} "
            f"variance_budget_max={r.extras['variance_budget_max_ratio']:.4f} variance_tail_freq={r.extras['variance_tail_freq']:.4f}"
        )
    if exp == "supermartingale":
        rows, summary = run_supermartingale(cfg)
        write_csv(out / "supermartingale.csv", rows, list(SUPERMARTINGALE_COLUMNS))
        write_json(out / "report.json", _envelope(cfg, [summary]))
        bad = [f"{c['model']}@{c['eta']:g}" for c in summary["checks"] if not c["supermartingale_ok"]]
        return f"supermartingale {len(summary['checks'])} cases, " + ("all within 3 stderr" if not bad else "failing: " + ",".join(bad))
    if exp == "tightness":
        rows = run_tightness(cfg)
        write_csv(out / "tightness.csv", rows, list(TIGHTNESS_COLUMNS))
        write_json(out / "report.json", _envelope(cfg, [{"experiment": "tightness", "rows": len(rows)}]))
        return f"tightness {len(rows)} rows written to {out / 'tightness.csv'}"
    rows, report = run_batch(cfg)
    write_csv(out / "monitor.csv", rows, list(MONITOR_COLUMNS))
    write_json(out / "report.json", _envelope(cfg, [report]))
    v = sum(f["monitor_violations"] for f in report["fits"])
    return f"batch {len(report['fits'])} fits, {v} monitored violations"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(
            args.config, args.experiment, seed=args.seed, trials=args.trials, output_path=args.output, workers=args.workers
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        print(run(cfg))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0
