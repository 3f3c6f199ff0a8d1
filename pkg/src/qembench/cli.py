"""``qembench`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench, plotting
from .data import DataError, default_iris_path, fetch_iris

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("qembench")


def _progress(rec, done, total):
    acc = rec.get("final_val_acc")
    acc = "-" if acc is None else f"{acc:.4f}"
    wall = rec.get("wall_time_s")
    wall = "" if wall is None else f" {wall:.1f}s"
    print(f"[{done}/{total}] {rec['config_id']} rep={rec['repetition']} val_acc={acc} {rec['status']}{wall}", flush=True)


def cmd_run(args) -> int:
    cfg = bench.load_config(args.config)
    runs = bench.expand_grid(cfg.grid)
    out = Path(args.out)
    store = bench.ResultsStore(out)
    if store.records() and not args.resume:
        print(f"{out} already holds records; pass --resume to continue it", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{bench.count_configs(runs)} configurations, {len(runs)} runs -> {out}", flush=True)
    bench.run_grid(runs, cfg.settings, out, args.parallel, _progress)
    records = store.records()
    wanted = {r.key for r in runs}
    failed = [r for r in records if (r["config_id"], r["repetition"]) in wanted and r["status"] == "error"]
    bench.write_summary(records, out)
    for r in failed:
        print(f"failed: {r['config_id']} rep={r['repetition']}: {r.get('message')}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_summarize(args) -> int:
    records = bench.read_records(args.out)
    if not records:
        print(f"no records in {args.out}", file=sys.stderr)
        return EXIT_IO
    expected = None
    if args.config:
        expected = bench.expected_cells(bench.expand_grid(bench.load_config(args.config).grid))
    table = bench.write_summary(records, args.out, expected)
    sys.stdout.write(table.to_text())
    return EXIT_OK


def cmd_plot(args) -> int:
    records = bench.read_records(args.out)
    if not records:
        print(f"no records in {args.out}; nothing to plot", file=sys.stderr)
        return EXIT_IO
    dest = Path(args.figures) if args.figures else Path(args.out) / "figures"
    paths = plotting.write_figures(records, dest, args.data_only)
    if not paths:
        print("no completed runs to plot", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = bench.load_config(args.config)
    runs = bench.expand_grid(cfg.grid)
    print(json.dumps({"configurations": bench.count_configs(runs), "runs": len(runs)}))
    return EXIT_OK


def cmd_fetch(args) -> int:
    dest = Path(args.dest) if args.dest else default_iris_path()
    ds = fetch_iris(dest, args.url) if args.url else fetch_iris(dest)
    print(f"wrote {len(ds.labels)} rows to {dest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qembench", description="Noise and error-mitigation benchmark for a hybrid classifier.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run (or resume) an experiment grid")
    p.add_argument("--config", required=True)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", help="write summary tables from stored records")
    p.add_argument("--out", default="results")
    p.add_argument("--config", help="report cells this config expects but lacks")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("plot", help="draw accuracy-versus-noise charts")
    p.add_argument("--out", default="results")
    p.add_argument("--figures", help="figure directory (default OUT/figures)")
    p.add_argument("--data-only", action="store_true", help="write per-figure CSV instead of SVG")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("validate-config", help="check a config and print its size")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fetch-data", help="download the Iris CSV and verify it")
    p.add_argument("--dest")
    p.add_argument("--url")
    p.set_defaults(func=cmd_fetch)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except bench.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, DataError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
