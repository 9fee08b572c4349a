"""Command-line front end: ``carousel-eval {prepare,tune,run,report}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, RunConfig, load_config, parse_fixed
from .core import MalformedCarouselError
from .data_io import DataFormatError
from .report import read_results_csv, results_markdown

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4

log = logging.getLogger("carousel_eval")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run config (YAML or JSON)")
    common.add_argument("--seed", type=int, help="override split and tuning seeds")
    common.add_argument("--alpha", type=float, help="row weight of the 2D discount")
    common.add_argument("--beta", type=float, help="column weight of the 2D discount")
    common.add_argument("--cutoff", type=int, help="items per carousel")
    common.add_argument("--fixed", action="append",
                        help="fixed carousel: algorithm tag or grid:<path> (repeatable, replaces config)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--threads", type=int, help="worker threads for trials and algorithms")
    common.add_argument("--dry-run", action="store_true", help="validate config and print the plan only")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="carousel-eval",
                                 description="Offline evaluation of recommenders in multi-carousel interfaces.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="parse, implicitize and split the dataset")
    sub.add_parser("tune", parents=[common], help="random search on validation MAP")
    sub.add_parser("run", parents=[common], help="individual and carousel evaluation, write tables")
    sub.add_parser("report", parents=[common], help="re-render results.md from results.csv")
    return ap


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if args.seed is not None:
        changes.update(seed=args.seed, tuning_seed=args.seed)
    if args.alpha is not None:
        changes["alpha"] = args.alpha
    if args.beta is not None:
        changes["beta"] = args.beta
    if args.cutoff is not None:
        changes["cutoff"] = args.cutoff
    if args.out is not None:
        changes["output"] = args.out
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.fixed:
        known = {a.tag: a.params for a in cfg.algorithms}
        changes["fixed"] = [parse_fixed(f, Path.cwd(), known) for f in args.fixed]
    cfg = dataclasses.replace(cfg, **changes)
    if cfg.alpha < 1 or cfg.beta < 1:
        raise ConfigError("--alpha and --beta must be >= 1")
    if cfg.cutoff < 1:
        raise ConfigError("--cutoff must be >= 1")
    if cfg.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg


def cmd_prepare(cfg: RunConfig) -> None:
    _, st = pipeline.prepare(cfg)
    print(f"ratings {st['ratings']} (malformed skipped: {st['malformed']})")
    print(f"users {st['users']} items {st['items']} interactions {st['interactions']} "
          f"density {st['density']:.6f}")
    print(f"split train {st['train']} validation {st['validation']} test {st['test']} -> {pipeline.split_dir(cfg)}")


def cmd_tune(cfg: RunConfig) -> None:
    best = pipeline.tune(cfg, pipeline.load_prepared(cfg))
    if not best:
        print("no algorithm has a search space; nothing to tune")
    for tag, v in best.items():
        print(f"{tag:14s} validation MAP@{cfg.cutoff} {v['validation_map']:.4f} {v['params']}")


def cmd_run(cfg: RunConfig) -> None:
    res = pipeline.run(cfg, pipeline.load_prepared(cfg))
    print(res["markdown"].read_text(encoding="utf-8"), end="")
    tau = res["summary"]["kendall_tau_individual_vs_carousel"]
    print(f"kendall tau (individual vs carousel MAP rank): {'n/a' if tau is None else f'{tau:.4f}'}")
    print(f"wrote {res['csv']} and {res['markdown']}")


def cmd_report(cfg: RunConfig) -> None:
    csv_path = cfg.output / "results.csv"
    if not csv_path.is_file():
        raise FileNotFoundError(f"{csv_path} not found (run 'run' first)")
    summary_path = cfg.output / "summary.json"
    title = json.loads(summary_path.read_text(encoding="utf-8")).get("title", "") if summary_path.is_file() else ""
    md = results_markdown(read_results_csv(csv_path), title)
    (cfg.output / "results.md").write_text(md, encoding="utf-8")
    print(md, end="")


COMMANDS = {"prepare": cmd_prepare, "tune": cmd_tune, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dry_run:
        print(f"plan for '{args.command}' ({cfg.source}):")
        for line in cfg.describe():
            print("  " + line)
        return EXIT_OK
    try:
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, FileNotFoundError, MalformedCarouselError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
