"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import checkpoint as ckpt
from .algorithms import ALGORITHMS, ConfigError
from .config import ExperimentConfig, dumps, parse_config
from .harness import compare, compare_table, evaluate, run_many
from .harness import ablate as run_ablation
from .outputs import write_ablation, write_run

log = logging.getLogger("grl_traffic")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", "-c", required=config_required, help="YAML experiment config")
    p.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                   help="dotted-path overrides applied after the file, e.g. algorithm.lr=3e-4")
    p.add_argument("--out", help="output directory (overrides run.output_dir)")
    p.add_argument("--workers", type=int, help="parallel worker processes (overrides run.workers)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grl-traffic", description="Graph RL for mixed-autonomy traffic.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="train every seed in run.seeds")
    _common(p)
    p = sub.add_parser("evaluate", help="roll out a saved checkpoint without exploration")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int)
    p = sub.add_parser("ablate", help="GCN vs flat encoder on identical seeds")
    _common(p)
    p = sub.add_parser("compare", help="ablation for several algorithms")
    _common(p)
    p.add_argument("--algorithms", required=True, help="comma-separated algorithm ids")
    p = sub.add_parser("validate-config", help="check a config and print the resolved form")
    p.add_argument("path")
    p.add_argument("overrides", nargs="*", metavar="KEY=VALUE")
    sub.add_parser("list-algorithms", help="print the supported algorithm ids")
    return parser


def _load(args) -> ExperimentConfig:
    overrides = list(args.overrides)
    if getattr(args, "out", None):
        overrides.append(f"run.output_dir={args.out}")
    if getattr(args, "workers", None):
        overrides.append(f"run.workers={args.workers}")
    return parse_config(args.config, overrides)


def cmd_train(args) -> int:
    cfg = _load(args)
    results = run_many([(cfg, s) for s in cfg.run.seeds], cfg.run.workers)
    failed = False
    for r in results:
        d = write_run(cfg.run.output_dir, cfg, r)
        status = "DIVERGED " + r.error if r.diverged else "ok"
        last = f"{r.records[-1].mean_reward:.3f}" if r.records else "n/a"
        print(f"seed {r.seed}: {len(r.records)} epochs, last mean reward {last}, {status} -> {d}")
        failed |= r.diverged
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    try:
        cp = ckpt.load(args.checkpoint)
    except (OSError, ckpt.CheckpointError) as exc:
        raise ConfigError(f"--checkpoint: {exc}") from None
    print(json.dumps(evaluate(cp, cfg, args.episodes, args.seed), indent=2))
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load(args)
    ab = run_ablation(cfg)
    d = write_ablation(cfg.run.output_dir, cfg, ab)
    print(ab.report.table())
    print(f"report written to {d}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    algos = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    unknown = [a for a in algos if a not in ALGORITHMS]
    if unknown:
        raise ConfigError(f"--algorithms: unknown id(s) {', '.join(unknown)}")
    for a in algos:
        parse_config(args.config, [*args.overrides, f"algorithm.id={a}"])
    results = compare(cfg, algos)
    for ab in results:
        write_ablation(cfg.run.output_dir, cfg.with_updates(algorithm__id=ab.report.algorithm), ab)
    table = compare_table([ab.report for ab in results])
    out = Path(cfg.run.output_dir) / cfg.scenario.scenario
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.txt").write_text(table + "\n")
    print(table)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = parse_config(args.path, args.overrides)
    sys.stdout.write(dumps(cfg))
    return EXIT_OK


def cmd_list(args) -> int:
    for a in ALGORITHMS:
        print(a)
    return EXIT_OK


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "ablate": cmd_ablate,
            "compare": cmd_compare, "validate-config": cmd_validate, "list-algorithms": cmd_list}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - the exit-code contract covers every failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
