"""``sdp-sim`` command line: ``run`` one experiment or ``ablate`` the four-row grid.

Precedence: CLI flags > ``--config`` file > built-in defaults. The config file
holds ``key = value`` lines keyed by TrainingConfig field names; ``#`` starts a
comment. Exit codes: 0 success, 1 configuration error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import typing
from dataclasses import fields
from pathlib import Path

from .core import ConfigError, TrainingConfig, parse_ablation
from .harness import emit_report, format_csv, format_json, run_ablation_grid, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2

# CLI flag dest -> TrainingConfig field
FLAG_FIELDS = {
    "epsilon": "epsilon_per_round",
    "delta": "delta",
    "agents": "n_agents",
    "clusters": "n_clusters",
    "sigma0": "sigma0",
    "tau": "tau",
    "ratio": "compression_ratio",
    "batch": "batch_size",
    "epochs": "epochs",
    "clip": "clip_norm",
    "lr": "learning_rate",
    "seed": "seed",
    "ablation": "ablation",
    "agg_mode": "agg_mode",
    "sigma_global": "sigma_global",
    "epsilon_total": "epsilon_total",
    "schedule": "schedule_kind",
}


def _converter(name: str):
    hints = typing.get_type_hints(TrainingConfig)
    hint = hints[name]
    if name == "ablation":
        return parse_ablation
    if name == "epsilon_total":
        return lambda s: None if s.strip().lower() in ("", "none") else float(s)
    if name == "seed":
        return lambda s: int(s, 0)
    return hint


def convert(name: str, text: str):
    try:
        return _converter(name)(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r} ({exc})") from None


def parse_config_file(path: str | Path) -> dict:
    known = {f.name for f in fields(TrainingConfig)}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in known:
            raise ConfigError(f"{path}:{lineno}: expected '<field> = <value>', got {raw!r}")
        out[key] = convert(key, value.strip())
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE")
    common.add_argument("--epsilon", metavar="R", help="per-round epsilon")
    common.add_argument("--delta", metavar="R")
    common.add_argument("--agents", metavar="N")
    common.add_argument("--clusters", metavar="M")
    common.add_argument("--sigma0", metavar="R")
    common.add_argument("--tau", metavar="K")
    common.add_argument("--ratio", metavar="C")
    common.add_argument("--batch", metavar="B")
    common.add_argument("--epochs", metavar="E")
    common.add_argument("--clip", metavar="R")
    common.add_argument("--lr", metavar="R")
    common.add_argument("--seed", metavar="U64")
    common.add_argument("--ablation", metavar="LIST", help="comma list of no_scheduler,no_compression,no_hierarchy")
    common.add_argument("--agg-mode", dest="agg_mode", metavar="MODE", help="weighted_mean|paper_sum")
    common.add_argument("--sigma-global", dest="sigma_global", metavar="R")
    common.add_argument("--epsilon-total", dest="epsilon_total", metavar="R", help="lifetime epsilon budget")
    common.add_argument("--schedule", metavar="KIND", help="constant|linear_decay|exponential_decay")
    common.add_argument("--out", metavar="PATH", help="report file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=int, default=1, help="threads for per-agent updates")
    common.add_argument("--trace-dir", metavar="DIR", help="dump per-round compressed updates (run only)")

    parser = argparse.ArgumentParser(prog="sdp-sim", description="Hierarchical DP gradient aggregation simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one experiment")
    sub.add_parser("ablate", parents=[common], help="run full + single-ablation grid")
    return parser


def config_from_args(args: argparse.Namespace) -> TrainingConfig:
    values = parse_config_file(args.config) if args.config else {}
    for dest, name in FLAG_FIELDS.items():
        text = getattr(args, dest)
        if text is not None:
            values[name] = convert(name, text)
    return TrainingConfig(**values)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG

    try:
        config = config_from_args(args)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.command == "run":
            results = [run_experiment(config, workers=args.workers, trace_dir=args.trace_dir)]
        else:
            results = run_ablation_grid(config, workers=args.workers)
        if args.out:
            emit_report(results, args.format, args.out)
        else:
            sys.stdout.write(format_csv(results) if args.format == "csv" else format_json(results))
    except ConfigError as exc:
        print(f"sdp-sim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"sdp-sim: I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
