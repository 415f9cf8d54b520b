"""Experiment runner: synthetic data, training loop, ablation grid, reports."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

from .accountant import BudgetExhausted, BudgetLedger, record
from .core import (
    ABLATIONS,
    ConfigError,
    ModelParams,
    SeededRng,
    TrainingConfig,
    accuracy,
    generate_synthetic_dataset,
    train_test_split,
)
from .hierarchy import (
    AgentState,
    build_topology,
    dump_trace,
    epoch_of,
    rows_per_round,
    run_round,
    schedule_for,
    shard_dataset,
)

CSV_HEADER = ["variant", "accuracy_train", "accuracy_test", "epsilon_spent", "runtime_s", "bytes_total", "seed"]

# stream tag for dataset generation (agents use 0, global noise 1)
_DATA_STREAM = 2


class ReportError(OSError):
    pass


@dataclass
class ExperimentResult:
    variant: str
    config: TrainingConfig
    final_train_accuracy: float
    final_test_accuracy: float
    accuracy_per_epoch: list = field(default_factory=list)
    test_accuracy_per_epoch: list = field(default_factory=list)
    epsilon_spent: float = 0.0
    delta_spent: float = 0.0
    wall_time_seconds: float = 0.0
    bytes_transmitted_total: int = 0
    rounds_completed: int = 0
    epochs_completed: int = 0
    truncated: bool = False
    final_params: list = field(default_factory=list)
    ledger: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["config"] = self.config.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentResult":
        data = dict(data)
        data["config"] = TrainingConfig.from_dict(data["config"])
        return cls(**data)

    def rounded(self) -> "ExperimentResult":
        """Copy with every real rendered at report precision."""
        return ExperimentResult.from_dict(_round_reals(self.to_dict()))


def _fmt(x: float) -> str:
    return format(x, ".6g")


def _round_reals(obj):
    if isinstance(obj, bool) or isinstance(obj, int) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, float):
        return float(_fmt(obj))
    if isinstance(obj, dict):
        return {k: _round_reals(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_reals(v) for v in obj]
    return obj


def total_rounds(epochs: int, per_round: int, n_train: int) -> int:
    """Rounds needed for ``epochs`` passes over ``n_train`` rows."""
    return -(-epochs * n_train // per_round)


def effective_config(config: TrainingConfig) -> TrainingConfig:
    """Fold the ablation flags into the concrete settings they replace."""
    changes = {}
    if "no_compression" in config.ablation:
        changes["compression_ratio"] = 1.0
    if "no_hierarchy" in config.ablation:
        changes["n_clusters"] = 1
    return config.replace(**changes) if changes else config


def run_experiment(config: TrainingConfig, workers: int = 1, trace_dir: str | Path | None = None) -> ExperimentResult:
    """Train the hierarchical DP simulation for ``config.epochs`` epochs or until the budget runs out."""
    config.validate()
    start = time.perf_counter()
    run_cfg = effective_config(config)
    root = SeededRng(config.seed)

    data = generate_synthetic_dataset(
        config.n_features, config.n_samples, config.separation, root.derive(_DATA_STREAM)
    )
    train, test = train_test_split(data, 0.2)
    shards = shard_dataset(train, run_cfg.n_agents)
    topology = build_topology(run_cfg.n_agents, run_cfg.n_clusters)
    params = ModelParams.zeros(config.n_features)
    agents = [AgentState(i, shard, params) for i, shard in enumerate(shards)]
    schedule = schedule_for(run_cfg)

    per_round = rows_per_round(agents, run_cfg.batch_size)
    n_rounds = total_rounds(config.epochs, per_round, len(train))
    eps_total = config.epsilon_total
    if eps_total is None:
        eps_total = n_rounds * config.epsilon_per_round
    delta_total = n_rounds * config.delta
    if delta_total >= 1:
        raise ConfigError(f"{n_rounds} rounds at delta={config.delta} exceed a total delta of 1")
    ledger = BudgetLedger(eps_total, delta_total)

    train_acc: list[float] = []
    test_acc: list[float] = []
    bytes_total = 0
    rounds_done = 0
    truncated = False

    def close_epochs(upto: int):
        a_tr = accuracy(agents[0].params, train)
        a_te = accuracy(agents[0].params, test)
        while len(train_acc) < min(upto, config.epochs):
            train_acc.append(a_tr)
            test_acc.append(a_te)

    for r in range(n_rounds):
        try:
            ledger = record(ledger, config.epsilon_per_round, config.delta)
        except BudgetExhausted:
            truncated = True
            break
        report = run_round(agents, topology, run_cfg, schedule, r, root, workers)
        if trace_dir is not None:
            dump_trace(report, trace_dir)
        bytes_total += report.bytes_transmitted
        rounds_done += 1
        next_epoch = epoch_of(r + 1, per_round, len(train))
        if next_epoch > report.epoch:
            close_epochs(next_epoch)

    epochs_done = len(train_acc)
    # the model is frozen after truncation, so later epochs repeat the last accuracy
    close_epochs(config.epochs)
    final = agents[0].params
    return ExperimentResult(
        variant=config.variant,
        config=config,
        final_train_accuracy=train_acc[-1],
        final_test_accuracy=test_acc[-1],
        accuracy_per_epoch=train_acc,
        test_accuracy_per_epoch=test_acc,
        epsilon_spent=ledger.epsilon_spent,
        delta_spent=ledger.delta_spent,
        wall_time_seconds=time.perf_counter() - start,
        bytes_transmitted_total=bytes_total,
        rounds_completed=rounds_done,
        epochs_completed=epochs_done,
        truncated=truncated,
        final_params=[float(v) for v in final.as_vector()],
        ledger=ledger.to_dict(),
    )


def ablation_configs(config: TrainingConfig) -> list[TrainingConfig]:
    """full, then each single ablation, all on the same seed."""
    return [config.replace(ablation=frozenset())] + [
        config.replace(ablation=frozenset({a})) for a in ABLATIONS
    ]


def run_ablation_grid(config: TrainingConfig, workers: int = 1) -> list[ExperimentResult]:
    return [run_experiment(c, workers=workers) for c in ablation_configs(config)]


def format_csv(results: Sequence[ExperimentResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for res in results:
        writer.writerow(
            [
                res.variant,
                _fmt(res.final_train_accuracy),
                _fmt(res.final_test_accuracy),
                _fmt(res.epsilon_spent),
                _fmt(res.wall_time_seconds),
                res.bytes_transmitted_total,
                res.config.seed,
            ]
        )
    return buf.getvalue()


def format_json(results: Sequence[ExperimentResult]) -> str:
    payload = [_round_reals(r.to_dict()) for r in results]
    return json.dumps(payload, indent=2) + "\n"


def emit_report(results: Sequence[ExperimentResult], format: str, path: str | Path) -> None:
    if format == "csv":
        text = format_csv(results)
    elif format == "json":
        text = format_json(results)
    else:
        raise ConfigError(f"unknown report format {format!r}")
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def load_json_report(path: str | Path) -> list[ExperimentResult]:
    return [ExperimentResult.from_dict(d) for d in json.loads(Path(path).read_text())]
