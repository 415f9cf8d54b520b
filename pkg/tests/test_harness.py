import csv
import io
import json

import numpy as np
import pytest

from sdp_sim.cli import main, parse_config_file
from sdp_sim.core import ConfigError, TrainingConfig
from sdp_sim.harness import (
    CSV_HEADER,
    ExperimentResult,
    ReportError,
    ablation_configs,
    emit_report,
    format_csv,
    load_json_report,
    run_ablation_grid,
    run_experiment,
    total_rounds,
)

SHORT = TrainingConfig(epochs=4)


@pytest.fixture(scope="module")
def grid():
    return run_ablation_grid(SHORT)


def test_result_shape():
    res = run_experiment(SHORT)
    assert len(res.accuracy_per_epoch) == 4
    assert res.final_train_accuracy == res.accuracy_per_epoch[-1]
    assert 0 <= res.final_test_accuracy <= 1
    assert res.rounds_completed == total_rounds(4, 1280, 1600) == 5
    assert res.epsilon_spent == 5 * 0.5
    assert not res.truncated


def test_grid_definition(grid):
    assert [r.variant for r in grid] == ["full", "no_scheduler", "no_compression", "no_hierarchy"]
    base = grid[0].config.to_dict()
    for r in grid[1:]:
        diff = {k for k, v in r.config.to_dict().items() if base[k] != v}
        assert diff == {"ablation"}


def test_ablations_take_effect(grid):
    full, no_sched, no_comp, no_hier = grid
    assert no_comp.bytes_transmitted_total > full.bytes_transmitted_total
    assert no_sched.final_params != full.final_params
    # equal shards: flat averaging matches the 2-cluster weighted mean
    np.testing.assert_allclose(no_hier.final_params, full.final_params, rtol=0, atol=1e-12)


def test_grid_ignores_ablation_in_base_config():
    cfgs = ablation_configs(SHORT.replace(ablation={"no_compression"}))
    assert cfgs[0].ablation == frozenset()


def test_scheduler_inert_without_noise():
    cfg = SHORT.replace(sigma0=0.0, compression_ratio=1.0)
    full, no_sched, *_ = run_ablation_grid(cfg)
    assert full.final_params == no_sched.final_params
    assert full.accuracy_per_epoch == no_sched.accuracy_per_epoch


def test_budget_truncation_reported_in_result():
    res = run_experiment(SHORT.replace(epsilon_total=1.2))
    assert res.truncated
    assert res.rounds_completed == 2
    assert res.epsilon_spent == 1.0
    assert len(res.accuracy_per_epoch) == 4


def test_epochs_zero_rejected():
    with pytest.raises(ConfigError):
        run_experiment(TrainingConfig(epochs=0))


def test_csv_report(tmp_path, grid):
    path = tmp_path / "r.csv"
    emit_report([], "csv", path)
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"
    emit_report(grid[:1], "csv", path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    row = next(csv.DictReader(io.StringIO(path.read_text())))
    assert row["variant"] == "full" and row["seed"] == "42"
    assert float(row["accuracy_train"]) == pytest.approx(grid[0].final_train_accuracy, rel=1e-5)


def test_json_report_roundtrip(tmp_path, grid):
    path = tmp_path / "r.json"
    emit_report([], "json", path)
    assert json.loads(path.read_text()) == []
    emit_report(grid, "json", path)
    back = load_json_report(path)
    assert back == [r.rounded() for r in grid]
    assert list(json.loads(path.read_text())[0]) == list(ExperimentResult.__dataclass_fields__)


def test_report_io_error_has_path(tmp_path):
    with pytest.raises(ReportError, match="missing"):
        emit_report([], "csv", tmp_path / "missing" / "x.csv")


def test_config_file_parsing(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# comment\nepochs = 3  # trailing\nablation = no_scheduler,no_hierarchy\nseed=0x10\n\n")
    values = parse_config_file(path)
    assert values == {"epochs": 3, "ablation": frozenset({"no_scheduler", "no_hierarchy"}), "seed": 16}
    path.write_text("nonsense line\n")
    with pytest.raises(ConfigError):
        parse_config_file(path)


def test_cli_precedence_and_output(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("epochs = 3\nseed = 5\n")
    out = tmp_path / "o.json"
    rc = main(["run", "--config", str(cfg), "--seed", "6", "--format", "json", "--out", str(out)])
    assert rc == 0
    (res,) = json.loads(out.read_text())
    assert res["config"]["epochs"] == 3 and res["config"]["seed"] == 6


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "--epochs", "0"]) == 1
    assert main(["run", "--clusters", "9"]) == 1
    assert main(["run", "--ratio", "abc"]) == 1
    assert main(["bogus"]) == 1
    assert main(["run", "--epochs", "1", "--out", str(tmp_path / "no" / "x.csv")]) == 2
    assert main(["run", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_cli_trace_dump(tmp_path):
    rc = main(["run", "--epochs", "1", "--trace-dir", str(tmp_path / "tr"), "--out", str(tmp_path / "o.csv")])
    assert rc == 0
    assert len(list((tmp_path / "tr").glob("round_*.bin"))) == 2
