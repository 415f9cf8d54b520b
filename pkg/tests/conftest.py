import numpy as np
import pytest

from sdp_sim.core import Dataset, ModelParams, SeededRng, TrainingConfig, generate_synthetic_dataset
from sdp_sim.hierarchy import AgentState, shard_dataset

_acceptance: list[tuple[str, str, float]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m:
            item.user_properties.append(("criterion", m.args[0]))


def pytest_runtest_logreport(report):
    labels = [v for k, v in report.user_properties if k == "criterion"]
    if labels and (report.when == "call" or report.outcome != "passed"):
        _acceptance.append((labels[0], report.outcome.upper(), report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome, secs in _acceptance:
        terminalreporter.write_line(f"{outcome:6s} {label} ({secs:.2f}s)")


def make_agents(shard_sizes, d=4, seed=0, params=None):
    """Agents over a random dataset with the given shard sizes."""
    rng = np.random.default_rng(seed)
    n = sum(shard_sizes)
    data = Dataset(rng.normal(size=(n, d)), rng.integers(0, 2, n))
    params = params or ModelParams(rng.normal(size=d) * 0.5, 0.1)
    agents, start = [], 0
    for i, size in enumerate(shard_sizes):
        agents.append(AgentState(i, data.subset(slice(start, start + size)), params))
        start += size
    return agents


@pytest.fixture
def seed42_task():
    from sdp_sim.core import train_test_split

    data = generate_synthetic_dataset(10, 2000, 4.0, SeededRng(42).derive(2))
    return train_test_split(data)
