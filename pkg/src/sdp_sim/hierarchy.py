"""Round engine: agents -> clusters -> global update.

Each agent clips, noises and compresses its batch gradient. Clusters average
their members' updates and the global step combines the cluster means. Every
agent draws from its own ``(agent, round)`` stream and aggregation order is
fixed, so running agents on a thread pool gives bitwise the same result as
running them serially.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .compression import CodecError, CompressedGradient, aggregate_compressed, compress
from .core import (
    ConfigError,
    Dataset,
    Gradient,
    ModelParams,
    SeededRng,
    TrainingConfig,
    logistic_gradient,
)
from .mechanism import NoiseParams, add_noise, calibrate, clip
from .scheduler import Schedule, noise_at

# stream tag reserved for global noise; agent streams use tag 0
_GLOBAL_STREAM = 1


@dataclass(frozen=True)
class ClusterTopology:
    n_agents: int
    assignments: tuple[int, ...]

    @property
    def n_clusters(self) -> int:
        return max(self.assignments) + 1

    def members(self, cluster: int) -> list[int]:
        return [a for a, c in enumerate(self.assignments) if c == cluster]

    def sizes(self) -> list[int]:
        return [len(self.members(j)) for j in range(self.n_clusters)]


@dataclass
class AgentState:
    agent_id: int
    shard: Dataset
    params: ModelParams

    def __post_init__(self):
        if len(self.shard) == 0:
            raise ValueError(f"agent {self.agent_id} has an empty shard")


@dataclass(frozen=True)
class RoundReport:
    round: int
    epoch: int
    global_update: Gradient
    per_cluster_updates: list
    sigma_used: float
    epsilon_spent: float
    bytes_transmitted: int
    agent_updates: list  # CompressedGradient per agent, in agent order


def build_topology(n_agents: int, n_clusters: int) -> ClusterTopology:
    """Round-robin: agent j goes to cluster j mod n_clusters."""
    if not 1 <= n_clusters <= n_agents:
        raise ConfigError(f"need 1 <= n_clusters <= n_agents, got {n_clusters} > {n_agents}")
    return ClusterTopology(n_agents, tuple(j % n_clusters for j in range(n_agents)))


def shard_dataset(data: Dataset, n_agents: int) -> list[Dataset]:
    """Contiguous even split; the remainder goes to the last agent."""
    if n_agents < 1 or len(data) < n_agents:
        raise ConfigError(f"cannot shard {len(data)} rows over {n_agents} agents")
    size = len(data) // n_agents
    bounds = [i * size for i in range(n_agents)] + [len(data)]
    return [data.subset(slice(bounds[i], bounds[i + 1])) for i in range(n_agents)]


def agent_update(
    agent: AgentState,
    batch_size: int,
    noise: NoiseParams,
    sigma_t: float,
    ratio: float,
    rng: SeededRng,
) -> CompressedGradient:
    """Batch gradient -> clip -> Gaussian noise (sigma_t) -> top-k compress."""
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    n = len(agent.shard)
    if batch_size >= n:
        batch = agent.shard
    else:
        batch = agent.shard.subset(rng.sample_without_replacement(n, batch_size))
    g = clip(logistic_gradient(agent.params, batch), noise.clip_norm)
    g = add_noise(g, sigma_t, rng)
    return compress(g, ratio)


def aggregate_cluster(updates: Sequence[CompressedGradient]) -> Gradient:
    if not updates:
        raise ValueError("cluster has no updates")
    return aggregate_compressed(updates) / len(updates)


def aggregate_global(
    cluster_means: Sequence[Gradient],
    cluster_sizes: Sequence[int],
    sigma_global: float,
    mode: str,
    rng: SeededRng,
) -> Gradient:
    """Combine cluster means by size-weighted mean, or by the literal sum (``paper_sum``)."""
    if not cluster_means or len(cluster_means) != len(cluster_sizes):
        raise ValueError("cluster_means and cluster_sizes must be nonempty and equal length")
    if any(s <= 0 for s in cluster_sizes):
        raise ValueError("cluster sizes must be positive")
    dim = np.asarray(cluster_means[0]).size
    if any(np.asarray(m).size != dim for m in cluster_means):
        raise CodecError("cluster means disagree in dimension")
    total = sum(cluster_sizes)
    out = np.zeros(dim)
    if mode == "weighted_mean":
        for mean, size in zip(cluster_means, cluster_sizes):
            out += (size / total) * np.asarray(mean)
    elif mode == "paper_sum":
        for mean in cluster_means:
            out += np.asarray(mean)
    else:
        raise ConfigError(f"unknown aggregation mode {mode!r}")
    return add_noise(out, sigma_global, rng)


def rows_per_round(agents: Sequence[AgentState], batch_size: int) -> int:
    return sum(min(batch_size, len(a.shard)) for a in agents)


def epoch_of(round: int, rows_per_round: int, n_rows: int) -> int:
    """Completed passes over the ``n_rows`` training rows before ``round``."""
    return round * rows_per_round // n_rows


def schedule_for(config: TrainingConfig) -> Schedule:
    """Schedule implied by the config, with ablations applied."""
    if "no_scheduler" in config.ablation:
        return Schedule("constant", 1.0, config.tau, 0.0)
    return Schedule(config.schedule_kind, 1.0, config.tau, config.schedule_floor)


def compute_round(
    agents: Sequence[AgentState],
    topology: ClusterTopology,
    config: TrainingConfig,
    schedule: Schedule,
    round: int,
    rng_root: SeededRng,
    workers: int = 1,
) -> RoundReport:
    """One round's global update, without touching agent parameters."""
    if len(agents) != topology.n_agents:
        raise ConfigError(f"{len(agents)} agents for a topology of {topology.n_agents}")
    n_rows = sum(len(a.shard) for a in agents)
    epoch = epoch_of(round, rows_per_round(agents, config.batch_size), n_rows)
    sigma_t = noise_at(schedule, config.sigma0, epoch)
    noise = calibrate(config.epsilon_per_round, config.delta, config.clip_norm)
    ratio = 1.0 if "no_compression" in config.ablation else config.compression_ratio

    def work(agent: AgentState) -> CompressedGradient:
        rng = rng_root.derive(0, agent.agent_id, round)
        return agent_update(agent, config.batch_size, noise, sigma_t, ratio, rng)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            updates = list(pool.map(work, agents))
    else:
        updates = [work(a) for a in agents]

    cluster_means = []
    for j in range(topology.n_clusters):
        cluster_means.append(aggregate_cluster([updates[a] for a in topology.members(j)]))
    global_update = aggregate_global(
        cluster_means,
        topology.sizes(),
        config.sigma_global,
        config.agg_mode,
        rng_root.derive(_GLOBAL_STREAM, round),
    )
    return RoundReport(
        round=round,
        epoch=epoch,
        global_update=global_update,
        per_cluster_updates=cluster_means,
        sigma_used=sigma_t,
        epsilon_spent=config.epsilon_per_round,
        bytes_transmitted=sum(u.nbytes() for u in updates),
        agent_updates=updates,
    )


def run_round(
    agents: Sequence[AgentState],
    topology: ClusterTopology,
    config: TrainingConfig,
    schedule: Schedule,
    round: int,
    rng_root: SeededRng,
    workers: int = 1,
) -> RoundReport:
    """Compute the round and step every agent's params in lockstep."""
    report = compute_round(agents, topology, config, schedule, round, rng_root, workers)
    params = agents[0].params.step(report.global_update, config.learning_rate)
    for agent in agents:
        agent.params = params
    return report


def dump_trace(report: RoundReport, directory: str | Path) -> Path:
    """Write ``round_NNNNNN.bin``: u32 agent count, then each agent's encoding."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"round_{report.round:06d}.bin"
    blob = struct.pack("<I", len(report.agent_updates))
    blob += b"".join(u.to_bytes() for u in report.agent_updates)
    path.write_bytes(blob)
    return path


def load_trace(path: str | Path) -> list[CompressedGradient]:
    buf = Path(path).read_bytes()
    if len(buf) < 4:
        raise CodecError(f"{path}: truncated trace")
    (count,) = struct.unpack_from("<I", buf)
    offset, out = 4, []
    for _ in range(count):
        cg, offset = CompressedGradient.from_bytes(buf, offset)
        out.append(cg)
    if offset != len(buf):
        raise CodecError(f"{path}: {len(buf) - offset} trailing bytes")
    return out
