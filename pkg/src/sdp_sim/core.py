"""Shared domain types, seeded randomness and the synthetic logistic task.

Gradients are plain ``float64`` numpy vectors of length ``d + 1``: the last
coordinate belongs to the bias, which is treated as a weight against a
constant feature of 1.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Iterable

import numpy as np

Gradient = np.ndarray

ABLATIONS = ("no_scheduler", "no_compression", "no_hierarchy")
AGG_MODES = ("weighted_mean", "paper_sum")
SCHEDULE_KINDS = ("constant", "linear_decay", "exponential_decay")


class ConfigError(ValueError):
    """Invalid configuration or out-of-range argument."""


class DimensionError(ValueError):
    """Vectors or datasets whose dimensions do not agree."""


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------


class SeededRng:
    """Deterministic generator seeded from an unsigned 64-bit integer.

    Uniforms come from PCG64; normals are produced by Box-Muller, two
    uniforms per pair of normals. Child streams are derived by hashing the
    root seed together with an integer key path (numpy ``SeedSequence``), so
    the stream for ``(agent, round)`` does not depend on execution order.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def derive(self, *key: int) -> "SeededRng":
        if any(k < 0 for k in key):
            raise ConfigError("stream keys must be non-negative")
        return SeededRng(self.seed, self.key + tuple(key))

    def uniform(self, size: int | None = None):
        """Uniform reals in [0, 1)."""
        return self._gen.random(size)

    def normal(self, size: int) -> np.ndarray:
        """``size`` standard-normal draws via Box-Muller."""
        n_pairs = (size + 1) // 2
        u = self._gen.random(2 * n_pairs)
        u1, u2 = u[0::2], u[1::2]
        # 1 - u1 lies in (0, 1], keeping the log finite
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        angle = 2.0 * math.pi * u2
        out = np.empty(2 * n_pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:size]

    def sample_without_replacement(self, n: int, k: int) -> np.ndarray:
        """First ``k`` positions of a partial Fisher-Yates shuffle of range(n)."""
        if not 0 <= k <= n:
            raise ConfigError(f"cannot draw {k} items from {n}")
        swapped: dict[int, int] = {}
        out = np.empty(k, dtype=np.int64)
        draws = self._gen.random(k)
        for i in range(k):
            j = i + int(draws[i] * (n - i))
            out[i] = swapped.get(j, j)
            swapped[j] = swapped.get(i, i)
        return out


# ---------------------------------------------------------------------------
# Model and data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise DimensionError("weights must be a nonempty vector")
        if not (np.all(np.isfinite(w)) and math.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @classmethod
    def zeros(cls, d: int) -> "ModelParams":
        return cls(np.zeros(d), 0.0)

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "ModelParams":
        v = np.asarray(v, dtype=np.float64)
        return cls(v[:-1].copy(), float(v[-1]))

    @property
    def dim(self) -> int:
        return self.weights.size

    def as_vector(self) -> np.ndarray:
        return np.append(self.weights, self.bias)

    def step(self, update: Gradient, learning_rate: float) -> "ModelParams":
        return ModelParams.from_vector(self.as_vector() - learning_rate * update)


@dataclass(frozen=True)
class Dataset:
    """Rows of (features, label); row order is part of the value."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise DimensionError(
                f"features {x.shape} and labels {y.shape} do not form a dataset"
            )
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.size

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx])

    def augmented(self) -> np.ndarray:
        """Features with the constant bias column appended."""
        return np.hstack([self.features, np.ones((len(self), 1))])


def generate_synthetic_dataset(d: int, n: int, separation: float, rng: SeededRng) -> Dataset:
    """Two Gaussian blobs with unit variance, means +-separation/2 along a random direction.

    Labels are balanced: floor(n/2) zeros and ceil(n/2) ones, in shuffled order.
    """
    if d < 1 or n < 2:
        raise ConfigError(f"need d >= 1 and n >= 2, got d={d}, n={n}")
    if not separation >= 0:
        raise ConfigError(f"separation must be >= 0, got {separation}")
    direction = rng.normal(d)
    norm = np.linalg.norm(direction)
    direction = direction / norm if norm > 0 else np.eye(d)[0]

    labels = np.zeros(n, dtype=np.int64)
    labels[n // 2 :] = 1
    labels = labels[rng.sample_without_replacement(n, n)]

    offsets = np.where(labels == 1, 0.5, -0.5) * separation
    noise = rng.normal(n * d).reshape(n, d)
    features = offsets[:, None] * direction[None, :] + noise
    return Dataset(features, labels)


def train_test_split(data: Dataset, test_fraction: float = 0.2) -> tuple[Dataset, Dataset]:
    """Contiguous split; the generator already shuffles rows."""
    n_test = int(round(len(data) * test_fraction))
    n_train = len(data) - n_test
    return data.subset(slice(0, n_train)), data.subset(slice(n_train, None))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_dims(params: ModelParams, batch: Dataset):
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    if params.dim != batch.dim:
        raise DimensionError(f"model has d={params.dim}, batch has d={batch.dim}")


def logistic_loss(params: ModelParams, batch: Dataset) -> float:
    """Mean binary cross-entropy of a logistic model."""
    _check_dims(params, batch)
    z = batch.features @ params.weights + params.bias
    # log(1 + e^z) - y z
    return float(np.mean(np.logaddexp(0.0, z) - batch.labels * z))


def logistic_gradient(params: ModelParams, batch: Dataset) -> Gradient:
    """Mean BCE gradient; returns length d+1 with the bias derivative last."""
    _check_dims(params, batch)
    z = batch.features @ params.weights + params.bias
    residual = _sigmoid(z) - batch.labels
    grad = batch.augmented().T @ residual / len(batch)
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient")
    return grad


def predict(params: ModelParams, data: Dataset) -> np.ndarray:
    return (data.features @ params.weights + params.bias > 0).astype(np.int64)


def accuracy(params: ModelParams, data: Dataset) -> float:
    return float(np.mean(predict(params, data) == data.labels))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainingConfig:
    epsilon_per_round: float = 0.5
    delta: float = 1e-5
    n_agents: int = 5
    n_clusters: int = 2
    sigma0: float = 1.0
    tau: int = 10
    compression_ratio: float = 0.7
    batch_size: int = 256
    epochs: int = 50
    clip_norm: float = 1.0
    learning_rate: float = 0.5
    seed: int = 42
    sigma_global: float = 0.0
    ablation: frozenset = field(default_factory=frozenset)
    agg_mode: str = "weighted_mean"
    schedule_kind: str = "linear_decay"
    schedule_floor: float = 0.1
    # lifetime budget; None means "exactly enough for every round"
    epsilon_total: float | None = None
    n_features: int = 10
    n_samples: int = 2000
    separation: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "ablation", frozenset(self.ablation))
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.epsilon_per_round > 0, "epsilon_per_round must be > 0")
        need(0 < self.delta < 1, "delta must lie in (0, 1)")
        need(self.n_agents >= 1, "n_agents must be >= 1")
        need(1 <= self.n_clusters <= self.n_agents, "need 1 <= n_clusters <= n_agents")
        need(self.sigma0 >= 0, "sigma0 must be >= 0")
        need(self.tau >= 1, "tau must be >= 1")
        need(0 < self.compression_ratio <= 1, "compression_ratio must lie in (0, 1]")
        need(self.batch_size >= 1, "batch_size must be >= 1")
        need(self.epochs >= 1, "epochs must be >= 1")
        need(self.clip_norm > 0, "clip_norm must be > 0")
        need(self.learning_rate > 0, "learning_rate must be > 0")
        need(0 <= self.seed < 2**64, "seed must be an unsigned 64-bit integer")
        need(self.sigma_global >= 0, "sigma_global must be >= 0")
        unknown = self.ablation - set(ABLATIONS)
        need(not unknown, f"unknown ablation flags: {sorted(unknown)}")
        need(self.agg_mode in AGG_MODES, f"agg_mode must be one of {AGG_MODES}")
        need(self.schedule_kind in SCHEDULE_KINDS, f"schedule_kind must be one of {SCHEDULE_KINDS}")
        need(self.schedule_floor >= 0, "schedule_floor must be >= 0")
        need(self.epsilon_total is None or self.epsilon_total > 0, "epsilon_total must be > 0")
        need(self.n_features >= 1, "n_features must be >= 1")
        need(self.n_samples >= 2, "n_samples must be >= 2")
        need(self.separation >= 0, "separation must be >= 0")

    def replace(self, **changes) -> "TrainingConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        unknown = set(changes) - set(values)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(changes)
        return TrainingConfig(**values)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["ablation"] = sorted(self.ablation)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingConfig":
        return cls(**data)

    @property
    def variant(self) -> str:
        return "+".join(a for a in ABLATIONS if a in self.ablation) or "full"


def parse_ablation(text: str | Iterable[str]) -> frozenset:
    if isinstance(text, str):
        items = [t.strip() for t in text.split(",")]
    else:
        items = list(text)
    return frozenset(t for t in items if t and t != "none")
