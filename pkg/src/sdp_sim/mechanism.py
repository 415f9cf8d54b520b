"""Clipping, Gaussian noise calibration and injection, empirical sensitivity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, Dataset, Gradient, ModelParams, SeededRng, logistic_gradient

REMOVE_ONE = "remove_one"
REPLACE_ONE = "replace_one"


@dataclass(frozen=True)
class NoiseParams:
    epsilon: float
    delta: float
    clip_norm: float
    sigma: float


@dataclass(frozen=True)
class SensitivityEstimate:
    value: float
    pairs_examined: int


def clip(g: Gradient, clip_norm: float) -> Gradient:
    """Rescale ``g`` onto the L2 ball of radius ``clip_norm`` if it lies outside."""
    if not clip_norm > 0:
        raise ConfigError(f"clip_norm must be > 0, got {clip_norm}")
    g = np.asarray(g, dtype=np.float64)
    norm = float(np.linalg.norm(g))
    if norm <= clip_norm:
        return g
    return g * (clip_norm / norm)


def gaussian_sigma(epsilon: float, delta: float, sensitivity: float) -> float:
    return sensitivity * math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


def calibrate(epsilon: float, delta: float, clip_norm: float) -> NoiseParams:
    """Classical Gaussian-mechanism noise level with L2 sensitivity ``clip_norm``."""
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")
    if not 0 < delta < 1:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    if not clip_norm > 0:
        raise ConfigError(f"clip_norm must be > 0, got {clip_norm}")
    return NoiseParams(epsilon, delta, clip_norm, gaussian_sigma(epsilon, delta, clip_norm))


def add_noise(g: Gradient, sigma: float, rng: SeededRng) -> Gradient:
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    g = np.asarray(g, dtype=np.float64)
    if sigma == 0:
        return g
    return g + sigma * rng.normal(g.size).reshape(g.shape)


def _pair_count(n: int, mode: str) -> int:
    return n if mode == REMOVE_ONE else n * (n - 1)


def _pair(k: int, n: int, mode: str) -> tuple[int, int]:
    """Decode pair number ``k``: (removed row, -1) or (replaced row, donor row)."""
    if mode == REMOVE_ONE:
        return k, -1
    i, r = divmod(k, n - 1)
    return i, r + (r >= i)


def _pair_ratio(params: ModelParams, dataset: Dataset, base: Gradient, i: int, j: int):
    x = dataset.features
    if j < 0:
        distance = float(np.linalg.norm(x[i]))
        keep = np.arange(len(dataset)) != i
        neighbour = dataset.subset(keep)
    else:
        distance = float(np.linalg.norm(x[i] - x[j]))
        feats = x.copy()
        labels = dataset.labels.copy()
        feats[i], labels[i] = x[j], dataset.labels[j]
        neighbour = Dataset(feats, labels)
    if distance == 0.0:
        return None
    diff = base - logistic_gradient(params, neighbour)
    return float(np.linalg.norm(diff)) / distance


def estimate_sensitivity(
    params: ModelParams,
    dataset: Dataset,
    mode: str,
    rng: SeededRng,
    max_pairs: int,
) -> SensitivityEstimate:
    """Largest gradient change per unit of dataset distance over adjacent pairs.

    Remove-one pairs drop row i (distance = |x_i|); replace-one pairs overwrite
    row i with row j != i (distance = |x_i - x_j|). Zero-distance pairs are
    skipped. When there are more than ``max_pairs`` pairs a uniform random
    subset of that size is examined. Diagnostic only: the mechanism's privacy
    rests on clipping.
    """
    if mode not in (REMOVE_ONE, REPLACE_ONE):
        raise ConfigError(f"unknown adjacency mode {mode!r}")
    n = len(dataset)
    if n < 2:
        raise ValueError("sensitivity needs at least 2 rows")
    if max_pairs < 1:
        raise ConfigError("max_pairs must be >= 1")

    total = _pair_count(n, mode)
    if total <= max_pairs:
        chosen = range(total)
    else:
        chosen = rng.sample_without_replacement(total, max_pairs)

    base = logistic_gradient(params, dataset)
    best = 0.0
    examined = 0
    for k in chosen:
        i, j = _pair(int(k), n, mode)
        ratio = _pair_ratio(params, dataset, base, i, j)
        examined += 1
        if ratio is not None and ratio > best:
            best = ratio
    return SensitivityEstimate(best, examined)
