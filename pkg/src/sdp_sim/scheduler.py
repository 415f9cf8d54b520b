"""Time-varying noise scale. ``t`` counts epochs."""

from __future__ import annotations

from dataclasses import dataclass

from .core import SCHEDULE_KINDS, ConfigError


@dataclass(frozen=True)
class Schedule:
    kind: str = "linear_decay"
    gamma0: float = 1.0
    tau: int = 10
    floor: float = 0.1

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if not self.gamma0 > 0:
            raise ConfigError("gamma0 must be > 0")
        if self.tau < 1:
            raise ConfigError("tau must be >= 1")
        if self.kind != "constant" and not 0 <= self.floor <= self.gamma0:
            raise ConfigError("need 0 <= floor <= gamma0")


def scale_at(s: Schedule, t: int) -> float:
    if t < 0:
        raise ConfigError(f"t must be >= 0, got {t}")
    if s.kind == "constant" or t == 0:
        return s.gamma0
    if t >= s.tau:
        return s.floor
    frac = t / s.tau
    if s.kind == "linear_decay":
        # anchored at the floor so both endpoints come out exact
        return min(s.gamma0, s.floor + (s.gamma0 - s.floor) * (1.0 - frac))
    return max(s.floor, s.gamma0 * (s.floor / s.gamma0) ** frac)


def noise_at(s: Schedule, sigma0: float, t: int) -> float:
    if sigma0 < 0:
        raise ConfigError(f"sigma0 must be >= 0, got {sigma0}")
    return scale_at(s, t) * sigma0
