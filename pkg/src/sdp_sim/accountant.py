"""Privacy-budget ledger under basic (sequential) composition."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ConfigError


class BudgetExhausted(Exception):
    def __init__(self, requested: tuple[float, float], remaining: tuple[float, float]):
        self.requested = requested
        self.remaining = remaining
        super().__init__(
            f"privacy budget exhausted: requested (eps={requested[0]:g}, delta={requested[1]:g}),"
            f" remaining (eps={remaining[0]:g}, delta={remaining[1]:g})"
        )


@dataclass(frozen=True)
class BudgetLedger:
    """Immutable snapshot; ``record`` returns the next one.

    Spent totals are ``math.fsum`` over every recorded charge, so they are the
    correctly rounded value of the exact sum regardless of recording order.
    """

    epsilon_total: float
    delta_total: float
    eps_history: tuple[float, ...] = ()
    delta_history: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.epsilon_total > 0:
            raise ConfigError("epsilon_total must be > 0")
        if not 0 < self.delta_total < 1:
            raise ConfigError("delta_total must lie in (0, 1)")

    @property
    def epsilon_spent(self) -> float:
        return math.fsum(self.eps_history)

    @property
    def delta_spent(self) -> float:
        return math.fsum(self.delta_history)

    @property
    def rounds_recorded(self) -> int:
        return len(self.eps_history)

    def to_dict(self) -> dict:
        eps_left, delta_left = remaining(self)
        return {
            "epsilon_total": self.epsilon_total,
            "delta_total": self.delta_total,
            "epsilon_spent": self.epsilon_spent,
            "delta_spent": self.delta_spent,
            "epsilon_remaining": eps_left,
            "delta_remaining": delta_left,
            "rounds_recorded": self.rounds_recorded,
        }


def remaining(ledger: BudgetLedger) -> tuple[float, float]:
    return (
        max(0.0, ledger.epsilon_total - ledger.epsilon_spent),
        max(0.0, ledger.delta_total - ledger.delta_spent),
    )


def record(ledger: BudgetLedger, eps_round: float, delta_round: float) -> BudgetLedger:
    if not eps_round > 0:
        raise ConfigError(f"eps_round must be > 0, got {eps_round}")
    if not delta_round >= 0:
        raise ConfigError(f"delta_round must be >= 0, got {delta_round}")
    eps = ledger.eps_history + (eps_round,)
    deltas = ledger.delta_history + (delta_round,)
    if math.fsum(eps) > ledger.epsilon_total or math.fsum(deltas) > ledger.delta_total:
        raise BudgetExhausted((eps_round, delta_round), remaining(ledger))
    return BudgetLedger(ledger.epsilon_total, ledger.delta_total, eps, deltas)
