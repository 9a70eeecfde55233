"""Pointwise scoring functions f(p_hat, y).

Each function is vectorized over numpy arrays and returns float64. The 0.5
threshold is inclusive on the upper side everywhere: p_hat == 0.5 counts as a
prediction of class 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from probcal.errors import ContractError

THRESHOLD = 0.5


def accuracy_points(p_hat, y) -> np.ndarray:
    p_hat = np.asarray(p_hat, dtype=np.float64)
    y = np.asarray(y)
    return ((p_hat >= THRESHOLD) == (y == 1)).astype(np.float64)


def brier_points(p_hat, y) -> np.ndarray:
    p_hat = np.asarray(p_hat, dtype=np.float64)
    return (p_hat - np.asarray(y, dtype=np.float64)) ** 2


def balance_points(p_hat, y) -> np.ndarray:
    """Gain/loss score: gain 1-p_hat or p_hat when the side is right, lose p_hat or 1-p_hat otherwise."""
    p_hat = np.asarray(p_hat, dtype=np.float64)
    y = np.asarray(y)
    upper = p_hat >= THRESHOLD
    win = y == 1
    return np.select(
        [upper & win, ~upper & ~win, upper & ~win],
        [1.0 - p_hat, p_hat, -p_hat],
        default=-1.0 + p_hat,
    )


_EVALUATORS: dict[str, Callable] = {
    "accuracy": accuracy_points,
    "brier": brier_points,
    "balance": balance_points,
}


@dataclass(frozen=True)
class ScoringRule:
    kind: str

    def __post_init__(self):
        if self.kind not in _EVALUATORS:
            raise ContractError(
                f"unknown scoring rule {self.kind!r}; expected one of {sorted(_EVALUATORS)}"
            )

    def __call__(self, p_hat, y) -> np.ndarray:
        return _EVALUATORS[self.kind](p_hat, y)

    @classmethod
    def names(cls) -> list[str]:
        return list(_EVALUATORS)


ACCURACY = ScoringRule("accuracy")
BRIER = ScoringRule("brier")
BALANCE = ScoringRule("balance")
