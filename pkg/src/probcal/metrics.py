"""Metrics over paired (p_hat, outcome) records.

All metrics are plain means (or bin-weighted means) so they are invariant to
item order and to replicating the whole set. Sums go through numpy's pairwise
reduction; per-bin sums are taken over contiguous sorted slices for the same
reason.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from probcal.errors import ContractError
from probcal.scoring import accuracy_points, balance_points, brier_points


@dataclass(frozen=True)
class Prediction:
    p_hat: float
    outcome: int

    def __post_init__(self):
        p = self.p_hat
        if isinstance(p, bool) or not isinstance(p, (int, float, np.floating, np.integer)):
            raise ContractError(f"p_hat must be a real number, got {p!r}")
        if not math.isfinite(p) or not 0.0 <= p <= 1.0:
            raise ContractError(f"p_hat must lie in [0, 1], got {p!r}")
        if isinstance(self.outcome, str) or self.outcome not in (0, 1):
            raise ContractError(f"outcome must be 0 or 1, got {self.outcome!r}")
        object.__setattr__(self, "p_hat", float(p))
        object.__setattr__(self, "outcome", int(self.outcome))


class PredictionSet:
    """Immutable ordered collection of predictions backed by two numpy arrays."""

    __slots__ = ("_p_hat", "_outcome")

    def __init__(self, p_hat, outcome):
        p = np.array(p_hat, dtype=np.float64, copy=True).reshape(-1)
        y_raw = np.asarray(outcome).reshape(-1)
        if p.shape != y_raw.shape:
            raise ContractError(
                f"p_hat and outcome lengths differ ({p.size} vs {y_raw.size})"
            )
        bad = ~np.isfinite(p) | (p < 0.0) | (p > 1.0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ContractError(f"item {i}: p_hat must lie in [0, 1], got {p[i]!r}")
        y_bad = ~np.isin(y_raw, (0, 1))
        if y_bad.any():
            i = int(np.flatnonzero(y_bad)[0])
            raise ContractError(f"item {i}: outcome must be 0 or 1, got {y_raw[i]!r}")
        y = y_raw.astype(np.int8)
        p.flags.writeable = False
        y.flags.writeable = False
        self._p_hat = p
        self._outcome = y

    @classmethod
    def from_items(cls, items: Iterable[Prediction | tuple[float, int]]) -> "PredictionSet":
        ps, ys = [], []
        for item in items:
            if not isinstance(item, Prediction):
                item = Prediction(*item)
            ps.append(item.p_hat)
            ys.append(item.outcome)
        return cls(np.array(ps, dtype=np.float64), np.array(ys, dtype=np.int8))

    @property
    def p_hat(self) -> np.ndarray:
        return self._p_hat

    @property
    def outcome(self) -> np.ndarray:
        return self._outcome

    @property
    def n(self) -> int:
        return int(self._p_hat.size)

    @property
    def items(self) -> list[Prediction]:
        return list(self)

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[Prediction]:
        for p, y in zip(self._p_hat.tolist(), self._outcome.tolist()):
            yield Prediction(p, y)

    def __getitem__(self, i: int) -> Prediction:
        return Prediction(float(self._p_hat[i]), int(self._outcome[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PredictionSet):
            return NotImplemented
        return np.array_equal(self._p_hat, other._p_hat) and np.array_equal(
            self._outcome, other._outcome
        )

    def __repr__(self) -> str:
        return f"PredictionSet(n={self.n})"


@dataclass(frozen=True)
class BinStats:
    bin_index: int  # 1-based
    lower: float
    upper: float
    count: int
    mean_outcome: float | None
    mean_p_hat: float | None
    gap: float | None

    @property
    def empty(self) -> bool:
        return self.count == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["empty"] = self.empty
        return d


@dataclass(frozen=True)
class BrierDecomposition:
    total: float
    calibration_term: float
    sharpness_term: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    brier: float
    brier_decomposition: BrierDecomposition
    ece: float
    ece_bins: int
    balance: float
    n: int
    mce: float | None = None
    bins: tuple[BinStats, ...] = field(default=(), repr=False, compare=False)

    def to_dict(self, include_bins: bool = False) -> dict:
        d = {
            "n": self.n,
            "accuracy": self.accuracy,
            "brier": self.brier,
            "brier_decomposition": self.brier_decomposition.to_dict(),
            "ece": self.ece,
            "ece_bins": self.ece_bins,
            "mce": self.mce,
            "balance": self.balance,
        }
        if include_bins:
            d["bins"] = [b.to_dict() for b in self.bins]
        return d


def _require_nonempty(preds: PredictionSet) -> None:
    if preds.n == 0:
        raise ContractError("empty prediction set")


def _mean(x: np.ndarray) -> float:
    return float(np.sum(x, dtype=np.float64) / x.size)


def score_accuracy(preds: PredictionSet) -> float:
    _require_nonempty(preds)
    return _mean(accuracy_points(preds.p_hat, preds.outcome))


def score_brier(preds: PredictionSet) -> float:
    _require_nonempty(preds)
    return _mean(brier_points(preds.p_hat, preds.outcome))


def decompose_brier(preds: PredictionSet) -> BrierDecomposition:
    """Split the Brier score into a calibration term and a sharpness term.

    calibration = mean((p_hat - y)(2 p_hat - 1)), which is zero in expectation
    for a calibrated model; sharpness = mean(p_hat (1 - p_hat)).
    """
    _require_nonempty(preds)
    p = preds.p_hat
    y = preds.outcome.astype(np.float64)
    return BrierDecomposition(
        total=score_brier(preds),
        calibration_term=_mean((p - y) * (2.0 * p - 1.0)),
        sharpness_term=_mean(p * (1.0 - p)),
    )


def score_balance(preds: PredictionSet) -> float:
    _require_nonempty(preds)
    return _mean(balance_points(preds.p_hat, preds.outcome))


def bin_edges(m_bins: int) -> np.ndarray:
    return np.arange(m_bins + 1, dtype=np.float64) / m_bins


def bin_indices(p_hat: np.ndarray, m_bins: int) -> np.ndarray:
    """0-based bin of each prediction; bins are [k/M, (k+1)/M) with the last one closed at 1."""
    edges = bin_edges(m_bins)
    return np.searchsorted(edges[1:-1], p_hat, side="right")


def _check_bins(m_bins: int) -> None:
    if isinstance(m_bins, bool) or not isinstance(m_bins, (int, np.integer)) or m_bins < 1:
        raise ContractError(f"number of bins must be an integer >= 1, got {m_bins!r}")


def compute_bins(preds: PredictionSet, m_bins: int) -> list[BinStats]:
    _check_bins(m_bins)
    _require_nonempty(preds)
    m_bins = int(m_bins)
    idx = bin_indices(preds.p_hat, m_bins)
    order = np.argsort(idx, kind="stable")
    p_sorted = preds.p_hat[order]
    y_sorted = preds.outcome[order].astype(np.float64)
    counts = np.bincount(idx, minlength=m_bins)
    starts = np.concatenate(([0], np.cumsum(counts)))
    edges = bin_edges(m_bins)

    out = []
    for k in range(m_bins):
        c = int(counts[k])
        if c == 0:
            out.append(BinStats(k + 1, float(edges[k]), float(edges[k + 1]), 0, None, None, None))
            continue
        sl = slice(starts[k], starts[k + 1])
        mean_y = _mean(y_sorted[sl])
        mean_p = _mean(p_sorted[sl])
        out.append(
            BinStats(k + 1, float(edges[k]), float(edges[k + 1]), c, mean_y, mean_p, abs(mean_y - mean_p))
        )
    return out


def _ece_from_bins(bins: Sequence[BinStats], n: int) -> float:
    return math.fsum(b.count / n * b.gap for b in bins if not b.empty)


def _mce_from_bins(bins: Sequence[BinStats]) -> float:
    return max(b.gap for b in bins if not b.empty)


def score_ece(preds: PredictionSet, m_bins: int) -> float:
    return _ece_from_bins(compute_bins(preds, m_bins), preds.n)


def score_mce(preds: PredictionSet, m_bins: int) -> float:
    return _mce_from_bins(compute_bins(preds, m_bins))


def full_report(preds: PredictionSet, m_bins: int = 10) -> MetricReport:
    bins = compute_bins(preds, m_bins)
    decomposition = decompose_brier(preds)
    return MetricReport(
        accuracy=score_accuracy(preds),
        brier=decomposition.total,
        brier_decomposition=decomposition,
        ece=_ece_from_bins(bins, preds.n),
        ece_bins=int(m_bins),
        balance=score_balance(preds),
        n=preds.n,
        mce=_mce_from_bins(bins),
        bins=tuple(bins),
    )
