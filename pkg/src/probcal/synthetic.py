"""Synthetic batches with known ground-truth win probabilities.

A batch is built in three steps: draw true p from a beta operating condition,
draw y ~ Bernoulli(p), and push p through a deterministic response model to get
p_hat. Probabilities and outcomes come from separate RNG streams, so swapping
the response model leaves p and y untouched.

Seeds are an int or a tuple of ints (e.g. ``(base_seed, replicate)``). Every
stream is cut into fixed-size chunks, each with its own derived
``SeedSequence``, so any partition of the chunk range reproduces the same
numbers.
"""
from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from probcal.errors import ContractError
from probcal.metrics import PredictionSet

Seed = Union[int, Sequence[int]]

CHUNK_SIZE = 1 << 16
_STREAM_PROBS = 0
_STREAM_OUTCOMES = 1


def _seed_parts(seed: Seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        parts = (seed,)
    elif isinstance(seed, (tuple, list)):
        parts = tuple(seed)
    else:
        raise ContractError(f"seed must be a non-negative int or tuple of them, got {seed!r}")
    if not parts or any(isinstance(s, bool) or int(s) != s or s < 0 for s in parts):
        raise ContractError(f"seed must be a non-negative int or tuple of them, got {seed!r}")
    return tuple(int(s) for s in parts)


def chunk_rng(seed: Seed, stream: int, chunk: int) -> np.random.Generator:
    base, *rest = _seed_parts(seed)
    ss = np.random.SeedSequence(entropy=base, spawn_key=(*rest, stream, chunk))
    return np.random.Generator(np.random.PCG64(ss))


def _chunked(n: int, seed: Seed, stream: int, draw, workers: int = 1) -> np.ndarray:
    n_chunks = -(-n // CHUNK_SIZE)

    def one(c: int) -> np.ndarray:
        size = min(CHUNK_SIZE, n - c * CHUNK_SIZE)
        return draw(chunk_rng(seed, stream, c), size, c * CHUNK_SIZE)

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(n_chunks)))
    else:
        parts = [one(c) for c in range(n_chunks)]
    return np.concatenate(parts) if parts else np.empty(0)


@dataclass(frozen=True)
class ProbDistribution:
    """Beta(alpha, beta) operating condition over true win probabilities."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ContractError(f"beta distribution {name} must be a finite number > 0, got {v!r}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def uniform(cls) -> "ProbDistribution":
        return cls(1.0, 1.0)

    @classmethod
    def parse(cls, text: str) -> "ProbDistribution":
        """Accepts ``uniform``, ``beta(a,b)``, ``Beta(a, b)`` or ``a,b``."""
        s = text.strip().lower().replace(" ", "")
        if s == "uniform":
            return cls.uniform()
        m = re.fullmatch(r"(?:beta)?\(?([^,()]+),([^,()]+)\)?", s)
        if not m:
            raise ContractError(f"cannot parse distribution {text!r}")
        try:
            return cls(float(m.group(1)), float(m.group(2)))
        except ValueError as exc:
            raise ContractError(f"cannot parse distribution {text!r}") from exc

    @property
    def label(self) -> str:
        return f"Beta({self.alpha:g},{self.beta:g})"

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def var(self) -> float:
        a, b = self.alpha, self.beta
        return a * b / ((a + b) ** 2 * (a + b + 1))

    def log_norm(self) -> float:
        return math.lgamma(self.alpha) + math.lgamma(self.beta) - math.lgamma(self.alpha + self.beta)

    def pdf(self, p):
        p = np.asarray(p, dtype=np.float64)
        with np.errstate(divide="ignore"):
            logd = (self.alpha - 1) * np.log(p) + (self.beta - 1) * np.log1p(-p) - self.log_norm()
        return np.exp(logd)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.beta(self.alpha, self.beta, size)


@dataclass(frozen=True)
class SyntheticModel:
    """Deterministic response map p -> p_hat.

    ``tendency`` t > 0 pulls p toward the nearer extreme,
    ``(1-t) p + t 1[p >= 0.5]``; t < 0 shrinks toward 0.5,
    ``(1-|t|) p + |t| 0.5``; t = 0 is the optimal (identity) model.
    """

    tendency: float = 0.0

    def __post_init__(self):
        t = self.tendency
        if not (isinstance(t, (int, float)) and math.isfinite(t) and -1.0 <= t <= 1.0):
            raise ContractError(f"tendency must lie in [-1, 1], got {t!r}")
        object.__setattr__(self, "tendency", float(t))

    @classmethod
    def optimal(cls) -> "SyntheticModel":
        return cls(0.0)

    @classmethod
    def parse(cls, text: str) -> "SyntheticModel":
        """Accepts ``optimal``, a bare number, or ``t=<x>`` / ``tendency=<x>``."""
        s = text.strip().lower().replace(" ", "")
        if s == "optimal":
            return cls.optimal()
        s = re.sub(r"^(t|tendency)[=:]", "", s)
        try:
            return cls(float(s))
        except ValueError as exc:
            raise ContractError(f"cannot parse model {text!r}") from exc

    @property
    def kind(self) -> str:
        if self.tendency == 0:
            return "optimal"
        return "overconfident" if self.tendency > 0 else "underconfident"

    @property
    def label(self) -> str:
        return "optimal" if self.tendency == 0 else f"t={self.tendency:g}"

    @property
    def injective(self) -> bool:
        """True when distinct p map to distinct p_hat, i.e. |t| < 1."""
        return abs(self.tendency) < 1.0

    def breakpoints(self) -> tuple[float, ...]:
        """Points in p where the map or the 0.5 decision side may jump."""
        return (0.5,)

    def __call__(self, p):
        p = np.asarray(p, dtype=np.float64)
        t = self.tendency
        if t > 0:
            out = (1.0 - t) * p + t * (p >= 0.5)
        elif t < 0:
            out = (1.0 + t) * p - t * 0.5
        else:
            out = p.copy()
        return np.clip(out, 0.0, 1.0)


def sample_probs(dist: ProbDistribution, n: int, seed: Seed, workers: int = 1) -> np.ndarray:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ContractError(f"n must be an integer >= 1, got {n!r}")
    return _chunked(int(n), seed, _STREAM_PROBS, lambda rng, size, _: dist.sample(rng, size), workers)


def apply_model(model: SyntheticModel, p):
    """Map true probability (scalar or array) to the model's estimate."""
    arr = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any((arr < 0) | (arr > 1)):
        raise ContractError(f"true probability must lie in [0, 1], got {p!r}")
    out = model(arr)
    return float(out) if out.ndim == 0 else out


def _draw_outcomes(true_p: np.ndarray, seed: Seed, workers: int = 1) -> np.ndarray:
    def draw(rng, size, offset):
        return (rng.random(size) < true_p[offset : offset + size]).astype(np.int8)

    return _chunked(true_p.size, seed, _STREAM_OUTCOMES, draw, workers).astype(np.int8)


@dataclass(frozen=True, eq=False)
class ScoredBatch:
    true_p: np.ndarray
    predictions: PredictionSet
    seed: Seed

    def __post_init__(self):
        if self.true_p.size != self.predictions.n:
            raise ContractError("true_p and predictions lengths differ")

    @property
    def n(self) -> int:
        return self.predictions.n

    def rows(self):
        return zip(self.true_p.tolist(), self.predictions.p_hat.tolist(), self.predictions.outcome.tolist())


def generate_batch(
    dist: ProbDistribution,
    model: SyntheticModel,
    n: int,
    seed: Seed,
    workers: int = 1,
) -> ScoredBatch:
    true_p = sample_probs(dist, n, seed, workers)
    y = _draw_outcomes(true_p, seed, workers)
    p_hat = model(true_p)
    true_p.flags.writeable = False
    return ScoredBatch(true_p=true_p, predictions=PredictionSet(p_hat, y), seed=seed)
