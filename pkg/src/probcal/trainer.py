"""Game-snapshot datasets and a plain gradient-descent logistic regression.

The synthetic snapshot generator stands in for real match data. It draws a
true win probability per snapshot from the beta shape of the chosen game phase
and builds a 14-feature vector whose ground-truth logistic score is exactly
logit(p): the score lives along one random unit direction, and the remaining
13 dimensions carry isotropic noise orthogonal to it.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from probcal.errors import ContractError, ConvergenceError
from probcal.synthetic import ProbDistribution, Seed, chunk_rng

log = logging.getLogger(__name__)

N_FEATURES = 14
FEATURE_NAMES = (
    *(f"gold_diff_{r}" for r in ("top", "jungle", "mid", "bot", "support")),
    *(f"xp_diff_{r}" for r in ("top", "jungle", "mid", "bot", "support")),
    "dragons_blue",
    "dragons_red",
    "towers_blue",
    "towers_red",
)
# raw-unit scale and centre per feature; irrelevant after standardization
_FEATURE_SCALE = np.array([900.0] * 5 + [700.0] * 5 + [1.0, 1.0, 1.5, 1.5])
_FEATURE_OFFSET = np.array([0.0] * 10 + [1.5, 1.5, 3.0, 3.0])

PROFILES = {
    "early": ProbDistribution(2.0, 2.0),
    "mid": ProbDistribution(1.0, 1.0),
    "late": ProbDistribution(0.5, 0.5),
}

_LOGIT_CAP = 30.0
_STREAM_SNAPSHOT = 10
_STREAM_SPLIT = 11
_PROB_FLOOR = 1e-15


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True, eq=False)
class SnapshotDataset:
    features: np.ndarray
    outcomes: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES
    true_p: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.outcomes)
        if X.ndim != 2 or X.shape[1] != N_FEATURES:
            raise ContractError(f"expected {N_FEATURES} features, got shape {X.shape}")
        if len(self.feature_names) != N_FEATURES:
            raise ContractError(f"expected {N_FEATURES} feature names, got {len(self.feature_names)}")
        if y.shape != (X.shape[0],):
            raise ContractError("outcomes length does not match feature rows")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise ContractError(f"row {r + 1}, column {self.feature_names[c]}: non-finite feature value")
        if not np.all(np.isin(y, (0, 1))):
            r = int(np.flatnonzero(~np.isin(y, (0, 1)))[0])
            raise ContractError(f"row {r + 1}, column outcome: label must be 0 or 1, got {y[r]!r}")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "outcomes", y.astype(np.int8))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.true_p is not None:
            tp = np.asarray(self.true_p, dtype=np.float64)
            if tp.shape != y.shape:
                raise ContractError("true_p length does not match feature rows")
            object.__setattr__(self, "true_p", tp)

    @property
    def n(self) -> int:
        return int(self.outcomes.size)

    def subset(self, idx) -> "SnapshotDataset":
        return SnapshotDataset(
            self.features[idx],
            self.outcomes[idx],
            self.feature_names,
            None if self.true_p is None else self.true_p[idx],
        )

    def write_csv(self, path) -> None:
        header = [*self.feature_names, "outcome"] + (["true_p"] if self.true_p is not None else [])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(self.n):
                row = [repr(float(v)) for v in self.features[i]] + [int(self.outcomes[i])]
                if self.true_p is not None:
                    row.append(repr(float(self.true_p[i])))
                w.writerow(row)


def load_dataset(path, format: str = "csv") -> SnapshotDataset:
    """Read a snapshot CSV: 14 feature columns, ``outcome`` and optionally ``true_p``.

    Row numbers in error messages count data rows from 1 (header excluded).
    """
    if format != "csv":
        raise ContractError(f"unsupported dataset format {format!r}")
    path = Path(path)
    if not path.is_file():
        raise ContractError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ContractError(f"{path}: empty file") from None
        if "outcome" not in header:
            raise ContractError(f"{path}: missing 'outcome' column")
        y_col = header.index("outcome")
        p_col = header.index("true_p") if "true_p" in header else None
        feat_cols = [i for i, h in enumerate(header) if i not in (y_col, p_col)]
        if len(feat_cols) != N_FEATURES:
            raise ContractError(f"{path}: expected {N_FEATURES} features, got {len(feat_cols)}")
        names = tuple(header[i] for i in feat_cols)

        rows, ys, tps = [], [], []
        for r, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ContractError(f"{path}: row {r}: expected {len(header)} fields, got {len(row)}")
            feats = []
            for i in feat_cols:
                try:
                    v = float(row[i])
                except ValueError:
                    raise ContractError(f"{path}: row {r}, column {header[i]}: not a number: {row[i]!r}") from None
                if not math.isfinite(v):
                    raise ContractError(f"{path}: row {r}, column {header[i]}: non-finite value {row[i]!r}")
                feats.append(v)
            label = row[y_col].strip()
            if label not in ("0", "1", "0.0", "1.0"):
                raise ContractError(f"{path}: row {r}, column outcome: label must be 0 or 1, got {label!r}")
            rows.append(feats)
            ys.append(int(float(label)))
            if p_col is not None:
                try:
                    tp = float(row[p_col])
                except ValueError:
                    raise ContractError(f"{path}: row {r}, column true_p: not a number: {row[p_col]!r}") from None
                if not 0.0 <= tp <= 1.0:
                    raise ContractError(f"{path}: row {r}, column true_p: must lie in [0, 1], got {tp!r}")
                tps.append(tp)
    if not rows:
        raise ContractError(f"{path}: no data rows")
    return SnapshotDataset(
        np.array(rows, dtype=np.float64),
        np.array(ys, dtype=np.int8),
        names,
        np.array(tps) if p_col is not None else None,
    )


def split(ds: SnapshotDataset, train_fraction: float, seed: Seed) -> tuple[SnapshotDataset, SnapshotDataset]:
    if not 0.0 < train_fraction < 1.0:
        raise ContractError(f"train_fraction must lie strictly between 0 and 1, got {train_fraction}")
    if ds.n < 2:
        raise ContractError(f"need at least 2 rows to split, got {ds.n}")
    n_train = int(round(ds.n * train_fraction))
    if n_train < 1 or n_train >= ds.n:
        raise ContractError(f"train_fraction {train_fraction} leaves an empty partition for n={ds.n}")
    perm = chunk_rng(seed, _STREAM_SPLIT, 0).permutation(ds.n)
    return ds.subset(perm[:n_train]), ds.subset(perm[n_train:])


@dataclass(frozen=True)
class StandardizationStats:
    mean: tuple[float, ...]
    std: tuple[float, ...]
    kept: tuple[bool, ...]

    @classmethod
    def fit(cls, X: np.ndarray, names=FEATURE_NAMES) -> "StandardizationStats":
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        kept = sd > 0
        for j in np.flatnonzero(~kept):
            log.warning("dropping zero-variance feature %s", names[j])
        sd = np.where(kept, sd, 1.0)
        return cls(tuple(mu.tolist()), tuple(sd.tolist()), tuple(kept.tolist()))

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        Z = (X - np.asarray(self.mean)) / np.asarray(self.std)
        return Z * np.asarray(self.kept)

    @property
    def dropped(self) -> list[int]:
        return [j for j, k in enumerate(self.kept) if not k]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_iters: int = 10_000
    tolerance: float = 1e-10
    seed: int = 0
    l2: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.max_iters < 1 or self.tolerance <= 0:
            raise ContractError("learning_rate, max_iters and tolerance must be positive")
        if self.l2 < 0:
            raise ContractError("l2 must be >= 0")


@dataclass(frozen=True)
class LogisticModel:
    weights: tuple[float, ...]
    bias: float
    standardization: StandardizationStats
    config: TrainConfig = field(default_factory=TrainConfig)
    iterations: int = 0
    final_loss: float = float("nan")
    converged: bool = False
    loss_history: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "weights": list(self.weights),
            "bias": self.bias,
            "standardization": asdict(self.standardization),
            "config": asdict(self.config),
            "meta": {"iterations": self.iterations, "final_loss": self.final_loss, "converged": self.converged},
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        st = d["standardization"]
        return cls(
            weights=tuple(d["weights"]),
            bias=float(d["bias"]),
            standardization=StandardizationStats(tuple(st["mean"]), tuple(st["std"]), tuple(st["kept"])),
            config=TrainConfig(**d.get("config", {})),
            iterations=int(d["meta"]["iterations"]),
            final_loss=float(d["meta"]["final_loss"]),
            converged=bool(d["meta"]["converged"]),
        )

    @classmethod
    def from_json(cls, path) -> "LogisticModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _bce(z: np.ndarray, y: np.ndarray) -> float:
    # log(1 + e^z) - y z, stable for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def train(train: SnapshotDataset, cfg: TrainConfig | None = None) -> LogisticModel:
    """Full-batch gradient descent on mean binary cross-entropy, zero-initialized.

    Stops when one step changes the loss by less than ``cfg.tolerance`` or
    after ``cfg.max_iters`` steps. Raises ConvergenceError when the loss rises
    for 50 steps in a row, or when training stops unconverged with a loss
    above the starting one.
    """
    cfg = cfg or TrainConfig()
    y = train.outcomes.astype(np.float64)
    if train.n == 0:
        raise ContractError("cannot train on an empty dataset")
    if y.min() == y.max():
        raise ContractError("training data contains a single class; need both outcomes")
    stats = StandardizationStats.fit(train.features, train.feature_names)
    X = stats.apply(train.features)
    n = train.n
    w = np.zeros(N_FEATURES)
    b = 0.0
    z = np.zeros(n)
    loss = _bce(z, y)
    history = [loss]
    rising = 0
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        r = sigmoid(z) - y
        gw = X.T @ r / n + cfg.l2 * w
        gb = float(np.mean(r))
        w = w - cfg.learning_rate * gw
        b = b - cfg.learning_rate * gb
        z = X @ w + b
        new = _bce(z, y) + 0.5 * cfg.l2 * float(w @ w)
        history.append(new)
        rising = rising + 1 if new > loss else 0
        if rising >= 50 or not math.isfinite(new):
            why = "loss is no longer finite" if not math.isfinite(new) else "loss rose for 50 consecutive steps"
            raise ConvergenceError(
                f"{why} (now {new:.6g}); try a smaller learning_rate than {cfg.learning_rate}"
            )
        done = abs(loss - new) < cfg.tolerance
        loss = new
        if done:
            converged = True
            break
    if not converged and loss > history[0]:
        # oscillating blow-up never rises 50 times in a row but ends worse than it started
        raise ConvergenceError(
            f"loss ended at {loss:.6g}, above its starting value {history[0]:.6g}; "
            f"try a smaller learning_rate than {cfg.learning_rate}"
        )
    return LogisticModel(
        weights=tuple(w.tolist()),
        bias=float(b),
        standardization=stats,
        config=cfg,
        iterations=it,
        final_loss=loss,
        converged=converged,
        loss_history=tuple(history),
    )


def predict_proba(model: LogisticModel, features) -> np.ndarray | float:
    """Win probability for one feature vector or a matrix of them.

    Output is held inside [1e-15, 1 - 1e-15] so it stays in the open unit
    interval even when the logit saturates double precision.
    """
    X = np.asarray(features, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != N_FEATURES:
        raise ContractError(f"expected {N_FEATURES} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ContractError("features must be finite")
    z = model.standardization.apply(X) @ np.asarray(model.weights) + model.bias
    p = np.clip(sigmoid(z), _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    return float(p[0]) if single else p


def generator_direction(seed: Seed) -> np.ndarray:
    """Unit vector in standardized-noise space that carries the logit signal."""
    u = chunk_rng(seed, _STREAM_SNAPSHOT, 0).standard_normal(N_FEATURES)
    return u / np.linalg.norm(u)


def generator_logit(features, seed: Seed) -> np.ndarray:
    """Ground-truth logit of the synthetic generator for raw feature rows."""
    x = (np.asarray(features, dtype=np.float64) - _FEATURE_OFFSET) / _FEATURE_SCALE
    return x @ generator_direction(seed)


def generate_snapshots(n: int, time_profile: str, seed: Seed, noise: float = 1.0) -> SnapshotDataset:
    if time_profile not in PROFILES:
        raise ContractError(f"time_profile must be one of {sorted(PROFILES)}, got {time_profile!r}")
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ContractError(f"n must be an integer >= 1, got {n!r}")
    if not noise >= 0:
        raise ContractError("noise must be >= 0")
    dist = PROFILES[time_profile]
    u = generator_direction(seed)
    rng_p = chunk_rng(seed, _STREAM_SNAPSHOT, 1)
    rng_noise = chunk_rng(seed, _STREAM_SNAPSHOT, 2)
    rng_y = chunk_rng(seed, _STREAM_SNAPSHOT, 3)

    p0 = dist.sample(rng_p, n)
    with np.errstate(divide="ignore"):
        s = np.clip(np.log(p0) - np.log1p(-p0), -_LOGIT_CAP, _LOGIT_CAP)
    true_p = sigmoid(s)
    e = rng_noise.standard_normal((n, N_FEATURES)) * noise
    e -= np.outer(e @ u, u)
    x = s[:, None] * u[None, :] + e
    raw = x * _FEATURE_SCALE + _FEATURE_OFFSET
    y = (rng_y.random(n) < true_p).astype(np.int8)
    return SnapshotDataset(raw, y, FEATURE_NAMES, true_p)
