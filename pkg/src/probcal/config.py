"""Experiment configuration and its YAML file form."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

from probcal.errors import ContractError

EXPERIMENTS = ("eval", "case1", "sweep-bins", "sweep-datasize", "train-eval", "expected-score")

DEFAULT_SEED = 0


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    distributions: tuple[str, ...] = ("Beta(0.5,0.5)", "Beta(1,1)", "Beta(2,2)")
    tendencies: tuple[float, ...] = (0.0,)
    n: int = 100_000
    replicates: int = 1
    bins: int = 10
    bin_range: tuple[int, int] = (5, 100)
    sizes: tuple[int, ...] = ()
    profiles: tuple[str, ...] = ("early", "mid", "late")
    train_fraction: float = 0.6
    hist_bins: int = 50
    seed: int = DEFAULT_SEED
    out: str | None = None
    true_ece: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ContractError(f"unknown experiment {self.experiment!r}")
        for name in ("distributions", "tendencies", "bin_range", "sizes", "profiles"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name in ("n", "replicates", "bins", "hist_bins", "workers"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ContractError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ContractError(f"seed must be a non-negative integer, got {self.seed!r}")
        lo, hi = self.bin_range if len(self.bin_range) == 2 else (0, -1)
        if not 1 <= lo <= hi:
            raise ContractError(f"bin_range must be [lo, hi] with 1 <= lo <= hi, got {list(self.bin_range)}")
        if any(isinstance(s, bool) or not isinstance(s, int) or s < 1 for s in self.sizes):
            raise ContractError(f"sizes must be positive integers, got {list(self.sizes)}")
        if self.experiment in ("case1",) and not self.distributions:
            raise ContractError("distributions must be nonempty")
        if self.experiment in ("sweep-bins",) and not self.tendencies:
            raise ContractError("tendencies must be nonempty")
        if self.experiment == "sweep-datasize" and not self.sizes:
            raise ContractError("sizes must be nonempty")
        if self.experiment == "train-eval" and not self.profiles:
            raise ContractError("profiles must be nonempty")
        if not 0.0 < self.train_fraction < 1.0:
            raise ContractError("train_fraction must lie strictly between 0 and 1")

    @classmethod
    def defaults(cls, experiment: str, **overrides) -> "ExperimentConfig":
        base = {
            "case1": {},
            "sweep-bins": dict(distributions=("Beta(1,1)",), tendencies=(0.1, 0.11), n=10_000, replicates=20),
            "sweep-datasize": dict(
                distributions=("Beta(1,1)",),
                tendencies=(0.1,),
                replicates=100,
                sizes=tuple(range(50, 1001, 50)),
            ),
            "train-eval": dict(distributions=(), n=100_000),
        }.get(experiment, {})
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(experiment=experiment, **base)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in d:
            raise ContractError("config is missing 'experiment'")
        return cls(**d)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ContractError(f"invalid config file: {exc}") from None
        if not isinstance(data, dict):
            raise ContractError("config file must hold a key-value mapping")
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ContractError(f"config file not found: {path}")
        return cls.loads(path.read_text())

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})
