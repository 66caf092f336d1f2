"""Dataclass configs loaded from JSON. Unknown keys are rejected."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dag import DEP_TYPES, SIZE_CLASSES, ConfigError
from .infoth import EstimatorConfig
from .mb import FILTERS

U64 = 2**64


def parse_seed(v) -> int:
    try:
        s = int(v)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {v!r}") from None
    if isinstance(v, float) or not 0 <= s < U64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {v!r}")
    return s


def _from_dict(cls, d: dict, nested: dict | None = None):
    if not isinstance(d, dict):
        raise ConfigError(f"{cls.__name__}: expected an object, got {type(d).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"{cls.__name__}: unknown keys {sorted(unknown)}")
    kw = dict(d)
    for key, sub in (nested or {}).items():
        if key in kw:
            kw[key] = sub.from_dict(kw[key])
    try:
        return cls(**kw)
    except TypeError as e:
        raise ConfigError(f"{cls.__name__}: {e}") from None


def _range(v, name):
    if v is None:
        return None
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, int) for x in v)):
        raise ConfigError(f"{name} must be a [lo, hi] pair of integers")
    lo, hi = v
    if lo > hi:
        raise ConfigError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
    return (lo, hi)


@dataclass
class PairSetConfig:
    """How to draw DAGs and labeled pairs for a training or test set."""

    n_dags: int = 100
    size_class: str = "small"
    n_nodes_range: tuple | None = None
    dep_type: str = "linear"
    max_parents: int = 3
    pos_per_dag: int = 4
    neg_per_dag: int = 4
    n_samples_range: tuple = (100, 500)
    hide_fraction: float = 0.05

    def __post_init__(self):
        if self.n_dags < 1 or self.pos_per_dag < 1 or self.neg_per_dag < 1:
            raise ConfigError("n_dags, pos_per_dag and neg_per_dag must be >= 1")
        if self.size_class not in SIZE_CLASSES:
            raise ConfigError(f"unknown size_class {self.size_class!r}")
        if self.dep_type not in DEP_TYPES:
            raise ConfigError(f"unknown dep_type {self.dep_type!r}")
        if self.max_parents < 1:
            raise ConfigError("max_parents must be >= 1")
        if not 0 <= self.hide_fraction < 1:
            raise ConfigError("hide_fraction must lie in [0, 1)")
        self.n_nodes_range = _range(self.n_nodes_range, "n_nodes_range")
        self.n_samples_range = _range(self.n_samples_range, "n_samples_range")
        if self.n_samples_range[0] < 20:
            raise ConfigError("n_samples_range must start at 20 or more")

    @property
    def pairs_per_dag(self) -> int:
        return self.pos_per_dag + self.neg_per_dag

    @classmethod
    def from_dict(cls, d):
        return _from_dict(cls, d)


@dataclass
class DescriptorConfig:
    estimator: str = "linear"
    knn_k: int | None = None
    filter: str = "mi"
    K: int | None = None

    def __post_init__(self):
        if self.filter not in FILTERS:
            raise ConfigError(f"unknown filter {self.filter!r}")
        if self.K is not None and self.K < 1:
            raise ConfigError("K must be >= 1")
        try:
            self.estimator_config()
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(regressor=self.estimator, knn_k=self.knn_k)

    @classmethod
    def from_dict(cls, d):
        return _from_dict(cls, d)


@dataclass
class ForestConfig:
    n_trees: int = 500
    mtry: int | None = None
    min_leaf: int = 1

    def __post_init__(self):
        if self.n_trees < 1 or self.min_leaf < 1 or (self.mtry is not None and self.mtry < 1):
            raise ConfigError("n_trees, mtry and min_leaf must be >= 1")

    @classmethod
    def from_dict(cls, d):
        return _from_dict(cls, d)


@dataclass
class GenConfig:
    """``gen`` command: one DAG, one dataset."""

    output: str = "dataset.csv"
    size_class: str = "small"
    n_nodes: int | None = None
    n_nodes_range: tuple | None = None
    dep_type: str = "linear"
    max_parents: int = 3
    n_samples: int = 500
    hide_fraction: float = 0.05
    protected: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        self.seed = parse_seed(self.seed)
        if self.size_class not in SIZE_CLASSES:
            raise ConfigError(f"unknown size_class {self.size_class!r}")
        if self.dep_type not in DEP_TYPES:
            raise ConfigError(f"unknown dep_type {self.dep_type!r}")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if not 0 <= self.hide_fraction < 1:
            raise ConfigError("hide_fraction must lie in [0, 1)")
        self.n_nodes_range = _range(self.n_nodes_range, "n_nodes_range")

    @classmethod
    def from_dict(cls, d):
        return _from_dict(cls, d)


@dataclass
class TrainConfig:
    """``train`` command: build a training set and fit a forest."""

    model: str = "model.json"
    train: PairSetConfig = field(default_factory=PairSetConfig)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    descriptors_csv: str | None = None
    seed: int = 0

    def __post_init__(self):
        self.seed = parse_seed(self.seed)

    @classmethod
    def from_dict(cls, d):
        return _from_dict(
            cls, d, {"train": PairSetConfig, "descriptor": DescriptorConfig, "forest": ForestConfig}
        )


def _default_test():
    return PairSetConfig(n_dags=50, pos_per_dag=4, neg_per_dag=6)


@dataclass
class ExperimentConfig:
    """``eval`` command: train on one DAG set, score pairs from an independent one."""

    out_dir: str = "results"
    train: PairSetConfig = field(default_factory=PairSetConfig)
    test: PairSetConfig = field(default_factory=_default_test)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    training_sizes: list = field(default_factory=list)
    baseline: bool = False
    shuffle_labels: bool = False
    seed: int = 0

    def __post_init__(self):
        self.seed = parse_seed(self.seed)
        per = self.train.pairs_per_dag
        for s in self.training_sizes:
            if not isinstance(s, int) or s < per or s % per:
                raise ConfigError(
                    f"training size {s!r} must be a positive multiple of {per} pairs per DAG"
                )

    @classmethod
    def from_dict(cls, d):
        return _from_dict(
            cls,
            d,
            {
                "train": PairSetConfig,
                "test": PairSetConfig,
                "descriptor": DescriptorConfig,
                "forest": ForestConfig,
            },
        )


def load_config(cls, path):
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return cls.from_dict(d)


def to_dict(cfg) -> dict:
    d = dataclasses.asdict(cfg)

    def fix(v):
        if isinstance(v, dict):
            return {k: fix(x) for k, x in v.items()}
        if isinstance(v, tuple):
            return list(v)
        return v

    d = fix(d)
    if "seed" in d:
        d["seed"] = str(d["seed"])
    return d
