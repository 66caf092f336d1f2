"""Random DAGs with additive structural equations, and datasets simulated from them."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SIZE_CLASSES = {
    "small": (20, 30),
    "medium": (100, 200),
    "large": (500, 1000),
}
FUNC_FORMS = ("linear", "quadratic", "sigmoid")
DEP_TYPES = FUNC_FORMS + ("mixed",)
N_COEFFS = {"linear": 2, "quadratic": 3, "sigmoid": 2}

COEF_RANGE = (0.3, 1.0)
SIGMA_RANGE = (0.2, 1.0)


class ConfigError(ValueError):
    pass


class SimulationError(RuntimeError):
    pass


class PairSamplingError(ValueError):
    pass


@dataclass(frozen=True)
class Dag:
    """Ground-truth graph plus its structural-equation parameters.

    ``order`` lists node ids in topological order. ``edges`` are (parent, child)
    pairs; ``func_form`` and ``coeffs`` are keyed by edge.
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    func_form: dict[tuple[int, int], str]
    coeffs: dict[tuple[int, int], tuple[float, ...]]
    noise_sigma: tuple[float, ...]
    order: tuple[int, ...]
    seed: int = 0

    def __post_init__(self):
        if set(self.order) != set(range(self.n_nodes)) or len(self.order) != self.n_nodes:
            raise ConfigError("order must be a permutation of the node ids")
        pos = {v: k for k, v in enumerate(self.order)}
        for p, c in self.edges:
            if p == c:
                raise ConfigError(f"self-loop on node {p}")
            if pos[p] >= pos[c]:
                raise ConfigError(f"edge {p}->{c} violates the topological order")
            if len(self.coeffs[(p, c)]) != N_COEFFS[self.func_form[(p, c)]]:
                raise ConfigError(f"coefficient count mismatch on edge {p}->{c}")
        if any(s <= 0 for s in self.noise_sigma):
            raise ConfigError("noise sigmas must be positive")

    def parents(self, node: int) -> list[int]:
        return [p for p, c in self.edges if c == node]

    def children(self, node: int) -> list[int]:
        return [c for p, c in self.edges if p == node]

    def spouses(self, node: int) -> list[int]:
        out = set()
        for c in self.children(node):
            out.update(self.parents(c))
        out.discard(node)
        return sorted(out)

    def markov_blanket(self, node: int) -> list[int]:
        return sorted(set(self.parents(node)) | set(self.children(node)) | set(self.spouses(node)))

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self.func_form

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "edges": [list(e) for e in self.edges],
            "func_forms": [self.func_form[e] for e in self.edges],
            "coeffs": [list(self.coeffs[e]) for e in self.edges],
            "sigmas": list(self.noise_sigma),
            "order": list(self.order),
            "seed": str(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dag":
        edges = tuple((int(p), int(c)) for p, c in d["edges"])
        return cls(
            n_nodes=int(d["n_nodes"]),
            edges=edges,
            func_form={e: f for e, f in zip(edges, d["func_forms"])},
            coeffs={e: tuple(float(a) for a in cf) for e, cf in zip(edges, d["coeffs"])},
            noise_sigma=tuple(float(s) for s in d["sigmas"]),
            order=tuple(int(v) for v in d["order"]),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class Dataset:
    """Observation matrix whose columns are the retained node ids."""

    observations: np.ndarray
    column_ids: tuple[int, ...]
    hidden_ids: tuple[int, ...] = ()
    _pos: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float)
        if obs.ndim != 2 or obs.shape[1] != len(self.column_ids):
            raise ValueError("observations must be N x len(column_ids)")
        if not np.all(np.isfinite(obs)):
            raise ValueError("observations contain missing or non-finite values")
        if set(self.column_ids) & set(self.hidden_ids):
            raise ValueError("column_ids and hidden_ids overlap")
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "_pos", {c: k for k, c in enumerate(self.column_ids)})

    @property
    def n_samples(self) -> int:
        return self.observations.shape[0]

    def index_of(self, node: int) -> int:
        try:
            return self._pos[node]
        except KeyError:
            raise KeyError(f"node {node} is not an observed column") from None

    def column(self, node: int) -> np.ndarray:
        return self.observations[:, self.index_of(node)]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.column_ids == other.column_ids
            and self.hidden_ids == other.hidden_ids
            and np.array_equal(self.observations, other.observations)
        )


@dataclass(frozen=True)
class LabeledPair:
    i: int
    j: int
    label: bool

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("pair members must differ")


def _signed_uniform(rng, size):
    lo, hi = COEF_RANGE
    return rng.uniform(lo, hi, size) * rng.choice([-1.0, 1.0], size)


def sample_dag(
    size_class: str | None = "small",
    n: int | None = None,
    max_parents: int = 3,
    dep_type: str = "linear",
    seed: int = 0,
    n_range: tuple[int, int] | None = None,
) -> Dag:
    """Draw a random DAG.

    The node count is ``n`` if given, else uniform on ``n_range`` or on the
    interval of ``size_class``. Node ids are a random relabelling of the
    topological order so ids carry no causal information.
    """
    if max_parents < 1:
        raise ConfigError("max_parents must be >= 1")
    if dep_type not in DEP_TYPES:
        raise ConfigError(f"unknown dependency type {dep_type!r}")
    rng = np.random.default_rng(seed)
    if n is None:
        if n_range is None:
            if size_class not in SIZE_CLASSES:
                raise ConfigError(f"unknown size class {size_class!r}")
            n_range = SIZE_CLASSES[size_class]
        lo, hi = n_range
        if lo > hi or lo < 1:
            raise ConfigError(f"invalid size interval [{lo}, {hi}]")
        n = int(rng.integers(lo, hi + 1))
    if n < 1:
        raise ConfigError("node count must be positive")

    order = tuple(int(v) for v in rng.permutation(n))
    edges, forms, coeffs = [], {}, {}
    for t in range(1, n):
        k = int(rng.integers(0, min(max_parents, t) + 1))
        if k == 0:
            continue
        child = order[t]
        for pt in sorted(rng.choice(t, size=k, replace=False)):
            e = (order[pt], child)
            form = dep_type if dep_type != "mixed" else FUNC_FORMS[int(rng.integers(3))]
            edges.append(e)
            forms[e] = form
            coeffs[e] = tuple(float(a) for a in _signed_uniform(rng, N_COEFFS[form]))
    sigmas = rng.uniform(*SIGMA_RANGE, n)
    return Dag(
        n_nodes=n,
        edges=tuple(edges),
        func_form=forms,
        coeffs=coeffs,
        noise_sigma=tuple(float(s) for s in sigmas),
        order=order,
        seed=int(seed),
    )


def edge_function(form: str, coeffs, x: np.ndarray) -> np.ndarray:
    if form == "linear":
        a0, a1 = coeffs
        return a0 + a1 * x
    if form == "quadratic":
        a0, a1, a2 = coeffs
        return a0 + a1 * x + a2 * x * x
    if form == "sigmoid":
        a0, a1 = coeffs
        return 1.0 / (1.0 + np.exp(-(a0 + a1 * x)))
    raise ConfigError(f"unknown functional form {form!r}")


def _standardize(v: np.ndarray) -> np.ndarray:
    v = v - v.mean()
    sd = v.std()
    return v / sd if sd > 0 else v


def simulate(dag: Dag, n_samples: int, seed: int = 0) -> Dataset:
    """Simulate ``n_samples`` rows; every column is standardized as soon as it is generated."""
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    X = np.zeros((n_samples, dag.n_nodes))
    parents = {v: [] for v in range(dag.n_nodes)}
    for p, c in dag.edges:
        parents[c].append(p)
    for node in dag.order:
        val = np.zeros(n_samples)
        for p in parents[node]:
            e = (p, node)
            val += edge_function(dag.func_form[e], dag.coeffs[e], X[:, p])
        val += rng.normal(0.0, dag.noise_sigma[node], n_samples)
        if not np.all(np.isfinite(val)):
            raise SimulationError(f"non-finite values generated at node {node}")
        X[:, node] = _standardize(val)
    return Dataset(X, tuple(range(dag.n_nodes)), ())


def hide_variables(ds: Dataset, fraction: float, protected=(), seed: int = 0) -> Dataset:
    """Drop ``floor(fraction * n)`` unprotected columns chosen uniformly at random."""
    if not 0 <= fraction < 1:
        raise ConfigError("fraction must lie in [0, 1)")
    protected = set(protected)
    missing = protected - set(ds.column_ids)
    if missing:
        raise ConfigError(f"protected nodes not in dataset: {sorted(missing)}")
    n = len(ds.column_ids) + len(ds.hidden_ids)
    n_hide = int(np.floor(fraction * n))
    if n_hide == 0:
        return ds
    candidates = [c for c in ds.column_ids if c not in protected]
    if n_hide >= len(candidates) or len(ds.column_ids) - n_hide < 2:
        raise ConfigError(
            f"cannot hide all columns: {n_hide} of {len(ds.column_ids)} "
            f"({len(candidates)} unprotected) would leave fewer than 2 observed"
        )
    rng = np.random.default_rng(seed)
    hidden = set(int(c) for c in rng.choice(candidates, size=n_hide, replace=False))
    keep = [k for k, c in enumerate(ds.column_ids) if c not in hidden]
    return Dataset(
        ds.observations[:, keep],
        tuple(ds.column_ids[k] for k in keep),
        tuple(sorted(set(ds.hidden_ids) | hidden)),
    )


def sample_pairs(dag: Dag, ds: Dataset, n_pos: int, n_neg: int, seed: int = 0) -> list[LabeledPair]:
    """Positive pairs are true edges; negatives are half reversed edges, half non-adjacent pairs.

    All members are observed columns. When too few reversed edges exist the
    shortfall is filled with non-adjacent pairs, and vice versa.
    """
    rng = np.random.default_rng(seed)
    obs = set(ds.column_ids)
    edges = [e for e in dag.edges if e[0] in obs and e[1] in obs]
    if len(edges) < n_pos:
        raise PairSamplingError(
            f"need {n_pos} positive pairs but only {len(edges)} edges join observed nodes"
        )
    pos = [edges[k] for k in rng.choice(len(edges), size=n_pos, replace=False)] if n_pos else []

    reversed_edges = [(c, p) for p, c in edges]
    cols = sorted(obs)
    non_adj = [
        (a, b) for a in cols for b in cols
        if a != b and not dag.has_edge(a, b) and not dag.has_edge(b, a)
    ]
    n_rev = min(n_neg // 2, len(reversed_edges))
    n_rand = n_neg - n_rev
    if n_rand > len(non_adj):
        n_rand = len(non_adj)
        n_rev = n_neg - n_rand
    if n_rev > len(reversed_edges):
        raise PairSamplingError(
            f"need {n_neg} negative pairs but only {len(reversed_edges) + len(non_adj)} exist"
        )
    neg = [reversed_edges[k] for k in rng.choice(len(reversed_edges), size=n_rev, replace=False)] if n_rev else []
    neg += [non_adj[k] for k in rng.choice(len(non_adj), size=n_rand, replace=False)] if n_rand else []
    return [LabeledPair(int(a), int(b), True) for a, b in pos] + [
        LabeledPair(int(a), int(b), False) for a, b in neg
    ]


def save_dataset(ds: Dataset, dag: Dag | None, csv_path) -> Path:
    """Write the observations as CSV plus a ``.json`` sidecar with the ground truth."""
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([str(c) for c in ds.column_ids])
        for row in ds.observations:
            w.writerow([repr(float(v)) for v in row])
    side = {"column_ids": list(ds.column_ids), "hidden_ids": list(ds.hidden_ids)}
    if dag is not None:
        side["dag"] = dag.to_dict()
    sidecar = csv_path.with_suffix(".json")
    sidecar.write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    return sidecar


def load_dataset(csv_path) -> tuple[Dataset, Dag | None]:
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as f:
        rows = list(csv.reader(f))
    column_ids = tuple(int(c) for c in rows[0])
    obs = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(column_ids))
    sidecar = csv_path.with_suffix(".json")
    hidden, dag = (), None
    if sidecar.exists():
        side = json.loads(sidecar.read_text())
        hidden = tuple(side.get("hidden_ids", ()))
        if "dag" in side:
            dag = Dag.from_dict(side["dag"])
    return Dataset(obs, column_ids, hidden), dag
