"""Descriptor vectors for ordered variable pairs.

A descriptor for (i, j) is built from the ranked blankets of both variables:
three (conditional) MI terms between z_i and z_j, then 5-quantile summaries
of eight populations in this order

    P_i, P_j, D1(i,j), D1(j,i), D2(i,j), D2(j,i), D3(i,j), D3(j,i)

where P_i holds the ranks of M_i members inside M_j (and vice versa),
D1(i,j) = {I(z_i; m_j | z_j)}, D2(i,j) = {I(m_i; m_j | z_j)} and
D3(i,j) = {I(z_i; m_j)}. Swapping i and j permutes whole blocks, which
``swap_blocks`` makes explicit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .dag import Dag, Dataset
from .infoth import DEFAULT, EstimatorConfig, cond_mi
from .mb import MarkovBlanketRanking, default_k, mb_minus, rank_features

QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)
POPULATIONS = ("P_i", "P_j", "D1_ij", "D1_ji", "D2_ij", "D2_ji", "D3_ij", "D3_ji")
N_FEATURES = 3 + len(POPULATIONS) * len(QUANTILES)
FORMAT_VERSION = 1

MAX_D2_PAIRS = 25
MAX_COND = 3
MIN_SAMPLES = 20

FEATURE_NAMES = ("I_ij", "I_ij_given_Mj", "I_ij_given_Mi") + tuple(
    f"{pop}_q{int(round(q * 100)):02d}" for pop in POPULATIONS for q in QUANTILES
)


def _block_permutation() -> np.ndarray:
    nq = len(QUANTILES)
    perm = [0, 2, 1]
    for k in range(len(POPULATIONS)):
        partner = k + 1 if k % 2 == 0 else k - 1
        perm.extend(range(3 + partner * nq, 3 + (partner + 1) * nq))
    return np.array(perm)


SWAP_PERMUTATION = _block_permutation()


def swap_blocks(features: np.ndarray) -> np.ndarray:
    """Map the descriptor of (i, j) onto the descriptor layout of (j, i)."""
    return np.asarray(features)[..., SWAP_PERMUTATION]


@dataclass(frozen=True)
class Population:
    values: tuple[float, ...]
    kind: str

    def __post_init__(self):
        if self.kind not in POPULATIONS:
            raise ValueError(f"unknown population kind {self.kind!r}")
        if not all(np.isfinite(v) for v in self.values):
            raise ValueError("population values must be finite")


@dataclass(frozen=True)
class DescriptorVector:
    i: int
    j: int
    features: np.ndarray
    label: bool | None = None

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        if f.shape != (N_FEATURES,):
            raise ValueError(f"descriptor must have {N_FEATURES} entries, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("descriptor contains non-finite entries")
        object.__setattr__(self, "features", f)


def quantile_summary(p: Population | list, probs=QUANTILES) -> np.ndarray:
    values = p.values if isinstance(p, Population) else p
    if len(values) == 0:
        return np.zeros(len(probs))
    return np.quantile(np.asarray(values, dtype=float), probs, method="linear")


def position_population(r_i: MarkovBlanketRanking, r_j: MarkovBlanketRanking) -> Population:
    """1-based ranks of the members of ``r_i`` inside ``r_j``; absent members get len(r_j) + 1."""
    k_j = len(r_j.members)
    values = []
    for m in r_i.members:
        pos = r_j.position(m)
        values.append(float(pos if pos is not None else k_j + 1))
    return Population(tuple(values), "P_i")


def pair_mi(ds: Dataset, a: int, b: int, cond=(), cfg: EstimatorConfig = DEFAULT) -> float:
    """I(z_a; z_b | cond) evaluated in a canonical argument order.

    The estimator is not exactly symmetric in floating point, so the pair and
    the conditioning set are sorted by node id first.
    """
    lo, hi = (a, b) if a < b else (b, a)
    return cond_mi(ds.column(lo), ds.column(hi), [ds.column(c) for c in sorted(cond)], cfg)


def _d2_grid(m_lo, m_hi, lo, hi, seed, max_pairs):
    grid = [(u, v) for u, v in product(m_lo, m_hi) if u != v]
    if len(grid) <= max_pairs:
        return grid
    rng = np.random.default_rng([seed, lo, hi])
    pick = np.sort(rng.choice(len(grid), size=max_pairs, replace=False))
    return [grid[k] for k in pick]


def blanket(
    ds: Dataset,
    target: int,
    K: int,
    filter: str,
    cfg: EstimatorConfig,
    cache: dict | None,
) -> MarkovBlanketRanking:
    if cache is not None and target in cache:
        return cache[target]
    r = rank_features(ds, target, K, filter, cfg)
    if cache is not None:
        cache[target] = r
    return r


def compute_descriptor(
    ds: Dataset,
    i: int,
    j: int,
    K: int | None = None,
    filter: str = "mi",
    cfg: EstimatorConfig = DEFAULT,
    seed: int = 0,
    cache: dict | None = None,
    label: bool | None = None,
) -> DescriptorVector:
    """Descriptor of the ordered pair (i, j); ``cache`` maps node id to its ranking."""
    if i == j:
        raise ValueError("pair members must differ")
    if ds.n_samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {ds.n_samples}")
    if K is None:
        K = default_k(len(ds.column_ids))
    ds.index_of(i), ds.index_of(j)
    r_i = mb_minus(blanket(ds, i, K, filter, cfg, cache), j)
    r_j = mb_minus(blanket(ds, j, K, filter, cfg, cache), i)
    m_i, m_j = r_i.members, r_j.members

    I = [
        pair_mi(ds, i, j, (), cfg),
        pair_mi(ds, i, j, m_j[:MAX_COND], cfg),
        pair_mi(ds, i, j, m_i[:MAX_COND], cfg),
    ]
    p_i = position_population(r_i, r_j)
    p_j = position_population(r_j, r_i)

    d1_ij = [pair_mi(ds, i, m, (j,), cfg) for m in m_j]
    d1_ji = [pair_mi(ds, j, m, (i,), cfg) for m in m_i]

    lo, hi = (i, j) if i < j else (j, i)
    if i == lo:
        grid = _d2_grid(m_i, m_j, lo, hi, seed, MAX_D2_PAIRS)
    else:
        grid = [(v, u) for u, v in _d2_grid(m_j, m_i, lo, hi, seed, MAX_D2_PAIRS)]
    # grid holds (member of M_i, member of M_j)
    d2_ij = [pair_mi(ds, u, v, (j,), cfg) for u, v in grid]
    d2_ji = [pair_mi(ds, v, u, (i,), cfg) for u, v in grid]

    d3_ij = [pair_mi(ds, i, m, (), cfg) for m in m_j]
    d3_ji = [pair_mi(ds, j, m, (), cfg) for m in m_i]

    pops = [p_i.values, p_j.values, d1_ij, d1_ji, d2_ij, d2_ji, d3_ij, d3_ji]
    features = np.concatenate([np.asarray(I)] + [quantile_summary(list(p)) for p in pops])
    return DescriptorVector(i, j, features, label)


def compute_descriptors(ds: Dataset, pairs, K=None, filter="mi", cfg=DEFAULT, seed=0):
    """Descriptors for a list of LabeledPair (or (i, j) tuples) sharing one ranking cache."""
    cache: dict = {}
    out = []
    for p in pairs:
        i, j, label = (p.i, p.j, p.label) if hasattr(p, "label") else (p[0], p[1], None)
        out.append(compute_descriptor(ds, i, j, K, filter, cfg, seed, cache, label))
    return out


@dataclass(frozen=True)
class OracleDescriptors:
    """d1..d4 evaluated with ground-truth causes/effects; keys are ``"ij"`` and ``"ji"``.

    ``symmetric`` holds the symmetric-relation terms keyed by name.
    """

    d1: dict
    d2: dict
    d3: dict
    d4: dict
    symmetric: dict


def oracle_descriptors(dag: Dag, ds: Dataset, i: int, j: int, cfg: EstimatorConfig = DEFAULT):
    if not dag.has_edge(i, j):
        raise ValueError(f"{i}->{j} is not an edge of the DAG")
    obs = set(ds.column_ids)

    def keep(nodes, *drop):
        return [v for v in nodes if v in obs and v not in drop]

    c_i, c_j = keep(dag.parents(i)), keep(dag.parents(j), i)
    e_i, e_j = keep(dag.children(i), j), keep(dag.children(j))
    # spouses through children other than the pair itself
    s_i = keep(sorted({p for c in e_i for p in dag.parents(c)}), i, j)
    s_j = keep(sorted({p for c in e_j for p in dag.parents(c)}), i, j)
    mi = lambda a, b, c=(): pair_mi(ds, a, b, c, cfg)  # noqa: E731

    d1 = {"ij": [mi(i, c, (j,)) for c in c_j], "ji": [mi(j, c, (i,)) for c in c_i]}
    d2 = {
        "ij": [mi(e, c, (j,)) for e in e_i for c in c_j if e != c],
        "ji": [mi(e, c, (i,)) for e in e_j for c in c_i if e != c],
    }
    d3 = {
        "ij": [mi(a, b, (j,)) for a in c_i for b in c_j if a != b],
        "ji": [mi(b, a, (i,)) for a in c_i for b in c_j if a != b],
    }
    d4 = {"ij": [mi(i, c) for c in c_j], "ji": [mi(j, c) for c in c_i]}
    symmetric = {
        "z_j;e_i": [mi(j, e) for e in e_i],
        "z_i;e_j": [mi(i, e) for e in e_j],
        "z_j;s_i": [mi(j, s) for s in s_i],
        "z_i;s_j": [mi(i, s) for s in s_j],
        "z_i;e_j|z_j": [mi(i, e, (j,)) for e in e_j],
        "z_j;e_i|z_i": [mi(j, e, (i,)) for e in e_i],
        "z_i;s_j|z_j": [mi(i, s, (j,)) for s in s_j],
        "z_j;s_i|z_i": [mi(j, s, (i,)) for s in s_i],
        "e_i;e_j|z_j": [mi(a, b, (j,)) for a in e_i for b in e_j if a != b],
        "e_j;e_i|z_i": [mi(b, a, (i,)) for a in e_i for b in e_j if a != b],
        "e_i;s_j|z_j": [mi(a, s, (j,)) for a in e_i for s in s_j if a != s],
        "e_j;s_i|z_i": [mi(b, s, (i,)) for b in e_j for s in s_i if b != s],
    }
    return OracleDescriptors(d1, d2, d3, d4, symmetric)


def save_descriptors(rows, path) -> None:
    """CSV with a versioned comment line, then ``i, j, label`` and the 43 named features."""
    path = Path(path)
    with open(path, "w", newline="") as f:
        f.write(
            f"# d2c-descriptors v{FORMAT_VERSION} quantiles={','.join(map(str, QUANTILES))}\n"
        )
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("i", "j", "label") + FEATURE_NAMES)
        for d in rows:
            label = "" if d.label is None else int(d.label)
            w.writerow([d.i, d.j, label] + [repr(float(v)) for v in d.features])


def load_descriptors(path) -> list[DescriptorVector]:
    with open(path, newline="") as f:
        head = f.readline()
        if not head.startswith(f"# d2c-descriptors v{FORMAT_VERSION}"):
            raise ValueError(f"{path}: not a v{FORMAT_VERSION} descriptor file")
        r = csv.reader(f)
        header = next(r)
        if tuple(header[3:]) != FEATURE_NAMES:
            raise ValueError(f"{path}: unexpected feature columns")
        out = []
        for row in r:
            label = None if row[2] == "" else bool(int(row[2]))
            out.append(DescriptorVector(int(row[0]), int(row[1]), np.array(row[3:], dtype=float), label))
    return out
