"""Random-forest classifier on descriptor vectors, written from scratch.

Trees use axis-aligned threshold splits chosen by weighted Gini impurity over
``mtry`` randomly drawn features per node, fit on a bootstrap resample. Each
leaf stores the fraction of positive (bootstrap-weighted) samples, and the
forest score is the mean leaf fraction over trees.

The forest is stored as flat node arrays (``feature == -1`` marks a leaf)
with per-tree offsets; child indices are local to their tree.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

FORMAT = "d2c-forest"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass
class TrainingSet:
    """Labeled descriptor rows. ``row_ids`` key the bootstrap, so row order is irrelevant."""

    X: np.ndarray
    y: np.ndarray
    row_ids: np.ndarray | None = None
    pairs: list | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=bool)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be rows x features with one label per row")
        if self.row_ids is None:
            self.row_ids = np.arange(len(self.y))
        self.row_ids = np.asarray(self.row_ids)

    @classmethod
    def from_descriptors(cls, rows, row_ids=None) -> "TrainingSet":
        if any(r.label is None for r in rows):
            raise ValueError("every training row needs a label")
        X = np.array([r.features for r in rows])
        y = np.array([r.label for r in rows], dtype=bool)
        return cls(X, y, row_ids, [(r.i, r.j) for r in rows])

    def __len__(self):
        return len(self.y)

    @property
    def positive_count(self) -> int:
        return int(self.y.sum())

    @property
    def negative_count(self) -> int:
        return int((~self.y).sum())


@njit(cache=True, nogil=True)
def _build_tree(X, y, w, mtry, min_leaf, seed):
    np.random.seed(seed)
    F = X.shape[1]
    samples = np.nonzero(w > 0)[0]
    m = samples.shape[0]
    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    value = np.zeros(cap)
    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    feats = np.arange(F)
    sp = 0
    st_node[0], st_lo[0], st_hi[0] = 0, 0, m
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node, lo, hi = st_node[sp], st_lo[sp], st_hi[sp]
        wtot = 0.0
        wpos = 0.0
        for k in range(lo, hi):
            s = samples[k]
            wtot += w[s]
            wpos += w[s] * y[s]
        value[node] = wpos / wtot
        if wpos == 0.0 or wpos == wtot or wtot < 2 * min_leaf:
            continue
        for k in range(mtry):
            r = k + np.random.randint(0, F - k)
            feats[k], feats[r] = feats[r], feats[k]
        chosen = np.sort(feats[:mtry])
        wneg = wtot - wpos
        best = wtot - (wpos * wpos + wneg * wneg) / wtot
        tol = 1e-12 * wtot
        best_f = -1
        best_t = 0.0
        sub = samples[lo:hi]
        for f in chosen:
            vals = X[sub, f]
            order = np.argsort(vals, kind="mergesort")
            lw = 0.0
            lp = 0.0
            for k in range(hi - lo - 1):
                s = sub[order[k]]
                lw += w[s]
                lp += w[s] * y[s]
                v0 = vals[order[k]]
                v1 = vals[order[k + 1]]
                if v0 == v1:
                    continue
                rw = wtot - lw
                if lw < min_leaf or rw < min_leaf:
                    continue
                rp = wpos - lp
                ln = lw - lp
                rn = rw - rp
                score = (lw - (lp * lp + ln * ln) / lw) + (rw - (rp * rp + rn * rn) / rw)
                if score < best - tol:
                    best = score
                    best_f = f
                    t = 0.5 * (v0 + v1)
                    best_t = t if t < v1 else v0
        if best_f < 0:
            continue
        # partition samples[lo:hi] in place: left block first
        a = lo
        b = hi - 1
        while a <= b:
            if X[samples[a], best_f] <= best_t:
                a += 1
            else:
                samples[a], samples[b] = samples[b], samples[a]
                b -= 1
        feature[node] = best_f
        threshold[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp], st_lo[sp], st_hi[sp] = n_nodes + 1, a, hi
        sp += 1
        st_node[sp], st_lo[sp], st_hi[sp] = n_nodes, lo, a
        sp += 1
        n_nodes += 2
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def _predict(X, feature, threshold, left, right, value, offsets):
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n)
    for r in range(n):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0:
                if X[r, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            acc += value[base + node]
        out[r] = acc / n_trees
    return out


def default_mtry(feature_count: int) -> int:
    return max(1, int(math.floor(math.sqrt(feature_count))))


def tree_streams(seed: int, tree_index: int) -> tuple[np.random.Generator, int]:
    """Bootstrap generator and node-level seed for one tree, keyed by (seed, tree_index)."""
    ss = np.random.SeedSequence([seed, tree_index])
    boot, node = ss.spawn(2)
    return np.random.default_rng(boot), int(node.generate_state(1)[0])


@dataclass
class ForestModel:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray
    n_trees: int
    mtry: int
    min_leaf: int
    feature_count: int
    train_seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_trees < 1 or len(self.offsets) != self.n_trees + 1:
            raise ModelFormatError("inconsistent tree count")
        if np.any(self.feature >= self.feature_count):
            raise ModelFormatError("split feature out of range")
        if np.any((self.value < 0) | (self.value > 1)):
            raise ModelFormatError("leaf fractions must lie in [0, 1]")

    def tree(self, t: int) -> dict:
        sl = slice(self.offsets[t], self.offsets[t + 1])
        return {k: getattr(self, k)[sl] for k in ("feature", "threshold", "left", "right", "value")}

    def predict_proba(self, X) -> np.ndarray | float:
        return predict_proba(self, X)


def train_forest(
    ts: TrainingSet | np.ndarray,
    y=None,
    n_trees: int = 500,
    mtry: int | None = None,
    min_leaf: int = 1,
    seed: int = 0,
    n_threads: int = 1,
) -> ForestModel:
    if not isinstance(ts, TrainingSet):
        ts = TrainingSet(ts, y)
    if len(ts) < 2:
        raise ValueError("need at least 2 training rows")
    if ts.positive_count == 0 or ts.negative_count == 0:
        raise ValueError("training set has a single class")
    if n_trees < 1 or min_leaf < 1:
        raise ValueError("n_trees and min_leaf must be >= 1")
    order = np.argsort(ts.row_ids, kind="stable")
    X = np.ascontiguousarray(ts.X[order])
    yy = ts.y[order].astype(np.float64)
    n, F = X.shape
    mtry = default_mtry(F) if mtry is None else min(int(mtry), F)

    def fit(t):
        boot, node_seed = tree_streams(seed, t)
        w = np.bincount(boot.integers(0, n, n), minlength=n).astype(np.float64)
        return _build_tree(X, yy, w, mtry, float(min_leaf), node_seed % (2**32))

    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as ex:
            trees = list(ex.map(fit, range(n_trees)))
    else:
        trees = [fit(t) for t in range(n_trees)]
    sizes = [len(t[0]) for t in trees]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    cat = [np.concatenate([t[k] for t in trees]) for k in range(5)]
    return ForestModel(*cat, offsets, n_trees, mtry, min_leaf, F, int(seed))


def predict_proba(m: ForestModel, X):
    """Mean positive leaf fraction; a float for one vector, an array for a matrix."""
    if hasattr(X, "features"):
        X = X.features
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = np.ascontiguousarray(X.reshape(1, -1) if single else X)
    if X2.shape[1] != m.feature_count:
        raise ValueError(f"expected {m.feature_count} features, got {X2.shape[1]}")
    p = _predict(X2, m.feature, m.threshold, m.left, m.right, m.value, m.offsets)
    return float(p[0]) if single else p


def save_model(m: ForestModel, path) -> None:
    doc = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "n_trees": m.n_trees,
        "feature_count": m.feature_count,
        "mtry": m.mtry,
        "min_leaf": m.min_leaf,
        "train_seed": str(m.train_seed),
        "meta": m.meta,
        "offsets": m.offsets.tolist(),
        "feature": m.feature.tolist(),
        "threshold": m.threshold.tolist(),
        "left": m.left.tolist(),
        "right": m.right.tolist(),
        "value": m.value.tolist(),
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def load_model(path) -> ForestModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"{path}: not a {FORMAT} file ({e})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported {FORMAT} version {doc.get('version')!r}")
    try:
        return ForestModel(
            feature=np.array(doc["feature"], dtype=np.int32),
            threshold=np.array(doc["threshold"], dtype=np.float64),
            left=np.array(doc["left"], dtype=np.int32),
            right=np.array(doc["right"], dtype=np.int32),
            value=np.array(doc["value"], dtype=np.float64),
            offsets=np.array(doc["offsets"], dtype=np.int64),
            n_trees=int(doc["n_trees"]),
            mtry=int(doc["mtry"]),
            min_leaf=int(doc["min_leaf"]),
            feature_count=int(doc["feature_count"]),
            train_seed=int(doc["train_seed"]),
            meta=dict(doc.get("meta") or {}),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: malformed {FORMAT} file ({e})") from None
