"""Ranked Markov-blanket approximations from information-theoretic filters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dag import Dataset
from .infoth import DEFAULT, EstimatorConfig, loo_cond_variance_many, mi_with_target

FILTERS = ("mi", "mrmr", "mimr")


@dataclass(frozen=True)
class MarkovBlanketRanking:
    """Blanket members in selection order. ``scores`` are per selection step."""

    target: int
    members: tuple[int, ...]
    scores: tuple[float, ...]
    K: int

    def __post_init__(self):
        if self.target in self.members:
            raise ValueError("target cannot be in its own blanket")
        if len(set(self.members)) != len(self.members):
            raise ValueError("duplicate blanket members")
        if len(self.scores) != len(self.members):
            raise ValueError("members and scores differ in length")

    def __len__(self):
        return len(self.members)

    def position(self, node: int) -> int | None:
        """1-based rank of ``node`` or None when absent."""
        try:
            return self.members.index(node) + 1
        except ValueError:
            return None


def default_k(n_observed: int) -> int:
    return max(1, min(10, n_observed - 2))


def _cond_mi_many(X, t, s, cfg):
    """I(X[:, k]; t | s) for every column k."""
    v_s = loo_cond_variance_many(X, s, cfg)
    v_ts = loo_cond_variance_many(X, np.column_stack([t, s]), cfg)
    raw = 0.5 * np.log(v_s / v_ts)
    return np.maximum(raw, 0.0)


def rank_features(
    ds: Dataset,
    target: int,
    K: int,
    filter: str = "mi",
    cfg: EstimatorConfig = DEFAULT,
) -> MarkovBlanketRanking:
    """Rank the observed columns by relevance to ``target``.

    ``mi`` sorts by I(x; target). ``mrmr`` penalises the mean redundancy with
    already-selected members; ``mimr`` additionally credits the interaction
    I(x; target | s) - I(x; target). Ties go to the lowest node id.
    """
    if filter not in FILTERS:
        raise ValueError(f"unknown filter {filter!r}")
    if K < 1:
        raise ValueError("K must be >= 1")
    t = ds.column(target)
    cand = [c for c in sorted(ds.column_ids) if c != target]
    X = np.column_stack([ds.column(c) for c in cand]) if cand else np.empty((ds.n_samples, 0))
    ok = X.std(axis=0) > 0 if cand else np.zeros(0, dtype=bool)
    cand = [c for c, keep in zip(cand, ok) if keep]
    X = X[:, ok]
    if not cand:
        return MarkovBlanketRanking(target, (), (), K)
    cand_ids = np.array(cand)
    rel = mi_with_target(X, t, cfg)
    k_eff = min(K, len(cand))

    if filter == "mi":
        order = np.lexsort((cand_ids, -rel))[:k_eff]
        return MarkovBlanketRanking(
            target, tuple(int(cand_ids[o]) for o in order), tuple(float(rel[o]) for o in order), K
        )

    selected, scores = [], []
    remaining = np.ones(len(cand), dtype=bool)
    penalty = np.zeros(len(cand))
    for step in range(k_eff):
        if step == 0:
            J = rel.copy()
        else:
            J = rel - penalty / step
        J[~remaining] = -np.inf
        best = int(np.argmax(J))
        selected.append(best)
        scores.append(float(J[best]))
        remaining[best] = False
        if step + 1 == k_eff:
            break
        s = X[:, best]
        red = mi_with_target(X, s, cfg)
        if filter == "mimr":
            inter = _cond_mi_many(X, t, s, cfg) - rel
            red = red - inter
        penalty += red
    return MarkovBlanketRanking(
        target, tuple(int(cand_ids[k]) for k in selected), tuple(scores), K
    )


def mb_minus(r: MarkovBlanketRanking, exclude: int) -> MarkovBlanketRanking:
    if exclude not in r.members:
        return r
    keep = [k for k, m in enumerate(r.members) if m != exclude]
    return MarkovBlanketRanking(
        r.target,
        tuple(r.members[k] for k in keep),
        tuple(r.scores[k] for k in keep),
        r.K - 1,
    )
