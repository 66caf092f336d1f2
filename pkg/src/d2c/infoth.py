"""(Conditional) mutual information from leave-one-out residual variances.

Entropies are Gaussian, H = 0.5 * log(2*pi*e*var), so every (conditional)
mutual information reduces to half the log-ratio of two leave-one-out
residual variances. All values are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial import cKDTree

VAR_FLOOR = 1e-12
RIDGE = 1e-8


class DegenerateInputError(ValueError):
    pass


class IllPosedRegressionError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    """``regressor`` is ``linear`` (least squares) or ``knn`` (distance-weighted k-NN).

    ``knn_k=None`` uses ceil(sqrt(N)). Raw estimates below ``mi_floor`` are
    clamped to zero, and so is anything negative.
    """

    regressor: str = "linear"
    knn_k: int | None = None
    mi_floor: float = 0.0
    rho_guard: float = 0.9999

    def __post_init__(self):
        if self.regressor == "knn-local":
            object.__setattr__(self, "regressor", "knn")
        if self.regressor not in ("linear", "knn"):
            raise ValueError(f"unknown regressor {self.regressor!r}")
        if self.knn_k is not None and self.knn_k < 3:
            raise ValueError("knn_k must be >= 3")
        if not 0 < self.rho_guard < 1:
            raise ValueError("rho_guard must lie in (0, 1)")
        if self.mi_floor > 0:
            raise ValueError("mi_floor must be <= 0")


DEFAULT = EstimatorConfig()


def _as_matrix(predictors, n: int) -> np.ndarray:
    if predictors is None:
        return np.empty((n, 0))
    if isinstance(predictors, np.ndarray):
        P = predictors.reshape(n, -1) if predictors.ndim == 1 else predictors
    else:
        predictors = list(predictors)
        if not predictors:
            return np.empty((n, 0))
        P = np.column_stack([np.asarray(p, dtype=float) for p in predictors])
    if P.shape[0] != n:
        raise ValueError("predictors and target differ in length")
    return np.asarray(P, dtype=float)


def gaussian_mi(x, y, rho_guard: float = DEFAULT.rho_guard) -> float:
    """-0.5 * log(1 - rho^2) with rho the sample Pearson correlation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d series of equal length")
    if x.size < 3:
        raise ValueError("need at least 3 samples")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite input")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx == 0 or syy == 0:
        raise DegenerateInputError("zero-variance input")
    rho = float(np.sum(xc * yc)) / math.sqrt(sxx * syy)
    rho = min(abs(rho), rho_guard)
    return -0.5 * math.log1p(-rho * rho)


def _loo_linear(Y: np.ndarray, P: np.ndarray) -> np.ndarray:
    n = Y.shape[0]
    Yc = Y - Y.mean(axis=0)
    h = np.full(n, 1.0 / n)
    if P.shape[1]:
        Pc = P - P.mean(axis=0)
        G = Pc.T @ Pc
        try:
            L = np.linalg.cholesky(G)
            if np.min(np.diag(L)) ** 2 < 1e-10 * np.max(np.diag(G)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            G = G + RIDGE * max(np.trace(G), 1.0) * np.eye(G.shape[0])
            try:
                L = np.linalg.cholesky(G)
            except np.linalg.LinAlgError:
                raise IllPosedRegressionError("singular design even after ridge") from None
        # W = Pc @ L^-T, so hat = W W^T
        W = solve_triangular(L, Pc.T, lower=True).T
        h = h + np.einsum("ij,ij->i", W, W)
        Yc = Yc - W @ (W.T @ Yc)
    denom = np.maximum(1.0 - h, 1e-12)
    loo = Yc / denom[:, None]
    return np.mean(loo * loo, axis=0)


def _loo_knn(Y: np.ndarray, P: np.ndarray, k: int | None) -> np.ndarray:
    n = Y.shape[0]
    sd = P.std(axis=0)
    P = P[:, sd > 0]
    if P.shape[1] == 0:
        return _loo_linear(Y, P)
    Ps = (P - P.mean(axis=0)) / sd[sd > 0]
    k = int(math.ceil(math.sqrt(n))) if k is None else k
    k = min(k, n - 1)
    dist, idx = cKDTree(Ps).query(Ps, k=k + 1)
    # drop each row's own index; if ties pushed it out, drop the farthest instead
    own = idx == np.arange(n)[:, None]
    no_self = ~own.any(axis=1)
    own[no_self, -1] = True
    dist = dist[~own].reshape(n, k)
    idx = idx[~own].reshape(n, k)
    w = 1.0 / (dist + 1e-8)
    w /= w.sum(axis=1, keepdims=True)
    pred = np.einsum("ik,ikm->im", w, Y[idx])
    r = Y - pred
    return np.mean(r * r, axis=0)


def loo_cond_variance_many(Y, predictors, cfg: EstimatorConfig = DEFAULT) -> np.ndarray:
    """Leave-one-out residual variance of each column of ``Y`` given the same predictors."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n = Y.shape[0]
    P = _as_matrix(predictors, n)
    if n < 3 + P.shape[1]:
        raise IllPosedRegressionError(f"{n} samples cannot support {P.shape[1]} predictors")
    if cfg.regressor == "linear":
        v = _loo_linear(Y, P)
    else:
        v = _loo_knn(Y, P, cfg.knn_k)
    if not np.all(np.isfinite(v)):
        raise IllPosedRegressionError("non-finite residual variance")
    return np.maximum(v, VAR_FLOOR)


def loo_cond_variance(target, predictors=None, cfg: EstimatorConfig = DEFAULT) -> float:
    return float(loo_cond_variance_many(target, predictors, cfg)[0])


def _clamp(raw: float, cfg: EstimatorConfig) -> float:
    if raw < cfg.mi_floor or raw < 0:
        return 0.0
    return raw


def cond_mi(x, y, cond=None, cfg: EstimatorConfig = DEFAULT) -> float:
    """I(x; y | cond) = H(x | cond) - H(x | y, cond)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if y.shape != x.shape:
        raise ValueError("x and y differ in length")
    C = _as_matrix(cond, n)
    if C.shape[1] > n / 2:
        raise IllPosedRegressionError(f"conditioning set of {C.shape[1]} is too large for N={n}")
    v_c = loo_cond_variance(x, C, cfg)
    v_yc = loo_cond_variance(x, np.column_stack([y, C]), cfg)
    return _clamp(0.5 * math.log(v_c / v_yc), cfg)


def mi_with_target(X, t, cfg: EstimatorConfig = DEFAULT) -> np.ndarray:
    """I(X[:, k]; t) for every column k, sharing the regressions on ``t``."""
    X = np.asarray(X, dtype=float)
    v0 = loo_cond_variance_many(X, None, cfg)
    v1 = loo_cond_variance_many(X, np.asarray(t, dtype=float), cfg)
    raw = 0.5 * np.log(v0 / v1)
    out = np.where((raw < cfg.mi_floor) | (raw < 0), 0.0, raw)
    return out
