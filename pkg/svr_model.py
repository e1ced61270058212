#!/usr/bin/env python3
"""
Support vector regression
Epsilon-insensitive SVR trained by sequential minimal optimization with
maximal-violating-pair working-set selection.
"""

import logging
from dataclasses import dataclass, fields
from typing import Any, Mapping, Optional, Tuple, Union

import numpy as np

from core_utils import SeedStreams, SolverError, TrainingError, ValidationError, check_sample_weight, performance_monitor

logger = logging.getLogger(__name__)

KERNELS = ('rbf', 'linear')
_TAU = 1e-12


@dataclass(frozen=True)
class SvrConfig:
    C: float = 1.0
    epsilon: float = 0.1
    kernel: str = 'rbf'
    gamma: Union[str, float] = 'scale'
    tol: float = 1e-3
    max_iter: int = 200_000
    max_samples: int = 3000

    @classmethod
    def from_config(cls, section: Mapping[str, Any]) -> "SvrConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in section.items() if k in known})


@dataclass(frozen=True, eq=False)
class SvrModel:
    """f(x) = sum_i dual_coef_i * K(sv_i, x) + bias"""
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    kernel: str
    gamma: float
    C: float
    epsilon: float

    @property
    def input_dim(self) -> int:
        return self.support_vectors.shape[1]

    def raw_predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.input_dim:
            raise ValidationError(f"SVR expects {self.input_dim} features, got {X.shape[1]}")
        if len(self.dual_coef) == 0:
            return np.full(len(X), self.bias)
        return kernel_matrix(X, self.support_vectors, self.kernel, self.gamma) @ self.dual_coef + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predictions clamped into [0, 1]"""
        return np.clip(self.raw_predict(X), 0.0, 1.0)


@dataclass(frozen=True)
class SolverStats:
    iterations: int
    kkt_gap: float
    n_support: int
    n_samples: int


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == 'linear':
        return A @ B.T
    if kernel == 'rbf':
        sq = np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :] - 2.0 * (A @ B.T)
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValidationError(f"Unknown kernel {kernel!r}; choose from {KERNELS}")


def resolve_gamma(gamma: Union[str, float], X: np.ndarray) -> float:
    """'scale' means 1 / (n_features * Var(X)), falling back to 1 for constant data"""
    if gamma == 'scale':
        variance = float(X.var())
        return 1.0 / (X.shape[1] * variance) if variance > 0 else 1.0
    value = float(gamma)
    if value <= 0:
        raise ValidationError(f"gamma must be positive, got {value}")
    return value


def svr_predict(model: SvrModel, x: np.ndarray):
    """Clamped prediction for one vector (float) or a batch (array)"""
    p = model.predict(x)
    return float(p[0]) if np.ndim(x) == 1 else p


def _solve(K: np.ndarray, z: np.ndarray, C: np.ndarray, epsilon: float, tol: float,
           max_iter: int) -> Tuple[np.ndarray, float, int, float]:
    """
    Dual over 2l variables: min 0.5 a'Qa + p'a, y'a = 0, 0 <= a_i <= C_i

    C holds one box bound per row, shared by its two dual variables.
    Returns (alpha, rho, iterations, final Gmax - Gmin).
    """
    l = len(z)
    y = np.concatenate([np.ones(l), -np.ones(l)])
    p = np.concatenate([epsilon - z, epsilon + z])
    bound = np.concatenate([C, C])
    alpha = np.zeros(2 * l)
    G = p.copy()
    QD = np.concatenate([np.diag(K), np.diag(K)])
    index = np.arange(2 * l) % l

    def q_column(i: int) -> np.ndarray:
        return y[i] * y * K[i % l, index]

    iterations = 0
    gap = np.inf
    while True:
        minus_yG = -y * G
        up = ((y > 0) & (alpha < bound)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < bound))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(minus_yG[up])])
        j = int(np.flatnonzero(low)[np.argmin(minus_yG[low])])
        gap = float(minus_yG[i] - minus_yG[j])
        if gap < tol:
            break
        if iterations >= max_iter:
            raise SolverError(f"SMO did not reach tolerance {tol} within {max_iter} iterations (gap {gap:.3g})")
        iterations += 1

        Q_i, Q_j = q_column(i), q_column(j)
        old_i, old_j = alpha[i], alpha[j]
        C_i, C_j = bound[i], bound[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Q_i[j]
            delta = (-G[i] - G[j]) / max(quad, _TAU)
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > C_i - C_j:
                if alpha[i] > C_i:
                    alpha[i], alpha[j] = C_i, C_i - diff
            elif alpha[j] > C_j:
                alpha[j], alpha[i] = C_j, C_j + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Q_i[j]
            delta = (G[i] - G[j]) / max(quad, _TAU)
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C_i:
                if alpha[i] > C_i:
                    alpha[i], alpha[j] = C_i, total - C_i
            elif alpha[j] < 0:
                alpha[j], alpha[i] = 0.0, total
            if total > C_j:
                if alpha[j] > C_j:
                    alpha[j], alpha[i] = C_j, total - C_j
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, total

        G += Q_i * (alpha[i] - old_i) + Q_j * (alpha[j] - old_j)

    yG = y * G
    at_upper = alpha >= bound
    at_lower = alpha <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = float(yG[ub_mask].min()) if ub_mask.any() else np.inf
        lb = float(yG[lb_mask].max()) if lb_mask.any() else -np.inf
        rho = (ub + lb) / 2.0 if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    return alpha, rho, iterations, max(gap, 0.0)


@performance_monitor("svr_model.train")
def train_svr(X: np.ndarray, z: np.ndarray, config: Optional[SvrConfig] = None,
              seed: int = 0, sample_weight: Optional[np.ndarray] = None) -> Tuple[SvrModel, SolverStats]:
    """
    Fit an epsilon-SVR

    More than max_samples rows are subsampled with the seeded stream; the kernel
    matrix of the fit rows is precomputed. sample_weight scales the box bound of
    each row to C * w_i / mean(w) over the fit rows.

    Raises:
        TrainingError: empty data
        SolverError: iteration cap reached before the KKT tolerance
    """
    config = config or SvrConfig()
    X = np.asarray(X, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise TrainingError("SVR training needs a non-empty feature matrix")
    if len(z) != len(X):
        raise ValidationError(f"{len(X)} feature rows but {len(z)} targets")
    if config.C <= 0 or config.epsilon < 0:
        raise ValidationError("SVR needs C > 0 and epsilon >= 0")
    if config.kernel not in KERNELS:
        raise ValidationError(f"Unknown kernel {config.kernel!r}; choose from {KERNELS}")
    w = check_sample_weight(sample_weight, len(X))

    if len(X) > config.max_samples:
        rng = SeedStreams(seed).rng("svr.subsample")
        keep = np.sort(rng.choice(len(X), size=config.max_samples, replace=False))
        logger.info(f"SVR subsampled {config.max_samples} of {len(X)} rows")
        X, z = X[keep], z[keep]
        w = None if w is None else w[keep]

    gamma = resolve_gamma(config.gamma, X) if config.kernel == 'rbf' else 0.0
    K = kernel_matrix(X, X, config.kernel, gamma)
    C = np.full(len(z), float(config.C)) if w is None else float(config.C) * w / w.mean()
    alpha, rho, iterations, gap = _solve(K, z, C, float(config.epsilon),
                                         float(config.tol), int(config.max_iter))

    l = len(z)
    coef = alpha[:l] - alpha[l:]
    support = np.flatnonzero(coef != 0.0)
    model = SvrModel(
        support_vectors=X[support], dual_coef=coef[support], bias=-rho,
        kernel=config.kernel, gamma=gamma, C=float(config.C), epsilon=float(config.epsilon),
    )
    stats = SolverStats(iterations=iterations, kkt_gap=gap, n_support=len(support), n_samples=l)
    logger.info(f"SVR trained: {stats.n_support}/{l} support vectors, {iterations} SMO steps, gap {gap:.3g}")
    return model, stats
