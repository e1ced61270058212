#!/usr/bin/env python3
"""
Hyperparameter selection
k-fold cross-validation of HybNN, SVR and meta-forest configurations over a grid.
"""

import csv
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from core_utils import SeedStreams, ValidationError, check_sample_weight, performance_monitor
from hybnn import HybNNConfig, train_hybnn
from meta_forest import ForestConfig, train_forest
from svr_model import SvrConfig, train_svr

logger = logging.getLogger(__name__)

FAMILIES = ('hybnn', 'svr', 'meta')


def logspace_grid(low: float = 1e-3, high: float = 1e4, num: int = 8) -> List[float]:
    """Log-spaced values from low to high inclusive"""
    if low <= 0 or high <= 0 or num < 1:
        raise ValidationError("logspace_grid needs positive bounds and at least one point")
    return [float(v) for v in np.logspace(np.log10(low), np.log10(high), num)]


@dataclass(frozen=True)
class CvRow:
    point: int
    params: Dict[str, Any]
    fold: int
    score: float
    n_validation: int


@dataclass(frozen=True)
class CvResult:
    best_params: Dict[str, Any]
    best_score: float
    metric: str
    rows: List[CvRow]

    def mean_scores(self) -> List[float]:
        points = sorted({r.point for r in self.rows})
        return [float(np.mean([r.score for r in self.rows if r.point == p])) for p in points]


def default_config(family: str):
    if family == 'hybnn':
        return HybNNConfig()
    if family == 'svr':
        return SvrConfig()
    if family == 'meta':
        return ForestConfig()
    raise ValidationError(f"Unknown model family {family!r}; choose from {FAMILIES}")


def fit_and_score(family: str, config, X_train: np.ndarray, y_train: np.ndarray,
                  X_val: np.ndarray, y_val: np.ndarray, seed: int,
                  w_train: Optional[np.ndarray] = None, w_val: Optional[np.ndarray] = None) -> float:
    """(Weighted) MSE for the regressors, accuracy for the meta-classifier"""
    if family == 'hybnn':
        model, _ = train_hybnn(X_train, y_train, config, seed, sample_weight=w_train)
        return float(np.average((model.predict(X_val) - y_val) ** 2, weights=w_val))
    if family == 'svr':
        model, _ = train_svr(X_train, y_train, config, seed, sample_weight=w_train)
        return float(np.average((model.predict(X_val) - y_val) ** 2, weights=w_val))
    if family == 'meta':
        forest = train_forest(X_train, y_train, config, seed)
        return float(np.mean(forest.predict(X_val) == y_val))
    raise ValidationError(f"Unknown model family {family!r}; choose from {FAMILIES}")


def make_folds(n_rows: int, k: int, seed: int) -> np.ndarray:
    """Seeded shuffled round-robin fold ids"""
    if k < 2:
        raise ValidationError(f"Cross-validation needs k >= 2, got {k}")
    order = SeedStreams(seed).rng("cv.folds").permutation(n_rows)
    folds = np.empty(n_rows, dtype=np.int64)
    folds[order] = np.arange(n_rows) % k
    return folds


@performance_monitor("model_selection.cross_validate")
def cross_validate(family: str, X: np.ndarray, y: np.ndarray, folds: Union[int, np.ndarray],
                   grid: Sequence[Mapping[str, Any]], base_config=None, seed: int = 0,
                   sample_weight: Optional[np.ndarray] = None) -> CvResult:
    """
    Average the held-out score of every grid point over the folds

    Args:
        family: 'hybnn', 'svr' or 'meta'
        folds: k, or precomputed fold ids per row
        grid: Parameter overrides per point; earlier points win ties
        sample_weight: Row weights for the regressors' fits and validation MSE

    Raises:
        ValidationError: empty grid, k < 2 or a fold without rows
    """
    if not grid:
        raise ValidationError("Hyperparameter grid is empty")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    w = check_sample_weight(sample_weight, len(X))
    fold_ids = make_folds(len(X), int(folds), seed) if np.isscalar(folds) else np.asarray(folds, dtype=np.int64)
    if len(fold_ids) != len(X):
        raise ValidationError(f"{len(fold_ids)} fold ids for {len(X)} rows")
    k = int(fold_ids.max()) + 1 if len(fold_ids) else 0
    if k < 2:
        raise ValidationError(f"Cross-validation needs k >= 2, got {k}")
    for f in range(k):
        if not np.any(fold_ids == f):
            raise ValidationError(f"Fold {f} has no rows")
        if np.all(fold_ids == f):
            raise ValidationError(f"Fold {f} leaves no training rows")

    base_config = base_config or default_config(family)
    metric = 'accuracy' if family == 'meta' else 'mse'
    rows: List[CvRow] = []
    best_index, best_score = None, None
    for point, params in enumerate(grid):
        config = replace(base_config, **params)
        scores = []
        for f in range(k):
            train, val = np.flatnonzero(fold_ids != f), np.flatnonzero(fold_ids == f)
            w_train, w_val = (None, None) if w is None else (w[train], w[val])
            score = fit_and_score(family, config, X[train], y[train], X[val], y[val], seed, w_train, w_val)
            scores.append(score)
            rows.append(CvRow(point=point, params=dict(params), fold=f, score=score, n_validation=len(val)))
        mean = float(np.mean(scores))
        logger.debug(f"CV {family} point {point} {dict(params)}: mean {metric} {mean:.6g}")
        better = best_score is None or (mean > best_score if metric == 'accuracy' else mean < best_score)
        if better:
            best_index, best_score = point, mean

    result = CvResult(best_params=dict(grid[best_index]), best_score=best_score, metric=metric, rows=rows)
    logger.info(f"CV {family}: best {result.best_params} with mean {metric} {best_score:.6g}")
    return result


def write_cv_csv(path: Union[str, Path], result: CvResult) -> None:
    """point,params,fold,n_validation,score rows, one per grid point per fold"""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('point', 'params', 'fold', 'n_validation', result.metric))
        for row in result.rows:
            writer.writerow((row.point, json.dumps(row.params, sort_keys=True), row.fold,
                             row.n_validation, repr(row.score)))
