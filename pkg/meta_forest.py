#!/usr/bin/env python3
"""
HybMT meta-classifier
Random forest of CART trees (Gini impurity, bootstrap samples, random feature subsets)
deciding per net whether HybNN (class 0) or SVR (class 1) supplies the heuristic.
"""

import csv
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, List, Mapping, Optional, Tuple, Union

import numpy as np

from core_utils import SeedStreams, TrainingError, ValidationError, performance_monitor
from testability import EXTENDED_DIM, EXTENDED_FEATURE_NAMES

logger = logging.getLogger(__name__)

LEAF = -1
N_CLASSES = 2


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_features: int = 4
    min_samples_split: int = 2
    max_depth: Optional[int] = None

    @classmethod
    def from_config(cls, section: Mapping[str, Any]) -> "ForestConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in section.items() if k in known})


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Node arrays; feature == LEAF marks a leaf, class_counts are bootstrap-weighted"""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    class_counts: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def leaf_of(self, x: np.ndarray) -> int:
        node = 0
        while self.feature[node] != LEAF:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return int(node)

    def predict_one(self, x: np.ndarray) -> int:
        counts = self.class_counts[self.leaf_of(x)]
        return 1 if counts[1] > counts[0] else 0

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(x) for x in X], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class RandomForestMeta:
    trees: Tuple[DecisionTree, ...]
    n_features: int
    config: ForestConfig
    seed: int
    oob_score: Optional[float] = None

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Number of trees voting class 1, per row"""
        X = _check_features(X, self.n_features)
        return np.sum([tree.predict(X) for tree in self.trees], axis=0).astype(np.int64)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Majority vote; ties go to class 0"""
        ones = self.votes(X)
        return (ones * 2 > len(self.trees)).astype(np.int64)


def _check_features(X: np.ndarray, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValidationError(f"Meta-classifier expects {n_features} features, got shape {X.shape}")
    return X


def meta_predict(model: RandomForestMeta, x: np.ndarray) -> int:
    """Class of one extended feature vector"""
    if np.ndim(x) != 1:
        raise ValidationError("meta_predict takes a single feature vector")
    return int(model.predict(x)[0])


# =============================================================================
# TREE GROWING
# =============================================================================

def _best_split(x: np.ndarray, y: np.ndarray) -> Optional[Tuple[float, float]]:
    """(weighted child Gini impurity, threshold) of the best midpoint split on one feature"""
    order = np.argsort(x, kind='stable')
    xs, ys = x[order], y[order]
    n = len(xs)
    valid = np.flatnonzero(xs[1:] > xs[:-1]) + 1
    if valid.size == 0:
        return None
    ones_left = np.cumsum(ys)[valid - 1].astype(np.float64)
    n_left = valid.astype(np.float64)
    n_right = n - n_left
    ones_right = ys.sum() - ones_left
    p_left = ones_left / n_left
    p_right = ones_right / n_right
    gini_left = 2.0 * p_left * (1.0 - p_left)
    gini_right = 2.0 * p_right * (1.0 - p_right)
    weighted = (n_left * gini_left + n_right * gini_right) / n
    k = int(np.argmin(weighted))
    position = valid[k]
    return float(weighted[k]), float((xs[position - 1] + xs[position]) / 2.0)


def grow_tree(X: np.ndarray, y: np.ndarray, config: ForestConfig, rng: np.random.Generator) -> DecisionTree:
    """CART on a (bootstrap) sample; rows may repeat"""
    n_features = X.shape[1]
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    n_samples: List[int] = []
    class_counts: List[List[int]] = []

    def new_node(index: np.ndarray) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        n_samples.append(len(index))
        class_counts.append(np.bincount(y[index], minlength=N_CLASSES).tolist())
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, index, depth = stack.pop()
        counts = np.array(class_counts[node])
        if (np.count_nonzero(counts) < 2 or len(index) < config.min_samples_split
                or (config.max_depth is not None and depth >= config.max_depth)):
            continue

        best = None
        tried = 0
        for f in rng.permutation(n_features):
            if tried >= config.max_features:
                break
            split = _best_split(X[index, f], y[index])
            if split is None:
                continue
            tried += 1
            if best is None or split[0] < best[0]:
                best = (split[0], int(f), split[1])
        if best is None:
            continue

        _, f, t = best
        go_left = X[index, f] <= t
        left_index, right_index = index[go_left], index[~go_left]
        feature[node] = f
        threshold[node] = t
        left[node] = new_node(left_index)
        right[node] = new_node(right_index)
        stack.append((right[node], right_index, depth + 1))
        stack.append((left[node], left_index, depth + 1))

    return DecisionTree(
        feature=np.array(feature, dtype=np.int64), threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64), right=np.array(right, dtype=np.int64),
        n_samples=np.array(n_samples, dtype=np.int64),
        class_counts=np.array(class_counts, dtype=np.int64).reshape(-1, N_CLASSES),
    )


@performance_monitor("meta_forest.train")
def train_forest(X: np.ndarray, y: np.ndarray, config: Optional[ForestConfig] = None,
                 seed: int = 0) -> RandomForestMeta:
    """
    Bootstrap-aggregated CART forest with an out-of-bag accuracy estimate

    Single-class data yields a forest that always votes that class, with a warning.
    """
    config = config or ForestConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise TrainingError("Meta-classifier training needs a non-empty feature matrix")
    if len(y) != len(X):
        raise ValidationError(f"{len(X)} feature rows but {len(y)} classes")
    if np.any((y != 0) & (y != 1)):
        raise ValidationError("Meta classes must be 0 (HybNN) or 1 (SVR)")
    if config.n_trees < 1 or config.max_features < 1:
        raise ValidationError("n_trees and max_features must be positive")
    if len(np.unique(y)) < 2:
        logger.warning(f"Meta training data holds only class {int(y[0])}; the forest will always predict it")

    streams = SeedStreams(seed)
    n = len(y)
    trees = []
    oob_votes = np.zeros((n, N_CLASSES), dtype=np.int64)
    for t in range(config.n_trees):
        sample = streams.rng("forest.bootstrap", t).integers(0, n, size=n)
        tree = grow_tree(X[sample], y[sample], config, streams.rng("forest.split", t))
        trees.append(tree)
        out_of_bag = np.setdiff1d(np.arange(n), sample)
        if out_of_bag.size:
            predictions = tree.predict(X[out_of_bag])
            np.add.at(oob_votes, (out_of_bag, predictions), 1)

    voted = oob_votes.sum(axis=1) > 0
    oob_score = None
    if voted.any():
        oob_class = (oob_votes[voted, 1] > oob_votes[voted, 0]).astype(np.int64)
        oob_score = float(np.mean(oob_class == y[voted]))

    forest = RandomForestMeta(trees=tuple(trees), n_features=X.shape[1], config=config, seed=seed,
                              oob_score=oob_score)
    logger.info(f"Meta forest: {config.n_trees} trees on {n} rows, OOB accuracy "
                f"{'n/a' if oob_score is None else f'{oob_score:.4f}'}")
    return forest


# =============================================================================
# FEATURE IMPORTANCE
# =============================================================================

@dataclass(frozen=True)
class FeatureImportance:
    """Split-sample counts per (tree, feature) and their sum over trees"""
    per_tree: np.ndarray
    total: np.ndarray
    feature_names: Tuple[str, ...]


def feature_importance(model: RandomForestMeta) -> FeatureImportance:
    """Per feature, the samples reaching every split node that uses it"""
    per_tree = np.zeros((len(model.trees), model.n_features), dtype=np.int64)
    for t, tree in enumerate(model.trees):
        internal = tree.feature != LEAF
        np.add.at(per_tree[t], tree.feature[internal], tree.n_samples[internal])
    if model.n_features == EXTENDED_DIM:
        names = EXTENDED_FEATURE_NAMES
    else:
        names = tuple(f"f{i}" for i in range(model.n_features))
    return FeatureImportance(per_tree=per_tree, total=per_tree.sum(axis=0), feature_names=names)


def write_importance_csv(path: Union[str, Path], importance: FeatureImportance) -> None:
    """tree,feature,importance rows; the tree column reads 'all' for the aggregate"""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('tree', 'feature', 'importance'))
        for t, row in enumerate(importance.per_tree):
            for name, value in zip(importance.feature_names, row):
                writer.writerow((t, name, int(value)))
        for name, value in zip(importance.feature_names, importance.total):
            writer.writerow(('all', name, int(value)))
