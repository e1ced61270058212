"""Random-forest meta-classifier"""

import logging

import numpy as np
import pytest

from core_utils import TrainingError, ValidationError
from meta_forest import (LEAF, DecisionTree, ForestConfig, RandomForestMeta, feature_importance, meta_predict,
                         train_forest, write_importance_csv)
from testability import EXTENDED_DIM, EXTENDED_FEATURE_NAMES


@pytest.fixture
def separable(rng):
    X = rng.random((120, EXTENDED_DIM))
    y = (X[:, 3] > 0.5).astype(np.int64)
    return X, y


def _leaf(counts) -> DecisionTree:
    return DecisionTree(feature=np.array([LEAF]), threshold=np.zeros(1), left=np.array([LEAF]),
                        right=np.array([LEAF]), n_samples=np.array([sum(counts)]),
                        class_counts=np.array([counts]))


def test_learns_a_threshold(separable):
    X, y = separable
    forest = train_forest(X, y, ForestConfig(n_trees=25, max_features=EXTENDED_DIM), seed=1)
    assert np.mean(forest.predict(X) == y) >= 0.95
    assert forest.oob_score is not None and forest.oob_score > 0.9
    assert meta_predict(forest, X[0]) == forest.predict(X[:1])[0]


def test_forest_is_seeded(separable):
    X, y = separable
    config = ForestConfig(n_trees=5)
    first = train_forest(X, y, config, seed=3)
    second = train_forest(X, y, config, seed=3)
    for a, b in zip(first.trees, second.trees):
        assert np.array_equal(a.feature, b.feature)
        assert np.array_equal(a.threshold, b.threshold)
    assert first.oob_score == second.oob_score


def test_vote_ties_go_to_hybnn():
    forest = RandomForestMeta(trees=(_leaf([0, 3]), _leaf([3, 0])), n_features=2, config=ForestConfig(n_trees=2),
                              seed=0)
    assert forest.votes(np.zeros((1, 2))).tolist() == [1]
    assert forest.predict(np.zeros((1, 2))).tolist() == [0]


def test_leaf_ties_go_to_hybnn():
    assert _leaf([2, 2]).predict_one(np.zeros(1)) == 0


def test_single_class_data(rng, caplog):
    X = rng.random((30, EXTENDED_DIM))
    with caplog.at_level(logging.WARNING):
        forest = train_forest(X, np.ones(30, dtype=np.int64), ForestConfig(n_trees=3))
    assert "only class 1" in caplog.text
    assert forest.predict(rng.random((5, EXTENDED_DIM))).tolist() == [1] * 5
    assert all(tree.node_count == 1 for tree in forest.trees)


def test_max_depth_limits_trees(rng):
    X = rng.random((100, 4))
    y = rng.integers(0, 2, size=100)
    forest = train_forest(X, y, ForestConfig(n_trees=4, max_depth=1), seed=0)
    assert all(tree.node_count <= 3 for tree in forest.trees)


def test_importance_concentrates_on_the_deciding_feature(separable):
    X, y = separable
    forest = train_forest(X, y, ForestConfig(n_trees=10, max_features=EXTENDED_DIM), seed=2)
    importance = feature_importance(forest)
    assert importance.feature_names == EXTENDED_FEATURE_NAMES
    assert importance.per_tree.shape == (10, EXTENDED_DIM)
    assert importance.total[3] == 10 * len(y)
    assert importance.total.sum() == importance.total[3]


def test_importance_csv(tmp_path, separable):
    X, y = separable
    importance = feature_importance(train_forest(X, y, ForestConfig(n_trees=2), seed=0))
    path = tmp_path / "importance.csv"
    write_importance_csv(path, importance)
    lines = path.read_text().splitlines()
    assert lines[0] == "tree,feature,importance"
    assert len(lines) == 1 + 3 * EXTENDED_DIM
    assert lines[-1].startswith("all,fanout,")


def test_invalid_training_data(rng):
    with pytest.raises(TrainingError):
        train_forest(np.zeros((0, 3)), np.zeros(0))
    with pytest.raises(ValidationError):
        train_forest(rng.random((4, 3)), np.array([0, 1, 2, 0]))
    with pytest.raises(ValidationError):
        train_forest(rng.random((4, 3)), np.array([0, 1, 1, 0]), ForestConfig(n_trees=0))


def test_feature_width_checked(separable):
    X, y = separable
    forest = train_forest(X, y, ForestConfig(n_trees=2))
    with pytest.raises(ValidationError):
        forest.predict(np.zeros((1, 5)))
    with pytest.raises(ValidationError):
        meta_predict(forest, X[:2])
