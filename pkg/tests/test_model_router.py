"""Per-net routing and heuristic construction"""

import numpy as np
import pytest

from core_utils import ModelFormatError, ValidationError
from fault_list import enumerate_faults
from input_validation import HeuristicSpec
from meta_forest import LEAF, DecisionTree, ForestConfig, RandomForestMeta
from model_io import load_model, save_bundle, save_model
from model_router import ModelRouter, build_heuristic, hybmt_heuristic, hybnn_heuristic, svr_heuristic
from netlist import GateType
from podem_engine import CopHeuristic, run_campaign
from svr_model import SvrModel
from testability import EXTENDED_DIM, analyze, build_features


def _constant_svr(value: float) -> SvrModel:
    return SvrModel(support_vectors=np.zeros((0, 17)), dual_coef=np.zeros(0), bias=value, kernel='rbf',
                    gamma=1.0, C=1.0, epsilon=0.1)


def _inputs_to_svr() -> RandomForestMeta:
    """One stump: nets driven by a PI go to SVR, everything else to HybNN"""
    tree = DecisionTree(
        feature=np.array([3 + GateType.PI.value, LEAF, LEAF]), threshold=np.array([0.5, 0.0, 0.0]),
        left=np.array([1, LEAF, LEAF]), right=np.array([2, LEAF, LEAF]), n_samples=np.array([2, 1, 1]),
        class_counts=np.array([[1, 1], [1, 0], [0, 1]]),
    )
    return RandomForestMeta(trees=(tree,), n_features=EXTENDED_DIM, config=ForestConfig(n_trees=1), seed=0)


@pytest.fixture
def golden(fixtures_dir):
    return load_model(fixtures_dir / "golden_hybnn.model")


def test_router_sends_each_net_to_one_model(c17, golden):
    features = build_features(c17, analyze(c17))
    router = ModelRouter(_inputs_to_svr(), golden, _constant_svr(0.7))
    scores = router.scores(features)
    hybnn_scores = golden.predict(features.base)
    for net in c17.nets:
        expected = 0.7 if net.id in c17.source_set else hybnn_scores[net.id]
        assert scores[net.id] == pytest.approx(expected)
    assert router.get_router_stats() == {'nets': 11, 'hybnn': 6, 'svr': 5, 'svr_share_percent': 45.45}


def test_single_model_heuristics(c17, golden):
    features = build_features(c17, analyze(c17))
    assert hybnn_heuristic(golden, features, c17).name == "hybnn"
    svr = svr_heuristic(_constant_svr(0.3), features, c17)
    assert svr.name == "svr"
    assert svr.score(4, 1) == svr.score(4, 0) == pytest.approx(0.3)


def test_feature_rows_must_cover_the_circuit(c17, and_circuit, golden):
    features = build_features(and_circuit, analyze(and_circuit))
    with pytest.raises(ValidationError):
        hybmt_heuristic(_inputs_to_svr(), golden, _constant_svr(0.5), features, c17)


def test_build_heuristic(tmp_path, c17, golden):
    analysis = analyze(c17)
    assert isinstance(build_heuristic(HeuristicSpec(kind='cop'), c17, analysis), CopHeuristic)

    save_model(tmp_path / "meta.model", _inputs_to_svr())
    save_model(tmp_path / "hybnn.model", golden)
    save_model(tmp_path / "svr.model", _constant_svr(0.6))
    assert build_heuristic(HeuristicSpec('model', tmp_path / "hybnn.model"), c17, analysis).name == "hybnn"
    assert build_heuristic(HeuristicSpec('model', tmp_path / "svr.model"), c17, analysis).name == "svr"
    with pytest.raises(ModelFormatError):
        build_heuristic(HeuristicSpec('model', tmp_path / "meta.model"), c17, analysis)

    save_bundle(tmp_path / "hybmt.bundle", tmp_path / "meta.model", tmp_path / "hybnn.model", tmp_path / "svr.model")
    heuristic = build_heuristic(HeuristicSpec('meta', tmp_path / "hybmt.bundle"), c17, analysis)
    assert heuristic.name == "hybmt"
    report = run_campaign(c17, enumerate_faults(c17), heuristic)
    assert report.coverage_percent == 100.0
    assert report.aborted == 0
