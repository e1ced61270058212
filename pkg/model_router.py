#!/usr/bin/env python3
"""
Model Router - per-net routing between the lower-level predictors
Turns trained models into static backtrace heuristics: pure HybNN, pure SVR,
or HybMT where the meta-classifier picks the model for every net.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Union

import numpy as np

from core_utils import ModelFormatError, ValidationError
from hybnn import HybNNModel
from input_validation import HeuristicSpec
from meta_forest import RandomForestMeta
from model_io import MetaBundle, load_bundle, load_model
from netlist import Circuit
from podem_engine import BacktraceHeuristic, StaticScoreHeuristic, cop_baseline_heuristic
from svr_model import SvrModel
from testability import FeatureTable, TestabilityAnalysis, build_features

logger = logging.getLogger(__name__)


class LowerLevelModel(Enum):
    """Meta-classifier classes"""
    HYBNN = 0
    SVR = 1


@dataclass
class RoutingStats:
    """How many nets each lower-level model serves"""
    nets: int = 0
    hybnn: int = 0
    svr: int = 0

    def as_dict(self) -> Dict[str, Union[int, float]]:
        return {
            'nets': self.nets,
            'hybnn': self.hybnn,
            'svr': self.svr,
            'svr_share_percent': round(self.svr / max(1, self.nets) * 100, 2),
        }


def _check_coverage(features: FeatureTable, circuit: Optional[Circuit]) -> None:
    if circuit is not None and len(features) != circuit.num_nets:
        raise ValidationError(f"Feature table has {len(features)} rows, circuit '{circuit.name}' "
                              f"has {circuit.num_nets} nets")


def lower_level_scores(model: Union[HybNNModel, SvrModel], features: FeatureTable) -> np.ndarray:
    """No-backtrack probability of every net from one lower-level model on base features"""
    return np.asarray(model.predict(features.base), dtype=np.float64)


class ModelRouter:
    """HybMT routing: the forest picks HybNN or SVR per net from extended features"""

    def __init__(self, meta: RandomForestMeta, hybnn: HybNNModel, svr: SvrModel):
        self.meta = meta
        self.hybnn = hybnn
        self.svr = svr
        self.stats = RoutingStats()

    @classmethod
    def from_bundle(cls, bundle: MetaBundle) -> "ModelRouter":
        return cls(bundle.meta, bundle.hybnn, bundle.svr)

    def route(self, features: FeatureTable) -> np.ndarray:
        """Class per net; every net goes to exactly one model"""
        classes = self.meta.predict(features.extended)
        self.stats.nets += len(classes)
        self.stats.svr += int(np.sum(classes == LowerLevelModel.SVR.value))
        self.stats.hybnn += int(np.sum(classes == LowerLevelModel.HYBNN.value))
        return classes

    def scores(self, features: FeatureTable) -> np.ndarray:
        """Per-net probability from the routed model; inference runs once per circuit"""
        classes = self.route(features)
        scores = np.empty(len(features), dtype=np.float64)
        to_hybnn = classes == LowerLevelModel.HYBNN.value
        if to_hybnn.any():
            scores[to_hybnn] = self.hybnn.predict(features.base[to_hybnn])
        if (~to_hybnn).any():
            scores[~to_hybnn] = self.svr.predict(features.base[~to_hybnn])
        return scores

    def get_router_stats(self) -> Dict[str, Union[int, float]]:
        return self.stats.as_dict()


def hybnn_heuristic(model: HybNNModel, features: FeatureTable, circuit: Optional[Circuit] = None) -> StaticScoreHeuristic:
    _check_coverage(features, circuit)
    return StaticScoreHeuristic(scores=lower_level_scores(model, features), name="hybnn")


def svr_heuristic(model: SvrModel, features: FeatureTable, circuit: Optional[Circuit] = None) -> StaticScoreHeuristic:
    _check_coverage(features, circuit)
    return StaticScoreHeuristic(scores=lower_level_scores(model, features), name="svr")


def hybmt_heuristic(meta: RandomForestMeta, hybnn: HybNNModel, svr: SvrModel, features: FeatureTable,
                    circuit: Optional[Circuit] = None) -> StaticScoreHeuristic:
    """HybMT scores: HybNN where the forest votes 0, SVR where it votes 1"""
    _check_coverage(features, circuit)
    router = ModelRouter(meta, hybnn, svr)
    scores = router.scores(features)
    logger.info(f"HybMT routing: {router.get_router_stats()}")
    return StaticScoreHeuristic(scores=scores, name="hybmt")


def build_heuristic(spec: HeuristicSpec, circuit: Circuit, analysis: TestabilityAnalysis) -> BacktraceHeuristic:
    """Heuristic named by a parsed --heuristic value"""
    if spec.kind == 'cop':
        return cop_baseline_heuristic(circuit, analysis)

    features = build_features(circuit, analysis)
    if spec.kind == 'model':
        model = load_model(spec.path)
        if isinstance(model, HybNNModel):
            return hybnn_heuristic(model, features, circuit)
        if isinstance(model, SvrModel):
            return svr_heuristic(model, features, circuit)
        raise ModelFormatError(f"{spec.path} holds a {type(model).__name__}; model:PATH needs HybNN or SVR "
                               f"(use meta:BUNDLE for the forest)")
    if spec.kind == 'meta':
        bundle = load_bundle(spec.path)
        return hybmt_heuristic(bundle.meta, bundle.hybnn, bundle.svr, features, circuit)
    raise ValidationError(f"Unknown heuristic kind {spec.kind!r}")
