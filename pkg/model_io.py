#!/usr/bin/env python3
"""
Model files
Versioned, self-describing text format for HybNN, SVR and forest models, and the
meta bundle that ties the three together by relative path.

    HYBMT-MODEL 1
    kind hybnn
    dims 17 32 16
    param <name> <value>
    block <name> <rows> <cols>
    <row-major values, one row per line, 17 significant digits>
    end
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from core_utils import ModelFormatError
from hybnn import PARAM_NAMES, HybNNModel
from meta_forest import DecisionTree, ForestConfig, RandomForestMeta
from svr_model import SvrModel

logger = logging.getLogger(__name__)

MODEL_MAGIC = "HYBMT-MODEL"
BUNDLE_MAGIC = "HYBMT-BUNDLE"
FORMAT_VERSION = 1

Model = Union[HybNNModel, SvrModel, RandomForestMeta]


@dataclass
class ModelFile:
    kind: str
    dims: Tuple[int, ...]
    params: Dict[str, str] = field(default_factory=dict)
    blocks: Dict[str, np.ndarray] = field(default_factory=dict)


def _fmt(value: float) -> str:
    return "%.17g" % value


def dumps_model_file(model_file: ModelFile) -> str:
    lines = [f"{MODEL_MAGIC} {FORMAT_VERSION}", f"kind {model_file.kind}",
             "dims " + " ".join(str(d) for d in model_file.dims)]
    for name, value in model_file.params.items():
        lines.append(f"param {name} {value}")
    for name, array in model_file.blocks.items():
        matrix = np.atleast_2d(np.asarray(array, dtype=np.float64))
        rows, cols = matrix.shape
        lines.append(f"block {name} {rows} {cols}")
        for row in matrix:
            lines.append(" ".join(_fmt(v) for v in row))
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads_model_file(text: str, source: str = "<model>") -> ModelFile:
    lines = text.splitlines()
    if not lines:
        raise ModelFormatError(f"{source}: empty model file")
    header = lines[0].split()
    if len(header) != 2 or header[0] != MODEL_MAGIC:
        raise ModelFormatError(f"{source}: missing '{MODEL_MAGIC}' header")
    if header[1] != str(FORMAT_VERSION):
        raise ModelFormatError(f"{source}: unsupported format version {header[1]}")

    kind = None
    dims: Tuple[int, ...] = ()
    params: Dict[str, str] = {}
    blocks: Dict[str, np.ndarray] = {}
    i = 1
    try:
        while i < len(lines):
            parts = lines[i].split()
            i += 1
            if not parts:
                continue
            tag = parts[0]
            if tag == 'end':
                break
            if tag == 'kind':
                kind = parts[1]
            elif tag == 'dims':
                dims = tuple(int(d) for d in parts[1:])
            elif tag == 'param':
                params[parts[1]] = " ".join(parts[2:])
            elif tag == 'block':
                name, rows, cols = parts[1], int(parts[2]), int(parts[3])
                values = []
                for _ in range(rows):
                    row = [float(v) for v in lines[i].split()]
                    i += 1
                    if len(row) != cols:
                        raise ModelFormatError(f"{source}:{i}: block {name} row has {len(row)} values, expected {cols}")
                    values.append(row)
                blocks[name] = np.array(values, dtype=np.float64).reshape(rows, cols)
            else:
                raise ModelFormatError(f"{source}:{i}: unknown record '{tag}'")
        else:
            raise ModelFormatError(f"{source}: missing 'end' record")
    except (IndexError, ValueError) as e:
        raise ModelFormatError(f"{source}:{i}: {e}") from None

    if kind is None:
        raise ModelFormatError(f"{source}: missing 'kind' record")
    return ModelFile(kind=kind, dims=dims, params=params, blocks=blocks)


# =============================================================================
# PER-KIND CONVERSION
# =============================================================================

def _require(model_file: ModelFile, names, source: str) -> None:
    missing = [n for n in names if n not in model_file.blocks]
    if missing:
        raise ModelFormatError(f"{source}: missing blocks {missing}")


def _to_model_file(model: Model) -> ModelFile:
    if isinstance(model, HybNNModel):
        h1, h2 = model.hidden_sizes
        return ModelFile(kind='hybnn', dims=(model.input_dim, h1, h2),
                         blocks={name: getattr(model, name) for name in PARAM_NAMES})
    if isinstance(model, SvrModel):
        return ModelFile(
            kind='svr', dims=(model.input_dim, len(model.dual_coef)),
            params={'kernel': model.kernel, 'gamma': _fmt(model.gamma), 'C': _fmt(model.C),
                    'epsilon': _fmt(model.epsilon), 'bias': _fmt(model.bias)},
            blocks={'support_vectors': model.support_vectors.reshape(-1, model.input_dim),
                    'dual_coef': model.dual_coef.reshape(1, -1)},
        )
    if isinstance(model, RandomForestMeta):
        cfg = model.config
        blocks: Dict[str, np.ndarray] = {}
        for t, tree in enumerate(model.trees):
            blocks[f"tree{t}.feature"] = tree.feature.reshape(1, -1)
            blocks[f"tree{t}.threshold"] = tree.threshold.reshape(1, -1)
            blocks[f"tree{t}.left"] = tree.left.reshape(1, -1)
            blocks[f"tree{t}.right"] = tree.right.reshape(1, -1)
            blocks[f"tree{t}.n_samples"] = tree.n_samples.reshape(1, -1)
            blocks[f"tree{t}.class_counts"] = tree.class_counts
        return ModelFile(
            kind='forest', dims=(model.n_features, len(model.trees)),
            params={'max_features': str(cfg.max_features), 'min_samples_split': str(cfg.min_samples_split),
                    'max_depth': 'none' if cfg.max_depth is None else str(cfg.max_depth),
                    'seed': str(model.seed),
                    'oob_score': 'none' if model.oob_score is None else _fmt(model.oob_score)},
            blocks=blocks,
        )
    raise ModelFormatError(f"Cannot serialize {type(model).__name__}")


def _from_model_file(model_file: ModelFile, source: str) -> Model:
    kind = model_file.kind
    try:
        if kind == 'hybnn':
            _require(model_file, PARAM_NAMES, source)
            b = model_file.blocks
            return HybNNModel(**{name: (b[name][0] if name.startswith('b') else b[name]) for name in PARAM_NAMES})
        if kind == 'svr':
            _require(model_file, ('support_vectors', 'dual_coef'), source)
            p = model_file.params
            d, m = model_file.dims
            return SvrModel(
                support_vectors=model_file.blocks['support_vectors'].reshape(m, d),
                dual_coef=model_file.blocks['dual_coef'].reshape(m),
                bias=float(p['bias']), kernel=p['kernel'], gamma=float(p['gamma']),
                C=float(p['C']), epsilon=float(p['epsilon']),
            )
        if kind == 'forest':
            p = model_file.params
            n_features, n_trees = model_file.dims
            trees = []
            for t in range(n_trees):
                names = [f"tree{t}.{k}" for k in ('feature', 'threshold', 'left', 'right', 'n_samples', 'class_counts')]
                _require(model_file, names, source)
                b = model_file.blocks
                trees.append(DecisionTree(
                    feature=b[names[0]][0].astype(np.int64), threshold=b[names[1]][0],
                    left=b[names[2]][0].astype(np.int64), right=b[names[3]][0].astype(np.int64),
                    n_samples=b[names[4]][0].astype(np.int64), class_counts=b[names[5]].astype(np.int64),
                ))
            config = ForestConfig(
                n_trees=n_trees, max_features=int(p['max_features']),
                min_samples_split=int(p['min_samples_split']),
                max_depth=None if p['max_depth'] == 'none' else int(p['max_depth']),
            )
            return RandomForestMeta(
                trees=tuple(trees), n_features=n_features, config=config, seed=int(p['seed']),
                oob_score=None if p['oob_score'] == 'none' else float(p['oob_score']),
            )
    except (KeyError, ValueError) as e:
        raise ModelFormatError(f"{source}: incomplete {kind} model: {e}") from None
    raise ModelFormatError(f"{source}: unknown model kind '{kind}'")


def save_model(path: Union[str, Path], model: Model) -> None:
    Path(path).write_text(dumps_model_file(_to_model_file(model)), encoding='utf-8')
    logger.info(f"Saved {type(model).__name__} to {path}")


def load_model(path: Union[str, Path]) -> Model:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No such model file: {path}")
    return _from_model_file(loads_model_file(path.read_text(encoding='utf-8'), str(path)), str(path))


def model_kind(path: Union[str, Path]) -> str:
    return loads_model_file(Path(path).read_text(encoding='utf-8'), str(path)).kind


# =============================================================================
# BUNDLES
# =============================================================================

@dataclass(frozen=True)
class MetaBundle:
    meta: RandomForestMeta
    hybnn: HybNNModel
    svr: SvrModel


BUNDLE_ROLES = ('meta', 'hybnn', 'svr')


def save_bundle(path: Union[str, Path], meta_path: Union[str, Path], hybnn_path: Union[str, Path],
                svr_path: Union[str, Path]) -> None:
    """Write a bundle naming the three model files relative to the bundle's directory"""
    path = Path(path)
    base = path.parent.resolve()
    lines: List[str] = [f"{BUNDLE_MAGIC} {FORMAT_VERSION}"]
    for role, member in zip(BUNDLE_ROLES, (meta_path, hybnn_path, svr_path)):
        member = Path(member).resolve()
        try:
            relative = member.relative_to(base)
        except ValueError:
            raise ModelFormatError(f"Bundle member {member} is not under {base}") from None
        lines.append(f"{role} {relative.as_posix()}")
    path.write_text("\n".join(lines) + "\n", encoding='utf-8')


def load_bundle(path: Union[str, Path]) -> MetaBundle:
    path = Path(path)
    lines = [line.split(maxsplit=1) for line in path.read_text(encoding='utf-8').splitlines() if line.strip()]
    if not lines or lines[0] != [BUNDLE_MAGIC, str(FORMAT_VERSION)]:
        raise ModelFormatError(f"{path}: missing '{BUNDLE_MAGIC} {FORMAT_VERSION}' header")
    members = {parts[0]: parts[1] for parts in lines[1:] if len(parts) == 2}
    missing = [role for role in BUNDLE_ROLES if role not in members]
    if missing:
        raise ModelFormatError(f"{path}: bundle lacks {missing}")
    models = {role: load_model(path.parent / members[role]) for role in BUNDLE_ROLES}
    expected = {'meta': RandomForestMeta, 'hybnn': HybNNModel, 'svr': SvrModel}
    for role, model in models.items():
        if not isinstance(model, expected[role]):
            raise ModelFormatError(f"{path}: '{role}' entry holds a {type(model).__name__}")
    return MetaBundle(**models)
