"""Model and bundle files"""

import numpy as np
import pytest

from core_utils import ModelFormatError
from hybnn import HybNNConfig, init_model, train_hybnn
from meta_forest import ForestConfig, train_forest
from model_io import load_bundle, load_model, model_kind, save_bundle, save_model
from svr_model import SvrConfig, train_svr


@pytest.fixture
def models(rng):
    X = rng.random((60, 21))
    y = (X[:, 0] > 0.5).astype(np.int64)
    hybnn, _ = train_hybnn(X[:, :17], rng.random(60), HybNNConfig(epochs=2, hidden_extractor=4, hidden_regressor=3))
    svr, _ = train_svr(X[:, :17], rng.random(60), SvrConfig(epsilon=0.05))
    forest = train_forest(X, y, ForestConfig(n_trees=3, max_depth=4), seed=5)
    return X, hybnn, svr, forest


def test_models_reload_with_identical_predictions(tmp_path, models):
    X, hybnn, svr, forest = models
    for name, model, features in (("h", hybnn, X[:, :17]), ("s", svr, X[:, :17]), ("f", forest, X)):
        path = tmp_path / f"{name}.model"
        save_model(path, model)
        again = load_model(path)
        assert type(again) is type(model)
        np.testing.assert_array_equal(again.predict(features), model.predict(features))
    assert model_kind(tmp_path / "f.model") == "forest"


def test_forest_keeps_training_settings(tmp_path, models):
    _, _, _, forest = models
    save_model(tmp_path / "f.model", forest)
    again = load_model(tmp_path / "f.model")
    assert again.config == forest.config
    assert (again.seed, again.oob_score) == (forest.seed, forest.oob_score)


def test_header_is_versioned(tmp_path, rng):
    path = tmp_path / "h.model"
    save_model(path, init_model(rng))
    lines = path.read_text().splitlines()
    assert lines[:3] == ["HYBMT-MODEL 1", "kind hybnn", "dims 17 32 16"]
    assert lines[-1] == "end"


@pytest.mark.parametrize("text", [
    "",
    "NOT-A-MODEL 1\nkind hybnn\nend\n",
    "HYBMT-MODEL 2\nkind hybnn\nend\n",
    "HYBMT-MODEL 1\nkind hybnn\ndims 17 2 1\n",
    "HYBMT-MODEL 1\ndims 1 1\nend\n",
    "HYBMT-MODEL 1\nkind svr\ndims 1 1\nblock dual_coef 1 2\n0.5\nend\n",
    "HYBMT-MODEL 1\nkind hybnn\ndims 17 2 1\nblock W1 1 1\n0.5\nend\n",
    "HYBMT-MODEL 1\nkind tree\ndims 1\nend\n",
    "HYBMT-MODEL 1\nkind hybnn\nweights 3\nend\n",
])
def test_malformed_files(tmp_path, text):
    path = tmp_path / "bad.model"
    path.write_text(text)
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_missing_model_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "absent.model")


def test_bundle_round_trip(tmp_path, models):
    X, hybnn, svr, forest = models
    sub = tmp_path / "models"
    sub.mkdir()
    save_model(sub / "meta.model", forest)
    save_model(sub / "hybnn.model", hybnn)
    save_model(tmp_path / "svr.model", svr)
    save_bundle(tmp_path / "hybmt.bundle", sub / "meta.model", sub / "hybnn.model", tmp_path / "svr.model")
    assert (tmp_path / "hybmt.bundle").read_text().splitlines() == [
        "HYBMT-BUNDLE 1", "meta models/meta.model", "hybnn models/hybnn.model", "svr svr.model"]
    bundle = load_bundle(tmp_path / "hybmt.bundle")
    np.testing.assert_array_equal(bundle.meta.predict(X), forest.predict(X))
    np.testing.assert_array_equal(bundle.svr.predict(X[:, :17]), svr.predict(X[:, :17]))


def test_bundle_members_must_sit_below_it(tmp_path, models):
    forest = models[3]
    inner = tmp_path / "inner"
    inner.mkdir()
    save_model(tmp_path / "meta.model", forest)
    with pytest.raises(ModelFormatError):
        save_bundle(inner / "hybmt.bundle", tmp_path / "meta.model", tmp_path / "meta.model", tmp_path / "meta.model")


def test_bundle_checks_roles(tmp_path, models):
    _, hybnn, svr, forest = models
    save_model(tmp_path / "meta.model", forest)
    save_model(tmp_path / "hybnn.model", hybnn)
    save_model(tmp_path / "svr.model", svr)
    save_bundle(tmp_path / "swapped.bundle", tmp_path / "meta.model", tmp_path / "svr.model", tmp_path / "hybnn.model")
    with pytest.raises(ModelFormatError):
        load_bundle(tmp_path / "swapped.bundle")
    (tmp_path / "short.bundle").write_text("HYBMT-BUNDLE 1\nmeta meta.model\n")
    with pytest.raises(ModelFormatError):
        load_bundle(tmp_path / "short.bundle")
