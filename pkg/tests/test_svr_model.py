"""Epsilon-SVR solver"""

import numpy as np
import pytest

from core_utils import SolverError, TrainingError, ValidationError
from svr_model import SvrConfig, kernel_matrix, resolve_gamma, svr_predict, train_svr


@pytest.fixture
def noisy_data(rng):
    X = rng.random((150, 17))
    z = np.clip(0.5 + 0.3 * np.sin(3 * X[:, 0]) + 0.05 * rng.normal(size=150), 0, 1)
    return X, z


def test_dual_constraints(noisy_data):
    X, z = noisy_data
    config = SvrConfig(C=1.0, epsilon=0.05)
    model, stats = train_svr(X, z, config)
    assert stats.kkt_gap <= config.tol
    assert abs(float(np.sum(model.dual_coef))) < 1e-6
    assert np.all(np.abs(model.dual_coef) <= config.C + 1e-12)
    assert stats.n_support == len(model.dual_coef) > 0


def test_linear_kernel_recovers_a_line():
    x = np.linspace(0.0, 1.0, 50)[:, None]
    z = 0.2 + 0.5 * x[:, 0]
    model, _ = train_svr(x, z, SvrConfig(C=10.0, epsilon=0.001, kernel='linear'))
    assert np.max(np.abs(model.raw_predict(x) - z)) < 1e-2


def test_wide_tube_has_no_support_vectors(noisy_data):
    X, z = noisy_data
    model, stats = train_svr(X, z, SvrConfig(epsilon=1.0))
    assert stats.n_support == 0
    np.testing.assert_allclose(model.raw_predict(X[:3]), (z.max() + z.min()) / 2)


def test_predictions_are_clamped(noisy_data):
    X, z = noisy_data
    model, _ = train_svr(X, z, SvrConfig(C=1.0, epsilon=0.05))
    p = model.predict(np.vstack([X, 20.0 * X]))
    assert np.all((p >= 0.0) & (p <= 1.0))
    assert isinstance(svr_predict(model, X[0]), float)
    assert svr_predict(model, X[:4]).shape == (4,)


def test_seeded_subsampling(noisy_data):
    X, z = noisy_data
    config = SvrConfig(max_samples=60)
    first, stats = train_svr(X, z, config, seed=2)
    second, _ = train_svr(X, z, config, seed=2)
    assert stats.n_samples == 60
    np.testing.assert_array_equal(first.support_vectors, second.support_vectors)


def test_iteration_cap(noisy_data):
    X, z = noisy_data
    with pytest.raises(SolverError):
        train_svr(X, z, SvrConfig(C=100.0, epsilon=0.0, tol=1e-9, max_iter=3))


@pytest.mark.parametrize("config", [SvrConfig(C=0.0), SvrConfig(epsilon=-0.1), SvrConfig(kernel='poly'),
                                    SvrConfig(gamma=-1.0)])
def test_invalid_configs(noisy_data, config):
    X, z = noisy_data
    with pytest.raises(ValidationError):
        train_svr(X, z, config)


def test_empty_data():
    with pytest.raises(TrainingError):
        train_svr(np.zeros((0, 17)), np.zeros(0))


def test_gamma_scale():
    X = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert resolve_gamma('scale', X) == pytest.approx(1.0 / (2 * 1.0))
    assert resolve_gamma('scale', np.ones((3, 2))) == 1.0
    assert resolve_gamma(0.25, X) == 0.25


def test_rbf_kernel_diagonal_is_one(rng):
    A = rng.random((5, 3))
    K = kernel_matrix(A, A, 'rbf', 0.7)
    np.testing.assert_allclose(np.diag(K), np.ones(5))
    np.testing.assert_allclose(K, K.T)


def test_unit_weights_change_nothing(noisy_data):
    X, z = noisy_data
    config = SvrConfig(C=1.0, epsilon=0.05)
    plain, _ = train_svr(X, z, config, seed=1)
    weighted, _ = train_svr(X, z, config, seed=1, sample_weight=np.ones(len(z)))
    np.testing.assert_array_equal(plain.dual_coef, weighted.dual_coef)
    assert plain.bias == weighted.bias


def test_weighted_box_bounds(noisy_data, rng):
    X, z = noisy_data
    weight = rng.integers(1, 20, size=len(z)).astype(float)
    config = SvrConfig(C=1.0, epsilon=0.05)
    model, stats = train_svr(X, z, config, sample_weight=weight)
    assert stats.kkt_gap <= config.tol
    assert abs(float(np.sum(model.dual_coef))) < 1e-6
    bounds = config.C * weight / weight.mean()
    support = [int(np.flatnonzero((X == sv).all(axis=1))[0]) for sv in model.support_vectors]
    assert np.all(np.abs(model.dual_coef) <= bounds[support] + 1e-12)


def test_heavy_rows_win_on_identical_features():
    X = np.zeros((10, 1))
    z = np.where(np.arange(10) < 5, 0.2, 0.8)
    weight = np.where(z == 0.8, 9.0, 1.0)
    model, _ = train_svr(X, z, SvrConfig(C=1.0, epsilon=0.01), sample_weight=weight)
    # every 0.8 row ends inside the tube
    assert svr_predict(model, X[0]) == pytest.approx(0.79, abs=0.02)


def test_rejects_mismatched_weights(noisy_data):
    X, z = noisy_data
    with pytest.raises(ValidationError):
        train_svr(X, z, sample_weight=np.ones(len(z) - 1))
