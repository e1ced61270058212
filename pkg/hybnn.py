#!/usr/bin/env python3
"""
HybNN regressor
Skip-connection feed-forward network predicting the no-backtrack probability of a net,
trained with MSE and Adam by explicit backpropagation.
"""

import logging
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from core_utils import SeedStreams, TrainingError, ValidationError, check_sample_weight, performance_monitor

logger = logging.getLogger(__name__)

INPUT_DIM = 17
PARAM_NAMES = ('W1', 'b1', 'W2', 'b2', 'W3', 'b3', 'W4', 'b4')


@dataclass(frozen=True)
class HybNNConfig:
    """Network widths and optimizer settings"""
    hidden_extractor: int = 32
    hidden_regressor: int = 16
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    epochs: int = 200
    batch_size: int = 256
    patience: int = 20
    validation_fraction: float = 0.1

    @classmethod
    def from_config(cls, section: Mapping[str, Any]) -> "HybNNConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in section.items() if k in known})


@dataclass(frozen=True, eq=False)
class HybNNModel:
    """
    Extractor W1 (17 x H1), W2 (H1 x 17); regressor W3 (17 x H2), W4 (H2 x 1)

    p = sigmoid(relu((x + E(x)) W3 + b3) W4 + b4) with E(x) = relu(relu(x W1 + b1) W2 + b2)
    """
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray
    W4: np.ndarray
    b4: np.ndarray

    def __post_init__(self):
        d = self.W1.shape[0]
        h1, h2 = self.W1.shape[1], self.W3.shape[1]
        expected = {
            'W1': (d, h1), 'b1': (h1,), 'W2': (h1, d), 'b2': (d,),
            'W3': (d, h2), 'b3': (h2,), 'W4': (h2, 1), 'b4': (1,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValidationError(f"HybNN parameter {name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_sizes(self) -> Tuple[int, int]:
        return self.W1.shape[1], self.W3.shape[1]

    def params(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def with_params(self, params: Mapping[str, np.ndarray]) -> "HybNNModel":
        return replace(self, **{k: np.array(v, dtype=np.float64) for k, v in params.items()})

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _forward(self, _as_batch(self, X))['p']


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _as_batch(model: HybNNModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValidationError(f"HybNN expects {model.input_dim} features, got shape {X.shape}")
    return X


def _forward(model: HybNNModel, X: np.ndarray) -> Dict[str, np.ndarray]:
    h1 = X @ model.W1 + model.b1
    a1 = _relu(h1)
    h2 = a1 @ model.W2 + model.b2
    e = _relu(h2)
    s = X + e
    h3 = s @ model.W3 + model.b3
    a3 = _relu(h3)
    z = a3 @ model.W4 + model.b4
    return {'X': X, 'h1': h1, 'a1': a1, 'h2': h2, 's': s, 'h3': h3, 'a3': a3, 'p': _sigmoid(z)[:, 0]}


def hybnn_forward(model: HybNNModel, x: np.ndarray):
    """Predicted probability for one feature vector (float) or a batch (array)"""
    single = np.ndim(x) == 1
    p = _forward(model, _as_batch(model, x))['p']
    return float(p[0]) if single else p


def row_shares(weight: Optional[np.ndarray], n: int) -> np.ndarray:
    """Row weights normalized to sum 1; uniform when weight is None"""
    weight = check_sample_weight(weight, n)
    if weight is None:
        return np.full(n, 1.0 / n)
    return weight / weight.sum()


def loss_and_gradients(model: HybNNModel, X: np.ndarray, y: np.ndarray,
                       weight: Optional[np.ndarray] = None) -> Tuple[float, Dict[str, np.ndarray]]:
    """Weighted MSE over the batch (plain MSE without weights) and its gradient for every parameter"""
    cache = _forward(model, X)
    p = cache['p']
    diff = p - y
    share = row_shares(weight, X.shape[0])
    loss = float(np.sum(share * diff ** 2))

    dz = (2.0 * share * diff * p * (1.0 - p))[:, None]
    grads = {'W4': cache['a3'].T @ dz, 'b4': dz.sum(axis=0)}
    dh3 = (dz @ model.W4.T) * (cache['h3'] > 0)
    grads['W3'] = cache['s'].T @ dh3
    grads['b3'] = dh3.sum(axis=0)
    ds = dh3 @ model.W3.T
    # the skip sum passes ds to both the input and the extractor output
    dh2 = ds * (cache['h2'] > 0)
    grads['W2'] = cache['a1'].T @ dh2
    grads['b2'] = dh2.sum(axis=0)
    dh1 = (dh2 @ model.W2.T) * (cache['h1'] > 0)
    grads['W1'] = X.T @ dh1
    grads['b1'] = dh1.sum(axis=0)
    return loss, grads


def init_model(rng: np.random.Generator, input_dim: int = INPUT_DIM, hidden_extractor: int = 32,
               hidden_regressor: int = 16) -> HybNNModel:
    """Weights and biases of each layer uniform in (-sqrt(k), sqrt(k)) with k = 1 / fan_in"""
    def layer(fan_in: int, fan_out: int) -> Tuple[np.ndarray, np.ndarray]:
        bound = np.sqrt(1.0 / fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out)), rng.uniform(-bound, bound, size=fan_out)

    W1, b1 = layer(input_dim, hidden_extractor)
    W2, b2 = layer(hidden_extractor, input_dim)
    W3, b3 = layer(input_dim, hidden_regressor)
    W4, b4 = layer(hidden_regressor, 1)
    return HybNNModel(W1=W1, b1=b1, W2=W2, b2=b2, W3=W3, b3=b3, W4=W4, b4=b4)


@dataclass
class TrainingHistory:
    """Per-epoch losses and early-stopping outcome"""
    train_loss: List[float] = field(default_factory=list)
    validation_loss: List[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)


class _Adam:
    def __init__(self, params: Mapping[str, np.ndarray], config: HybNNConfig):
        self.config = config
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        c = self.config
        self.t += 1
        for k in params:
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * grads[k]
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * grads[k] ** 2
            m_hat = self.m[k] / (1.0 - c.beta1 ** self.t)
            v_hat = self.v[k] / (1.0 - c.beta2 ** self.t)
            params[k] = params[k] - c.learning_rate * m_hat / (np.sqrt(v_hat) + c.adam_epsilon)


def _mse(model: HybNNModel, X: np.ndarray, y: np.ndarray, weight: Optional[np.ndarray] = None) -> float:
    return float(np.sum(row_shares(weight, len(y)) * (_forward(model, X)['p'] - y) ** 2))


@performance_monitor("hybnn.train")
def train_hybnn(X: np.ndarray, y: np.ndarray, config: Optional[HybNNConfig] = None,
                seed: int = 0, sample_weight: Optional[np.ndarray] = None) -> Tuple[HybNNModel, TrainingHistory]:
    """
    Fit a HybNN with mini-batch Adam on MSE

    A validation share of the rows drives early stopping when there are enough rows;
    the parameters of the best validation epoch are returned. With sample_weight
    (walk counts of the labeled nets) every loss, validation included, is the
    weighted mean, so a net seen in many walks outweighs one seen once.

    Raises:
        TrainingError: empty data or a non-finite loss (the epoch is attached)
    """
    config = config or HybNNConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise TrainingError("HybNN training needs a non-empty feature matrix")
    if len(y) != len(X):
        raise ValidationError(f"{len(X)} feature rows but {len(y)} targets")
    if np.any((y < 0) | (y > 1)):
        raise ValidationError("HybNN targets must lie in [0, 1]")
    w = check_sample_weight(sample_weight, len(X))

    streams = SeedStreams(seed)
    model = init_model(streams.rng("hybnn.init"), X.shape[1], config.hidden_extractor, config.hidden_regressor)

    n_val = int(len(X) * config.validation_fraction)
    if n_val >= 1 and len(X) - n_val >= 1:
        order = streams.rng("hybnn.split").permutation(len(X))
        X_val, y_val = X[order[:n_val]], y[order[:n_val]]
        X_fit, y_fit = X[order[n_val:]], y[order[n_val:]]
        w_val = None if w is None else w[order[:n_val]]
        w_fit = None if w is None else w[order[n_val:]]
    else:
        X_val = y_val = w_val = None
        X_fit, y_fit, w_fit = X, y, w

    params = dict(model.params())
    optimizer = _Adam(params, config)
    shuffle = streams.rng("hybnn.shuffle")
    history = TrainingHistory()
    best_score, best_params, stale = np.inf, dict(params), 0

    for epoch in range(1, config.epochs + 1):
        order = shuffle.permutation(len(X_fit))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = loss_and_gradients(model, X_fit[batch], y_fit[batch],
                                             None if w_fit is None else w_fit[batch])
            if not np.isfinite(loss):
                error = TrainingError(f"Non-finite HybNN loss at epoch {epoch}")
                error.epoch = epoch
                raise error
            optimizer.step(params, grads)
            model = model.with_params(params)

        train_loss = _mse(model, X_fit, y_fit, w_fit)
        if not np.isfinite(train_loss):
            error = TrainingError(f"Non-finite HybNN loss at epoch {epoch}")
            error.epoch = epoch
            raise error
        history.train_loss.append(train_loss)
        score = train_loss
        if X_val is not None:
            score = _mse(model, X_val, y_val, w_val)
            history.validation_loss.append(score)

        if score < best_score:
            best_score, best_params, stale = score, dict(params), 0
            history.best_epoch = epoch
        else:
            stale += 1
            if X_val is not None and stale >= config.patience:
                history.stopped_early = True
                logger.debug(f"HybNN early stop at epoch {epoch}, best epoch {history.best_epoch}")
                break
        if epoch % 50 == 0:
            logger.debug(f"HybNN epoch {epoch}: train MSE {train_loss:.6g}")

    model = model.with_params(best_params)
    logger.info(f"HybNN trained on {len(X_fit)} rows: best epoch {history.best_epoch}, "
                f"MSE {best_score:.6g}")
    return model, history
