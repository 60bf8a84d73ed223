"""
Value-function approximators behind one fit / predict interface.

All three map the five features (t, prior storage, buy, sell, store)
to a predicted value-to-go:

- LinearModel: ordinary least squares via the normal equations.
- SvrModel: linear epsilon-insensitive SVR, primal subgradient descent.
- NnModel: 5-10-10-1 ReLU network with dropout, trained with Adam on
  mean squared log error of shifted labels.
"""
import functools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DomainError, SingularMatrixError
from .streams import derive

logger = logging.getLogger(__name__)

FEATURE_NAMES = ("t", "prior_storage", "buy", "sell", "store")
N_FEATURES = len(FEATURE_NAMES)
ARCHITECTURES = ("ols", "svr", "nn")


def as_design(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise DomainError(f"expected rows of {N_FEATURES} features, got shape {X.shape}")
    return X


def _standardize(X):
    offset = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return offset, scale


@dataclass(frozen=True)
class FitReport:
    """Losses in the architecture's own metric on each partition."""

    metric: str
    train_loss: float
    validation_loss: float
    test_loss: float
    best_epoch: int = 0
    history: tuple = ()


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 100
    epochs: int = 15
    train_fraction: float = 0.7
    validation_fraction: float = 0.2
    step: float = 0.001
    decay1: float = 0.9
    decay2: float = 0.999
    stabilizer: float = 1e-7
    dropout: float = 0.2
    hidden: tuple = (10, 10)
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise DomainError("batch size and epochs must be positive")
        for name in ("train_fraction", "validation_fraction"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {value}")
        if self.step <= 0 or self.stabilizer <= 0:
            raise DomainError("Adam step and stabilizer must be positive")
        if not 0.0 <= self.decay1 < 1.0 or not 0.0 <= self.decay2 < 1.0:
            raise DomainError("Adam decay rates must lie in [0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise DomainError(f"dropout must lie in [0, 1), got {self.dropout}")


def split_indices(n, cfg, rng):
    """
    Shuffle and split into (fit, validation, test). The test partition
    is the held-out 1 - train_fraction; validation is carved out of the
    training partition so the test rows are never trained on.
    """
    order = rng.permutation(n)
    n_train = int(round(cfg.train_fraction * n))
    n_val = int(round(cfg.validation_fraction * n_train))
    train, test = order[:n_train], order[n_train:]
    return train[n_val:], train[:n_val], test


# ---------------------------------------------------------------------------
#  Ordinary least squares
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearModel:
    intercept: float
    coef: np.ndarray

    kind = "ols"


def fit_ols(X, y, fallback=True):
    X = as_design(X)
    y = np.asarray(y, dtype=float)
    if len(y) < N_FEATURES + 1:
        raise DomainError(f"OLS needs at least {N_FEATURES + 1} samples, got {len(y)}")

    design = np.column_stack([np.ones(len(y)), X])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        if not fallback:
            raise SingularMatrixError("design matrix is rank deficient")
        logger.warning("Rank-deficient design matrix; using the minimum-norm least-squares fit")
        beta = np.linalg.lstsq(design, y, rcond=None)[0]
    else:
        beta = np.linalg.solve(design.T @ design, design.T @ y)
    return LinearModel(intercept=float(beta[0]), coef=beta[1:].copy())


# ---------------------------------------------------------------------------
#  Linear epsilon-insensitive SVR
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SvrParams:
    penalty: float = 1.0
    epsilon: float = 0.0
    max_iter: int = 1000
    tol: float = 1e-5
    step: float = 0.5
    patience: int = 100

    def __post_init__(self):
        if self.penalty <= 0 or self.max_iter < 1 or self.tol <= 0 or self.step <= 0:
            raise DomainError("SVR penalty, max_iter, tol and step must be positive")
        if self.epsilon < 0:
            raise DomainError(f"SVR epsilon must be nonnegative, got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class SvrModel:
    weights: np.ndarray
    bias: float
    params: SvrParams = field(default_factory=SvrParams)
    n_iter: int = 0

    kind = "svr"


def svr_objective(weights, bias, X, y, params):
    """1/2 ||w||^2 + Cp * sum of epsilon-insensitive losses."""
    residual = np.abs(y - as_design(X) @ weights - bias)
    return 0.5 * float(weights @ weights) + params.penalty * float(
        np.maximum(residual - params.epsilon, 0.0).sum()
    )


def fit_linear_svr(X, y, params=SvrParams()):
    """
    Full-batch subgradient descent on standardized data. The objective
    is divided by Cp * n so the step size does not depend on the sample
    count; the best iterate seen is returned.
    """
    X = as_design(X)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0:
        raise DomainError("SVR needs at least one sample")

    x_offset, x_scale = _standardize(X)
    y_offset = float(y.mean())
    y_scale = float(y.std()) or 1.0
    Z = (X - x_offset) / x_scale
    v = (y - y_offset) / y_scale
    eps = params.epsilon / y_scale
    reg = 1.0 / (params.penalty * n)

    def objective(u, c):
        loss = np.maximum(np.abs(v - Z @ u - c) - eps, 0.0).mean()
        return 0.5 * reg * float(u @ u) + float(loss)

    u = np.zeros(N_FEATURES)
    c = 0.0
    best = (objective(u, c), u.copy(), c)
    best_history = [best[0]]
    n_iter = 0
    for k in range(1, params.max_iter + 1):
        n_iter = k
        residual = v - Z @ u - c
        sign = (residual < -eps).astype(float) - (residual > eps).astype(float)
        grad_u = reg * u + Z.T @ sign / n
        grad_c = float(sign.mean())
        step = params.step / math.sqrt(k)
        u = u - step * grad_u
        c = c - step * grad_c

        value = objective(u, c)
        if value < best[0]:
            best = (value, u.copy(), c)
        best_history.append(best[0])
        if k >= params.patience and best_history[k - params.patience] - best[0] < params.tol:
            break

    _, u, c = best
    weights = u * y_scale / x_scale
    bias = y_offset + y_scale * c - float(weights @ x_offset)
    logger.debug(f"SVR stopped after {n_iter} iterations")
    return SvrModel(weights=weights, bias=bias, params=params, n_iter=n_iter)


# ---------------------------------------------------------------------------
#  Feed-forward network
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelShift:
    """
    y' = y + shift with shift = 1 - min label, then log1p. Defined for
    every y > -shift - 1.
    """

    shift: float

    @classmethod
    def for_labels(cls, y):
        return cls(shift=1.0 - float(np.min(y)))

    def transform(self, y):
        return np.log1p(np.asarray(y, dtype=float) + self.shift)

    def inverse_transform(self, z):
        return np.expm1(np.asarray(z, dtype=float)) - self.shift


@dataclass(eq=False)
class NnModel:
    weights: list
    biases: list
    dropout: float = 0.2
    x_offset: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    x_scale: np.ndarray = field(default_factory=lambda: np.ones(N_FEATURES))
    label_shift: float = 0.0

    kind = "nn"

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DomainError("network needs one bias vector per weight matrix")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise DomainError(f"layer {i} has inconsistent shapes {W.shape}, {b.shape}")
            if i and W.shape[0] != self.weights[i - 1].shape[1]:
                raise DomainError(f"layer {i} input size does not match previous layer")
        if self.weights[-1].shape[1] != 1:
            raise DomainError("network must have a single output")

    @property
    def layer_sizes(self):
        return (self.weights[0].shape[0],) + tuple(W.shape[1] for W in self.weights)

    def copy(self):
        return replace(
            self,
            weights=[W.copy() for W in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def _relu(z):
    return np.maximum(z, 0.0)


def _forward(model, X, rng=None):
    """Raw network output plus the cache needed for backpropagation."""
    a = (X - model.x_offset) / model.x_scale
    cache = []
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W + b
        mask = None
        a_in = a
        if i < last:
            a = _relu(z)
            if rng is not None and model.dropout > 0:
                keep = 1.0 - model.dropout
                mask = (rng.random(a.shape) < keep) / keep
                a = a * mask
        else:
            a = z
        cache.append((a_in, z, mask))
    return a[:, 0], cache


def nn_forward(model, X, training=False, rng=None):
    """
    Network output in log space. Dropout masks are applied only when
    training is set and a Generator is given.
    """
    X = as_design(X)
    out, _ = _forward(model, X, rng if training else None)
    return out


def loss_and_gradients(model, X, target, rng=None):
    """
    Mean squared error between the network output and the log-space
    target, with gradients for every weight and bias.
    """
    X = as_design(X)
    out, cache = _forward(model, X, rng)
    residual = out - target
    loss = float(np.mean(residual ** 2))

    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    delta = (2.0 / len(target)) * residual[:, np.newaxis]
    for i in range(len(model.weights) - 1, -1, -1):
        a_in, z, mask = cache[i]
        if i < len(model.weights) - 1:
            if mask is not None:
                delta = delta * mask
            delta = delta * (z > 0)
        grad_w[i] = a_in.T @ delta
        grad_b[i] = delta.sum(axis=0)
        delta = delta @ model.weights[i].T
    return loss, grad_w, grad_b


class Adam:
    """Adam with bias correction, updating parameter arrays in place."""

    def __init__(self, params, step=0.001, decay1=0.9, decay2=0.999, stabilizer=1e-7):
        self.step = step
        self.decay1 = decay1
        self.decay2 = decay2
        self.stabilizer = stabilizer
        self.moments = [np.zeros_like(p) for p in params]
        self.velocities = [np.zeros_like(p) for p in params]
        self.iterations = 0

    def update(self, params, grads):
        self.iterations += 1
        correction1 = 1.0 - self.decay1 ** self.iterations
        correction2 = 1.0 - self.decay2 ** self.iterations
        for p, g, m, v in zip(params, grads, self.moments, self.velocities):
            m *= self.decay1
            m += (1.0 - self.decay1) * g
            v *= self.decay2
            v += (1.0 - self.decay2) * g * g
            p -= self.step * (m / correction1) / (np.sqrt(v / correction2) + self.stabilizer)


def init_network(layer_sizes, rng, dropout=0.2):
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NnModel(weights=weights, biases=biases, dropout=dropout)


def nn_train(X, y, cfg=TrainConfig()):
    """
    Train on the fit partition, evaluate MSLE on the validation partition
    after every epoch, and return the snapshot with the lowest
    validation loss together with its FitReport.
    """
    X = as_design(X)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < cfg.batch_size:
        raise DomainError(f"need at least {cfg.batch_size} samples, got {n}")

    shift = LabelShift.for_labels(y)
    target = shift.transform(y)
    fit_idx, val_idx, test_idx = split_indices(n, cfg, derive(cfg.seed, "split"))
    if len(val_idx) == 0:
        val_idx = fit_idx

    model = init_network(
        (N_FEATURES,) + tuple(cfg.hidden) + (1,), derive(cfg.seed, "nn_init"), cfg.dropout
    )
    model.x_offset, model.x_scale = _standardize(X[fit_idx])
    model.label_shift = shift.shift
    model.biases[-1][:] = float(target[fit_idx].mean())

    def msle(idx):
        if len(idx) == 0:
            return float("nan")
        return float(np.mean((nn_forward(model, X[idx]) - target[idx]) ** 2))

    if np.ptp(y) == 0:
        # constant labels: zero weights give an exact constant predictor
        for W in model.weights:
            W[:] = 0.0
        logger.warning("All labels identical; returning a constant predictor")
        return model, FitReport("msle", 0.0, 0.0, 0.0)

    params = model.weights + model.biases
    optimizer = Adam(params, cfg.step, cfg.decay1, cfg.decay2, cfg.stabilizer)
    shuffle_rng = derive(cfg.seed, "shuffle")
    dropout_rng = derive(cfg.seed, "dropout")

    best = (msle(val_idx), model.copy(), 0)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = fit_idx[shuffle_rng.permutation(len(fit_idx))]
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grad_w, grad_b = loss_and_gradients(model, X[batch], target[batch], dropout_rng)
            optimizer.update(params, grad_w + grad_b)
            epoch_losses.append(loss)
        val_loss = msle(val_idx)
        history.append((float(np.mean(epoch_losses)), val_loss))
        logger.debug(f"epoch {epoch}: train msle {history[-1][0]:.4f}, val msle {val_loss:.4f}")
        if val_loss < best[0]:
            best = (val_loss, model.copy(), epoch)

    val_loss, model, best_epoch = best
    report = FitReport(
        metric="msle",
        train_loss=msle(fit_idx),
        validation_loss=val_loss,
        test_loss=msle(test_idx),
        best_epoch=best_epoch,
        history=tuple(history),
    )
    return model, report


# ---------------------------------------------------------------------------
#  Prediction
# ---------------------------------------------------------------------------

def _shape_like(X, values):
    if np.ndim(X) == 1:
        return float(values[0])
    return values


@functools.singledispatch
def predict(model, X):
    raise TypeError(f"cannot predict with {type(model).__name__}")


@predict.register
def _(model: LinearModel, X):
    return _shape_like(X, as_design(X) @ model.coef + model.intercept)


@predict.register
def _(model: SvrModel, X):
    return _shape_like(X, as_design(X) @ model.weights + model.bias)


@predict.register
def _(model: NnModel, X):
    out = nn_forward(model, X)
    return _shape_like(X, LabelShift(model.label_shift).inverse_transform(out))


def _fit_linear(kind, X, y, cfg, svr_params):
    fit_idx, val_idx, test_idx = split_indices(len(y), cfg, derive(cfg.seed, "split"))
    if kind == "ols":
        model = fit_ols(X[fit_idx], y[fit_idx])

        def loss(idx):
            return float(np.mean((predict(model, X[idx]) - y[idx]) ** 2)) if len(idx) else float("nan")

        metric = "mse"
    else:
        model = fit_linear_svr(X[fit_idx], y[fit_idx], svr_params)

        def loss(idx):
            if not len(idx):
                return float("nan")
            residual = np.abs(predict(model, X[idx]) - y[idx])
            return float(np.maximum(residual - svr_params.epsilon, 0.0).mean())

        metric = "epsilon-insensitive"
    return model, FitReport(metric, loss(fit_idx), loss(val_idx), loss(test_idx))


def fit_model(kind, X, y, cfg=TrainConfig(), svr_params=SvrParams()):
    """Train the named architecture on the same fit/validation/test split."""
    X = as_design(X)
    y = np.asarray(y, dtype=float)
    if kind == "nn":
        return nn_train(X, y, cfg)
    if kind in ("ols", "svr"):
        return _fit_linear(kind, X, y, cfg, svr_params)
    raise DomainError(f"unknown architecture '{kind}'")


# ---------------------------------------------------------------------------
#  Plain-text model files
# ---------------------------------------------------------------------------

def _fmt(values):
    return ",".join(format(float(v), ".17g") for v in np.ravel(values))


def _floats(text):
    return np.array([float(v) for v in text.split(",")]) if text else np.zeros(0)


def dumps_model(model):
    lines = [f"kind={model.kind}"]
    if model.kind == "ols":
        lines += [f"intercept={_fmt([model.intercept])}", f"coef={_fmt(model.coef)}"]
    elif model.kind == "svr":
        p = model.params
        lines += [
            f"weights={_fmt(model.weights)}",
            f"bias={_fmt([model.bias])}",
            f"penalty={_fmt([p.penalty])}",
            f"epsilon={_fmt([p.epsilon])}",
            f"max_iter={p.max_iter}",
            f"tol={_fmt([p.tol])}",
            f"step={_fmt([p.step])}",
            f"patience={p.patience}",
            f"n_iter={model.n_iter}",
        ]
    else:
        lines += [
            f"layer_sizes={','.join(str(s) for s in model.layer_sizes)}",
            f"dropout={_fmt([model.dropout])}",
            f"label_shift={_fmt([model.label_shift])}",
            f"x_offset={_fmt(model.x_offset)}",
            f"x_scale={_fmt(model.x_scale)}",
        ]
        for i, (W, b) in enumerate(zip(model.weights, model.biases)):
            lines += [f"w{i}={_fmt(W)}", f"b{i}={_fmt(b)}"]
    return "\n".join(lines) + "\n"


def loads_model(text):
    fields = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DomainError(f"malformed model line: {line!r}")
        fields[key.strip()] = value.strip()

    kind = fields.get("kind")
    try:
        if kind == "ols":
            return LinearModel(intercept=float(fields["intercept"]), coef=_floats(fields["coef"]))
        if kind == "svr":
            params = SvrParams(
                penalty=float(fields["penalty"]),
                epsilon=float(fields["epsilon"]),
                max_iter=int(fields["max_iter"]),
                tol=float(fields["tol"]),
                step=float(fields["step"]),
                patience=int(fields["patience"]),
            )
            return SvrModel(
                weights=_floats(fields["weights"]),
                bias=float(fields["bias"]),
                params=params,
                n_iter=int(fields["n_iter"]),
            )
        if kind == "nn":
            sizes = [int(s) for s in fields["layer_sizes"].split(",")]
            weights = []
            biases = []
            for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
                weights.append(_floats(fields[f"w{i}"]).reshape(fan_in, fan_out))
                biases.append(_floats(fields[f"b{i}"]))
            return NnModel(
                weights=weights,
                biases=biases,
                dropout=float(fields["dropout"]),
                x_offset=_floats(fields["x_offset"]),
                x_scale=_floats(fields["x_scale"]),
                label_shift=float(fields["label_shift"]),
            )
    except KeyError as exc:
        raise DomainError(f"model file is missing field {exc}") from None
    raise DomainError(f"unknown model kind {kind!r}")


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
