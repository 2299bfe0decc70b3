"""Item-based AutoRec base models with L1/L2 loss and L1/L2 weight penalty.

One training example is the partially observed rating column of an item.
The encoder sees the column zero-filled at unobserved users, the decoder
reconstructs all users, and the loss only counts observed users::

    h = sigmoid(V @ x + mu)
    f(x) = W @ h + b
    objective = sum_observed loss(x - f(x)) + lambda/2 * (pen(V) + pen(W))

with ``loss`` either ``|.|`` or ``(.)**2`` and ``pen`` either the entrywise
L1 norm or the squared Frobenius norm. Biases are not penalised.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .dataset import RatingDataset
from .errors import ConfigError, NoObservationError, TrainingError

__all__ = [
    "Norm",
    "BaseModelConfig",
    "ModelParams",
    "GradientSet",
    "AdamState",
    "VARIANTS",
    "variant_config",
    "init_params",
    "forward",
    "forward_batch",
    "masked_loss",
    "regularization_term",
    "objective",
    "batch_objective",
    "backward",
    "batch_gradients",
    "optimizer_step",
    "train_epoch",
    "predict_full",
]


class Norm(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"


# (loss norm, penalty norm) of the four variants, in ensemble order
VARIANTS = {
    "MMA-1": (Norm.L1, Norm.L1),
    "MMA-2": (Norm.L1, Norm.L2),
    "MMA-3": (Norm.L2, Norm.L1),
    "MMA-4": (Norm.L2, Norm.L2),
}


@dataclass(frozen=True)
class BaseModelConfig:
    """Hyperparameters of one base model.

    ``batch_size=None`` trains per item (one optimizer step per column);
    an integer groups that many columns into one step and ``"full"`` takes
    one step per epoch over all columns. A mini-batch
    objective is the sum of its per-column objectives, so the penalty is
    counted once per column whatever the batch size.
    """

    loss_norm: Norm = Norm.L2
    reg_norm: Norm = Norm.L2
    reg_lambda: float = 0.01
    hidden_dim: int = 500
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: Union[int, str, None] = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "loss_norm", Norm(self.loss_norm))
        object.__setattr__(self, "reg_norm", Norm(self.reg_norm))
        if not self.reg_lambda >= 0:
            raise ConfigError(f"reg_lambda must be >= 0, got {self.reg_lambda!r}")
        if self.hidden_dim < 1:
            raise ConfigError(f"hidden_dim must be >= 1, got {self.hidden_dim!r}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs!r}")
        bs = self.batch_size
        if not (bs is None or bs == "full" or (isinstance(bs, int) and bs >= 1)):
            raise ConfigError(f"batch_size must be None, 'full' or an int >= 1, got {bs!r}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigError("invalid Adam constants")

    @property
    def variant(self) -> str:
        for name, pair in VARIANTS.items():
            if pair == (self.loss_norm, self.reg_norm):
                return name
        raise AssertionError("unreachable")


def variant_config(name: str, **overrides) -> BaseModelConfig:
    """Config of variant ``"MMA-1"`` .. ``"MMA-4"`` with optional overrides."""
    try:
        loss_norm, reg_norm = VARIANTS[name]
    except KeyError:
        raise ConfigError(f"unknown variant {name!r}; expected one of {list(VARIANTS)}") from None
    return BaseModelConfig(loss_norm=loss_norm, reg_norm=reg_norm, **overrides)


@dataclass
class ModelParams:
    V: np.ndarray   # (hidden, users) encoder weights
    mu: np.ndarray  # (hidden,)
    W: np.ndarray   # (users, hidden) decoder weights
    b: np.ndarray   # (users,)

    def copy(self) -> "ModelParams":
        return ModelParams(self.V.copy(), self.mu.copy(), self.W.copy(), self.b.copy())

    def blocks(self):
        return (self.V, self.mu, self.W, self.b)

    @property
    def num_users(self) -> int:
        return self.W.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.V.shape[0]

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.blocks())


@dataclass
class GradientSet:
    dV: np.ndarray
    dmu: np.ndarray
    dW: np.ndarray
    db: np.ndarray

    def blocks(self):
        return (self.dV, self.dmu, self.dW, self.db)

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.blocks())


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls([np.zeros_like(a) for a in params.blocks()],
                   [np.zeros_like(a) for a in params.blocks()])

    def copy(self) -> "AdamState":
        return AdamState([a.copy() for a in self.m], [a.copy() for a in self.v], self.t)


def init_params(config: BaseModelConfig, num_users: int, seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    if num_users < 1 or config.hidden_dim < 1:
        raise ConfigError("num_users and hidden_dim must be >= 1")
    h = config.hidden_dim
    limit = math.sqrt(6.0 / (h + num_users))
    rng = np.random.default_rng(seed)
    V = rng.uniform(-limit, limit, size=(h, num_users))
    W = rng.uniform(-limit, limit, size=(num_users, h))
    return ModelParams(V, np.zeros(h), W, np.zeros(num_users))


def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(params: ModelParams, column) -> np.ndarray:
    """Reconstruct one item column given as ``(user_ids, ratings)``."""
    users, ratings = column
    users = np.asarray(users, dtype=np.int64)
    z = params.V[:, users] @ np.asarray(ratings, dtype=np.float64) + params.mu
    return params.W @ _sigmoid(z) + params.b


def forward_batch(params: ModelParams, X: np.ndarray):
    """Reconstruct a stack of zero-filled columns ``X`` of shape (B, users).

    Returns ``(output, hidden)``, both with one row per column.
    """
    H = _sigmoid(X @ params.V.T + params.mu)
    return H @ params.W.T + params.b, H


def masked_loss(pred: np.ndarray, column, loss_norm) -> float:
    users, ratings = column
    resid = np.asarray(ratings, dtype=np.float64) - pred[np.asarray(users, dtype=np.int64)]
    if Norm(loss_norm) is Norm.L1:
        return float(np.abs(resid).sum())
    return float(resid @ resid)


def regularization_term(params: ModelParams, reg_norm, reg_lambda: float) -> float:
    if not reg_lambda >= 0:
        raise ConfigError(f"reg_lambda must be >= 0, got {reg_lambda!r}")
    if reg_lambda == 0:
        return 0.0
    if Norm(reg_norm) is Norm.L1:
        total = np.abs(params.V).sum() + np.abs(params.W).sum()
    else:
        total = np.vdot(params.V, params.V) + np.vdot(params.W, params.W)
    return float(0.5 * reg_lambda * total)


def objective(params: ModelParams, column, config: BaseModelConfig) -> float:
    """Single-column objective: masked loss plus the weight penalty."""
    return (masked_loss(forward(params, column), column, config.loss_norm)
            + regularization_term(params, config.reg_norm, config.reg_lambda))


def batch_objective(params: ModelParams, X, M, config: BaseModelConfig) -> float:
    """Sum of :func:`objective` over the rows of ``X`` (mask ``M``)."""
    out, _ = forward_batch(params, X)
    R = (X - out) * M
    loss = np.abs(R).sum() if config.loss_norm is Norm.L1 else np.vdot(R, R)
    return float(loss) + len(X) * regularization_term(params, config.reg_norm, config.reg_lambda)


def batch_gradients(params: ModelParams, X, M, config: BaseModelConfig):
    """Exact (sub)gradient of :func:`batch_objective`.

    Uses ``sign(0) = 0`` at the L1 kinks. Returns ``(grads, objective)``.
    """
    out, H = forward_batch(params, X)
    R = (X - out) * M
    if config.loss_norm is Norm.L1:
        loss = np.abs(R).sum()
        dout = -np.sign(R)
    else:
        loss = np.vdot(R, R)
        dout = -2.0 * R
    db = dout.sum(axis=0)
    dW = dout.T @ H
    dZ = (dout @ params.W) * H * (1.0 - H)
    dmu = dZ.sum(axis=0)
    dV = dZ.T @ X
    lam = config.reg_lambda * len(X)
    if lam:
        if config.reg_norm is Norm.L1:
            dV += 0.5 * lam * np.sign(params.V)
            dW += 0.5 * lam * np.sign(params.W)
        else:
            dV += lam * params.V
            dW += lam * params.W
    obj = float(loss) + regularization_term(params, config.reg_norm, lam)
    return GradientSet(dV, dmu, dW, db), obj


def backward(params: ModelParams, column, config: BaseModelConfig) -> GradientSet:
    """Gradient of :func:`objective` for one non-empty item column."""
    users, ratings = column
    users = np.asarray(users, dtype=np.int64)
    if len(users) == 0:
        raise NoObservationError("backward() needs at least one observed rating")
    x = np.zeros((1, params.num_users))
    m = np.zeros_like(x)
    x[0, users] = ratings
    m[0, users] = 1.0
    grads, _ = batch_gradients(params, x, m, config)
    return grads


def optimizer_step(params: ModelParams, grads: GradientSet, state: AdamState,
                   config: BaseModelConfig):
    """One Adam update, in place. Returns ``(params, state)``.

    Under an L1 penalty a weight whose update would cross zero is set to
    exactly zero instead (truncation at the kink), which is what makes the
    L1-penalised variants produce exactly sparse weight matrices.
    """
    if not grads.all_finite():
        bad = [n for n, g in zip(("V", "mu", "W", "b"), grads.blocks()) if not np.isfinite(g).all()]
        raise TrainingError(f"non-finite gradient in {', '.join(bad)} at step {state.t + 1}")
    b1, b2 = config.beta1, config.beta2
    state.t += 1
    step = config.learning_rate * math.sqrt(1.0 - b2 ** state.t) / (1.0 - b1 ** state.t)
    # eps is applied to the bias-corrected second moment
    eps_hat = config.eps * math.sqrt(1.0 - b2 ** state.t)
    truncate = config.reg_norm is Norm.L1 and config.reg_lambda > 0
    # overflow surfaces as a non-finite gradient at the next step
    with np.errstate(over="ignore", invalid="ignore"):
        _adam_update(params, grads, state, b1, b2, step, eps_hat, truncate)
    return params, state


def _adam_update(params, grads, state, b1, b2, step, eps_hat, truncate):
    for k, (p, g, m, v) in enumerate(zip(params.blocks(), grads.blocks(), state.m, state.v)):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        upd = step * m / (np.sqrt(v) + eps_hat)
        if truncate and k in (0, 2):
            new = p - upd
            new[(p * new) < 0] = 0.0
            p[...] = new
        else:
            p -= upd


def train_epoch(params: ModelParams, train: RatingDataset, config: BaseModelConfig,
                state: AdamState, rng: np.random.Generator):
    """One pass over the non-empty training columns in shuffled order.

    Returns ``(params, mean_objective)`` where the mean is taken over the
    visited columns of the pre-update per-step objectives.
    """
    lengths = train.column_lengths()
    items = np.flatnonzero(lengths > 0)
    if len(items) == 0:
        raise TrainingError("training partition has no observations")
    items = items[rng.permutation(len(items))]
    bs = len(items) if config.batch_size == "full" else (config.batch_size or 1)
    total = 0.0
    if bs >= len(items):
        # column order is irrelevant to a single full-batch step
        X, M = train.dense_columns()
        if len(items) < train.num_items:
            X, M = X[np.sort(items)], M[np.sort(items)]
        batches = [(X, M)]
    else:
        batches = (train.dense_columns(items[s:s + bs]) for s in range(0, len(items), bs))
    for X, M in batches:
        grads, obj = batch_gradients(params, X, M, config)
        total += obj
        optimizer_step(params, grads, state, config)
    return params, total / len(items)


def predict_full(params: ModelParams, train: RatingDataset, chunk: int = 512) -> np.ndarray:
    """Clipped ``(num_users, num_items)`` reconstruction of the rating matrix.

    Column ``k`` is the decoder output for item ``k``'s training column;
    items without training ratings all receive ``W @ sigmoid(mu) + b``.
    """
    X, _ = train.dense_columns()
    out = np.empty((train.num_users, train.num_items))
    for start in range(0, train.num_items, chunk):
        pred, _ = forward_batch(params, X[start:start + chunk])
        out[:, start:start + chunk] = pred.T
    np.clip(out, train.scale_min, train.scale_max, out=out)
    return out
