"""Self-adaptive exponential weighting of the four base models.

After every epoch each base model's validation RMSE (its *separate loss*)
is added to a running total (its *accumulative loss*), and the ensemble
weights are the softmax of ``-delta * accumulative_loss``. A model whose
validation error keeps falling gains weight; one that stalls loses it.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dataset import SplitDataset
from .errors import EmptyDatasetError, EnsembleStateError, TrainingError
from .metrics import mae, rmse
from .model import (
    AdamState,
    BaseModelConfig,
    init_params,
    predict_full,
    train_epoch,
)

__all__ = [
    "NUM_MODELS",
    "EnsembleState",
    "EpochRecord",
    "JointTrainingResult",
    "separate_loss",
    "accumulate",
    "ensemble_weights",
    "softmax_weights",
    "ensemble_predict",
    "run_joint_training",
    "delta_sweep",
    "TRACE_HEADER",
]

log = logging.getLogger(__name__)

NUM_MODELS = 4


@dataclass(frozen=True)
class EnsembleState:
    delta: float = 20.0
    separate_loss_history: tuple = ()
    accumulative_loss: np.ndarray = field(default_factory=lambda: np.zeros(NUM_MODELS))
    weights: np.ndarray = field(default_factory=lambda: np.full(NUM_MODELS, 1.0 / NUM_MODELS))

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise EnsembleStateError(f"delta must be a positive finite number, got {self.delta!r}")

    @property
    def num_models(self) -> int:
        return len(self.accumulative_loss)

    @property
    def epochs(self) -> int:
        return len(self.separate_loss_history)


def separate_loss(preds: Sequence[np.ndarray], valid) -> np.ndarray:
    """Validation RMSE of every base model."""
    if valid.nnz == 0:
        raise EmptyDatasetError("separate loss needs a non-empty validation partition")
    return np.array([rmse(p, valid) for p in preds])


def softmax_weights(accumulative_loss, delta: float) -> np.ndarray:
    """``exp(-delta * Al) / sum(exp(-delta * Al))``, shifted by ``min(Al)``."""
    al = np.asarray(accumulative_loss, dtype=np.float64)
    e = np.exp(-delta * (al - al.min()))
    return e / e.sum()


def ensemble_weights(state: EnsembleState) -> np.ndarray:
    return softmax_weights(state.accumulative_loss, state.delta)


def accumulate(state: EnsembleState, sl) -> EnsembleState:
    """Add one epoch of separate losses; returns the new state with weights."""
    sl = np.asarray(sl, dtype=np.float64)
    if sl.shape != state.accumulative_loss.shape:
        raise EnsembleStateError(f"expected {state.num_models} losses, got shape {sl.shape}")
    if not np.isfinite(sl).all() or (sl < 0).any():
        raise EnsembleStateError(f"separate losses must be finite and non-negative: {sl}")
    al = state.accumulative_loss + sl
    return EnsembleState(
        delta=state.delta,
        separate_loss_history=state.separate_loss_history + (sl,),
        accumulative_loss=al,
        weights=softmax_weights(al, state.delta),
    )


def ensemble_predict(preds: Sequence[np.ndarray], weights) -> np.ndarray:
    """Pointwise convex combination of the base predictions."""
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != len(preds):
        raise EnsembleStateError(f"{len(weights)} weights for {len(preds)} models")
    if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-9:
        raise EnsembleStateError(f"weights must lie on the simplex, got {weights}")
    out = weights[0] * preds[0]
    for w, p in zip(weights[1:], preds[1:]):
        out = out + w * p
    return out


TRACE_HEADER = (
    ["epoch"]
    + [f"sl{t}" for t in range(1, NUM_MODELS + 1)]
    + [f"al{t}" for t in range(1, NUM_MODELS + 1)]
    + [f"eps{t}" for t in range(1, NUM_MODELS + 1)]
    + ["ensemble_valid_rmse", "ensemble_valid_mae"]
)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    separate_loss: np.ndarray
    accumulative_loss: np.ndarray
    weights: np.ndarray
    valid_rmse: float
    valid_mae: float

    def as_row(self) -> list:
        return [self.epoch, *self.separate_loss.tolist(), *self.accumulative_loss.tolist(),
                *self.weights.tolist(), self.valid_rmse, self.valid_mae]

    def to_csv(self) -> str:
        return ",".join(str(v) if isinstance(v, int) else repr(float(v)) for v in self.as_row())


@dataclass
class JointTrainingResult:
    """Outcome of :func:`run_joint_training`.

    ``models`` and ``state`` are the snapshot taken at ``best_epoch`` (the
    epoch with the lowest ensemble validation RMSE; 0 means untrained).
    ``final_state`` is the ensemble state after the last epoch.
    ``valid_history`` holds, per epoch, the ``(4, valid.nnz)`` base
    predictions at the validation entries when recording was requested.
    """

    configs: list
    models: list
    state: EnsembleState
    final_state: EnsembleState
    trace: list
    best_epoch: int
    seeds: list
    valid_history: list = field(default_factory=list)

    @property
    def weights(self) -> np.ndarray:
        return self.state.weights

    def predictions(self, train) -> list:
        return [predict_full(p, train) for p in self.models]


def model_seeds(seed: int, n: int = NUM_MODELS) -> list[tuple[int, int]]:
    """Independent ``(init_seed, shuffle_seed)`` pairs derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [tuple(int(x) for x in c.generate_state(2)) for c in children]


def run_joint_training(
    configs: Sequence[BaseModelConfig],
    split: SplitDataset,
    delta: float = 20.0,
    epochs: int = 100,
    seed: int = 0,
    max_workers: int = 1,
    on_epoch: Optional[Callable[[EpochRecord, "JointTrainingResult"], None]] = None,
    record_valid: bool = False,
) -> JointTrainingResult:
    """Train four base models side by side and weight them every epoch.

    Only the validation partition is consulted for weighting and snapshot
    selection; ``split.test`` is never read here. ``on_epoch`` is called
    after every epoch with the new trace record and the current result
    (whose snapshot fields reflect the best epoch so far).
    """
    configs = list(configs)
    if len(configs) != NUM_MODELS:
        raise EnsembleStateError(f"expected {NUM_MODELS} base configs, got {len(configs)}")
    train, valid = split.train, split.valid
    if train.nnz == 0:
        raise EmptyDatasetError("training partition is empty")
    if valid.nnz == 0:
        raise EmptyDatasetError("validation partition is empty")
    seeds = model_seeds(seed)
    params = [init_params(c, train.num_users, s[0]) for c, s in zip(configs, seeds)]
    adam = [AdamState.zeros_like(p) for p in params]
    rngs = [np.random.default_rng(s[1]) for s in seeds]
    state = EnsembleState(delta=delta)
    result = JointTrainingResult(
        configs=configs,
        models=[p.copy() for p in params],
        state=state,
        final_state=state,
        trace=[],
        best_epoch=0,
        seeds=[list(s) for s in seeds],
    )
    best = math.inf

    def step(t, n):
        try:
            train_epoch(params[t], train, configs[t], adam[t], rngs[t])
            if not params[t].all_finite():
                raise TrainingError("parameters became non-finite")
        except TrainingError as exc:
            raise TrainingError(str(exc), variant=configs[t].variant, epoch=n) from exc
        return predict_full(params[t], train)

    pool = ThreadPoolExecutor(max_workers) if max_workers > 1 else None
    try:
        for n in range(1, epochs + 1):
            if pool is None:
                preds = [step(t, n) for t in range(NUM_MODELS)]
            else:
                preds = list(pool.map(step, range(NUM_MODELS), [n] * NUM_MODELS))
            if record_valid:
                result.valid_history.append(np.stack([p[valid.users, valid.items] for p in preds]))
            state = accumulate(state, separate_loss(preds, valid))
            ens = ensemble_predict(preds, state.weights)
            rec = EpochRecord(n, state.separate_loss_history[-1], state.accumulative_loss,
                              state.weights, rmse(ens, valid), mae(ens, valid))
            result.trace.append(rec)
            result.final_state = state
            if rec.valid_rmse < best:
                best = rec.valid_rmse
                result.best_epoch = n
                result.models = [p.copy() for p in params]
                result.state = state
            log.info("epoch %d valid rmse %.4f (best %.4f @ %d) weights %s",
                     n, rec.valid_rmse, best, result.best_epoch, np.round(state.weights, 3))
            if on_epoch is not None:
                on_epoch(rec, result)
    finally:
        if pool is not None:
            pool.shutdown()
    return result


def delta_sweep(result: JointTrainingResult, valid, deltas) -> dict:
    """Replay a recorded run under other balance factors.

    The base models never see ``delta``, so the separate-loss history and
    the recorded validation predictions of one run determine the ensemble
    trajectory for every ``delta``. Returns ``{delta: (best_rmse, best_epoch)}``.
    """
    if not result.valid_history:
        raise EnsembleStateError("run_joint_training(record_valid=True) is required for a sweep")
    al = np.cumsum(np.stack([r.separate_loss for r in result.trace]), axis=0)
    out = {}
    for delta in deltas:
        best = (math.inf, 0)
        for n, (row, vp) in enumerate(zip(al, result.valid_history), 1):
            ens = softmax_weights(row, delta) @ vp
            resid = valid.ratings - ens
            score = math.sqrt(math.fsum((resid * resid).tolist()) / len(resid))
            if score < best[0]:
                best = (score, n)
        out[delta] = best
    return out
