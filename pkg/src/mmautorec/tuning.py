"""Validation-driven choice of the per-variant penalty and the balance factor.

The procedure never touches the test partition:

1. For every candidate ``lambda`` train all four variants jointly with that
   penalty and keep each variant's best validation RMSE over the epochs.
2. Give every variant the ``lambda`` that scored best for it.
3. Train once more with those penalties while recording validation
   predictions, and replay the run under every candidate ``delta``
   (the base models do not depend on ``delta``).
4. Retrain with the winning ``delta`` when it differs from the one used in
   step 3, so the returned snapshot belongs to the chosen configuration.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import SplitDataset
from .ensemble import JointTrainingResult, delta_sweep, run_joint_training
from .model import VARIANTS, BaseModelConfig, variant_config

__all__ = ["LAMBDA_GRID", "DELTA_GRID", "TuningResult", "tune"]

log = logging.getLogger(__name__)

LAMBDA_GRID = (0.002, 0.01, 0.05, 0.1)
DELTA_GRID = (1.0, 10.0, 20.0, 50.0)


@dataclass
class TuningResult:
    lambdas: dict  # variant name -> chosen lambda
    lambda_scores: dict  # (variant name, lambda) -> best validation RMSE
    delta: float
    delta_scores: dict  # delta -> (best ensemble validation RMSE, epoch)
    result: JointTrainingResult
    runs: int = 0

    @property
    def configs(self) -> list:
        return self.result.configs


def _best_separate_loss(result: JointTrainingResult) -> np.ndarray:
    return np.stack([r.separate_loss for r in result.trace]).min(axis=0)


def tune(
    split: SplitDataset,
    template: dict | None = None,
    lambdas: Sequence[float] = LAMBDA_GRID,
    deltas: Sequence[float] = DELTA_GRID,
    epochs: int = 100,
    seed: int = 0,
    base_delta: float = 20.0,
) -> TuningResult:
    """Run the sweep described in the module docstring.

    ``template`` holds shared :class:`BaseModelConfig` overrides (hidden
    size, learning rate, batch mode...). Ties go to the earlier candidate.
    """
    template = dict(template or {})
    names = list(VARIANTS)
    scores: dict = {}
    runs: dict = {}
    for lam in lambdas:
        configs = [variant_config(n, reg_lambda=lam, **template) for n in names]
        res = run_joint_training(configs, split, delta=base_delta, epochs=epochs, seed=seed,
                                 record_valid=True)
        runs[(lam,) * len(names)] = res
        for n, s in zip(names, _best_separate_loss(res)):
            scores[(n, lam)] = float(s)
        log.info("lambda %g: best separate losses %s", lam,
                 [round(scores[(n, lam)], 4) for n in names])
    chosen = {n: min(lambdas, key=lambda lam, n=n: scores[(n, lam)]) for n in names}
    key = tuple(chosen[n] for n in names)
    configs: list[BaseModelConfig] = [variant_config(n, reg_lambda=chosen[n], **template)
                                      for n in names]
    count = len(lambdas)
    res = runs.get(key)
    if res is None:
        res = run_joint_training(configs, split, delta=base_delta, epochs=epochs, seed=seed,
                                 record_valid=True)
        count += 1
    sweep = delta_sweep(res, split.valid, deltas)
    best_delta = min(deltas, key=lambda d: sweep[d][0])
    if best_delta != base_delta:
        res = run_joint_training(configs, split, delta=best_delta, epochs=epochs, seed=seed)
        count += 1
    res.valid_history = []
    return TuningResult(lambdas=chosen, lambda_scores=scores, delta=float(best_delta),
                        delta_scores=sweep, result=res, runs=count)
