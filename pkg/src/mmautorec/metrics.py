"""RMSE / MAE over held-out partitions and the report built from them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import RatingDataset
from .errors import EmptyDatasetError

__all__ = ["residuals", "rmse", "mae", "EvalReport", "evaluate_report"]


def residuals(preds: np.ndarray, part: RatingDataset) -> np.ndarray:
    """``x - x_hat`` at every observed entry of ``part``."""
    if part.nnz == 0:
        raise EmptyDatasetError("cannot evaluate on an empty partition")
    return part.ratings - preds[part.users, part.items]


def rmse(preds: np.ndarray, part: RatingDataset) -> float:
    r = residuals(preds, part)
    # fsum is exactly rounded, so the result does not depend on triple order
    return math.sqrt(math.fsum((r * r).tolist()) / len(r))


def mae(preds: np.ndarray, part: RatingDataset) -> float:
    r = residuals(preds, part)
    return math.fsum(np.abs(r).tolist()) / len(r)


@dataclass(frozen=True)
class EvalReport:
    partition: str
    per_model_rmse: tuple
    per_model_mae: tuple
    ensemble_rmse: float
    ensemble_mae: float
    count: int

    def to_text(self) -> str:
        """Flat ``key = value`` block, one metric per line."""
        lines = [f"partition = {self.partition}", f"count = {self.count}"]
        for t, (r, a) in enumerate(zip(self.per_model_rmse, self.per_model_mae), 1):
            lines.append(f"mma{t}.rmse = {r!r}")
            lines.append(f"mma{t}.mae = {a!r}")
        lines.append(f"ensemble.rmse = {self.ensemble_rmse!r}")
        lines.append(f"ensemble.mae = {self.ensemble_mae!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EvalReport":
        kv = {}
        for line in text.splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                kv[k.strip()] = v.strip()
        n = sum(1 for k in kv if k.endswith(".rmse") and k.startswith("mma"))
        return cls(
            partition=kv["partition"],
            per_model_rmse=tuple(float(kv[f"mma{t}.rmse"]) for t in range(1, n + 1)),
            per_model_mae=tuple(float(kv[f"mma{t}.mae"]) for t in range(1, n + 1)),
            ensemble_rmse=float(kv["ensemble.rmse"]),
            ensemble_mae=float(kv["ensemble.mae"]),
            count=int(kv["count"]),
        )

    def header(self) -> list[str]:
        cols = ["partition", "count"]
        cols += [f"mma{t}_rmse" for t in range(1, len(self.per_model_rmse) + 1)]
        cols += [f"mma{t}_mae" for t in range(1, len(self.per_model_mae) + 1)]
        return cols + ["ensemble_rmse", "ensemble_mae"]

    def to_row(self) -> list:
        return [self.partition, self.count, *self.per_model_rmse, *self.per_model_mae,
                self.ensemble_rmse, self.ensemble_mae]

    def append_to(self, path, prefix: Sequence[tuple[str, object]] = ()) -> None:
        """Append one CSV row to a results file, writing the header if new."""
        path = Path(path)
        new = not path.exists() or path.stat().st_size == 0
        with open(path, "a", encoding="utf-8") as fh:
            if new:
                fh.write(",".join([k for k, _ in prefix] + self.header()) + "\n")
            vals = [v for _, v in prefix] + self.to_row()
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in vals) + "\n")


def evaluate_report(base_preds: Sequence[np.ndarray], ensemble_pred: np.ndarray,
                    part: RatingDataset, partition: str) -> EvalReport:
    return EvalReport(
        partition=partition,
        per_model_rmse=tuple(rmse(p, part) for p in base_preds),
        per_model_mae=tuple(mae(p, part) for p in base_preds),
        ensemble_rmse=rmse(ensemble_pred, part),
        ensemble_mae=mae(ensemble_pred, part),
        count=part.nnz,
    )
