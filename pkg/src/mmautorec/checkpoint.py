"""Self-describing, integrity-checked checkpoint files.

Layout: an 8-byte magic, the SHA-256 digest of the payload, then the
payload itself, which is an uncompressed ``.npz`` archive. The archive
holds a JSON metadata record plus every array needed to predict without
the original rating file: the four parameter blocks, the ensemble weights
and the training partition.
"""
from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import RatingDataset
from .ensemble import EnsembleState
from .errors import CheckpointError
from .model import BaseModelConfig, ModelParams

MAGIC = b"MMACKPT1"
FORMAT_VERSION = 1

__all__ = ["Checkpoint", "save_checkpoint", "load_checkpoint", "dataset_fingerprint"]


def dataset_fingerprint(data: RatingDataset) -> str:
    h = hashlib.sha256()
    h.update(np.array([data.num_users, data.num_items], dtype=np.int64).tobytes())
    for arr in (data.users, data.items, data.ratings):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


@dataclass
class Checkpoint:
    configs: list
    models: list
    weights: np.ndarray
    accumulative_loss: np.ndarray
    delta: float
    train: RatingDataset
    best_epoch: int = 0
    seeds: list = field(default_factory=list)
    split_seed: int = 0
    experiment: dict = field(default_factory=dict)

    def ensemble_state(self) -> EnsembleState:
        return EnsembleState(delta=self.delta, accumulative_loss=self.accumulative_loss.copy(),
                             weights=self.weights.copy())


def _config_to_dict(c: BaseModelConfig) -> dict:
    d = asdict(c)
    d["loss_norm"] = c.loss_norm.value
    d["reg_norm"] = c.reg_norm.value
    return d


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    train = ckpt.train
    meta = {
        "format_version": FORMAT_VERSION,
        "configs": [_config_to_dict(c) for c in ckpt.configs],
        "delta": ckpt.delta,
        "best_epoch": ckpt.best_epoch,
        "seeds": ckpt.seeds,
        "split_seed": ckpt.split_seed,
        "num_users": train.num_users,
        "num_items": train.num_items,
        "scale": [train.scale_min, train.scale_max],
        "user_labels": list(train.user_labels),
        "item_labels": list(train.item_labels),
        "train_fingerprint": dataset_fingerprint(train),
        "hidden_dims": [p.hidden_dim for p in ckpt.models],
        "experiment": ckpt.experiment,
    }
    arrays = {
        "meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8),
        "weights": np.asarray(ckpt.weights, dtype=np.float64),
        "accumulative_loss": np.asarray(ckpt.accumulative_loss, dtype=np.float64),
        "train_users": train.users,
        "train_items": train.items,
        "train_ratings": train.ratings,
    }
    for t, p in enumerate(ckpt.models, 1):
        arrays.update({f"m{t}_V": p.V, f"m{t}_mu": p.mu, f"m{t}_W": p.W, f"m{t}_b": p.b})
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    payload = buf.getvalue()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(hashlib.sha256(payload).digest())
        fh.write(payload)
    tmp.replace(path)


def load_checkpoint(path) -> Checkpoint:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < len(MAGIC) + 32 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic or truncated header)")
    digest, payload = raw[len(MAGIC): len(MAGIC) + 32], raw[len(MAGIC) + 32:]
    if hashlib.sha256(payload).digest() != digest:
        raise CheckpointError(f"{path}: integrity check failed (truncated or corrupted)")
    try:
        with np.load(io.BytesIO(payload), allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files}
        meta = json.loads(arrays.pop("meta").tobytes().decode("utf-8"))
    except (zipfile.BadZipFile, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: malformed payload: {exc}") from exc
    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {meta.get('format_version')!r}")
    try:
        train = RatingDataset(
            meta["num_users"], meta["num_items"], meta["scale"][0], meta["scale"][1],
            arrays["train_users"], arrays["train_items"], arrays["train_ratings"],
            tuple(meta["user_labels"]), tuple(meta["item_labels"]),
        )
        n = len(meta["configs"])
        models = [
            ModelParams(arrays[f"m{t}_V"], arrays[f"m{t}_mu"], arrays[f"m{t}_W"], arrays[f"m{t}_b"])
            for t in range(1, n + 1)
        ]
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing field {exc}") from exc
    if dataset_fingerprint(train) != meta["train_fingerprint"]:
        raise CheckpointError(f"{path}: training partition does not match its fingerprint")
    return Checkpoint(
        configs=[BaseModelConfig(**c) for c in meta["configs"]],
        models=models,
        weights=arrays["weights"],
        accumulative_loss=arrays["accumulative_loss"],
        delta=meta["delta"],
        train=train,
        best_epoch=meta["best_epoch"],
        seeds=meta["seeds"],
        split_seed=meta["split_seed"],
        experiment=meta["experiment"],
    )
