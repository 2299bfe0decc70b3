"""Experiment configuration: a flat ``section.key = value`` text file.

Example::

    dataset.path = data/ml-100k/u.data
    dataset.format = tab
    split.seed = 42
    model.hidden_dim = 500
    model.batch_size = full
    mma1.reg_lambda = 0.1      # per-variant override
    ensemble.delta = 20
    train.epochs = 300
    output.dir = runs/ml100k

Blank lines and ``#`` comments are ignored. Keys under ``model.`` form the
template shared by all four variants; ``mma1.`` .. ``mma4.`` override it
for a single variant.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dataset import RatingDataset, read_ratings
from .errors import ConfigError
from .model import BaseModelConfig, VARIANTS, variant_config

__all__ = ["ExperimentConfig", "parse_config_text", "load_config", "OUTPUT_DIR_ENV"]

OUTPUT_DIR_ENV = "MMA_OUTPUT_DIR"

FORMATS = {"tab": "\t", "double_colon": "::"}

_MODEL_KEYS = {
    "hidden_dim": int,
    "reg_lambda": float,
    "learning_rate": float,
    "batch_size": None,  # parsed by _batch_size
    "beta1": float,
    "beta2": float,
    "eps": float,
}


def _batch_size(text: str):
    text = text.strip().lower()
    if text in ("item", "per-item", "none"):
        return None
    if text == "full":
        return "full"
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"batch_size must be 'item', 'full' or an integer, got {text!r}") from None


def _floats(text: str):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: Path
    dataset_format: str = "tab"
    delimiter: str = ""
    scale_min: float = 1.0
    scale_max: float = 5.0
    split_ratios: tuple = (0.7, 0.1, 0.2)
    split_seed: int = 42
    model: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    delta: float = 20.0
    epochs: int = 100
    seed: int = 0
    workers: int = 1
    output_dir: Path = Path("runs/default")
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.dataset_format not in FORMATS and self.dataset_format != "delimited":
            raise ConfigError(f"dataset.format must be one of tab, double_colon, delimited; "
                              f"got {self.dataset_format!r}")
        if self.dataset_format == "delimited" and not self.delimiter:
            raise ConfigError("dataset.delimiter is required for format 'delimited'")
        if self.scale_min > self.scale_max:
            raise ConfigError("dataset.scale_min exceeds dataset.scale_max")
        if not self.delta > 0:
            raise ConfigError("ensemble.delta must be > 0")
        if self.epochs < 0 or self.workers < 1 or self.checkpoint_every < 0:
            raise ConfigError("train.epochs/output.checkpoint_every must be >= 0, train.workers >= 1")
        self.base_configs()  # validates the model section

    def base_configs(self) -> list[BaseModelConfig]:
        out = []
        for t, name in enumerate(VARIANTS, 1):
            kw = dict(self.model)
            kw.update(self.overrides.get(f"mma{t}", {}))
            out.append(variant_config(name, epochs=self.epochs, **kw))
        return out

    def validate_paths(self) -> None:
        if not Path(self.dataset_path).is_file():
            raise ConfigError(f"dataset file not found: {self.dataset_path}")

    def load_dataset(self) -> RatingDataset:
        self.validate_paths()
        if self.dataset_format == "delimited":
            return read_ratings(self.dataset_path, self.scale, self.delimiter, require_timestamp=False)
        return read_ratings(self.dataset_path, self.scale, FORMATS[self.dataset_format])

    @property
    def scale(self):
        return (self.scale_min, self.scale_max)

    def with_env(self, environ=os.environ) -> "ExperimentConfig":
        """Apply the output-directory environment override, if set."""
        if environ.get(OUTPUT_DIR_ENV):
            return replace(self, output_dir=Path(environ[OUTPUT_DIR_ENV]))
        return self

    def to_items(self) -> list[tuple[str, str]]:
        items = [
            ("dataset.path", str(self.dataset_path)),
            ("dataset.format", self.dataset_format),
            ("dataset.delimiter", self.delimiter),
            ("dataset.scale_min", repr(self.scale_min)),
            ("dataset.scale_max", repr(self.scale_max)),
            ("split.ratios", ",".join(repr(r) for r in self.split_ratios)),
            ("split.seed", str(self.split_seed)),
            ("ensemble.delta", repr(self.delta)),
            ("train.epochs", str(self.epochs)),
            ("train.seed", str(self.seed)),
            ("train.workers", str(self.workers)),
            ("output.dir", str(self.output_dir)),
            ("output.checkpoint_every", str(self.checkpoint_every)),
        ]
        for k, v in sorted(self.model.items()):
            items.append((f"model.{k}", _fmt(v)))
        for sect in sorted(self.overrides):
            for k, v in sorted(self.overrides[sect].items()):
                items.append((f"{sect}.{k}", _fmt(v)))
        return items

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_items())

    def to_dict(self) -> dict:
        return dict(self.to_items())


def _fmt(v):
    if v is None:
        return "item"
    return repr(v) if isinstance(v, float) else str(v)


_TOP = {
    "dataset.path": ("dataset_path", Path),
    "dataset.format": ("dataset_format", str),
    "dataset.delimiter": ("delimiter", str),
    "dataset.scale_min": ("scale_min", float),
    "dataset.scale_max": ("scale_max", float),
    "split.ratios": ("split_ratios", _floats),
    "split.seed": ("split_seed", int),
    "ensemble.delta": ("delta", float),
    "train.epochs": ("epochs", int),
    "train.seed": ("seed", int),
    "train.workers": ("workers", int),
    "output.dir": ("output_dir", Path),
    "output.checkpoint_every": ("checkpoint_every", int),
}


def parse_config_text(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse config text; relative paths resolve against ``base_dir``."""
    kw: dict = {}
    model: dict = {}
    overrides: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        # a delimiter value may legitimately be whitespace or '#'
        if key == "dataset.delimiter":
            value = raw.split("=", 1)[1].strip().replace("\\t", "\t")
        try:
            if key in _TOP:
                name, conv = _TOP[key]
                kw[name] = conv(value)
                continue
            sect, _, sub = key.partition(".")
            target = model if sect == "model" else overrides.setdefault(sect, {}) \
                if sect in ("mma1", "mma2", "mma3", "mma4") else None
            if target is None or sub not in _MODEL_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            conv = _MODEL_KEYS[sub] or _batch_size
            target[sub] = conv(value)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
    if "dataset_path" not in kw:
        raise ConfigError("dataset.path is required")
    if base_dir is not None:
        for name in ("dataset_path", "output_dir"):
            if name in kw and not kw[name].is_absolute():
                kw[name] = Path(base_dir) / kw[name]
    try:
        return ExperimentConfig(model=model, overrides=overrides, **kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, base_dir=path.parent)
