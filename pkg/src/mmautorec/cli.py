"""Command-line driver: ``mma train | evaluate | predict``.

Exit codes: 0 success, 1 configuration error, 2 data/checkpoint error,
3 training failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, dataset_fingerprint, load_checkpoint, save_checkpoint
from .config import ExperimentConfig, load_config, parse_config_text
from .dataset import split_dataset
from .ensemble import TRACE_HEADER, ensemble_predict, run_joint_training
from .errors import CheckpointError, ConfigError, DataError, LookupIdError, MMAError, TrainingError
from .metrics import evaluate_report
from .model import forward, predict_full

log = logging.getLogger("mmautorec")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_TRAINING = 0, 1, 2, 3

SNAPSHOT, TRACE, REPORT, CHECKPOINT, RESULTS = (
    "config.snapshot", "trace.csv", "report.txt", "checkpoint.bin", "results.csv")


def _checkpoint_from(result, cfg: ExperimentConfig, split) -> Checkpoint:
    return Checkpoint(
        configs=result.configs,
        models=result.models,
        weights=result.state.weights,
        accumulative_loss=result.state.accumulative_loss,
        delta=result.state.delta,
        train=split.train,
        best_epoch=result.best_epoch,
        seeds=result.seeds,
        split_seed=split.split_seed,
        experiment=cfg.to_dict(),
    )


def cmd_train(cfg: ExperimentConfig, out=sys.stdout) -> int:
    cfg = cfg.with_env()
    data = cfg.load_dataset()
    split = split_dataset(data, cfg.split_ratios, cfg.split_seed)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / SNAPSHOT).write_text(cfg.to_text(), encoding="utf-8")
    trace_fh = open(outdir / TRACE, "w", encoding="utf-8")
    trace_fh.write(",".join(TRACE_HEADER) + "\n")

    def on_epoch(rec, result):
        trace_fh.write(rec.to_csv() + "\n")
        trace_fh.flush()
        if cfg.checkpoint_every and rec.epoch % cfg.checkpoint_every == 0:
            save_checkpoint(_checkpoint_from(result, cfg, split), outdir / CHECKPOINT)

    try:
        result = run_joint_training(cfg.base_configs(), split, delta=cfg.delta, epochs=cfg.epochs,
                                    seed=cfg.seed, max_workers=cfg.workers, on_epoch=on_epoch)
    finally:
        trace_fh.close()
    ckpt = _checkpoint_from(result, cfg, split)
    save_checkpoint(ckpt, outdir / CHECKPOINT)
    preds = result.predictions(split.train)
    ens = ensemble_predict(preds, result.weights)
    reports = [evaluate_report(preds, ens, split.valid, "valid"),
               evaluate_report(preds, ens, split.test, "test")]
    header = f"best_epoch = {result.best_epoch}\n" + "".join(
        f"weight{t} = {w!r}\n" for t, w in enumerate(result.weights.tolist(), 1))
    (outdir / REPORT).write_text(header + "\n" + "\n".join(r.to_text() for r in reports),
                                 encoding="utf-8")
    for r in reports:
        r.append_to(outdir / RESULTS, [("output_dir", str(outdir)), ("best_epoch", result.best_epoch)])
    test = reports[1]
    print(f"test RMSE {test.ensemble_rmse:.4f}  MAE {test.ensemble_mae:.4f}  "
          f"(best epoch {result.best_epoch}, n={test.count})", file=out)
    return EXIT_OK


def _config_of(ckpt: Checkpoint, config_path=None) -> ExperimentConfig:
    if config_path is not None:
        return load_config(config_path)
    text = "".join(f"{k} = {v}\n" for k, v in ckpt.experiment.items())
    return parse_config_text(text)


def cmd_evaluate(checkpoint_path, split_name="test", config_path=None, out=sys.stdout):
    """Recompute the report of a saved ensemble on ``valid`` or ``test``.

    Returns ``(exit_code, EvalReport)``.
    """
    if split_name not in ("valid", "test"):
        raise ConfigError(f"--split must be 'valid' or 'test', got {split_name!r}")
    ckpt = load_checkpoint(checkpoint_path)
    cfg = _config_of(ckpt, config_path)
    split = split_dataset(cfg.load_dataset(), cfg.split_ratios, cfg.split_seed)
    if dataset_fingerprint(split.train) != dataset_fingerprint(ckpt.train):
        raise CheckpointError("dataset/split does not reproduce the checkpoint's training partition")
    preds = [predict_full(p, ckpt.train) for p in ckpt.models]
    ens = ensemble_predict(preds, ckpt.weights)
    part = split.valid if split_name == "valid" else split.test
    report = evaluate_report(preds, ens, part, split_name)
    out.write(report.to_text())
    return EXIT_OK, report


def cmd_predict(checkpoint_path, user, item, out=sys.stdout):
    """Print the clipped ensemble estimate for one raw (user, item) pair."""
    ckpt = load_checkpoint(checkpoint_path)
    train = ckpt.train
    u, k = train.user_index(user), train.item_index(item)
    col = train.column(k)
    base = [float(np.clip(forward(p, col)[u], train.scale_min, train.scale_max))
            for p in ckpt.models]
    value = float(np.clip(np.dot(ckpt.weights, base), train.scale_min, train.scale_max))
    print(repr(value), file=out)
    return EXIT_OK, value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mma", description="Multi-metric AutoRec ensemble")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", help="train the four variants and the ensemble")
    t.add_argument("--config", required=True, type=Path)
    e = sub.add_parser("evaluate", help="recompute RMSE/MAE from a checkpoint")
    e.add_argument("--checkpoint", required=True, type=Path)
    e.add_argument("--split", choices=("valid", "test"), default="test")
    e.add_argument("--config", type=Path, default=None,
                   help="dataset config (defaults to the one stored in the checkpoint)")
    pr = sub.add_parser("predict", help="ensemble estimate for one user/item pair")
    pr.add_argument("--checkpoint", required=True, type=Path)
    pr.add_argument("--user", required=True, help="raw user id as in the rating file")
    pr.add_argument("--item", required=True, help="raw item id as in the rating file")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "train":
            return cmd_train(load_config(args.config))
        if args.command == "evaluate":
            return cmd_evaluate(args.checkpoint, args.split, args.config)[0]
        return cmd_predict(args.checkpoint, args.user, args.item)[0]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (DataError, CheckpointError, LookupIdError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MMAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
