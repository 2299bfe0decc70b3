"""
Training the ensemble on MovieLens-100k
=======================================

This walks through one full run with the settings in
``configs/ml100k.cfg``: four base models trained side by side, the
ensemble weights re-computed after every epoch, and the test partition
scored once with the best-validation snapshot. The penalties and the
balance factor in that file were picked on the validation partition with
``mmautorec.tuning.tune`` (the acceptance suite repeats that search).

Takes a few minutes on one core. Pass another config path to override.
"""
import sys
import time
from pathlib import Path

import numpy as np

from mmautorec import ensemble_predict, mae, rmse, run_joint_training, split_dataset
from mmautorec.config import load_config

cfg_path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "configs" / "ml100k.cfg"
cfg = load_config(cfg_path)
data = cfg.load_dataset()
split = split_dataset(data, cfg.split_ratios, cfg.split_seed)
print(f"{data.num_users} users, {data.num_items} items; "
      f"train/valid/test = {split.train.nnz}/{split.valid.nnz}/{split.test.nnz}")

configs = cfg.base_configs()
for c in configs:
    print(f"  {c.variant}: loss {c.loss_norm.value}, penalty {c.reg_norm.value}, lambda {c.reg_lambda}")


# %% Watch the weights while training.
# Each model's separate loss is its validation RMSE; the weights follow the
# running sums of those losses.
def show(rec, result):
    if rec.epoch % 25 == 0 or rec.epoch == 1:
        sl = " ".join(f"{x:.4f}" for x in rec.separate_loss)
        print(f"epoch {rec.epoch:>3}  separate loss {sl}  weights {np.round(rec.weights, 3)}  "
              f"ensemble {rec.valid_rmse:.4f}")


t0 = time.perf_counter()
result = run_joint_training(configs, split, delta=cfg.delta, epochs=cfg.epochs, seed=cfg.seed,
                            on_epoch=show)
print(f"trained in {time.perf_counter() - t0:.0f}s; best ensemble epoch {result.best_epoch}")

# %% Score the snapshot on the held-out test ratings.
preds = result.predictions(split.train)
ens = ensemble_predict(preds, result.weights)
for c, p in zip(configs, preds):
    print(f"  {c.variant} test RMSE {rmse(p, split.test):.4f}  MAE {mae(p, split.test):.4f}")
print(f"ensemble  test RMSE {rmse(ens, split.test):.4f}  MAE {mae(ens, split.test):.4f}")
print("weights", np.round(result.weights, 4))
