"""
The four base objectives and their gradients
============================================

Each base model is the same autoencoder; only the reconstruction loss
(absolute or squared residual) and the weight penalty (L1 or squared L2)
change. This script checks the hand-derived gradients against central
finite differences and shows the sparsity an L1 penalty produces.
"""
import numpy as np

from mmautorec import VARIANTS, backward, init_params, variant_config
from mmautorec.dataset import RatingDataset
from mmautorec.model import AdamState, objective, train_epoch

rng = np.random.default_rng(0)
n_users, hidden = 8, 3
column = (np.array([0, 2, 5, 7]), np.array([5.0, 1.0, 3.0, 4.0]))


def finite_difference(cfg, params, h=1e-5):
    grads = []
    for block in params.blocks():
        g = np.zeros_like(block)
        for idx in np.ndindex(block.shape):
            old = block[idx]
            block[idx] = old + h
            up = objective(params, column, cfg)
            block[idx] = old - h
            down = objective(params, column, cfg)
            block[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


for name in VARIANTS:
    cfg = variant_config(name, reg_lambda=0.2, hidden_dim=hidden)
    params = init_params(cfg, n_users, seed=1)
    analytic = backward(params, column, cfg)
    numeric = finite_difference(cfg, params)
    err = max(np.linalg.norm(a - b) / (np.linalg.norm(a) + np.linalg.norm(b))
              for a, b in zip(analytic.blocks(), numeric))
    print(f"{name}  loss={cfg.loss_norm.value} penalty={cfg.reg_norm.value}  "
          f"max relative gradient error {err:.1e}")

# %%
# An L1 penalty drives weights to exact zeros; a squared L2 penalty only
# shrinks them.
mask = rng.random((40, 30)) < 0.4
u, i = np.nonzero(mask)
data = RatingDataset(40, 30, 1, 5, u, i, rng.integers(1, 6, len(u)).astype(float))
for name in ("MMA-1", "MMA-2"):
    cfg = variant_config(name, reg_lambda=0.5, hidden_dim=8, learning_rate=1e-2, batch_size=4)
    params = init_params(cfg, 40, seed=0)
    state, order = AdamState.zeros_like(params), np.random.default_rng(0)
    for _ in range(60):
        train_epoch(params, data, cfg, state, order)
    zeros = (params.V == 0).sum() + (params.W == 0).sum()
    print(f"{name}: {zeros} of {params.V.size + params.W.size} weights exactly zero")
