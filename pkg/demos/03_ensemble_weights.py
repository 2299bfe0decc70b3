"""
How the ensemble weights move
=============================

The weight of a base model is a softmax over ``-delta`` times its running
sum of validation RMSEs. Here four synthetic validation curves are fed to
the ensemble state to show the effect of the balance factor ``delta``.
"""
import numpy as np

from mmautorec import EnsembleState, accumulate

epochs = np.arange(1, 41)
# model 3 converges fastest, model 1 is noisy, model 4 starts well but stalls
curves = np.stack([
    0.95 - 0.04 * (1 - np.exp(-epochs / 8)) + 0.01 * np.sin(epochs),
    0.97 - 0.05 * (1 - np.exp(-epochs / 15)),
    0.96 - 0.07 * (1 - np.exp(-epochs / 5)),
    0.93 + 0.0005 * epochs,
], axis=1)

for delta in (1, 10, 20, 50):
    state = EnsembleState(delta=delta)
    snapshots = {}
    for n, sl in enumerate(curves, 1):
        state = accumulate(state, sl)
        if n in (1, 10, 40):
            snapshots[n] = np.round(state.weights, 3)
    print(f"delta={delta:>2}: " + "  ".join(f"n={n}: {w}" for n, w in snapshots.items()))

# %%
# Adding a constant to every accumulated loss leaves the weights unchanged,
# which is why subtracting the minimum before exponentiating is safe even
# after thousands of epochs.
from mmautorec.ensemble import softmax_weights

al = np.array([812.4, 815.0, 809.9, 830.2])
print(softmax_weights(al, 20.0), softmax_weights(al - al.min(), 20.0))
