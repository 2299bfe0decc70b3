"""
Loading rating files and splitting them
=======================================

Reads a MovieLens-style rating file, shows the matrix statistics and the
per-item column view the autoencoder trains on, then makes the 70/10/20
split used throughout.

Run with the path of ``u.data`` (MovieLens-100k) as the first argument.
"""
import sys

import numpy as np

from mmautorec import parse_tab_separated, split_dataset

path = sys.argv[1] if len(sys.argv) > 1 else "/root/data/ml-100k/u.data"
data = parse_tab_separated(path, scale=(1, 5))

# Raw ids are remapped to dense indices; the labels keep the raw ids.
print(f"users {data.num_users}  items {data.num_items}  ratings {data.nnz}")
print(f"density {100 * data.density:.2f}%")
print("first raw user ids:", data.user_labels[:5])

# %%
# One training example is the observed column of an item.
users, ratings = data.column(0)
print(f"item {data.item_labels[0]!r}: {len(users)} ratings, mean {ratings.mean():.2f}")

lengths = data.column_lengths()
print("ratings per item: median", int(np.median(lengths)), " max", lengths.max())

# %%
# The split is a seeded permutation over all triples.
split = split_dataset(data, (0.7, 0.1, 0.2), seed=42)
for name, part in zip(("train", "valid", "test"), split):
    print(f"{name:5s} {part.nnz:6d}")

cold = np.flatnonzero(split.train.column_lengths() == 0)
print(f"{len(cold)} items have no training rating and fall back to the decoder bias")
