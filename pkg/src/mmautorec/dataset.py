"""Rating files, sparse rating matrices and train/valid/test splits.

Ratings are held as three parallel arrays (user index, item index, rating)
in file order plus a compressed per-item column view, which is what the
item-based autoencoder consumes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DuplicateEntryError,
    EmptyDatasetError,
    ParseError,
    RatingRangeError,
)

__all__ = [
    "RatingTriple",
    "RatingDataset",
    "SplitDataset",
    "read_ratings",
    "parse_tab_separated",
    "parse_double_colon_separated",
    "split_dataset",
    "item_column",
    "write_canonical",
    "read_canonical",
]


class RatingTriple(NamedTuple):
    user_id: int
    item_id: int
    rating: float


def _label_order(labels):
    # numeric ids sort numerically, anything else lexicographically
    try:
        return sorted(labels, key=int)
    except ValueError:
        return sorted(labels)


@dataclass(frozen=True, eq=False)
class RatingDataset:
    """Observed entries of a ``num_users x num_items`` rating matrix.

    ``users``, ``items`` and ``ratings`` are parallel arrays in source order.
    The item-column view (``col_ptr``, ``col_users``, ``col_ratings``) is a
    CSC layout with users sorted inside every column; it is derived in
    ``__post_init__`` and never passed in.

    ``user_labels[i]`` is the raw id of dense user index ``i`` (same for
    items). All partitions of a split share the labels of their source.
    """

    num_users: int
    num_items: int
    scale_min: float
    scale_max: float
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    user_labels: tuple = ()
    item_labels: tuple = ()
    col_ptr: np.ndarray = field(init=False, repr=False)
    col_users: np.ndarray = field(init=False, repr=False)
    col_ratings: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        users = np.ascontiguousarray(self.users, dtype=np.int64)
        items = np.ascontiguousarray(self.items, dtype=np.int64)
        ratings = np.ascontiguousarray(self.ratings, dtype=np.float64)
        if not (users.shape == items.shape == ratings.shape) or users.ndim != 1:
            raise DataError("users, items and ratings must be 1-d arrays of equal length")
        if self.scale_min > self.scale_max:
            raise ConfigError(f"empty rating scale [{self.scale_min}, {self.scale_max}]")
        if len(users):
            if users.min() < 0 or users.max() >= self.num_users:
                raise DataError("user index out of range")
            if items.min() < 0 or items.max() >= self.num_items:
                raise DataError("item index out of range")
            if ratings.min() < self.scale_min or ratings.max() > self.scale_max:
                raise DataError("rating outside the declared scale")
        order = np.lexsort((users, items))
        cu, ci = users[order], items[order]
        same = (cu[1:] == cu[:-1]) & (ci[1:] == ci[:-1])
        if same.any():
            k = int(np.flatnonzero(same)[0])
            raise DataError(f"duplicate entry for (user {cu[k]}, item {ci[k]})")
        ptr = np.zeros(self.num_items + 1, dtype=np.int64)
        np.cumsum(np.bincount(ci, minlength=self.num_items), out=ptr[1:])
        for name, arr in (("users", users), ("items", items), ("ratings", ratings)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        cr = ratings[order]
        for arr in (ptr, cu, cr):
            arr.setflags(write=False)
        object.__setattr__(self, "col_ptr", ptr)
        object.__setattr__(self, "col_users", cu)
        object.__setattr__(self, "col_ratings", cr)

    def __len__(self):
        return len(self.ratings)

    @property
    def nnz(self) -> int:
        """Number of observed entries."""
        return len(self.ratings)

    @property
    def density(self) -> float:
        return self.nnz / (self.num_users * self.num_items)

    @property
    def scale(self) -> tuple[float, float]:
        return (self.scale_min, self.scale_max)

    def triples(self) -> Iterator[RatingTriple]:
        for u, i, r in zip(self.users.tolist(), self.items.tolist(), self.ratings.tolist()):
            yield RatingTriple(u, i, r)

    def column(self, item_id: int) -> tuple[np.ndarray, np.ndarray]:
        return item_column(self, item_id)

    def column_lengths(self) -> np.ndarray:
        return np.diff(self.col_ptr)

    def dense_columns(self, item_ids: Sequence[int] | np.ndarray | None = None):
        """Zero-filled ratings and 0/1 mask, one row per requested item.

        Returns two ``(len(item_ids), num_users)`` float arrays.
        """
        if item_ids is None:
            return self._all_dense_columns()
        item_ids = np.asarray(item_ids, dtype=np.int64)
        x = np.zeros((len(item_ids), self.num_users))
        m = np.zeros_like(x)
        for row, k in enumerate(item_ids):
            lo, hi = self.col_ptr[k], self.col_ptr[k + 1]
            x[row, self.col_users[lo:hi]] = self.col_ratings[lo:hi]
            m[row, self.col_users[lo:hi]] = 1.0
        return x, m

    def _all_dense_columns(self):
        # cached: full-batch training rebuilds this every epoch otherwise
        cache = self.__dict__.get("_dense_cache")
        if cache is None:
            x = np.zeros((self.num_items, self.num_users))
            x[self.items, self.users] = self.ratings
            m = np.zeros_like(x)
            m[self.items, self.users] = 1.0
            x.setflags(write=False)
            m.setflags(write=False)
            cache = (x, m)
            object.__setattr__(self, "_dense_cache", cache)
        return cache

    def subset(self, index: np.ndarray) -> "RatingDataset":
        """Dataset holding the triples at positions ``index`` (same header)."""
        return RatingDataset(
            self.num_users,
            self.num_items,
            self.scale_min,
            self.scale_max,
            self.users[index],
            self.items[index],
            self.ratings[index],
            self.user_labels,
            self.item_labels,
        )

    def user_index(self, label) -> int:
        return _index_of(self.user_labels, label, "user")

    def item_index(self, label) -> int:
        return _index_of(self.item_labels, label, "item")


def _index_of(labels, label, kind):
    from .errors import LookupIdError

    label = str(label)
    try:
        return labels.index(label)
    except ValueError:
        raise LookupIdError(f"unknown {kind} id {label!r}") from None


@dataclass(frozen=True, eq=False)
class SplitDataset:
    train: RatingDataset
    valid: RatingDataset
    test: RatingDataset
    split_seed: int

    def __iter__(self):
        return iter((self.train, self.valid, self.test))


def item_column(data: RatingDataset, item_id: int) -> tuple[np.ndarray, np.ndarray]:
    """Observed ``(user_ids, ratings)`` of one item, sorted by user id."""
    if not 0 <= item_id < data.num_items:
        raise IndexError(f"item_id {item_id} out of range [0, {data.num_items})")
    lo, hi = data.col_ptr[item_id], data.col_ptr[item_id + 1]
    return data.col_users[lo:hi], data.col_ratings[lo:hi]


def read_ratings(path, scale, delimiter="\t", require_timestamp=True) -> RatingDataset:
    """Parse a ``user<d>item<d>rating[<d>timestamp]`` file.

    Raw ids are remapped to dense 0-based indices (numeric order when the
    raw ids are integers); the timestamp column, if any, is discarded. With
    ``require_timestamp=False`` three-field lines are accepted as well,
    which covers plain triple exports.
    """
    path = Path(path)
    lo, hi = float(scale[0]), float(scale[1])
    if lo > hi:
        raise ConfigError(f"empty rating scale {scale!r}")
    if not delimiter:
        raise ConfigError("delimiter must be non-empty")
    allowed = (4,) if require_timestamp else (3, 4)
    raw_u, raw_i, vals = [], [], []
    seen = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(delimiter)
            if len(parts) not in allowed:
                raise ParseError(
                    path, lineno, f"expected {' or '.join(map(str, allowed))} fields, got {len(parts)}"
                )
            u, i = parts[0].strip(), parts[1].strip()
            if not u or not i:
                raise ParseError(path, lineno, "empty id field")
            try:
                r = float(parts[2])
            except ValueError:
                raise ParseError(path, lineno, f"rating {parts[2]!r} is not a number") from None
            if not math.isfinite(r) or r < lo or r > hi:
                raise RatingRangeError(path, lineno, f"rating {r:g} outside [{lo:g}, {hi:g}]")
            if len(parts) == 4:
                try:
                    int(parts[3])
                except ValueError:
                    raise ParseError(path, lineno, f"timestamp {parts[3]!r} is not an integer") from None
            prev = seen.setdefault((u, i), lineno)
            if prev != lineno:
                raise DuplicateEntryError(
                    path, lineno, f"duplicate entry for user {u} item {i} (first on line {prev})"
                )
            raw_u.append(u)
            raw_i.append(i)
            vals.append(r)
    if not vals:
        raise EmptyDatasetError(f"{path}: no ratings found")
    user_labels = tuple(_label_order(set(raw_u)))
    item_labels = tuple(_label_order(set(raw_i)))
    umap = {lab: k for k, lab in enumerate(user_labels)}
    imap = {lab: k for k, lab in enumerate(item_labels)}
    return RatingDataset(
        num_users=len(user_labels),
        num_items=len(item_labels),
        scale_min=lo,
        scale_max=hi,
        users=np.fromiter((umap[u] for u in raw_u), dtype=np.int64, count=len(raw_u)),
        items=np.fromiter((imap[i] for i in raw_i), dtype=np.int64, count=len(raw_i)),
        ratings=np.asarray(vals, dtype=np.float64),
        user_labels=user_labels,
        item_labels=item_labels,
    )


def parse_tab_separated(path, scale=(1, 5)) -> RatingDataset:
    """MovieLens-100k ``u.data`` layout."""
    return read_ratings(path, scale, delimiter="\t")


def parse_double_colon_separated(path, scale=(1, 5)) -> RatingDataset:
    """MovieLens-1M ``ratings.dat`` layout."""
    return read_ratings(path, scale, delimiter="::")


def partition_sizes(n: int, ratios: Sequence[float]) -> list[int]:
    """Partition sizes by rounding cumulative ratio boundaries.

    Each boundary is ``round(n * cumulative_ratio)``, so every partition
    differs from ``n * ratio`` by less than one element and the sizes
    always add up to ``n``.
    """
    bounds = [0]
    acc = 0.0
    for r in ratios[:-1]:
        acc += r
        bounds.append(min(n, int(math.floor(n * acc + 0.5))))
    bounds.append(n)
    return [b - a for a, b in zip(bounds, bounds[1:])]


def split_dataset(data: RatingDataset, ratios=(0.7, 0.1, 0.2), seed: int = 0) -> SplitDataset:
    """Random global split of the rating triples into train/valid/test."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError(f"need three non-negative ratios, got {ratios!r}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)!r}")
    if data.nnz == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(data.nnz)
    n_train, n_valid, _ = partition_sizes(data.nnz, ratios)
    parts = np.split(perm, [n_train, n_train + n_valid])
    train, valid, test = (data.subset(np.sort(p)) for p in parts)
    return SplitDataset(train, valid, test, int(seed))


def write_canonical(data: RatingDataset, path) -> None:
    """Dump as ``user_id,item_id,rating`` text with a one-line header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user_id,item_id,rating\n")
        for u, i, r in zip(data.users.tolist(), data.items.tolist(), data.ratings.tolist()):
            fh.write(f"{u},{i},{r!r}\n")


def read_canonical(path, scale, num_users=None, num_items=None) -> RatingDataset:
    """Inverse of :func:`write_canonical`; ids are taken as dense indices."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "user_id,item_id,rating":
            raise ParseError(path, 1, f"unexpected header {header!r}")
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(path, lineno, f"expected 3 fields, got {len(parts)}")
            try:
                rows.append((int(parts[0]), int(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
    users, items = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64)
    nu = int(num_users) if num_users is not None else int(users.max(initial=-1)) + 1
    ni = int(num_items) if num_items is not None else int(items.max(initial=-1)) + 1
    return RatingDataset(nu, ni, float(scale[0]), float(scale[1]), users, items, arr[:, 2])
