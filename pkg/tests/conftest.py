import os
from pathlib import Path

import numpy as np
import pytest

from mmautorec.dataset import RatingDataset

DATA_ROOT = Path(os.environ.get("MMA_DATA_DIR", "/root/data"))
ML100K = Path(os.environ.get("MMA_ML100K", DATA_ROOT / "ml-100k" / "u.data"))
ML1M = Path(os.environ.get("MMA_ML1M", DATA_ROOT / "ml-1m" / "ratings.dat"))


def random_dataset(rng, num_users, num_items, density=0.5, scale=(1, 5)):
    """Random integer ratings at a random subset of cells (at least one)."""
    mask = rng.random((num_users, num_items)) < density
    if not mask.any():
        mask[0, 0] = True
    u, i = np.nonzero(mask)
    perm = rng.permutation(len(u))
    r = rng.integers(scale[0], scale[1] + 1, size=len(u)).astype(float)
    return RatingDataset(num_users, num_items, scale[0], scale[1], u[perm], i[perm], r[perm])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_data(rng):
    return random_dataset(rng, 12, 9, density=0.5)


@pytest.fixture
def ml100k_path():
    if not ML100K.exists():
        pytest.skip(f"MovieLens-100k not found at {ML100K} (set MMA_ML100K)")
    return ML100K


@pytest.fixture
def ml1m_path():
    if not ML1M.exists():
        pytest.skip(f"MovieLens-1M not found at {ML1M} (set MMA_ML1M)")
    return ML1M


# Acceptance outcomes, printed at the end of the run (see test_acceptance.py).
ACCEPTANCE: list = []


def record_acceptance(number, status, detail):
    ACCEPTANCE.append((str(number), status, detail))
    print(f"criterion {number}: {status}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
