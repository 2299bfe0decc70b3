from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmautorec.dataset import (
    RatingDataset,
    item_column,
    parse_double_colon_separated,
    parse_tab_separated,
    partition_sizes,
    read_canonical,
    read_ratings,
    split_dataset,
    write_canonical,
)
from mmautorec.errors import (
    ConfigError,
    DataError,
    DuplicateEntryError,
    EmptyDatasetError,
    ParseError,
    RatingRangeError,
)

from conftest import random_dataset


def write(tmp_path, text, name="ratings.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParsers:
    def test_tab_two_lines(self, tmp_path):
        p = write(tmp_path, "1\t1\t5\t874965758\n1\t2\t3\t876893171\n")
        d = parse_tab_separated(p, (1, 5))
        assert (d.num_users, d.num_items, d.nnz) == (1, 2, 2)
        assert sorted(d.ratings.tolist()) == [3.0, 5.0]
        assert d.user_labels == ("1",) and d.item_labels == ("1", "2")

    def test_double_colon_line(self, tmp_path):
        p = write(tmp_path, "1::1193::5::978300760\n")
        d = parse_double_colon_separated(p, (1, 5))
        assert list(d.triples()) == [(0, 0, 5.0)]
        assert d.item_labels == ("1193",)

    def test_remap_is_numeric_order(self, tmp_path):
        p = write(tmp_path, "10\t7\t1\t0\n9\t100\t2\t0\n2\t7\t3\t0\n")
        d = parse_tab_separated(p)
        assert d.user_labels == ("2", "9", "10")
        assert d.item_labels == ("7", "100")
        assert list(d.triples()) == [(2, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0)]

    def test_three_fields_rejected_with_line_number(self, tmp_path):
        p = write(tmp_path, "1::2::3::4\n1::1193::5\n")
        with pytest.raises(ParseError, match=r":2:"):
            parse_double_colon_separated(p)

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyDatasetError):
            parse_tab_separated(write(tmp_path, ""))

    def test_duplicate(self, tmp_path):
        p = write(tmp_path, "1\t1\t5\t0\n2\t1\t4\t0\n1\t1\t3\t0\n")
        with pytest.raises(DuplicateEntryError, match=r":3:.*line 1"):
            parse_tab_separated(p)

    @pytest.mark.parametrize("bad", ["0", "6", "5.5", "nan"])
    def test_out_of_scale(self, tmp_path, bad):
        p = write(tmp_path, f"1\t1\t4\t0\n1\t2\t{bad}\t0\n")
        with pytest.raises((RatingRangeError, ParseError)):
            parse_tab_separated(p, (1, 5))

    def test_non_numeric_rating(self, tmp_path):
        with pytest.raises(ParseError, match=":1:"):
            parse_tab_separated(write(tmp_path, "1\t1\tfive\t0\n"))

    def test_generic_delimiter_triples(self, tmp_path):
        p = write(tmp_path, "u1,i1,4\nu2,i1,2\nu1,i2,1.5\n")
        d = read_ratings(p, (1, 5), delimiter=",", require_timestamp=False)
        assert d.nnz == 3 and d.num_users == 2 and d.num_items == 2
        assert d.user_labels == ("u1", "u2")


class TestRatingDataset:
    def test_column_view_matches_triples(self, small_data):
        flat = []
        for k in range(small_data.num_items):
            users, ratings = item_column(small_data, k)
            assert np.all(np.diff(users) > 0)
            flat += [(int(u), k, float(r)) for u, r in zip(users, ratings)]
        assert Counter(flat) == Counter(small_data.triples())

    def test_item_column_example(self):
        d = RatingDataset(4, 2, 1, 5, [3, 0, 1], [0, 0, 1], [2.0, 5.0, 4.0])
        u, r = item_column(d, 0)
        assert list(zip(u.tolist(), r.tolist())) == [(0, 5.0), (3, 2.0)]

    def test_cold_item_is_empty(self):
        d = RatingDataset(2, 3, 1, 5, [0], [1], [3.0])
        u, r = item_column(d, 2)
        assert len(u) == 0 and len(r) == 0

    def test_out_of_range_item(self, small_data):
        with pytest.raises(IndexError):
            item_column(small_data, small_data.num_items)
        with pytest.raises(IndexError):
            item_column(small_data, -1)

    def test_duplicates_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            RatingDataset(2, 2, 1, 5, [0, 0], [1, 1], [3.0, 4.0])

    def test_scale_enforced(self):
        with pytest.raises(DataError):
            RatingDataset(2, 2, 1, 5, [0], [1], [6.0])

    def test_immutable(self, small_data):
        with pytest.raises(ValueError):
            small_data.ratings[0] = 1.0

    def test_dense_columns(self, small_data):
        X, M = small_data.dense_columns()
        assert M.sum() == small_data.nnz
        assert np.all(X[small_data.items, small_data.users] == small_data.ratings)
        assert np.all(X[M == 0] == 0)


class TestSplit:
    def test_sizes_ten(self):
        d = RatingDataset(10, 1, 1, 5, np.arange(10), np.zeros(10, int), np.ones(10))
        s = split_dataset(d, (0.7, 0.1, 0.2), seed=42)
        assert (s.train.nnz, s.valid.nnz, s.test.nnz) == (7, 1, 2)

    def test_sizes_100k_rounding(self):
        assert partition_sizes(100000, (0.7, 0.1, 0.2)) == [70000, 10000, 20000]
        assert partition_sizes(1000209, (0.7, 0.1, 0.2)) == [700146, 100021, 200042]

    def test_deterministic(self, small_data):
        a = split_dataset(small_data, seed=3)
        b = split_dataset(small_data, seed=3)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.users, pb.users)
            assert np.array_equal(pa.items, pb.items)
            assert np.array_equal(pa.ratings, pb.ratings)

    def test_bad_ratios(self, small_data):
        with pytest.raises(ConfigError):
            split_dataset(small_data, (0.7, 0.1, 0.1))
        with pytest.raises(ConfigError):
            split_dataset(small_data, (0.7, 0.3))

    def test_shared_header(self, small_data):
        s = split_dataset(small_data, seed=0)
        for part in s:
            assert (part.num_users, part.num_items, part.scale) == (
                small_data.num_users, small_data.num_items, small_data.scale)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 8), st.floats(0.05, 1.0), st.integers(0, 2**31 - 1))
    def test_partition_property(self, nu, ni, density, seed):
        d = random_dataset(np.random.default_rng(seed), nu, ni, density)
        s = split_dataset(d, seed=seed)
        keys = [set(zip(p.users.tolist(), p.items.tolist())) for p in s]
        assert not (keys[0] & keys[1] or keys[0] & keys[2] or keys[1] & keys[2])
        assert Counter(t for p in s for t in p.triples()) == Counter(d.triples())
        for p, r in zip(s, (0.7, 0.1, 0.2)):
            assert abs(p.nnz - r * d.nnz) <= 1


class TestCanonicalDump:
    def test_round_trip(self, small_data, tmp_path):
        p = tmp_path / "dump.csv"
        write_canonical(small_data, p)
        assert p.read_text().splitlines()[0] == "user_id,item_id,rating"
        back = read_canonical(p, small_data.scale, small_data.num_users, small_data.num_items)
        assert list(back.triples()) == list(small_data.triples())
