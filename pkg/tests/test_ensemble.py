from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmautorec.dataset import RatingDataset, split_dataset
from mmautorec.ensemble import (
    EnsembleState,
    accumulate,
    ensemble_predict,
    ensemble_weights,
    run_joint_training,
    separate_loss,
    softmax_weights,
)
from mmautorec.errors import EmptyDatasetError, EnsembleStateError
from mmautorec.metrics import rmse
from mmautorec.model import variant_config, VARIANTS


def weights_extended(al, delta):
    """Direct evaluation of the exponential weights with 50-digit decimals."""
    getcontext().prec = 50
    e = [(-Decimal(repr(delta)) * Decimal(repr(a))).exp() for a in al]
    s = sum(e)
    return [float(x / s) for x in e]


class TestSeparateLoss:
    def test_perfect(self):
        valid = RatingDataset(2, 2, 1, 5, [0, 1], [0, 1], [3.0, 4.0])
        P = np.array([[3.0, 1], [1, 4.0]])
        assert np.array_equal(separate_loss([P] * 4, valid), np.zeros(4))

    def test_hand_value(self):
        valid = RatingDataset(2, 2, 1, 5, [0, 1], [0, 1], [5.0, 5.0])
        P = np.array([[2.0, 0], [0, 1.0]])  # residuals 3 and 4
        assert separate_loss([P] * 4, valid)[0] == pytest.approx(np.sqrt(25 / 2), rel=1e-15)

    def test_oracle(self, rng):
        from conftest import random_dataset

        valid = random_dataset(rng, 9, 7)
        preds = [rng.uniform(1, 5, (9, 7)) for _ in range(4)]
        sl = separate_loss(preds, valid)
        for t, P in enumerate(preds):
            sq = [(r - P[u, i]) ** 2 for u, i, r in valid.triples()]
            assert sl[t] == pytest.approx((sum(sq) / len(sq)) ** 0.5, rel=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyDatasetError):
            separate_loss([np.zeros((1, 1))] * 4, RatingDataset(1, 1, 1, 5, [], [], []))


class TestAccumulate:
    def test_running_sum(self):
        s = accumulate(EnsembleState(), [1, 2, 3, 4])
        assert s.accumulative_loss.tolist() == [1, 2, 3, 4]
        s = accumulate(s, [1, 1, 1, 1])
        assert s.accumulative_loss.tolist() == [2, 3, 4, 5]
        assert s.epochs == 2

    def test_hundred_epochs(self, rng):
        s = EnsembleState(delta=1.0)
        hist = rng.uniform(0.5, 1.5, (100, 4))
        for row in hist:
            s = accumulate(s, row)
        np.testing.assert_allclose(s.accumulative_loss, [sum(c) for c in hist.T.tolist()], rtol=1e-13)
        np.testing.assert_allclose(np.sum(s.separate_loss_history, axis=0), s.accumulative_loss, rtol=1e-13)

    @pytest.mark.parametrize("bad", [[-1, 0, 0, 0], [np.nan, 0, 0, 0], [np.inf, 1, 1, 1], [1, 2, 3]])
    def test_rejects(self, bad):
        with pytest.raises(EnsembleStateError):
            accumulate(EnsembleState(), bad)

    def test_delta_must_be_positive(self):
        with pytest.raises(EnsembleStateError):
            EnsembleState(delta=0.0)


class TestWeights:
    def test_uniform(self):
        s = accumulate(EnsembleState(delta=3.0), [2, 2, 2, 2])
        assert ensemble_weights(s).tolist() == [0.25] * 4

    def test_sharp_limit(self):
        assert softmax_weights([1, 2, 3, 4], 1e3)[0] > 1 - 1e-6

    def test_extended_precision_oracle(self):
        np.testing.assert_allclose(softmax_weights([1, 2, 3, 4], 1.0),
                                   weights_extended([1, 2, 3, 4], 1.0), rtol=1e-14)

    def test_no_overflow(self):
        w = softmax_weights([1e6, 1e6 + 1, 2e6, 1e6], 50.0)
        assert np.isfinite(w).all() and w[0] == pytest.approx(0.5)

    def test_fresh_state_is_uniform(self):
        assert EnsembleState().weights.tolist() == [0.25] * 4


class TestEnsemblePredict:
    def test_identical(self, rng):
        P = rng.uniform(1, 5, (3, 4))
        w = softmax_weights([0.3, 0.1, 0.7, 0.2], 2.0)
        np.testing.assert_allclose(ensemble_predict([P] * 4, w), P, atol=1e-15)

    def test_vertex(self, rng):
        preds = [rng.uniform(1, 5, (3, 4)) for _ in range(4)]
        assert np.array_equal(ensemble_predict(preds, [1, 0, 0, 0]), preds[0])

    def test_oracle_and_bounds(self, rng):
        preds = [rng.uniform(1, 5, (5, 6)) for _ in range(4)]
        w = rng.dirichlet(np.ones(4))
        w /= w.sum()
        out = ensemble_predict(preds, w)
        direct = sum(w[t] * preds[t] for t in range(4))
        np.testing.assert_allclose(out, direct, atol=1e-14)
        stack = np.stack(preds)
        assert np.all(out >= stack.min(0) - 1e-12) and np.all(out <= stack.max(0) + 1e-12)

    def test_bad_weights(self):
        with pytest.raises(EnsembleStateError):
            ensemble_predict([np.zeros(2)] * 4, [0.5, 0.5, 0.5, 0.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 200), min_size=4, max_size=4), st.floats(1e-3, 100),
       st.floats(-1e3, 1e3))
def test_weight_properties(al, delta, c):
    w = softmax_weights(al, delta)
    assert np.all(w >= 0) and abs(w.sum() - 1) < 1e-12
    np.testing.assert_allclose(softmax_weights(np.array(al) + c, delta), w, rtol=1e-9, atol=1e-300)
    for a in range(4):
        for b in range(4):
            if al[a] < al[b]:
                assert w[a] >= w[b]


def rank_one_split(seed=0):
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.5, 1.0, 20)
    v = rng.uniform(0.5, 1.0, 20)
    full = 1 + 4 * np.outer(u, v) / np.outer(u, v).max()
    mask = rng.random((20, 20)) < 0.5
    users, items = np.nonzero(mask)
    d = RatingDataset(20, 20, 1, 5, users, items, np.round(full[mask] * 2) / 2)
    return split_dataset(d, seed=seed)


def tiny_configs(**kw):
    base = dict(hidden_dim=8, reg_lambda=0.01, learning_rate=1e-2, batch_size=None)
    base.update(kw)
    return [variant_config(n, **base) for n in VARIANTS]


class TestJointTraining:
    def test_zero_epochs(self):
        res = run_joint_training(tiny_configs(), rank_one_split(), delta=20, epochs=0, seed=1)
        assert res.trace == [] and res.best_epoch == 0
        assert res.weights.tolist() == [0.25] * 4

    def test_deterministic(self):
        a = run_joint_training(tiny_configs(), rank_one_split(), delta=5, epochs=4, seed=3)
        b = run_joint_training(tiny_configs(), rank_one_split(), delta=5, epochs=4, seed=3)
        assert [r.to_csv() for r in a.trace] == [r.to_csv() for r in b.trace]

    def test_threaded_matches_sequential(self):
        a = run_joint_training(tiny_configs(), rank_one_split(), delta=5, epochs=3, seed=3)
        b = run_joint_training(tiny_configs(), rank_one_split(), delta=5, epochs=3, seed=3, max_workers=4)
        assert [r.to_csv() for r in a.trace] == [r.to_csv() for r in b.trace]

    def test_trace_invariants(self):
        res = run_joint_training(tiny_configs(), rank_one_split(), delta=2, epochs=6, seed=0)
        for rec in res.trace:
            assert abs(rec.weights.sum() - 1) < 1e-12 and (rec.weights >= 0).all()
        last = res.final_state
        np.testing.assert_allclose(np.sum(last.separate_loss_history, 0), last.accumulative_loss)

    def test_best_snapshot(self):
        split = rank_one_split()
        res = run_joint_training(tiny_configs(), split, delta=20, epochs=15, seed=0)
        best = min(res.trace, key=lambda r: r.valid_rmse)
        assert res.best_epoch == best.epoch
        ens = ensemble_predict(res.predictions(split.train), res.weights)
        assert rmse(ens, split.valid) == pytest.approx(best.valid_rmse, abs=1e-12)

    def test_ensemble_close_to_best_base(self):
        split = rank_one_split(1)
        res = run_joint_training(tiny_configs(), split, delta=20, epochs=50, seed=0)
        final = res.trace[-1]
        assert final.valid_rmse <= final.separate_loss.min() + 0.05

    def test_needs_four_configs(self):
        with pytest.raises(EnsembleStateError):
            run_joint_training(tiny_configs()[:3], rank_one_split(), epochs=1)
