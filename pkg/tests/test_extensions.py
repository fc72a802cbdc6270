import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopclass.errors import ConfigurationError, InvariantViolation
from coopclass.extensions import (
    DEFAULT_REWARD, DelayBuffer, EnsembleState, LabelHistogram, LabelProcess, RewardHook, context_only_reply,
    delay_deliver, delay_enqueue, ensemble_predict, ensemble_update, reveal_label, unsupervised_query,
)


class TestDelayBuffer:
    def test_zero_delay_same_slot(self):
        buf = DelayBuffer(0)
        delay_enqueue(buf, 3, "r", random.Random(0))
        assert delay_deliver(buf, 3) == ["r"]

    def test_fixed_delay(self):
        buf = DelayBuffer(5)
        buf.enqueue(10, "r", delay=5)
        assert [buf.deliver(t) for t in range(10, 15)] == [[]] * 5
        assert buf.deliver(15) == ["r"]

    def test_delay_out_of_range(self):
        with pytest.raises(InvariantViolation):
            DelayBuffer(2).enqueue(1, "r", delay=3)
        with pytest.raises(ConfigurationError):
            DelayBuffer(-1)

    def test_audit(self):
        rng = random.Random(3)
        buf = DelayBuffer(5)
        born = {}
        arrived = {}
        for t in range(1, 10_001):
            for rec in buf.deliver(t):
                arrived[rec] = t
            buf.enqueue(t, t, rng)
            born[t] = t
            for rec in buf.deliver(t):
                arrived[rec] = t
        for t in range(10_001, 10_007):
            for rec in buf.deliver(t):
                arrived[rec] = t
        assert len(buf) == 0 and len(arrived) == 10_000
        waits = np.array([arrived[r] - born[r] for r in born])
        assert waits.min() == 0 and waits.max() == 5
        assert buf.max_wait == 5
        # uniform delays: mean 2.5
        assert abs(waits.mean() - 2.5) < 0.1

    def test_enqueue_order_within_slot(self):
        buf = DelayBuffer(3)
        buf.enqueue(1, "a", delay=2)
        buf.enqueue(2, "b", delay=1)
        assert buf.deliver(3) == ["a", "b"]


class TestLabelProcess:
    def test_extremes(self):
        rng = random.Random(0)
        assert all(reveal_label(LabelProcess(1.0), rng) for _ in range(100))
        assert not any(reveal_label(LabelProcess(0.0), rng) for _ in range(100))

    def test_binomial(self):
        rng = random.Random(1)
        hits = sum(reveal_label(LabelProcess(0.1), rng) for _ in range(20_000))
        # 4 sigma of Bin(20000, 0.1) is 4 * sqrt(1800) = 169.7
        assert abs(hits - 2000) <= 170

    def test_range(self):
        with pytest.raises(ConfigurationError):
            LabelProcess(1.5)


class TestReward:
    def test_default(self):
        assert DEFAULT_REWARD(1, 0.2) == pytest.approx(0.8)
        assert DEFAULT_REWARD(0, 1.0) == -1.0

    def test_custom(self):
        hook = RewardHook(fn=lambda acc, cost: acc * (1 - cost))
        assert hook(1, 0.5) == 0.5
        with pytest.raises(InvariantViolation):
            RewardHook(accuracy_weight=2.0)(1, 0.0)


class TestEnsemble:
    def test_predict_examples(self):
        st4 = EnsembleState(4)
        assert st4.weights() == [0.25] * 4
        assert ensemble_predict(st4, None, [1, 1, 0, 0]) == 1
        st4.set_weights([0.1, 0.1, 0.1, 0.7])
        assert ensemble_predict(st4, None, [1, 1, 1, 0]) == 0

    @given(st.lists(st.floats(0, 1), min_size=2, max_size=6), st.integers(0, 1))
    def test_unanimous(self, raw, label):
        total = sum(raw)
        if total == 0:
            return
        s = EnsembleState(len(raw))
        s.set_weights([w / total for w in raw])
        assert s.predict(None, [label] * len(raw)) == label

    def test_multiplicative(self):
        s = EnsembleState(4, mode="mult", beta=0.5)
        w = ensemble_update(s, None, [1, 1, 0, 0], 1)
        np.testing.assert_allclose(w, [1 / 3, 1 / 3, 1 / 6, 1 / 6])

    def test_sgd_zero_residual(self):
        s = EnsembleState(2)
        s.set_weights([0.5, 0.5])
        assert ensemble_update(s, None, [1, 1], 1) == [0.5, 0.5]

    def test_sgd_step(self):
        s = EnsembleState(4, alpha_w=100)
        w = ensemble_update(s, None, [1, 1, 0, 0], 1)
        np.testing.assert_allclose(w, [0.255, 0.255, 0.25, 0.25])

    def test_sgd_clamps_at_zero(self):
        s = EnsembleState(2, alpha_w=1)
        s.set_weights([0.9, 0.05])
        w = s.update(None, [1, 1], 0)
        assert w == [0.0, 0.0]

    @given(st.lists(st.tuples(st.lists(st.integers(0, 1), min_size=3, max_size=3), st.integers(0, 1)), max_size=50))
    def test_multiplicative_simplex(self, rounds):
        s = EnsembleState(3, mode="mult")
        for preds, y in rounds:
            w = s.update(None, preds, y)
            assert all(v >= 0 for v in w)
            assert sum(w) == pytest.approx(1.0)

    def test_per_cell(self):
        s = EnsembleState(2, mode="mult", per_cell=True)
        s.update((0,), [1, 0], 1)
        assert s.weights((1,)) == [0.5, 0.5]
        assert s.weights((0,))[0] > 0.5

    def test_unknown_mode(self):
        with pytest.raises(ConfigurationError):
            EnsembleState(2, mode="boost")


class TestContextOnly:
    def test_majority(self):
        h = LabelHistogram()
        for _ in range(30):
            h.add((0,), 1)
        for _ in range(10):
            h.add((0,), 0)
        assert context_only_reply(h, (0,)) == 1

    def test_empty_and_tie(self):
        h = LabelHistogram()
        assert context_only_reply(h, (2,)) == 1
        h.add((2,), 0)
        h.add((2,), 1)
        assert context_only_reply(h, (2,)) == 1
        h.add((2,), 0)
        assert context_only_reply(h, (2,)) == 0
        assert context_only_reply(LabelHistogram(), (2,), default=0) == 0


class TestUnsupervised:
    def test_best_peer(self):
        assert unsupervised_query([0.0, 0.0], [0.8, 0.55]) == 2

    def test_no_data(self):
        assert unsupervised_query([0.0, 0.0], [None, None]) == 0

    def test_own_beats_peer(self):
        assert unsupervised_query([0.9, 0.1], [0.8, None]) == 0
        assert unsupervised_query([0.1], [None, 0.3]) == 2
