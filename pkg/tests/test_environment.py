import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopclass.arms import SyntheticArm
from coopclass.context_space import cube_index_at
from coopclass.environment import (
    KDD_COLUMNS, KDD_SCHEMA, ArrivalProcess, ContextExtractor, ContextStream, Dataset, LabelPrior,
    SyntheticWorld, best_arrival_cube, context_from_row, draw_label, generate_contexts, load_csv,
    worst_arrival_trace, write_csv,
)
from coopclass.errors import ConfigurationError

NORMAL_ROW = ("0,tcp,http,SF,181,5450,0,0,0,0,0,1,0,0,0,0,0,0,0,0,0,0,8,8,0.00,0.00,0.00,0.00,1.00,"
              "0.00,0.00,9,9,1.00,0.00,0.11,0.00,0.00,0.00,0.00,0.00,normal.")
SMURF_ROW = ("0,icmp,ecr_i,SF,1032,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,511,511,0.00,0.00,0.00,0.00,1.00,"
             "0.00,0.00,255,255,1.00,0.00,1.00,0.00,0.00,0.00,0.00,0.00,smurf.")


def stream(kind="iid", correlation="best", M=3, d=1, T=100, seed=0, **kw):
    proc = ArrivalProcess(kind=kind, correlation=correlation, d=d, T=T, **kw)
    return ContextStream(proc, M, [random.Random(seed * 100 + i) for i in range(M)])


class TestArrivals:
    def test_best_correlation_shared(self):
        s = stream()
        for t in range(1, 50):
            xs = generate_contexts(s, t)
            assert xs[0] == xs[1] == xs[2]

    def test_worst_correlation_single_learner(self):
        s = stream(correlation="worst", designated=1)
        for t in range(1, 50):
            xs = generate_contexts(s, t)
            assert [x is not None for x in xs] == [False, True, False]

    def test_independent(self):
        xs = generate_contexts(stream(correlation="independent"), 1)
        assert len(set(xs)) == 3

    def test_worst_arrival_separation(self):
        pts = worst_arrival_trace(100, 1, random.Random(2))
        assert len(pts) == 100
        gaps = np.diff(sorted(p[0] for p in pts))
        assert gaps.min() >= 0.01 - 1e-12
        assert all(0.0 <= p[0] <= 1.0 for p in pts)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 300), st.integers(1, 3), st.integers(0, 10**6))
    def test_worst_arrival_pairwise(self, T, d, seed):
        pts = np.array(worst_arrival_trace(T, d, random.Random(seed)))
        assert pts.shape == (T, d)
        assert ((pts >= 0) & (pts <= 1)).all()
        sep = T ** (-1.0 / d)
        for a, b in itertools.combinations(range(T), 2):
            assert np.linalg.norm(pts[a] - pts[b]) >= sep - 1e-12

    def test_best_arrival_inside_one_cube(self):
        level, idx = best_arrival_cube(10_000, 4.0, 2, random.Random(0))
        assert level == math.ceil(math.log2(10_000) / 4) + 1
        s = stream(kind="best", d=2, T=10_000, p=4.0)
        first = generate_contexts(s, 1)[0]
        cube = cube_index_at(level, first)
        for t in range(2, 500):
            assert cube_index_at(level, generate_contexts(s, t)[0]) == cube

    def test_time_arrivals(self):
        s = stream(kind="time", T=200)
        assert generate_contexts(s, 100)[0] == (0.5,)

    def test_trace_arrivals(self):
        s = stream(kind="trace", trace=[(0.1,), (0.7,)])
        assert [generate_contexts(s, t)[0] for t in (1, 2, 3)] == [(0.1,), (0.7,), (0.1,)]

    def test_reproducible(self):
        a, b = stream(seed=4), stream(seed=4)
        assert [generate_contexts(a, t) for t in range(1, 200)] == [generate_contexts(b, t) for t in range(1, 200)]

    def test_bad_kind(self):
        with pytest.raises(ConfigurationError):
            ArrivalProcess(kind="bursty")


class TestLabels:
    def world(self, prior):
        return SyntheticWorld([[SyntheticArm(0.4, (1.0,))]], prior, T=100)

    def test_constant_priors(self):
        rng = random.Random(0)
        assert all(draw_label(self.world(LabelPrior("constant", 1.0)), (0.5,), 1, rng) == 1 for _ in range(200))
        assert all(draw_label(self.world(LabelPrior("constant", 0.0)), (0.5,), 1, rng) == 0 for _ in range(200))

    def test_linear_prior(self):
        rng = random.Random(1)
        w = self.world(LabelPrior("linear"))
        mean = np.mean([draw_label(w, (0.3,), 1, rng) for _ in range(100_000)])
        # 4 sigma = 4 * sqrt(0.21 / 1e5) = 0.0058
        assert abs(mean - 0.3) <= 0.006

    def test_step_prior(self):
        w = self.world(LabelPrior("step", threshold=0.5))
        rng = random.Random(0)
        assert draw_label(w, (0.4,), 1, rng) == 0
        assert draw_label(w, (0.6,), 1, rng) == 1

    def test_drift_envelope(self):
        arm = SyntheticArm(0.4, (1.0,), 0.0, drift=1.5)
        w = SyntheticWorld([[arm]], T=1000)
        rng = random.Random(5)
        for _ in range(10_000):
            x = (rng.random(),)
            t, t2 = rng.randint(1, 1000), rng.randint(1, 1000)
            assert abs(w.accuracy(0, 0, x, t) - w.accuracy(0, 0, x, t2)) <= w.drift_envelope(0, 0, t, t2) + 1e-12


class TestCsv:
    def test_kdd_labels(self, tmp_path):
        p = tmp_path / "kdd.csv"
        p.write_text(NORMAL_ROW + "\n" + SMURF_ROW + "\n")
        ds = load_csv(p, KDD_SCHEMA)
        assert len(ds) == 2
        assert list(ds.labels) == [0, 1]
        assert ds.features.shape == (2, 41)
        assert ds.column("src_bytes").tolist() == [181.0, 1032.0]
        assert ds.column("protocol_type").tolist() == [0.0, 1.0]
        assert len(KDD_COLUMNS) == 42

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        assert len(load_csv(p, KDD_SCHEMA)) == 0

    def test_malformed_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text(NORMAL_ROW + "\n" + NORMAL_ROW + "\n0,tcp,http\n")
        with pytest.raises(ConfigurationError, match="line 3"):
            load_csv(p, KDD_SCHEMA)

    def test_bad_number(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,label\n1,x,0\n")
        with pytest.raises(ConfigurationError, match="line 2"):
            load_csv(p)

    def test_unknown_category(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("proto,v,label\ntcp,1,0\nsctp,2,1\n")
        schema = {"categorical": {"proto": "onehot"}, "categories": {"proto": ["tcp", "udp"]}}
        with pytest.raises(ConfigurationError, match="unknown category"):
            load_csv(p, {**schema, "unknown_category": "error"})
        ds = load_csv(p, {**schema, "unknown_category": "other"})
        assert ds.feature_names == ["proto=tcp", "proto=udp", "proto=__other__", "v"]
        np.testing.assert_array_equal(ds.features[1], [0, 0, 1, 2])

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = Dataset(rng.normal(size=(30, 4)), rng.integers(0, 2, 30), ["a", "b", "c", "d"])
        p = tmp_path / "rt.csv"
        write_csv(ds, p)
        once = load_csv(p)
        assert once == ds
        write_csv(once, tmp_path / "rt2.csv")
        assert load_csv(tmp_path / "rt2.csv") == once

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv")


class TestContexts:
    def test_time(self):
        assert context_from_row(ContextExtractor("time", T=20000), 10000) == (0.5,)

    def test_prev_label(self):
        ex = ContextExtractor("prev_label")
        assert ex.context(1) == (0.0,)
        assert ex.context(5, prev_label=1) == (1.0,)

    def test_feature_log_minmax(self):
        ref = Dataset(np.array([[0.0], [10.0], [1000.0]]), np.zeros(3, dtype=int), ["src_bytes"])
        ex = ContextExtractor({"feature": "src_bytes"}, reference=ref)
        names = ["src_bytes"]
        assert ex.context(1, [0.0], names=names) == (0.0,)
        assert ex.context(1, [1000.0], names=names) == (1.0,)
        assert ex.context(1, [10.0], names=names)[0] == pytest.approx(math.log1p(10) / math.log1p(1000))

    def test_constant_column(self):
        ref = Dataset(np.ones((3, 1)), np.zeros(3, dtype=int), ["v"])
        assert ContextExtractor({"feature": "v"}, reference=ref).context(1, [1.0], names=["v"]) == (0.5,)

    def test_unknown_mode(self):
        with pytest.raises(ConfigurationError):
            ContextExtractor("weather")
