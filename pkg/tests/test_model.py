import numpy as np
import pytest

from mobicache.model import (
    Catalog,
    HelperSet,
    MobilityModel,
    RequestModel,
    TraceLog,
    TraceRecord,
    build_zipf_mandelbrot,
    estimate_from_trace,
    generate_trace,
    load_model,
    model_from_json,
    model_to_json,
    read_trace_csv,
    save_model,
    synthetic_mobility,
    uniform_request_model,
    write_trace_csv,
)


class TestZipfMandelbrot:
    def test_two_files_no_shift(self):
        np.testing.assert_allclose(build_zipf_mandelbrot(2, 1.0, 0.0), [2 / 3, 1 / 3])

    def test_single_file(self):
        np.testing.assert_allclose(build_zipf_mandelbrot(1, 2.5, 10.0), [1.0])

    def test_experiment_configuration(self):
        # the evaluation setup: 100 files, shift 10
        pop = build_zipf_mandelbrot(100, 1.0, 10.0)
        assert abs(pop.sum() - 1.0) < 1e-12
        assert np.all(np.diff(pop) < 0.0)

    @pytest.mark.parametrize("shape", [0.0, -1.0])
    def test_non_positive_shape_rejected(self, shape):
        with pytest.raises(ValueError):
            build_zipf_mandelbrot(10, shape, 0.0)

    def test_negative_shift_rejected(self):
        with pytest.raises(ValueError):
            build_zipf_mandelbrot(10, 1.0, -0.5)

    def test_strictly_decreasing_for_positive_shape(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pop = build_zipf_mandelbrot(
                int(rng.integers(2, 50)), float(rng.uniform(0.1, 3)), float(rng.uniform(0, 20))
            )
            assert np.all(np.diff(pop) < 0.0)


class TestUniformRequestModel:
    def test_two_helpers(self):
        rm = uniform_request_model([0.7, 0.3], 2)
        np.testing.assert_allclose(rm.per_helper, [[0.7, 0.3], [0.7, 0.3]])

    def test_single_file(self):
        rm = uniform_request_model([1.0], 3)
        assert rm.per_helper.shape == (3, 1)
        np.testing.assert_allclose(rm.per_helper, 1.0)

    def test_large_replication_rows_sum_to_one(self):
        rm = uniform_request_model(build_zipf_mandelbrot(100, 1.0, 10.0), 623)
        assert rm.per_helper.shape == (623, 100)
        np.testing.assert_allclose(rm.per_helper.sum(axis=1), 1.0, atol=1e-9)


class TestTypeInvariants:
    def test_catalog_rejects_non_positive_sizes(self):
        with pytest.raises(ValueError):
            Catalog([10, 0])
        with pytest.raises(ValueError):
            Catalog([])

    def test_helperset_validation(self):
        with pytest.raises(ValueError):
            HelperSet([10], [0])  # slot budget must be positive
        with pytest.raises(ValueError):
            HelperSet([-1], [5])
        hs = HelperSet([0, 3], [5, 5])
        assert hs.n == 2

    def test_mobility_renormalizes_tiny_deviation(self):
        m = MobilityModel([0.5, 0.5 + 5e-10], [[1.0, 0.0], [0.0, 1.0 - 5e-10]])
        assert abs(m.init.sum() - 1.0) < 1e-15
        np.testing.assert_allclose(m.trans.sum(axis=1), 1.0, atol=1e-15)

    def test_mobility_rejects_large_deviation(self):
        with pytest.raises(ValueError):
            MobilityModel([0.5, 0.4], [[1, 0], [0, 1]])
        with pytest.raises(ValueError):
            MobilityModel([0.5, 0.5], [[0.9, 0.0], [0.0, 1.0]])

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError):
            MobilityModel([1.1, -0.1], [[1, 0], [0, 1]])
        with pytest.raises(ValueError):
            RequestModel([[1.2, -0.2]])

    def test_request_rows_must_sum_to_one(self):
        with pytest.raises(ValueError):
            RequestModel([[0.5, 0.4]])


class TestEstimateFromTrace:
    def trace(self, events):
        return TraceLog(tuple(TraceRecord(u, t, h) for u, t, h in events))

    def test_hand_counted_example(self):
        # one user, slot 100: (0, h0), (50, h1), (250, h1)
        # counts: 0->1 inside slot 0; 1->1 for the empty slot 1; nothing else
        trace = self.trace([("a", 0.0, 0), ("a", 50.0, 1), ("a", 250.0, 1)])
        m = estimate_from_trace(trace, 100.0, 2)
        np.testing.assert_allclose(m.init, [1.0, 0.0])
        np.testing.assert_allclose(m.trans, [[0.0, 1.0], [0.0, 1.0]])

    def test_single_event_user(self):
        m = estimate_from_trace(self.trace([("a", 7.0, 1)]), 100.0, 3)
        np.testing.assert_allclose(m.init, [0.0, 1.0, 0.0])
        np.testing.assert_allclose(m.trans, np.eye(3))

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError):
            estimate_from_trace(TraceLog(()), 100.0, 2)

    def test_unknown_helper_rejected(self):
        with pytest.raises(ValueError):
            estimate_from_trace(self.trace([("a", 0.0, 5)]), 100.0, 2)

    def test_scale_invariance_in_user_count(self):
        events = [("a", 0.0, 0), ("a", 120.0, 1), ("a", 130.0, 2),
                  ("b", 10.0, 2), ("b", 310.0, 2)]
        doubled = events + [(u + "_copy", t, h) for u, t, h in events]
        m1 = estimate_from_trace(self.trace(events), 100.0, 3)
        m2 = estimate_from_trace(self.trace(doubled), 100.0, 3)
        np.testing.assert_allclose(m1.init, m2.init)
        np.testing.assert_allclose(m1.trans, m2.trans)

    def test_recovers_generating_model(self):
        # law of large numbers: estimation on a synthetic trace approaches the
        # model that generated it
        rng = np.random.default_rng(17)
        trans = rng.random((3, 3)) + 0.2
        trans /= trans.sum(axis=1, keepdims=True)
        init = rng.random(3) + 0.2
        init /= init.sum()
        truth = MobilityModel(init, trans)
        trace = generate_trace(truth, num_users=20_000, d=5, slot_duration=100.0, seed=5)
        est = estimate_from_trace(trace, 100.0, 3)
        assert np.abs(est.trans - truth.trans).max() < 0.02
        assert np.abs(est.init - truth.init).max() < 0.02


class TestSyntheticMobility:
    def test_grid_rows_stochastic(self):
        m = synthetic_mobility(12, locality=0.7, grid_cols=4)
        np.testing.assert_allclose(m.trans.sum(axis=1), 1.0, atol=1e-12)
        assert m.trans[0, 0] == pytest.approx(0.7)

    def test_clusters_do_not_leak(self):
        m = synthetic_mobility(6, locality=0.5, cluster_size=2)
        for h in range(6):
            block = h // 2
            outside = [j for j in range(6) if j // 2 != block]
            assert np.all(m.trans[h, outside] == 0.0)

    def test_cluster_size_must_divide(self):
        with pytest.raises(ValueError):
            synthetic_mobility(5, cluster_size=2)

    def test_jitter_deterministic_per_seed(self):
        a = synthetic_mobility(9, locality=0.4, jitter=0.3, seed=3)
        b = synthetic_mobility(9, locality=0.4, jitter=0.3, seed=3)
        c = synthetic_mobility(9, locality=0.4, jitter=0.3, seed=4)
        np.testing.assert_array_equal(a.trans, b.trans)
        assert np.abs(a.trans - c.trans).max() > 0.0


class TestFileFormats:
    def test_trace_csv_round_trip(self, tmp_path):
        trace = TraceLog((TraceRecord("a", 0.0, 0), TraceRecord("a", 50.5, 1),
                          TraceRecord("b", 3.0, 1)))
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        back = read_trace_csv(path)
        assert back.records == trace.records

    def test_trace_csv_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("user,when,where\n", encoding="utf-8")
        with pytest.raises(ValueError):
            read_trace_csv(path)

    def test_trace_csv_rejects_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ValueError):
            read_trace_csv(path)

    def test_model_json_round_trip(self, tmp_path):
        m = MobilityModel([0.25, 0.75], [[0.1, 0.9], [0.4, 0.6]])
        path = tmp_path / "model.json"
        save_model(m, 100.0, path)
        back, slot = load_model(path)
        assert slot == 100.0
        np.testing.assert_array_equal(back.init, m.init)
        np.testing.assert_array_equal(back.trans, m.trans)

    def test_model_json_dimension_check(self):
        obj = model_to_json(MobilityModel([1.0], [[1.0]]), 10.0)
        obj["n"] = 2
        with pytest.raises(ValueError):
            model_from_json(obj)

    def test_trace_records_sorted_per_user(self):
        trace = TraceLog((TraceRecord("a", 50.0, 1), TraceRecord("a", 0.0, 0)))
        events = trace.per_user()["a"]
        assert [r.timestamp for r in events] == [0.0, 50.0]
