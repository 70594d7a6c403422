import itertools

import numpy as np
import pytest

from conftest import random_chain
from mobicache.errors import InstanceTooLargeError
from mobicache.model import MobilityModel, RequestModel, uniform_request_model
from mobicache.walks import (
    Walk,
    contact_value_oracle,
    contact_value_table,
    enumerate_walks,
    first_passage,
    walk_probability,
)


class TestWalkProbability:
    def test_single_step_is_initial_mass(self, desk1):
        assert walk_probability(desk1.model, Walk((0,))) == 0.5

    def test_desk1_cross_walk(self, desk1):
        assert walk_probability(desk1.model, Walk((0, 1))) == pytest.approx(0.25)

    def test_zero_transition_gives_zero(self):
        m = MobilityModel([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
        assert walk_probability(m, (0, 1)) == 0.0

    def test_accepts_plain_sequences(self, desk1):
        assert walk_probability(desk1.model, [1, 0]) == pytest.approx(0.25)

    def test_out_of_range_step_rejected(self, desk1):
        with pytest.raises(ValueError):
            walk_probability(desk1.model, (0, 2))


class TestEnumerateWalks:
    def test_desk1_enumeration(self, desk1):
        walks = list(enumerate_walks(desk1.model, 2))
        assert [w.steps for w, _ in walks] == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert all(p == pytest.approx(0.25) for _, p in walks)

    def test_single_helper(self):
        m = MobilityModel([1.0], [[1.0]])
        walks = list(enumerate_walks(m, 4))
        assert len(walks) == 1 and walks[0][1] == pytest.approx(1.0)

    def test_sparse_chain_skips_zero_walks_and_sums_to_one(self):
        trans = [[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.0, 0.0, 1.0]]
        m = MobilityModel([0.4, 0.6, 0.0], trans)
        walks = list(enumerate_walks(m, 2))
        assert len(walks) < 9
        assert sum(p for _, p in walks) == pytest.approx(1.0, abs=1e-9)
        assert all(p > 0 for _, p in walks)

    def test_probabilities_sum_to_one_randomized(self):
        rng = np.random.default_rng(2)
        for trial in range(10):
            model = random_chain(rng, int(rng.integers(1, 5)), sparse=trial % 2 == 0)
            total = sum(p for _, p in enumerate_walks(model, int(rng.integers(1, 5))))
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_enumeration_cap(self):
        rng = np.random.default_rng(0)
        model = random_chain(rng, 10)
        with pytest.raises(InstanceTooLargeError):
            list(enumerate_walks(model, 8))  # 10^8 walks

    def test_walk_validation(self):
        with pytest.raises(ValueError):
            Walk(())
        assert len(Walk((1, 1, 2))) == 3
        assert Walk((1, 1, 2)).counts() == {1: 2, 2: 1}


def brute_force_first_passage(model: MobilityModel, i: int, j: int, l: int) -> float:
    total = 0.0
    for path in itertools.product(range(model.n), repeat=l):
        if path[-1] != j or any(p == j for p in path[:-1]):
            continue
        prob, cur = 1.0, i
        for nxt in path:
            prob *= model.trans[cur, nxt]
            cur = nxt
        total += prob
    return total


class TestFirstPassage:
    def test_one_step_is_transition_probability(self, desk1):
        assert first_passage(desk1.model, 0, 1, 1) == 0.5

    def test_desk1_two_steps(self, desk1):
        # stay once, then cross: 0.5 * 0.5
        assert first_passage(desk1.model, 0, 1, 2) == pytest.approx(0.25)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for trial in range(15):
            n = int(rng.integers(2, 5))
            model = random_chain(rng, n, sparse=trial % 3 == 0)
            for l in range(1, 5):
                want = brute_force_first_passage(model, 0, n - 1, l)
                assert first_passage(model, 0, n - 1, l) == pytest.approx(want, abs=1e-12)
                want_ret = brute_force_first_passage(model, 0, 0, l)
                assert first_passage(model, 0, 0, l) == pytest.approx(want_ret, abs=1e-12)

    def test_total_mass_at_most_one(self):
        # first-passage times partition the event space
        rng = np.random.default_rng(9)
        for _ in range(10):
            n = int(rng.integers(1, 5))
            model = random_chain(rng, n)
            i, j = int(rng.integers(n)), int(rng.integers(n))
            total = sum(first_passage(model, i, j, l) for l in range(1, 51))
            assert total <= 1.0 + 1e-9

    def test_requires_positive_l(self, desk1):
        with pytest.raises(ValueError):
            first_passage(desk1.model, 0, 1, 0)


class TestContactValueTable:
    def test_desk1_values(self, desk1):
        table = contact_value_table(desk1.model, desk1.requests, 2)
        # contacted at least once in 2 slots: 1 - P(other helper twice)
        assert table.value(0, 0, 1) == pytest.approx(0.75, abs=1e-12)
        # twice: only the repeat walk
        assert table.value(0, 0, 2) == pytest.approx(0.25, abs=1e-12)

    def test_beyond_deadline_is_zero(self, desk1):
        table = contact_value_table(desk1.model, desk1.requests, 2)
        assert table.value(0, 0, 3) == 0.0
        assert table.value(1, 0, 7) == 0.0

    def test_single_helper_values_equal_popularity(self):
        model = MobilityModel([1.0], [[1.0]])
        requests = uniform_request_model([0.6, 0.4], 1)
        table = contact_value_table(model, requests, 3)
        for k in range(1, 4):
            assert table.value(0, 0, k) == pytest.approx(0.6, abs=1e-12)
            assert table.value(0, 1, k) == pytest.approx(0.4, abs=1e-12)

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(21)
        worst = 0.0
        for trial in range(25):
            n = int(rng.integers(1, 5))
            d = int(rng.integers(1, 5))
            files = int(rng.integers(1, 4))
            model = random_chain(rng, n, sparse=trial % 3 == 0)
            per_helper = rng.random((n, files))
            per_helper /= per_helper.sum(axis=1, keepdims=True)
            requests = RequestModel(per_helper)
            table = contact_value_table(model, requests, d)
            oracle = contact_value_oracle(model, requests, d)
            worst = max(worst, float(np.abs(table.values - oracle.values).max()))
        assert worst <= 1e-12

    def test_monotone_in_contact_count(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n, d = int(rng.integers(1, 5)), int(rng.integers(2, 5))
            model = random_chain(rng, n)
            requests = uniform_request_model([1.0], n)
            table = contact_value_table(model, requests, d)
            assert np.all(np.diff(table.values, axis=2) <= 1e-12)

    def test_first_contact_mass_at_most_one(self):
        rng = np.random.default_rng(6)
        model = random_chain(rng, 4)
        per_helper = rng.random((4, 3))
        per_helper /= per_helper.sum(axis=1, keepdims=True)
        table = contact_value_table(model, RequestModel(per_helper), 3)
        per_helper_mass = table.values[:, :, 0].sum(axis=1)
        assert np.all(per_helper_mass <= 1.0 + 1e-12)

    def test_oracle_respects_cap(self):
        rng = np.random.default_rng(0)
        model = random_chain(rng, 10)
        with pytest.raises(InstanceTooLargeError):
            contact_value_oracle(model, uniform_request_model([1.0], 10), 8)
