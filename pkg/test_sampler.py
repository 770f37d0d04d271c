#!/usr/bin/env python3
"""
Tests for importance-aware initial populations
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from allocation import allocate
from cluster import make_cluster
from errors import PopulationTooSmall
from sampler import beta_params, sample_population, seed_rows


def open_cluster(importance, perf=None):
    V = len(importance)
    return make_cluster(perf or [1.0] * V, [math.inf] * V, 500.0, 0.85, 0.5, importance=importance)


class TestBetaParams:
    """Beta parameters from importance"""

    def test_examples(self):
        """Uniform, skewed and clamped cases"""
        assert beta_params([0.5], 2.0) == ((1.0, 1.0),)
        assert beta_params([0.0], 4.0) == ((4.0, 1.0),)
        assert beta_params([1.0], 4.0) == ((1e-3, 1.0),)

    def test_omega_positive(self):
        """omega must be positive"""
        with pytest.raises(ValueError):
            beta_params([0.5], 0.0)


class TestSeedRows:
    """Deterministic rows 0-3"""

    def test_zero_minimum(self):
        """p_min = 0 makes rows 1 and 2 zero"""
        cluster = open_cluster([0.25] * 4)
        rows = seed_rows(cluster, allocate(cluster))
        assert np.all(rows[1] == 0) and np.all(rows[2] == 0)

    def test_perf_biased_row(self):
        """Uniform perf scales p_min by 1 + 0.2/V"""
        V = 4
        cluster = make_cluster([0.5] * V, [250.0] * V, 500.0, 0.85, 0.5)
        alloc = allocate(cluster)
        rows = seed_rows(cluster, alloc)
        np.testing.assert_allclose(rows[1], 0.5)
        np.testing.assert_allclose(rows[2], 0.5 * (1 + 0.2 / V))
        np.testing.assert_array_equal(rows[0], alloc.p_final.as_array())

    def test_aggressive_row_above_minimum(self):
        """Row 3 never drops below p_min"""
        cluster = make_cluster([0.3, 0.6, 0.9], [100.0, 300.0, 450.0], 500.0, 0.85, 0.5)
        alloc = allocate(cluster)
        for seed in range(200):
            rows = seed_rows(cluster, alloc, rng=np.random.default_rng(seed))
            assert np.all(rows[3] >= rows[1])


class TestSamplePopulation:
    """Full initial population"""

    def test_four_rows(self):
        """N = 4 is exactly the seed rows"""
        cluster = make_cluster([0.3, 0.6], [200.0, 300.0], 500.0, 0.85, 0.5)
        pop = sample_population(cluster, allocate(cluster), n=4, seed=3)
        assert pop.X.shape == (4, 2)
        assert pop.provenance == ("allocated", "min", "perf-biased", "aggressive")

    def test_too_small(self):
        """N < 4 raises"""
        cluster = make_cluster([0.3, 0.6], [200.0, 300.0], 500.0, 0.85, 0.5)
        with pytest.raises(PopulationTooSmall):
            sample_population(cluster, allocate(cluster), n=3)

    def test_deterministic(self):
        """Same seed, same matrix"""
        cluster = make_cluster([0.3, 0.6], [200.0, 300.0], 500.0, 0.85, 0.5)
        alloc = allocate(cluster)
        a = sample_population(cluster, alloc, n=64, seed=5)
        b = sample_population(cluster, alloc, n=64, seed=5)
        np.testing.assert_array_equal(a.X, b.X)

    def test_bounds(self):
        """Every entry lies in [p_min_v, 0.99]"""
        rng = np.random.default_rng(12)
        for trial in range(20):
            V = int(rng.integers(1, 13))
            cluster = make_cluster(
                rng.uniform(0.05, 1, V), rng.uniform(10, 600, V), 506.8, 0.85, 0.5,
                importance=rng.uniform(0, 1, V),
            )
            alloc = allocate(cluster)
            X = sample_population(cluster, alloc, n=64, seed=trial).X
            assert np.all(X >= alloc.p_min.as_array())
            assert np.all(X <= 0.99)

    def test_beta_mean(self):
        """Large omega with zero importance centres near omega / (omega + 1)"""
        omega = 20.0
        cluster = open_cluster([0.0, 1.0])
        X = sample_population(cluster, allocate(cluster), n=10_000, omega=omega, seed=0).X
        assert X[4:, 0].mean() == pytest.approx(omega / (omega + 1), abs=0.02)

    def test_importance_skew(self):
        """Less important views are pruned more on average, over five seeds"""
        cluster = open_cluster([0.1, 0.9])
        alloc = allocate(cluster)
        for seed in range(5):
            X = sample_population(cluster, alloc, n=10_000, omega=4.0, seed=seed).X
            assert X[:, 0].mean() - X[:, 1].mean() > 0.2
            assert np.all((X >= 0) & (X <= 0.99))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
