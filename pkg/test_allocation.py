#!/usr/bin/env python3
"""
Tests for importance-aware pruning allocation
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from allocation import allocate, allocation_weights, distribute_extra, min_pruning
from cluster import PruningVector, make_cluster
from cost_models import model_size
from errors import InfeasibleCap


class TestMinPruning:
    """Minimum pruning per memory cap"""

    def test_cap_above_base(self):
        """No pruning when the model already fits"""
        cluster = make_cluster([1.0, 1.0], [600.0, math.inf], 506.8, 0.85, 0.8)
        assert min_pruning(cluster).p == (0.0, 0.0)

    def test_table_values(self):
        """Caps from the first experiment table"""
        cluster = make_cluster([0.28, 0.89], [253.93, 111.87], 506.8, 0.85, 0.831)
        p = min_pruning(cluster)
        assert p[0] == pytest.approx(0.4990, abs=1e-4)
        assert p[1] == pytest.approx(0.7793, abs=1e-4)

    def test_result_fits(self):
        """The pruned size never exceeds the cap"""
        rng = np.random.default_rng(0)
        for _ in range(1000):
            base = float(rng.uniform(10, 1000))
            cap = float(rng.uniform(0.011 * base, 1.2 * base))
            p = min_pruning(make_cluster([1.0], [cap], base, 0.85, 0.5))[0]
            assert model_size(p, base) <= cap

    def test_infeasible_cap(self):
        """A cap under 1% of the base names its view"""
        cluster = make_cluster([1.0, 1.0], [100.0, 1.0], 506.8, 0.85, 0.8)
        with pytest.raises(InfeasibleCap) as exc:
            min_pruning(cluster)
        assert exc.value.view == 1


class TestAllocationWeights:
    """lambda_v weights"""

    def test_uniform(self):
        """Uniform importance and perf give uniform weights"""
        cluster = make_cluster([0.5] * 4, [100.0] * 4, 500.0, 0.85, 0.8)
        assert allocation_weights(cluster) == pytest.approx((0.25,) * 4)

    def test_two_view_example(self):
        """Numerators 0.3 and 1.2 normalize to (0.2, 0.8)"""
        cluster = make_cluster([0.5, 0.5], [100.0, 100.0], 500.0, 0.85, 0.8, importance=[0.8, 0.2])
        assert allocation_weights(cluster) == pytest.approx((0.2, 0.8))

    def test_degenerate_falls_back_to_uniform(self):
        """Importance 1 on a single view makes every numerator zero"""
        cluster = make_cluster([0.5], [100.0], 500.0, 0.85, 0.8, importance=[1.0])
        assert allocation_weights(cluster) == (1.0,)

    def test_inverted_perf(self):
        """The inverted form gives slower devices more weight"""
        cluster = make_cluster([0.1, 0.9], [100.0, 100.0], 500.0, 0.85, 0.8)
        w = allocation_weights(cluster)
        inv = allocation_weights(cluster, invert_perf=True)
        assert w[1] > w[0]
        assert inv[0] > inv[1]

    def test_sum_to_one(self):
        """Weights sum to 1 on 1000 random clusters"""
        rng = np.random.default_rng(4)
        for _ in range(1000):
            V = int(rng.integers(1, 13))
            cluster = make_cluster(
                rng.uniform(0.01, 1, V), [100.0] * V, 500.0, 0.85, 0.8, importance=rng.uniform(0, 1, V)
            )
            w = allocation_weights(cluster, invert_perf=bool(rng.integers(2)))
            assert sum(w) == pytest.approx(1.0, abs=1e-12)
            assert min(w) >= 0

    def test_decreasing_in_importance(self):
        """Raising one view's importance lowers its weight"""
        low = make_cluster([0.5, 0.5, 0.5], [100.0] * 3, 500.0, 0.85, 0.8, importance=[0.2, 0.4, 0.4])
        high = make_cluster([0.5, 0.5, 0.5], [100.0] * 3, 500.0, 0.85, 0.8, importance=[0.5, 0.25, 0.25])
        assert allocation_weights(high)[0] < allocation_weights(low)[0]


class TestAllocate:
    """Extra budget distribution"""

    def test_hand_example(self):
        """p_min (0.4, 0.2), scale 0.5, weights (0.25, 0.75)"""
        extra, final = distribute_extra(PruningVector((0.4, 0.2)), (0.25, 0.75), 0.5)
        assert extra == pytest.approx(0.3)
        assert final.p == pytest.approx((0.475, 0.425))

    def test_zero_scale(self):
        """lambda_scale = 0 keeps p_min"""
        cluster = make_cluster([0.3, 0.7], [200.0, 300.0], 500.0, 0.85, 0.8)
        result = allocate(cluster, lambda_scale=0.0)
        assert result.p_final == result.p_min

    def test_no_minimum_no_extra(self):
        """Caps above base leave nothing to distribute"""
        cluster = make_cluster([0.3, 0.7], [600.0, 700.0], 500.0, 0.85, 0.8)
        assert allocate(cluster, lambda_scale=2.0).p_final.p == (0.0, 0.0)

    def test_bounds_property(self):
        """p_final lies in [p_min, 0.99] on 1000 random instances"""
        rng = np.random.default_rng(8)
        for _ in range(1000):
            V = int(rng.integers(1, 13))
            cluster = make_cluster(
                rng.uniform(0.01, 1, V), rng.uniform(10, 600, V), 506.8, 0.85, 0.8,
                importance=rng.uniform(0, 1, V),
            )
            result = allocate(cluster, lambda_scale=float(rng.uniform(0, 3)))
            lo, hi = result.p_min.as_array(), result.p_final.as_array()
            assert np.all(hi >= lo) and np.all(hi <= 0.99)
            assert sum(result.weights) == pytest.approx(1.0, abs=1e-12)

    def test_importance_monotonicity(self):
        """A more important view receives no more pruning when its cap is slack"""
        caps = [300.0, 200.0, 200.0]
        low = make_cluster([0.5] * 3, caps, 500.0, 0.85, 0.8, importance=[0.2, 0.4, 0.4])
        high = make_cluster([0.5] * 3, caps, 500.0, 0.85, 0.8, importance=[0.5, 0.25, 0.25])
        assert allocate(high).p_final[0] <= allocate(low).p_final[0]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
