#!/usr/bin/env python3
"""
Tests for the accuracy oracles: synthetic model, feature bank, surrogate
and permutation importance
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from accuracy_oracle import (
    DEFAULT_GRID,
    Dataset,
    FeatureBank,
    FeatureBankAccuracy,
    SyntheticAccuracy,
    build_accuracy_model,
    fit_surrogate,
    generate_dataset,
    generate_feature_bank,
    load_dataset,
    load_feature_bank,
    mean_class_accuracy,
    pool_features,
    rmse,
    sample_configs,
    save_dataset,
    save_feature_bank,
    view_importance,
)
from cluster import PruningVector, make_cluster, normalize_importance
from errors import ConfigError, EmptyClass, InsufficientData, UnknownSample

PROFILE_PERCENT = [7.2, 10.5, 7.9, 7.7, 7.8, 8.6, 9.1, 8.7, 8.6, 7.6, 8.3, 7.9]


def profile_model():
    return SyntheticAccuracy(base=0.85, importance=normalize_importance(PROFILE_PERCENT))


def tiny_bank(features, labels, prototypes, levels=(0.0,)):
    return FeatureBank(
        features=np.asarray(features, dtype=float),
        labels=np.asarray(labels),
        levels=np.asarray(levels, dtype=float),
        prototypes=np.asarray(prototypes, dtype=float),
    )


class TestSyntheticAccuracy:
    """Closed-form accuracy model"""

    def test_base_at_zero(self):
        """No pruning gives base accuracy"""
        model = profile_model()
        assert model.evaluate(PruningVector.uniform(0.0, 12)) == pytest.approx(0.85)
        assert model.base_accuracy == pytest.approx(0.85)

    def test_calibration(self):
        """Uniform 90% pruning costs about five points"""
        assert profile_model().evaluate(np.full(12, 0.9)) == pytest.approx(0.80, abs=1e-9)

    def test_flat_below_knee(self):
        """Pruning up to the knee is free"""
        assert profile_model().evaluate(np.full(12, 0.3)) == pytest.approx(0.85)

    def test_coordinatewise_monotone(self):
        """Raising any coordinate never raises accuracy"""
        model = profile_model()
        rng = np.random.default_rng(11)
        for _ in range(1000):
            p = rng.uniform(0, 0.99, size=12)
            q = p.copy()
            v = rng.integers(12)
            q[v] = rng.uniform(p[v], 0.99)
            assert model.evaluate(q) <= model.evaluate(p) + 1e-15

    def test_clamped(self):
        """Severe degradation clamps at zero"""
        model = SyntheticAccuracy(base=0.85, importance=(0.5, 0.5), severity=100.0)
        assert model.evaluate([0.99, 0.99]) == 0.0


class TestPooling:
    """Max-pooling across views"""

    def test_elementwise_max(self):
        """(1, 0) and (0, 1) pool to (1, 1)"""
        bank = tiny_bank([[[[1.0, 0.0]], [[0.0, 1.0]]]], [0], [[1.0, 1.0]])
        assert list(pool_features(bank, 0, [0.0, 0.0])) == [1.0, 1.0]

    def test_idempotent(self):
        """Identical views pool to themselves"""
        f = [0.3, -0.2, 0.9]
        bank = tiny_bank([[[f], [f], [f]]], [0], [f])
        assert list(pool_features(bank, 0, [0.0, 0.0, 0.0])) == f

    def test_matches_brute_force(self):
        """Pooling equals an explicit per-element loop"""
        bank = generate_feature_bank(3, n_classes=2, samples_per_class=3, dim=4, levels=[0.0, 0.5, 0.9], seed=1)
        p = [0.1, 0.6, 0.85]
        idx = [0, 1, 2]
        for s in range(bank.n_samples):
            expected = [max(bank.features[s, v, idx[v], d] for v in range(3)) for d in range(4)]
            assert list(pool_features(bank, s, p)) == expected

    def test_view_permutation_invariance(self):
        """Reordering views (with their pruning) leaves the pooled vector unchanged"""
        bank = generate_feature_bank(4, n_classes=2, samples_per_class=2, dim=5, seed=2)
        perm = [2, 0, 3, 1]
        shuffled = FeatureBank(bank.features[:, perm], bank.labels, bank.levels, bank.prototypes)
        p = np.array([0.0, 0.3, 0.62, 0.9])
        for s in range(bank.n_samples):
            np.testing.assert_array_equal(pool_features(bank, s, p), pool_features(shuffled, s, p[perm]))

    def test_unknown_sample(self):
        """Out-of-range sample ids raise"""
        bank = generate_feature_bank(2, n_classes=2, samples_per_class=1, dim=2, seed=0)
        with pytest.raises(UnknownSample):
            pool_features(bank, 99, [0.0, 0.0])

    def test_continuous_pruning_snaps_to_grid(self):
        """Between-level pruning uses the nearest cached level"""
        bank = generate_feature_bank(2, n_classes=2, samples_per_class=1, dim=3, levels=[0.0, 0.5], seed=4)
        np.testing.assert_array_equal(pool_features(bank, 0, [0.1, 0.4]), pool_features(bank, 0, [0.0, 0.5]))


class TestMeanClassAccuracy:
    """Macro-averaged accuracy"""

    def test_perfect_separation(self):
        """Pooled vectors equal to their prototypes classify perfectly"""
        protos = np.eye(3)
        features = [[[protos[c]]] for c in (0, 1, 2, 1)]
        bank = tiny_bank(features, [0, 1, 2, 1], protos)
        assert mean_class_accuracy(bank, [0.0]) == 1.0

    def test_macro_average_half(self):
        """One class right, one class wrong gives 0.5"""
        protos = np.eye(2)
        features = [[[protos[0]]], [[protos[0]]], [[protos[0]]]]
        bank = tiny_bank(features, [0, 0, 1], protos)
        assert mean_class_accuracy(bank, [0.0]) == 0.5

    def test_hand_counted_confusion(self):
        """Three classes, one misclassified sample: (1/2 + 1 + 1) / 3"""
        protos = np.eye(3)
        features = [[[protos[0]]], [[protos[1]]], [[protos[1]]], [[protos[2]]]]
        bank = tiny_bank(features, [0, 0, 1, 2], protos)
        assert mean_class_accuracy(bank, [0.0]) == pytest.approx(2.5 / 3)

    def test_empty_class(self):
        """A class without samples raises"""
        protos = np.eye(3)
        bank = tiny_bank([[[protos[0]]], [[protos[1]]]], [0, 1], protos)
        with pytest.raises(EmptyClass):
            mean_class_accuracy(bank, [0.0])

    def test_relabeling_invariance(self):
        """Permuting class ids in labels and prototypes changes nothing"""
        bank = generate_feature_bank(3, seed=5)
        mapping = np.array([3, 0, 4, 1, 2])
        relabeled = FeatureBank(
            bank.features, mapping[bank.labels], bank.levels, bank.prototypes[np.argsort(mapping)]
        )
        for level in (0.0, 0.5, 0.98):
            p = [level] * 3
            assert mean_class_accuracy(relabeled, p) == pytest.approx(mean_class_accuracy(bank, p))

    def test_noise_lowers_accuracy(self):
        """Heaviest pruning is no more accurate than none, over five seeds"""
        for seed in range(5):
            model = FeatureBankAccuracy(generate_feature_bank(12, seed=seed))
            low = model.evaluate(np.zeros(12))
            high = model.evaluate(np.full(12, 0.98))
            assert 0.0 <= high <= low <= 1.0


class TestSurrogate:
    """Boosted-tree surrogate"""

    def test_fidelity(self):
        """2000 synthetic samples give held-out RMSE below 0.01"""
        truth = profile_model()
        train = generate_dataset(truth, 2000, seed=0)
        held_out = generate_dataset(truth, 500, seed=1)
        surrogate = fit_surrogate(train, seed=0)
        assert surrogate.training_rmse < 0.01
        assert rmse(surrogate, held_out) < 0.01

    def test_constant_target(self):
        """A constant dataset yields a constant predictor"""
        pairs = [(p, 0.7) for p in sample_configs(DEFAULT_GRID, 60, 3, seed=2)]
        surrogate = fit_surrogate(pairs)
        probes = np.random.default_rng(0).uniform(0, 0.98, size=(100, 3))
        np.testing.assert_allclose(surrogate.evaluate_batch(probes), 0.7, atol=1e-6)

    def test_insufficient_data(self):
        """Fewer than 50 examples raise"""
        pairs = [(p, 0.5) for p in sample_configs(DEFAULT_GRID, 10, 2, seed=0)]
        with pytest.raises(InsufficientData):
            fit_surrogate(pairs)

    def test_deterministic(self):
        """Same data and seed give identical predictions"""
        data = generate_dataset(profile_model(), 200, seed=3)
        a = fit_surrogate(data, n_trees=50, seed=1)
        b = fit_surrogate(data, n_trees=50, seed=1)
        np.testing.assert_array_equal(a.evaluate_batch(data.X), b.evaluate_batch(data.X))

    def test_surrogate_importance_tracks_profile(self):
        """Permutation importance of a fitted surrogate ranks views like the profile"""
        surrogate = fit_surrogate(generate_dataset(profile_model(), 2000, seed=0), seed=0)
        scores = np.asarray(view_importance(surrogate, n_probes=5000, seed=0))
        rho, _ = spearmanr(scores, PROFILE_PERCENT)
        assert rho > 0.9
        order = np.argsort(PROFILE_PERCENT)
        assert scores[order[-3:]].sum() > scores[order[:3]].sum()


class TestViewImportance:
    """Permutation importance"""

    def test_uniform_importance(self):
        """Symmetric model gives near-uniform importance"""
        model = SyntheticAccuracy(base=0.85, importance=(0.25, 0.25, 0.25, 0.25))
        scores = view_importance(model, n_probes=2000, seed=0)
        assert sum(scores) == pytest.approx(1.0)
        for s in scores:
            assert s == pytest.approx(0.25, abs=0.02)

    def test_degenerate_salience(self):
        """A view with no influence gets zero importance"""
        model = SyntheticAccuracy(base=0.85, importance=(1.0, 0.0))
        scores = view_importance(model, n_probes=500, seed=1)
        assert scores[0] == pytest.approx(1.0, abs=0.02)
        assert scores[1] == pytest.approx(0.0, abs=0.02)

    def test_recovers_profile_ordering(self):
        """Injected 12-view salience is recovered by rank"""
        scores = view_importance(profile_model(), n_probes=20000, seed=0)
        rho, _ = spearmanr(scores, PROFILE_PERCENT)
        assert rho > 0.9
        assert min(scores) >= 0

    def test_insensitive_model_is_uniform(self):
        """A flat model reports uniform importance"""
        model = SyntheticAccuracy(base=0.85, importance=(0.0, 0.0, 0.0))
        assert view_importance(model, n_probes=100) == pytest.approx((1 / 3, 1 / 3, 1 / 3))

    def test_probe_minimum(self):
        """Fewer than 100 probes raise"""
        with pytest.raises(ValueError):
            view_importance(profile_model(), n_probes=99)


class TestSampleConfigs:
    """Random grid configurations"""

    def test_singleton_grid(self):
        """Grid {0} yields zero vectors"""
        configs = sample_configs([0.0], 5, 4, seed=0)
        assert len(configs) == 5
        assert all(c.p == (0.0,) * 4 for c in configs)

    def test_closure_and_determinism(self):
        """Entries come from the grid and repeat per seed"""
        a = sample_configs(DEFAULT_GRID, 1000, 12, seed=9)
        b = sample_configs(DEFAULT_GRID, 1000, 12, seed=9)
        assert a == b
        allowed = set(DEFAULT_GRID.tolist())
        assert all(x in allowed for c in a for x in c.p)

    def test_count_must_be_positive(self):
        """count = 0 raises"""
        with pytest.raises(ValueError):
            sample_configs(DEFAULT_GRID, 0, 3)


class TestPersistence:
    """JSON header plus CSV caches"""

    def test_feature_bank_round_trip(self, tmp_path):
        """A saved bank reloads identically"""
        bank = generate_feature_bank(2, n_classes=2, samples_per_class=2, dim=3, levels=[0.0, 0.5], seed=7)
        loaded = load_feature_bank(save_feature_bank(bank, tmp_path / "bank"))
        np.testing.assert_array_equal(loaded.features, bank.features)
        np.testing.assert_array_equal(loaded.labels, bank.labels)
        np.testing.assert_array_equal(loaded.prototypes, bank.prototypes)

    def test_dataset_round_trip(self, tmp_path):
        """A saved dataset reloads identically"""
        data = generate_dataset(profile_model(), 60, seed=2)
        loaded = load_dataset(save_dataset(data, tmp_path / "data.csv"))
        np.testing.assert_array_equal(loaded.X, data.X)
        np.testing.assert_array_equal(loaded.y, data.y)

    def test_dataset_bad_cell(self, tmp_path):
        """A non-numeric cell is a ConfigError naming the file and line"""
        path = tmp_path / "bad.csv"
        path.write_text("p0,p1,accuracy\n0.1,0.2,0.8\n0.3,oops,0.7\n", encoding="utf-8")
        with pytest.raises(ConfigError) as exc:
            load_dataset(path)
        assert exc.value.line == 3
        assert f"{path}:3" in str(exc.value)

    def test_dataset_ragged_row(self, tmp_path):
        """Rows with the wrong column count are rejected"""
        path = tmp_path / "ragged.csv"
        path.write_text("p0,p1,accuracy\n0.1,0.8\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_dataset(path)


class TestModelSelector:
    """build_accuracy_model"""

    def test_selectors(self, tmp_path):
        """synthetic, feature-bank and surrogate resolve; unknown names raise"""
        cluster = make_cluster([1.0] * 3, [500.0] * 3, 500.0, 0.85, 0.5)
        assert isinstance(build_accuracy_model("synthetic", cluster), SyntheticAccuracy)
        assert isinstance(build_accuracy_model("feature-bank", cluster), FeatureBankAccuracy)
        path = save_dataset(generate_dataset(SyntheticAccuracy.for_cluster(cluster), 80, seed=0), tmp_path / "d.csv")
        surrogate = build_accuracy_model(f"surrogate:{path}", cluster)
        assert surrogate.n_views == 3
        with pytest.raises(ConfigError):
            build_accuracy_model("oracle", cluster)

    def test_dataset_view_mismatch(self, tmp_path):
        """A dataset for another view count is rejected"""
        cluster = make_cluster([1.0] * 3, [500.0] * 3, 500.0, 0.85, 0.5)
        data = Dataset(X=np.zeros((60, 2)), y=np.full(60, 0.8))
        path = save_dataset(data, tmp_path / "d.csv")
        with pytest.raises(ConfigError):
            build_accuracy_model(f"surrogate:{path}", cluster)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
