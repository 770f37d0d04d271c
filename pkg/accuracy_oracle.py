"""
Mean-class-accuracy oracles A(P).

Three interchangeable models map a pruning vector to accuracy:

- SyntheticAccuracy: a closed-form ground truth with a degradation knee,
  weighted by view importance.
- FeatureBankAccuracy: cached per-view features at discrete pruning levels,
  max-pooled across views and classified by nearest class prototype.
- BoostedSurrogate: least-squares boosted shallow trees fitted to
  (pruning vector, accuracy) samples; view salience is read back out of any
  model with permutation importance.
"""

import csv
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from cluster import MAX_PRUNING, ClusterSpec, PruningVector
from errors import ConfigError, EmptyClass, InsufficientData, OutOfRangePruning, UnknownSample

logger = logging.getLogger(__name__)

# 51 levels from 0% to 98%
DEFAULT_GRID = np.linspace(0.0, 0.98, 51)
GRID_MAX = 0.98
MIN_SURROGATE_EXAMPLES = 50
MIN_PROBES = 100

# Uniform 90% pruning lands 0.05 below base accuracy.
DEFAULT_KNEE = 0.3
DEFAULT_SEVERITY = 0.05 / (0.9 - DEFAULT_KNEE) ** 2

VectorLike = Union[PruningVector, Sequence[float], np.ndarray]


def _as_matrix(X: Union[VectorLike, Sequence[VectorLike]]) -> np.ndarray:
    if isinstance(X, PruningVector):
        return X.as_array()[None, :]
    arr = np.asarray(X, dtype=float)
    return arr[None, :] if arr.ndim == 1 else arr


class AccuracyModel(ABC):
    """Maps pruning vectors to mean class accuracy in [0, 1]."""

    @property
    @abstractmethod
    def n_views(self) -> int:
        ...

    @abstractmethod
    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        """Accuracy for each row of an (N, V) matrix of pruning fractions."""

    def evaluate(self, p: VectorLike) -> float:
        return float(self.evaluate_batch(_as_matrix(p))[0])

    @property
    def base_accuracy(self) -> float:
        return self.evaluate(np.zeros(self.n_views))


@dataclass(frozen=True)
class SyntheticAccuracy(AccuracyModel):
    """
    A(P) = clamp(A0 - sum_v I_v * severity * max(0, p_v - knee)^2, 0, 1)

    Flat up to the knee, then a quadratic loss weighted by view importance.
    """

    base: float
    importance: Tuple[float, ...]
    knee: float = DEFAULT_KNEE
    severity: float = DEFAULT_SEVERITY

    def __post_init__(self):
        object.__setattr__(self, "importance", tuple(float(i) for i in self.importance))

    @classmethod
    def for_cluster(cls, cluster: ClusterSpec, **kwargs) -> "SyntheticAccuracy":
        return cls(base=cluster.base_accuracy, importance=cluster.importance, **kwargs)

    @property
    def n_views(self) -> int:
        return len(self.importance)

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        X = _as_matrix(X)
        weights = np.asarray(self.importance, dtype=float) * self.severity
        deficit = np.maximum(0.0, X - self.knee) ** 2 @ weights
        return np.clip(self.base - deficit, 0.0, 1.0)


@dataclass(frozen=True)
class FeatureBank:
    """
    Dense feature cache.

    Attributes:
        features: (S, V, L, D) feature vector per sample, view and level
        labels: (S,) class index per sample
        levels: (L,) sorted pruning grid within [0, 0.98]
        prototypes: (C, D) classifier prototype per class
    """

    features: np.ndarray
    labels: np.ndarray
    levels: np.ndarray
    prototypes: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        levels = np.asarray(self.levels, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        prototypes = np.asarray(self.prototypes, dtype=float)
        if features.ndim != 4:
            raise ValueError(f"features must be (S, V, L, D), got shape {features.shape}")
        s, _, n_levels, dim = features.shape
        if levels.shape != (n_levels,):
            raise ValueError(f"expected {n_levels} levels, got {levels.shape}")
        if np.any(np.diff(levels) <= 0) or levels[0] < 0 or levels[-1] > GRID_MAX + 1e-12:
            raise ValueError(f"levels must be sorted within [0, {GRID_MAX}]")
        if labels.shape != (s,):
            raise ValueError(f"expected {s} labels, got {labels.shape}")
        if prototypes.ndim != 2 or prototypes.shape[1] != dim:
            raise ValueError(f"prototypes must be (C, {dim}), got {prototypes.shape}")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "prototypes", prototypes)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_views(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.prototypes.shape[0]

    def level_indices(self, p: VectorLike) -> np.ndarray:
        """Nearest grid level index for each view."""
        arr = _as_matrix(p)[0]
        return np.abs(arr[:, None] - self.levels[None, :]).argmin(axis=1)

    def pooled(self, p: VectorLike) -> np.ndarray:
        """(S, D) max-pooled descriptor of every sample."""
        idx = self.level_indices(p)
        per_view = self.features[:, np.arange(self.n_views), idx, :]
        return per_view.max(axis=1)


def generate_feature_bank(
    n_views: int,
    n_classes: int = 5,
    samples_per_class: int = 20,
    dim: int = 16,
    levels: Optional[Sequence[float]] = None,
    noise: float = 0.35,
    seed: int = 0,
) -> FeatureBank:
    """
    Deterministically synthesize a feature cache.

    Class prototypes are random unit vectors; each cached feature is its
    class prototype plus Gaussian noise with std noise * (1 + 4 * level),
    so heavier pruning means noisier features. The classifier prototypes
    are the class centroids of the pooled unpruned features.

    Args:
        n_views: number of views V
        n_classes: number of classes C
        samples_per_class: samples generated for each class
        dim: feature dimension D
        levels: pruning grid; the 51-level default when omitted
        noise: base noise std
        seed: RNG seed

    Returns:
        A dense FeatureBank.
    """
    rng = np.random.default_rng(seed)
    grid = DEFAULT_GRID if levels is None else np.asarray(levels, dtype=float)
    centers = rng.normal(size=(n_classes, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    labels = np.repeat(np.arange(n_classes), samples_per_class)
    std = noise * (1.0 + 4.0 * grid)
    shape = (labels.size, n_views, grid.size, dim)
    features = centers[labels][:, None, None, :] + rng.normal(size=shape) * std[None, None, :, None]
    pooled0 = features[:, :, 0, :].max(axis=1)
    prototypes = np.stack([pooled0[labels == c].mean(axis=0) for c in range(n_classes)])
    logger.debug(f"Generated feature bank: {shape} features, {n_classes} classes")
    return FeatureBank(features=features, labels=labels, levels=grid, prototypes=prototypes)


def pool_features(bank: FeatureBank, sample: int, p: VectorLike) -> np.ndarray:
    """
    Element-wise maximum of one sample's view features at the levels nearest p.

    Raises:
        UnknownSample: sample index outside the bank.
    """
    if not 0 <= int(sample) < bank.n_samples:
        raise UnknownSample(f"sample {sample} not in bank of {bank.n_samples}")
    idx = bank.level_indices(p)
    return bank.features[int(sample), np.arange(bank.n_views), idx, :].max(axis=0)


def classify(bank: FeatureBank, pooled: np.ndarray) -> np.ndarray:
    """Nearest-prototype class for each pooled row."""
    d = ((pooled[:, None, :] - bank.prototypes[None, :, :]) ** 2).sum(axis=-1)
    return d.argmin(axis=1)


def mean_class_accuracy(bank: FeatureBank, p: VectorLike) -> float:
    """
    Macro-averaged accuracy of the pooled classifier under pruning p.

    Raises:
        EmptyClass: some class has no samples.
    """
    counts = np.bincount(bank.labels, minlength=bank.n_classes)
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0).tolist()
        raise EmptyClass(f"classes without samples: {empty}")
    predicted = classify(bank, bank.pooled(p))
    correct = np.bincount(bank.labels, weights=(predicted == bank.labels).astype(float),
                          minlength=bank.n_classes)
    return float(np.mean(correct / counts))


class FeatureBankAccuracy(AccuracyModel):
    """AccuracyModel backed by a FeatureBank; continuous p is snapped to the grid."""

    def __init__(self, bank: FeatureBank):
        self.bank = bank

    @property
    def n_views(self) -> int:
        return self.bank.n_views

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        return np.array([mean_class_accuracy(self.bank, row) for row in _as_matrix(X)])


@dataclass
class BoostedSurrogate(AccuracyModel):
    """Additive ensemble of shallow regression trees fitted by least-squares boosting."""

    init: float
    trees: List[DecisionTreeRegressor]
    learning_rate: float
    views: int
    training_rmse: float = float("nan")
    metadata: dict = field(default_factory=dict)

    @property
    def n_views(self) -> int:
        return self.views

    def raw_predict(self, X: np.ndarray) -> np.ndarray:
        X = _as_matrix(X)
        out = np.full(X.shape[0], self.init, dtype=float)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        return np.clip(self.raw_predict(X), 0.0, 1.0)


@dataclass(frozen=True)
class Dataset:
    """(pruning vector, accuracy) samples as arrays."""

    X: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return self.y.size

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[VectorLike, float]]) -> "Dataset":
        X = np.array([_as_matrix(p)[0] for p, _ in pairs], dtype=float)
        y = np.array([float(a) for _, a in pairs], dtype=float)
        return cls(X=X, y=y)


def fit_surrogate(
    dataset: Union[Dataset, Sequence[Tuple[VectorLike, float]]],
    n_trees: int = 200,
    max_depth: int = 3,
    learning_rate: float = 0.1,
    seed: int = 0,
) -> BoostedSurrogate:
    """
    Fit a boosted-tree regressor mapping pruning vectors to accuracy.

    Args:
        dataset: Dataset or list of (vector, accuracy) pairs
        n_trees: boosting rounds
        max_depth: depth of each tree
        learning_rate: shrinkage applied to every tree
        seed: random_state handed to each tree

    Returns:
        BoostedSurrogate with training_rmse set.

    Raises:
        InsufficientData: fewer than 50 examples.
        OutOfRangePruning: a vector leaves [0, 0.99].
    """
    data = dataset if isinstance(dataset, Dataset) else Dataset.from_pairs(dataset)
    if len(data) < MIN_SURROGATE_EXAMPLES:
        raise InsufficientData(f"need >= {MIN_SURROGATE_EXAMPLES} examples, got {len(data)}")
    if np.any(data.X < 0) or np.any(data.X > MAX_PRUNING):
        raise OutOfRangePruning(f"training vectors must lie in [0, {MAX_PRUNING}]")

    init = float(np.mean(data.y))
    residual = data.y - init
    trees: List[DecisionTreeRegressor] = []
    for _ in range(n_trees):
        tree = DecisionTreeRegressor(max_depth=max_depth, random_state=seed)
        tree.fit(data.X, residual)
        residual = residual - learning_rate * tree.predict(data.X)
        trees.append(tree)

    model = BoostedSurrogate(init=init, trees=trees, learning_rate=learning_rate, views=data.X.shape[1])
    model.training_rmse = float(np.sqrt(np.mean((model.raw_predict(data.X) - data.y) ** 2)))
    logger.info(f"Fitted surrogate on {len(data)} examples: training RMSE {model.training_rmse:.5f}")
    return model


def rmse(model: AccuracyModel, data: Dataset) -> float:
    return float(np.sqrt(np.mean((model.evaluate_batch(data.X) - data.y) ** 2)))


def view_importance(model: AccuracyModel, n_probes: int = 2000, seed: int = 0) -> Tuple[float, ...]:
    """
    Permutation importance of each view, normalized to sum 1.

    For every view the coordinate is resampled uniformly over [0, 0.98] at
    each probe point; the view's score is the mean absolute change in
    predicted accuracy. Probe points and replacement draws are shared across
    views.

    Raises:
        ValueError: n_probes < 100.
    """
    if n_probes < MIN_PROBES:
        raise ValueError(f"n_probes must be >= {MIN_PROBES}, got {n_probes}")
    rng = np.random.default_rng(seed)
    V = model.n_views
    base_points = rng.uniform(0.0, GRID_MAX, size=(n_probes, V))
    replacements = rng.uniform(0.0, GRID_MAX, size=(n_probes, V))
    reference = model.evaluate_batch(base_points)
    scores = np.empty(V)
    for v in range(V):
        probe = base_points.copy()
        probe[:, v] = replacements[:, v]
        scores[v] = np.mean(np.abs(model.evaluate_batch(probe) - reference))
    total = scores.sum()
    if total <= 0:
        logger.warning("Model is insensitive to every view; reporting uniform importance")
        return tuple([1.0 / V] * V)
    return tuple((scores / total).tolist())


def sample_configs(grid: Sequence[float], count: int, n_views: int, seed: int = 0) -> List[PruningVector]:
    """
    Draw `count` i.i.d. vectors uniformly from grid^V.

    Raises:
        ValueError: count < 1 or empty grid.
    """
    levels = np.asarray(grid, dtype=float)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if levels.size == 0:
        raise ValueError("grid is empty")
    rng = np.random.default_rng(seed)
    picks = levels[rng.integers(0, levels.size, size=(count, n_views))]
    return [PruningVector.from_array(row) for row in picks]


def generate_dataset(
    model: AccuracyModel,
    count: int,
    grid: Optional[Sequence[float]] = None,
    seed: int = 0,
) -> Dataset:
    """Evaluate `count` random grid configurations through an oracle."""
    configs = sample_configs(DEFAULT_GRID if grid is None else grid, count, model.n_views, seed)
    X = np.array([c.as_array() for c in configs])
    return Dataset(X=X, y=model.evaluate_batch(X))


def save_feature_bank(bank: FeatureBank, directory: Union[str, Path]) -> Path:
    """
    Persist a bank as bank.json (header) plus bank.csv (flat features).

    Returns:
        The directory written to.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    header = {
        "format": "slimedge-feature-bank",
        "version": 1,
        "n_samples": bank.n_samples,
        "n_views": bank.n_views,
        "dim": int(bank.features.shape[3]),
        "grid": bank.levels.tolist(),
        "classes": bank.n_classes,
        "labels": bank.labels.tolist(),
        "prototypes": bank.prototypes.tolist(),
    }
    (out / "bank.json").write_text(json.dumps(header, indent=2), encoding="utf-8")
    dim = bank.features.shape[3]
    with open(out / "bank.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "view", "level"] + [f"f{d}" for d in range(dim)])
        S, V, L, _ = bank.features.shape
        for s in range(S):
            for v in range(V):
                for level in range(L):
                    writer.writerow([s, v, level] + [repr(float(x)) for x in bank.features[s, v, level]])
    return out


def load_feature_bank(directory: Union[str, Path]) -> FeatureBank:
    """Inverse of save_feature_bank."""
    src = Path(directory)
    header = json.loads((src / "bank.json").read_text(encoding="utf-8"))
    S, V, D = header["n_samples"], header["n_views"], header["dim"]
    levels = np.asarray(header["grid"], dtype=float)
    features = np.full((S, V, levels.size, D), np.nan)
    with open(src / "bank.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            s, v, level = int(row[0]), int(row[1]), int(row[2])
            features[s, v, level] = [float(x) for x in row[3:]]
    if np.isnan(features).any():
        raise ValueError(f"{src / 'bank.csv'} does not cover every (sample, view, level)")
    return FeatureBank(
        features=features,
        labels=np.asarray(header["labels"], dtype=int),
        levels=levels,
        prototypes=np.asarray(header["prototypes"], dtype=float),
    )


def save_dataset(data: Dataset, path: Union[str, Path], grid: Optional[Sequence[float]] = None) -> Path:
    """Write a dataset as CSV (p0..pV-1, accuracy) with a JSON header beside it."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    V = data.X.shape[1]
    header = {
        "format": "slimedge-accuracy-dataset",
        "version": 1,
        "n_views": V,
        "count": len(data),
        "grid": None if grid is None else [float(g) for g in grid],
    }
    target.with_suffix(".json").write_text(json.dumps(header, indent=2), encoding="utf-8")
    with open(target, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"p{v}" for v in range(V)] + ["accuracy"])
        for row, acc in zip(data.X, data.y):
            writer.writerow([repr(float(x)) for x in row] + [repr(float(acc))])
    return target


def load_dataset(path: Union[str, Path]) -> Dataset:
    """Read a dataset CSV written by save_dataset."""
    source = Path(path)
    if not source.is_file():
        raise ConfigError("dataset file not found", source=str(source))
    with open(source, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        if not header or header[-1] != "accuracy":
            raise ConfigError("last column must be 'accuracy'", source=str(source), line=1)
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigError(
                    f"expected {len(header)} columns, got {len(row)}", source=str(source), line=reader.line_num
                )
            try:
                rows.append([float(x) for x in row])
            except ValueError as e:
                raise ConfigError(f"non-numeric value: {e}", source=str(source), line=reader.line_num) from None
    arr = np.asarray(rows, dtype=float).reshape(-1, len(header))
    return Dataset(X=arr[:, :-1], y=arr[:, -1])


def build_accuracy_model(selector: str, cluster: ClusterSpec, seed: int = 0) -> AccuracyModel:
    """
    Resolve a model selector: synthetic | feature-bank | surrogate:<dataset.csv>.

    Raises:
        ConfigError: unknown selector or dataset/cluster size mismatch.
    """
    if selector == "synthetic":
        return SyntheticAccuracy.for_cluster(cluster)
    if selector == "feature-bank":
        return FeatureBankAccuracy(generate_feature_bank(cluster.n_views, seed=seed))
    if selector.startswith("surrogate:"):
        path = selector.split(":", 1)[1]
        data = load_dataset(path)
        if data.X.shape[1] != cluster.n_views:
            raise ConfigError(
                f"dataset has {data.X.shape[1]} views, cluster has {cluster.n_views}",
                source=path, field="model",
            )
        return fit_surrogate(data, seed=seed)
    raise ConfigError(f"unknown accuracy model '{selector}'", field="model")
