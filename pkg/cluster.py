"""
Core value types for the SlimEdge optimizer.

This module holds the optimization instance (devices, caps, importance),
the pruning decision vector and the hyperparameters shared by every search
stage. All types are frozen dataclasses and therefore safe to share across
threads and worker processes.
"""

import logging
import math
import typing
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, List, Mapping, NewType, Optional, Sequence, Tuple

import numpy as np

from errors import (
    AccuracyFloorAboveBase,
    DuplicateView,
    HyperparameterError,
    ImportanceNotNormalized,
    MissingView,
    NonPositiveMemory,
    NonPositivePerf,
    OutOfRangePruning,
)

logger = logging.getLogger(__name__)

ViewId = NewType("ViewId", int)

MAX_PRUNING = 0.99
IMPORTANCE_TOLERANCE = 1e-9
_RANGE_SLACK = 1e-12


@dataclass(frozen=True)
class DeviceProfile:
    """One edge device and the view it serves."""

    view: int
    perf_factor: float
    mem_cap_mb: float
    base_size_mb: Optional[float] = None  # per-view override of the backbone size

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if self.base_size_mb is None:
            del data["base_size_mb"]
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DeviceProfile":
        return cls(
            view=int(data["view"]),
            perf_factor=float(data["perf_factor"]),
            mem_cap_mb=float(data["mem_cap_mb"]),
            base_size_mb=None if data.get("base_size_mb") is None else float(data["base_size_mb"]),
        )


@dataclass(frozen=True)
class ClusterSpec:
    """
    The optimization instance: one device per view plus application limits.

    Construction does not validate; call validate_cluster() for that.
    """

    devices: Tuple[DeviceProfile, ...]
    base_model_size_mb: float
    base_accuracy: float
    min_accuracy: float
    importance: Tuple[float, ...]
    name: str = "custom"
    base_time_units: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        object.__setattr__(self, "importance", tuple(float(i) for i in self.importance))

    @property
    def n_views(self) -> int:
        return len(self.devices)

    def _ordered(self) -> List[DeviceProfile]:
        return sorted(self.devices, key=lambda d: d.view)

    @property
    def perf(self) -> np.ndarray:
        """Performance factors ordered by view index."""
        return np.array([d.perf_factor for d in self._ordered()], dtype=float)

    @property
    def caps(self) -> np.ndarray:
        """Memory caps (MB) ordered by view index."""
        return np.array([d.mem_cap_mb for d in self._ordered()], dtype=float)

    @property
    def base_sizes(self) -> np.ndarray:
        """Unpruned model size per view, honouring per-view overrides."""
        return np.array(
            [
                self.base_model_size_mb if d.base_size_mb is None else d.base_size_mb
                for d in self._ordered()
            ],
            dtype=float,
        )

    @property
    def importance_array(self) -> np.ndarray:
        return np.asarray(self.importance, dtype=float)

    def with_min_accuracy(self, min_accuracy: float) -> "ClusterSpec":
        return replace(self, min_accuracy=min_accuracy)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "base_model_size_mb": self.base_model_size_mb,
            "base_accuracy": self.base_accuracy,
            "min_accuracy": self.min_accuracy,
            "base_time_units": self.base_time_units,
            "importance": list(self.importance),
            "devices": [d.to_dict() for d in self.devices],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ClusterSpec":
        """
        Build a cluster from its JSON form.

        `importance_percent` (as printed in salience tables) is normalized by
        its sum; `importance` is taken verbatim and left to validation.

        Raises:
            KeyError: a required field is missing.
        """
        if "importance_percent" in data:
            raw = np.asarray(data["importance_percent"], dtype=float)
            importance = tuple((raw / raw.sum()).tolist())
        else:
            importance = tuple(float(i) for i in data["importance"])
        return cls(
            devices=tuple(DeviceProfile.from_dict(d) for d in data["devices"]),
            base_model_size_mb=float(data["base_model_size_mb"]),
            base_accuracy=float(data["base_accuracy"]),
            min_accuracy=float(data["min_accuracy"]),
            importance=importance,
            name=str(data.get("name", "custom")),
            base_time_units=float(data.get("base_time_units", 1.0)),
        )


@dataclass(frozen=True)
class PruningVector:
    """Per-view pruning fractions, each within [0, 0.99]."""

    p: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(x) for x in self.p)
        for v, x in enumerate(values):
            if not (-_RANGE_SLACK <= x <= MAX_PRUNING + _RANGE_SLACK) or math.isnan(x):
                raise OutOfRangePruning(f"p[{v}] = {x} outside [0, {MAX_PRUNING}]")
        object.__setattr__(self, "p", tuple(min(max(x, 0.0), MAX_PRUNING) for x in values))

    def __len__(self) -> int:
        return len(self.p)

    def __iter__(self):
        return iter(self.p)

    def __getitem__(self, index: int) -> float:
        return self.p[index]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.p, dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "PruningVector":
        return cls(tuple(float(x) for x in np.asarray(values, dtype=float).ravel()))

    @classmethod
    def uniform(cls, level: float, n_views: int) -> "PruningVector":
        return cls((float(level),) * n_views)

    def to_dict(self) -> Dict[str, Any]:
        return {"p": list(self.p)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PruningVector":
        return cls(tuple(data["p"]))


@dataclass(frozen=True)
class Hyperparams:
    """Reward weights, slopes and search controls."""

    alpha: float = 1.0
    beta: float = 0.01
    gamma: float = 0.01
    delta: float = 1.0
    sigma_r: float = 0.05
    sigma_l: float = 0.05
    sigma_size: float = 50.0
    sigma_time: Optional[float] = None  # None -> 0.5 * T_baseline
    lambda_scale: float = 0.25
    omega: float = 4.0
    kappa_g: float = 1.0
    kappa_l: float = 1e3
    phi: float = 1e4
    pop_size: int = 64
    n_generations: int = 200
    seed: int = 0
    eta_c: float = 15.0
    crossover_rate: float = 0.9
    eta_m: float = 20.0
    mutation_rate: Optional[float] = None  # None -> 1 / V
    blend_alpha: float = 0.5
    mutation_sigma: float = 0.05
    invert_perf_in_weights: bool = False
    r_max: Optional[float] = None
    archive_size: Optional[int] = None  # None -> 2 * pop_size

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta", "lambda_scale"):
            if getattr(self, name) < 0:
                raise HyperparameterError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("sigma_r", "sigma_l", "sigma_size", "omega", "kappa_g", "kappa_l", "phi",
                     "eta_c", "eta_m", "mutation_sigma"):
            if not getattr(self, name) > 0:
                raise HyperparameterError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.sigma_time is not None and not self.sigma_time > 0:
            raise HyperparameterError(f"sigma_time must be > 0, got {self.sigma_time}")
        if self.pop_size < 4 or self.pop_size % 2:
            raise HyperparameterError(f"pop_size must be even and >= 4, got {self.pop_size}")
        if self.n_generations < 1:
            raise HyperparameterError(f"n_generations must be >= 1, got {self.n_generations}")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise HyperparameterError(f"crossover_rate must be in [0, 1], got {self.crossover_rate}")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise HyperparameterError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")

    def mutation_rate_for(self, n_views: int) -> float:
        return self.mutation_rate if self.mutation_rate is not None else 1.0 / n_views

    def with_overrides(self, overrides: Mapping[str, Any]) -> "Hyperparams":
        """
        Return a copy with fields replaced, converting strings by field type.

        Args:
            overrides: field name to value; string values such as "0.5",
                "true" or "none" are parsed according to the field annotation.

        Raises:
            HyperparameterError: unknown field or unparseable value.
        """
        hints = typing.get_type_hints(Hyperparams)
        known = {f.name for f in fields(self)}
        parsed: Dict[str, Any] = {}
        for key, value in overrides.items():
            if key not in known:
                raise HyperparameterError(f"unknown hyperparameter '{key}'")
            parsed[key] = _coerce(key, value, hints[key])
        return replace(self, **parsed)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Hyperparams":
        return cls().with_overrides(data)


def _coerce(key: str, value: Any, annotation: Any) -> Any:
    if not isinstance(value, str):
        return value
    text = value.strip()
    args = typing.get_args(annotation)
    if type(None) in args:
        if text.lower() in ("none", "null", ""):
            return None
        annotation = next(a for a in args if a is not type(None))
    try:
        if annotation is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if annotation is int:
            return int(text)
        return float(text)
    except ValueError:
        raise HyperparameterError(f"cannot parse {key}={value!r}") from None


def validate_cluster(spec: ClusterSpec, allow_unreachable_floor: bool = False) -> ClusterSpec:
    """
    Check every ClusterSpec invariant and return the cluster unchanged.

    Args:
        spec: cluster to check
        allow_unreachable_floor: log instead of raising when the accuracy
            floor exceeds base accuracy (the fallback chain copes with it)

    Returns:
        The same spec.

    Raises:
        ClusterValidationError subclasses naming the offending field.
    """
    views = [d.view for d in spec.devices]
    if not views:
        raise MissingView("cluster has no devices", field="devices")
    seen = set()
    for v in views:
        if v in seen:
            raise DuplicateView(f"view {v} assigned to more than one device", field=f"devices[view={v}]")
        seen.add(v)
    expected = set(range(len(views)))
    if seen != expected:
        missing = sorted(expected - seen)
        raise MissingView(f"views must be 0..{len(views) - 1}; missing {missing}", field="devices")

    for d in spec.devices:
        if not d.perf_factor > 0:
            raise NonPositivePerf(f"perf_factor {d.perf_factor} must be > 0", field=f"devices[{d.view}].perf_factor")
        if not d.mem_cap_mb > 0:
            raise NonPositiveMemory(f"mem_cap_mb {d.mem_cap_mb} must be > 0", field=f"devices[{d.view}].mem_cap_mb")
        if d.base_size_mb is not None and not d.base_size_mb > 0:
            raise NonPositiveMemory(f"base_size_mb {d.base_size_mb} must be > 0", field=f"devices[{d.view}].base_size_mb")
    if not spec.base_model_size_mb > 0:
        raise NonPositiveMemory(f"{spec.base_model_size_mb} must be > 0", field="base_model_size_mb")

    importance = spec.importance_array
    if importance.shape != (len(views),):
        raise ImportanceNotNormalized(
            f"expected {len(views)} entries, got {importance.size}", field="importance"
        )
    if np.any(importance < 0) or not np.all(np.isfinite(importance)):
        raise ImportanceNotNormalized("entries must be finite and >= 0", field="importance")
    total = float(importance.sum())
    if abs(total - 1.0) > IMPORTANCE_TOLERANCE:
        raise ImportanceNotNormalized(f"entries sum to {total}, expected 1", field="importance")

    if spec.min_accuracy > spec.base_accuracy:
        if not allow_unreachable_floor:
            raise AccuracyFloorAboveBase(
                f"min_accuracy {spec.min_accuracy} exceeds base_accuracy {spec.base_accuracy}",
                field="min_accuracy",
            )
        logger.warning(
            f"Accuracy floor {spec.min_accuracy} exceeds base accuracy {spec.base_accuracy}; "
            "no configuration can meet it"
        )
    return spec


def normalize_importance(values: Sequence[float]) -> Tuple[float, ...]:
    """Scale nonnegative salience scores (fractions or percent) to sum 1."""
    raw = np.asarray(values, dtype=float)
    total = raw.sum()
    if total <= 0:
        return tuple([1.0 / raw.size] * raw.size)
    return tuple((raw / total).tolist())


def make_cluster(
    perf: Sequence[float],
    caps: Sequence[float],
    base_model_size_mb: float,
    base_accuracy: float,
    min_accuracy: float,
    importance: Optional[Sequence[float]] = None,
    name: str = "custom",
) -> ClusterSpec:
    """
    Convenience constructor from parallel per-view lists.

    Args:
        perf: performance factor per view
        caps: memory cap (MB) per view
        base_model_size_mb: unpruned model size
        base_accuracy: accuracy of the unpruned deployment
        min_accuracy: accuracy floor
        importance: salience per view in any scale; uniform when omitted
        name: label carried into reports

    Returns:
        An unvalidated ClusterSpec.
    """
    n = len(perf)
    if importance is None:
        importance = [1.0] * n
    devices = tuple(
        DeviceProfile(view=v, perf_factor=float(perf[v]), mem_cap_mb=float(caps[v])) for v in range(n)
    )
    return ClusterSpec(
        devices=devices,
        base_model_size_mb=float(base_model_size_mb),
        base_accuracy=float(base_accuracy),
        min_accuracy=float(min_accuracy),
        importance=normalize_importance(importance),
        name=name,
    )
