"""
Search box and variation operators shared by the NSGA-II and GA stages.

Candidates live in the box [p_min, 0.99]^V. In grid mode every candidate is
additionally snapped to the allowed pruning levels at or above the view's
minimum, and mutation resamples a gene from those levels.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from cluster import MAX_PRUNING

logger = logging.getLogger(__name__)

# Second entry of the SeedSequence key for each search stage's RNG stream.
STREAM_NSGA2 = 1
STREAM_GA = 2


def stage_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


@dataclass(frozen=True)
class SearchBox:
    """Lower bounds per view, the common upper bound and an optional level grid."""

    lower: np.ndarray
    upper: float = MAX_PRUNING
    grid: Optional[np.ndarray] = None

    @classmethod
    def build(cls, lower: Sequence[float], grid: Optional[Sequence[float]] = None) -> "SearchBox":
        lower_arr = np.asarray(lower, dtype=float)
        grid_arr = None if grid is None else np.unique(np.asarray(grid, dtype=float))
        if grid_arr is not None and np.any((grid_arr < 0) | (grid_arr > MAX_PRUNING)):
            raise ValueError(f"grid levels must lie in [0, {MAX_PRUNING}]")
        return cls(lower=lower_arr, grid=grid_arr)

    @property
    def n_views(self) -> int:
        return self.lower.size

    def allowed_levels(self) -> List[np.ndarray]:
        """Grid levels reachable in each view (never empty)."""
        if self.grid is None:
            raise ValueError("search box has no grid")
        levels = []
        for v, lo in enumerate(self.lower):
            ok = self.grid[self.grid >= lo - 1e-12]
            if ok.size == 0:
                logger.warning(f"No grid level reaches p_min={lo:.4f} for view {v}; using p_min")
                ok = np.array([lo])
            levels.append(ok)
        return levels

    def snap(self, X: np.ndarray) -> np.ndarray:
        """Move every gene to its nearest allowed grid level."""
        out = np.array(X, dtype=float, copy=True)
        for v, levels in enumerate(self.allowed_levels()):
            idx = np.abs(out[:, v][:, None] - levels[None, :]).argmin(axis=1)
            out[:, v] = levels[idx]
        return out

    def repair(self, X: np.ndarray) -> np.ndarray:
        """Clip into the box, then snap when a grid is set."""
        out = np.clip(np.atleast_2d(X), self.lower, self.upper)
        return self.snap(out) if self.grid is not None else out

    def enumerate(self) -> np.ndarray:
        """Every grid point of the box, for exhaustive checks on small instances."""
        levels = self.allowed_levels()
        mesh = np.meshgrid(*levels, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def sbx(
    parents: np.ndarray,
    lower: np.ndarray,
    upper: float,
    eta: float,
    rate: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Bounded simulated-binary crossover over consecutive parent pairs.

    Args:
        parents: (N, V) mating pool, N even
        lower: per-view lower bounds
        upper: common upper bound
        eta: distribution index
        rate: probability that a pair recombines
        rng: generator

    Returns:
        (N, V) offspring inside the bounds.
    """
    N, V = parents.shape
    p1, p2 = parents[0::2], parents[1::2]
    pairs = p1.shape[0]
    lo = np.broadcast_to(lower, (pairs, V))
    up = np.full((pairs, V), upper)

    u = rng.random((pairs, V))
    swap = rng.random((pairs, V)) < 0.5
    gene = rng.random((pairs, V)) < 0.5
    paired = (rng.random(pairs) < rate)[:, None]

    y1, y2 = np.minimum(p1, p2), np.maximum(p1, p2)
    span = y2 - y1
    active = paired & gene & (span > 1e-14)
    safe = np.where(active, span, 1.0)

    def spread(bound_gap: np.ndarray) -> np.ndarray:
        beta = 1.0 + 2.0 * bound_gap / safe
        alpha = 2.0 - beta ** -(eta + 1.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            inner = np.where(u <= 1.0 / alpha, u * alpha, 1.0 / (2.0 - u * alpha))
        return inner ** (1.0 / (eta + 1.0))

    c1 = 0.5 * ((y1 + y2) - spread(y1 - lo) * span)
    c2 = 0.5 * ((y1 + y2) + spread(up - y2) * span)
    c1, c2 = np.clip(c1, lo, up), np.clip(c2, lo, up)
    c1, c2 = np.where(swap, c2, c1), np.where(swap, c1, c2)

    child1 = np.where(active, c1, p1)
    child2 = np.where(active, c2, p2)
    out = np.empty_like(parents)
    out[0::2], out[1::2] = child1, child2
    return out


def polynomial_mutation(
    X: np.ndarray,
    lower: np.ndarray,
    upper: float,
    eta: float,
    rate: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Bounded polynomial mutation applied gene-wise with probability `rate`."""
    N, V = X.shape
    lo = np.broadcast_to(lower, (N, V))
    width = upper - lo
    mask = (rng.random((N, V)) < rate) & (width > 1e-14)
    r = rng.random((N, V))
    safe = np.where(width > 0, width, 1.0)
    d1 = (X - lo) / safe
    d2 = (upper - X) / safe
    power = 1.0 / (eta + 1.0)
    low_val = 2.0 * r + (1.0 - 2.0 * r) * (1.0 - d1) ** (eta + 1.0)
    high_val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * (1.0 - d2) ** (eta + 1.0)
    delta = np.where(r < 0.5, low_val ** power - 1.0, 1.0 - high_val ** power)
    mutated = np.clip(X + delta * width, lo, upper)
    return np.where(mask, mutated, X)


def grid_mutation(X: np.ndarray, box: SearchBox, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Resample genes uniformly from their allowed grid levels."""
    out = np.array(X, copy=True)
    N, _ = X.shape
    for v, levels in enumerate(box.allowed_levels()):
        hit = rng.random(N) < rate
        picks = levels[rng.integers(0, levels.size, size=N)]
        out[:, v] = np.where(hit, picks, out[:, v])
    return out


def blend_crossover(parents: np.ndarray, alpha: float, rate: float, rng: np.random.Generator) -> np.ndarray:
    """BLX-alpha over consecutive parent pairs; results are not yet bounded."""
    p1, p2 = parents[0::2], parents[1::2]
    pairs, V = p1.shape
    lo, hi = np.minimum(p1, p2), np.maximum(p1, p2)
    span = hi - lo
    c1 = rng.uniform(lo - alpha * span, hi + alpha * span)
    c2 = rng.uniform(lo - alpha * span, hi + alpha * span)
    keep = (rng.random(pairs) >= rate)[:, None]
    out = np.empty_like(parents)
    out[0::2] = np.where(keep, p1, c1)
    out[1::2] = np.where(keep, p2, c2)
    return out


def gaussian_mutation(X: np.ndarray, sigma: float, rate: float, rng: np.random.Generator) -> np.ndarray:
    hit = rng.random(X.shape) < rate
    return X + np.where(hit, rng.normal(0.0, sigma, size=X.shape), 0.0)


def binary_tournament(keys: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Indices of n tournament winners.

    Args:
        keys: (N, K) sort keys, smaller is better, compared lexicographically
        n: number of winners
        rng: generator

    Returns:
        (n,) winner indices; ties go to the first contestant.
    """
    keys = np.asarray(keys, dtype=float)
    if keys.ndim == 1:
        keys = keys[:, None]
    a = rng.integers(0, keys.shape[0], size=n)
    b = rng.integers(0, keys.shape[0], size=n)
    a_wins = np.ones(n, dtype=bool)
    decided = np.zeros(n, dtype=bool)
    for k in range(keys.shape[1]):
        ka, kb = keys[a, k], keys[b, k]
        better, worse = ka < kb, ka > kb
        a_wins = np.where(~decided & worse, False, a_wins)
        decided |= better | worse
    return np.where(a_wins, a, b)
