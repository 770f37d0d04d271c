"""
Importance-aware pruning allocation.

Every view first gets the minimum pruning that fits its device's memory
cap. A further budget, proportional to the total minimum pruning, is then
spread across views by weights that favour low-importance views.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from cluster import MAX_PRUNING, ClusterSpec, PruningVector
from errors import InfeasibleCap

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AllocationResult:
    p_min: PruningVector
    weights: Tuple[float, ...]
    p_extra_total: float
    p_final: PruningVector

    def to_dict(self) -> dict:
        return {
            "p_min": list(self.p_min.p),
            "weights": list(self.weights),
            "p_extra_total": self.p_extra_total,
            "p_final": list(self.p_final.p),
        }


def min_pruning(cluster: ClusterSpec) -> PruningVector:
    """
    Smallest per-view pruning that fits each model under its memory cap.

    p_v = max(0, 1 - cap_v / base_v), nudged up by float ulps when rounding
    would leave base_v * (1 - p_v) a hair above the cap.

    Raises:
        InfeasibleCap: a view would need more than 99% pruning.
    """
    base = cluster.base_sizes
    caps = cluster.caps
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.maximum(0.0, 1.0 - caps / base)
    p = np.where(np.isinf(caps), 0.0, p)
    for v in range(p.size):
        if p[v] > MAX_PRUNING + 1e-12:
            raise InfeasibleCap(v, float(p[v]), float(caps[v]), float(base[v]))
        while base[v] * (1.0 - p[v]) > caps[v] and p[v] < MAX_PRUNING:
            p[v] = np.nextafter(p[v], 1.0)
    return PruningVector.from_array(p)


def allocation_weights(cluster: ClusterSpec, invert_perf: bool = False) -> Tuple[float, ...]:
    """
    lambda_v = (1 - I_v)(1 + dPerf_v) / sum_k (1 - I_k)(1 + dPerf_k)

    Args:
        cluster: instance supplying importance and performance factors
        invert_perf: use (2 - dPerf_v) so slower devices take more extra pruning

    Returns:
        Nonnegative weights summing to 1; uniform when every numerator is 0.
    """
    importance = cluster.importance_array
    perf = cluster.perf
    perf_term = (2.0 - perf) if invert_perf else (1.0 + perf)
    numerators = np.maximum(0.0, (1.0 - importance) * perf_term)
    total = numerators.sum()
    if not total > 0:
        logger.warning("Degenerate allocation weights (all numerators zero); using uniform weights")
        return tuple([1.0 / cluster.n_views] * cluster.n_views)
    return tuple((numerators / total).tolist())


def distribute_extra(p_min: PruningVector, weights: Sequence[float], lambda_scale: float) -> Tuple[float, PruningVector]:
    """
    Spread P_extra = lambda_scale * sum(p_min) over views by weight.

    Returns:
        (P_extra, p_final) with p_final_v = min(0.99, p_min_v + w_v * P_extra).
    """
    base = p_min.as_array()
    extra = float(lambda_scale * base.sum())
    final = np.minimum(MAX_PRUNING, base + np.asarray(weights, dtype=float) * extra)
    return extra, PruningVector.from_array(final)


def allocate(cluster: ClusterSpec, lambda_scale: float = 0.25, invert_perf: bool = False) -> AllocationResult:
    """
    Run the full deterministic allocation.

    Args:
        cluster: validated instance
        lambda_scale: global scale of the extra budget
        invert_perf: see allocation_weights

    Returns:
        AllocationResult with p_min <= p_final <= 0.99.

    Raises:
        InfeasibleCap: propagated from min_pruning.
    """
    p_min = min_pruning(cluster)
    weights = allocation_weights(cluster, invert_perf)
    extra, final = distribute_extra(p_min, weights, lambda_scale)
    logger.debug(f"Allocation: p_min={p_min.p}, extra={extra:.4f}")
    return AllocationResult(p_min=p_min, weights=weights, p_extra_total=extra, p_final=final)
