"""
SlimEdge Optimizer

Chooses per-view pruning fractions for a multi-view classifier split across
heterogeneous edge devices, so that every pruned model fits its device's
memory, mean class accuracy stays above a floor and the slowest device
finishes as early as possible.

This package provides:
- Analytic size and latency models of pruned backbones
- Synthetic, feature-bank and boosted-surrogate accuracy oracles
- Importance-aware allocation and initial sampling
- Constrained NSGA-II with a single-objective GA and minimum-pruning fallback
- Experiment presets, sweeps and robustness batches
"""

from typing import Optional

from accuracy_oracle import (
    AccuracyModel,
    BoostedSurrogate,
    FeatureBank,
    FeatureBankAccuracy,
    SyntheticAccuracy,
    build_accuracy_model,
    fit_surrogate,
    generate_feature_bank,
    mean_class_accuracy,
    pool_features,
    sample_configs,
    view_importance,
)
from allocation import AllocationResult, allocate, allocation_weights, min_pruning
from cluster import ClusterSpec, DeviceProfile, Hyperparams, PruningVector, make_cluster, validate_cluster
from cost_models import dperf_from_times, latency, model_size, schedule
from errors import SlimEdgeError
from fitness import FitnessBreakdown, total_fitness
from nsga2 import ParetoFront, dominates, evaluate_objectives, nsga2_run, select_deployment
from pipeline import OptimizationReport, SolutionPath, optimize, uniform_baseline
from report_io import TOOL_NAME, TOOL_VERSION
from sampler import InitialPopulation, sample_population
from simlab import PRESETS, RandomInstanceSpec, preset_cluster, robustness_batch, run_preset, sweep_uniform
from soga import ga_run, penalty

__version__ = TOOL_VERSION
__description__ = "Importance-aware constrained pruning optimizer for multi-view edge inference"

__all__ = [
    # Instance and decision types
    "ClusterSpec",
    "DeviceProfile",
    "Hyperparams",
    "PruningVector",
    "make_cluster",
    "validate_cluster",
    # Cost models
    "model_size",
    "latency",
    "dperf_from_times",
    "schedule",
    # Accuracy oracles
    "AccuracyModel",
    "SyntheticAccuracy",
    "FeatureBank",
    "FeatureBankAccuracy",
    "BoostedSurrogate",
    "generate_feature_bank",
    "pool_features",
    "mean_class_accuracy",
    "fit_surrogate",
    "view_importance",
    "sample_configs",
    "build_accuracy_model",
    # Fitness, allocation, sampling
    "FitnessBreakdown",
    "total_fitness",
    "AllocationResult",
    "min_pruning",
    "allocation_weights",
    "allocate",
    "InitialPopulation",
    "sample_population",
    # Search
    "ParetoFront",
    "evaluate_objectives",
    "dominates",
    "nsga2_run",
    "select_deployment",
    "penalty",
    "ga_run",
    # Orchestration
    "OptimizationReport",
    "SolutionPath",
    "optimize",
    "uniform_baseline",
    # Simulation lab
    "PRESETS",
    "RandomInstanceSpec",
    "preset_cluster",
    "run_preset",
    "sweep_uniform",
    "robustness_batch",
    "SlimEdgeError",
]

PACKAGE_INFO = {
    "name": TOOL_NAME,
    "version": __version__,
    "description": __description__,
    "presets": sorted(PRESETS),
    "accuracy_models": ["synthetic", "feature-bank", "surrogate:<dataset.csv>"],
    "search_stages": ["nsga2", "ga_fallback", "min_pruning_fallback"],
}


def get_package_info():
    """
    Get package information.

    Returns:
        Dictionary containing package metadata and features
    """
    return PACKAGE_INFO.copy()


def quick_optimize(preset_id: str = "exp1", hyper: Optional[Hyperparams] = None) -> OptimizationReport:
    """
    Optimize an embedded preset with the synthetic accuracy model.

    Args:
        preset_id: exp1..exp5
        hyper: optional hyperparameters

    Returns:
        The optimization report
    """
    return run_preset(preset_id, hyper=hyper)
