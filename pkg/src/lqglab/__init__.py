"""Numerical laboratory for boundary distance profiles of Liouville quantum gravity.

Modules: ``params`` (constants and exponents), ``gff`` (free-boundary field
sampling and circle averages), ``metric`` (LFPP graphs and shortest paths),
``gmc`` (boundary measure), ``profile`` (variation measures), ``geodesics``
(coalescence and Busemann proxies), ``experiments`` (Monte-Carlo trials and
tests), ``config``/``report``/``cli`` (I/O).
"""
from .params import CoalescenceConfig, LqgParams, check_alpha, normalization_exponent, psi, variation_exponent
from .gff import FieldGrid, GridSpec, ProbeSet, circle_average, green, normalize, sample_exact, sample_grid
from .metric import GeodesicTree, MetricGraph, build_graph, mollify, shortest_paths
from .gmc import BoundaryMeasure, boundary_gmc, measure_mass
from .profile import DistanceProfile, VariationMeasure, distance_profile, variation_measure
from .experiments import TrialConfig, TrialResult, ExperimentSummary, run_experiment, run_trial

__version__ = "0.1.0"

__all__ = [
    "LqgParams", "CoalescenceConfig", "psi", "variation_exponent", "normalization_exponent", "check_alpha",
    "GridSpec", "FieldGrid", "ProbeSet", "green", "sample_exact", "sample_grid", "circle_average", "normalize",
    "MetricGraph", "GeodesicTree", "mollify", "build_graph", "shortest_paths",
    "BoundaryMeasure", "boundary_gmc", "measure_mass",
    "DistanceProfile", "VariationMeasure", "distance_profile", "variation_measure",
    "TrialConfig", "TrialResult", "ExperimentSummary", "run_trial", "run_experiment",
]
