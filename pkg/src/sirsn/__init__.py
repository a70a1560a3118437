"""Laboratory for scale-invariant random spatial networks built on the binary hierarchy model."""
from .dyadic import (DyadicScalar, ModelParams, PathCost, SearchPolicy, compare_costs, edge_cost, height,
                     is_admissable, is_height_monotone, peak)
from .routing import DyadicPoint, InvarianceParams, Route, RouteEngine, continuum_route
from .geometry import Subnetwork, Window, build_E, build_subnetwork, edge_intensity, sample_poisson
from .stats import Replicate, StatEstimate, SuiteConfig, WindowSpec, aggregate_suite, run_suite
from .checks import LemmaReport, lemma_suite, verify_figure6
from .bounds import solve_bound_curve, steiner_bounds
from .transit import build_transit_nodes, cost_model, local_access_set, transit_suite
from .alt_models import build_dynamic_gabriel, min_time_route_gabriel, min_time_route_lines, sample_line_process

__all__ = [
    "DyadicScalar", "ModelParams", "PathCost", "SearchPolicy", "compare_costs", "edge_cost", "height",
    "is_admissable", "is_height_monotone", "peak", "DyadicPoint", "InvarianceParams", "Route",
    "RouteEngine", "continuum_route", "Subnetwork", "Window", "build_E", "build_subnetwork", "edge_intensity",
    "sample_poisson", "Replicate", "StatEstimate", "SuiteConfig", "WindowSpec", "aggregate_suite", "run_suite",
    "LemmaReport", "lemma_suite", "verify_figure6", "solve_bound_curve", "steiner_bounds", "build_transit_nodes",
    "cost_model", "local_access_set", "transit_suite", "build_dynamic_gabriel", "min_time_route_gabriel",
    "min_time_route_lines", "sample_line_process",
]
__version__ = "0.1.0"
