"""Capacitated beam placement for multi-beam NGSO satellites.

Deterministic-annealing solver (coverage / capacity / load-balancing
variants), a randomized clique-cover baseline, an exact small-instance
solver, and an experiment harness.
"""
from .cc import build_graph, cc_best_of, cc_cover
from .da import (SolverConfig, SoftState, SolveResult, center_update, free_energy,
                 gibbs_update, load_profile, merge_beams, solve, split_beam)
from .geometry import distortion, min_enclosing_circle
from .instances import generate
from .oracle import exact_min_cover
from .scenario import (BeamPlan, FeasibilityReport, Scenario, Terminal,
                       check_feasibility, project_geodetic)

__all__ = [
    "BeamPlan", "FeasibilityReport", "Scenario", "SoftState", "SolveResult",
    "SolverConfig", "Terminal", "build_graph", "cc_best_of", "cc_cover",
    "center_update", "check_feasibility", "distortion", "exact_min_cover",
    "free_energy", "generate", "gibbs_update", "load_profile", "merge_beams",
    "min_enclosing_circle", "project_geodetic", "solve", "split_beam",
]

__version__ = "0.1.0"
