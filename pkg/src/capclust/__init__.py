"""Capacitated k-median and k-means: coresets, FPT approximation and Euclidean (1+eps) solvers."""

from .bicriteria import BicriteriaSolution, bicriteria_solve, cost_estimate
from .coreset import WeightedClientSet, build_coreset, coreset_for, decompose_rings, sample_rings
from .euclid import (
    CandidateCenterSet,
    CapacityError,
    gen_candidates_continuous,
    solve_continuous,
    solve_discrete,
)
from .flow import AssignmentSolution, cap_assign, frac_cap_assign, frac_cap_assign_means
from .fpt import solve_general
from .generate import GenSpec, generate
from .instance import (
    INFEASIBLE,
    InfeasibleError,
    Instance,
    InstanceError,
    load_instance,
    make_instance,
    normalize_aspect_ratio,
    save_instance,
)
from .nets import build_ring_nets, filter_top_k_capacity
from .oracle import exact_solve, exhaustive_assign, grid_continuous_opt
from .projection import ProjectedSpace, project

__version__ = "0.1.0"
