"""Regularized distributed state estimation from relative measurements."""

from .graph import Graph, GraphError, generate, is_bipartite, is_connected, matrices
from .estimation import aggregate, centralized_solution, cost_h, generate_measurements
from .schemes import (
    IterativeScheme,
    build_sigma0,
    build_sigma_eps,
    build_sigma_eta,
    build_sigma_rho,
    build_sigmaQ,
    converges,
    extended_domains,
    optimal_eps,
    optimal_eta,
    optimal_rho,
    theorem2_domain,
)
from .spectral import cri, spectral_summary, spectrum_FQ, sym_eigen
from .optimizer import OptimizerConfig, greedy_optimize
from .simulator import empirical_rate, make_rules, relative_difference_error, run_sync

__version__ = "0.1.0"
