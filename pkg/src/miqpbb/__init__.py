"""Convex MIQP branch-and-bound with dual bounds from a feasible active-set QP method."""

from .bnb import MiqpResult, MiqpStatus, SolveOptions, preprocess, solve_miqp
from .dual import PrimalRelaxation, build_dual, dual_bound, recover_primal
from .instance import Instance
from .instance_io import GenSpec, generate, read_instance, write_instance
from .qp import QpProblem, QpResult, QpStatus, SolverConfig, qp_solve

__all__ = [
    "GenSpec", "Instance", "MiqpResult", "MiqpStatus", "PrimalRelaxation", "QpProblem",
    "QpResult", "QpStatus", "SolveOptions", "SolverConfig", "build_dual", "dual_bound",
    "generate", "preprocess", "qp_solve", "read_instance", "recover_primal", "solve_miqp",
    "write_instance",
]
