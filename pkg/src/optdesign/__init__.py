"""Optimal experimental design on a finite design space.

The interior-point solver (:mod:`optdesign.ipsolver`) minimizes a convex
criterion of the moment matrix over the probability simplex; the
multiplicative algorithm (:mod:`optdesign.multsolver`) is provided as a
baseline.
"""
from .criteria import CriterionSpec
from .estimator import IPDesign, MultiplicativeDesign
from .exceptions import OptDesignError
from .ipsolver import IPConfig
from .multsolver import MultConfig
from .problem import DesignProblem, DesignSpace, assemble, from_matrices, generate_space, load_problem
from .report import SolveReport

__version__ = "0.1.0"

__all__ = [
    "CriterionSpec",
    "DesignProblem",
    "DesignSpace",
    "IPConfig",
    "IPDesign",
    "MultConfig",
    "MultiplicativeDesign",
    "OptDesignError",
    "SolveReport",
    "assemble",
    "from_matrices",
    "generate_space",
    "load_problem",
]
