"""Finite-element lab for criticality of mixed Robin/Dirichlet elliptic operators."""
from .criticality import classify, ground_state, hardy_weight, lambda_interval_scan, null_sequence
from .discretize import AssembledSystem, FEFunction, assemble
from .geometry import DomainSpec, ExhaustionSpec, MeshedDomain, make_exhaustion, tag_boundary
from .green import check_green_symmetry, green_bounded, green_minimal, minimal_growth_solution
from .operator import CoefficientSet, OperatorSpec, RobinData, drift, hardy, laplace, shifted
from .spectral import principal_eigen, rayleigh_lambda, spectral_report

__version__ = "0.1.0"
