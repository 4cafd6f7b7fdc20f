"""Stochastic zeroth-order Hessian estimation over embedded Riemannian manifolds."""
from .estimators import (
    BudgetedEstimate,
    NoiseModel,
    SymBilinearForm,
    budgeted_estimate,
    entrywise_estimate,
    estimation_error,
    new_estimator_budget,
    operator_norm,
    raw_estimate,
    stabilized_estimate,
    stein_budget,
    stein_estimate,
)
from .inversion import adjugate_reference, cha, determinant, neumann_truncated, nhi, submatrix
from .manifold import (
    ManifoldChart,
    TangentVector,
    chart_from_key,
    euclidean,
    exp_map,
    graph,
    parallel_transport_sphere,
    sphere,
    tangent_basis,
)
from .oracle import Objective, analytic_hessian, fd_hessian, sphere_hessian_coordinate_square
from .sampling import RngStream, sample_gaussian, sample_stiefel_tangent, sample_unit_sphere

__version__ = "0.1.0"
