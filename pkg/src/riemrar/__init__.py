"""Third-order adaptive regularization on the Stiefel and Grassmann manifolds.

The building blocks are usable on their own: manifolds and retractions,
derivative oracles of pullbacks, quartic models, the symmetric Krylov
framework with its inner solvers, and the 3-RAR driver.
"""
from .manifolds import Grassmann, Stiefel, make_manifold
from .retractions import ConfigurationError, RetractionSpec, check_axioms, estimate_order, retract
from .pullback import BrockettObjective, Objective, PullbackModelData, build_model_data, riemannian_gradient
from .model import (
    DenseQuarticModel,
    QuarticModel,
    min_eig_estimate,
    model_gradient,
    model_hess_action,
    model_value,
    taylor_value,
)
from .krylov import KrylovState, SolverContractError, hybrid_minimize, krylov_sym_expand, reduced_model, update_H_coords
from .solvers import SolverOutcome, solve_armijo_gd, solve_newton_quartic
from .rar import RarConfig, RarTrace, check_second_order, run

__version__ = "0.1.0"
