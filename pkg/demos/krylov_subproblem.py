"""Solve one random quartic subproblem through the Krylov hybrid framework.

Shows how many basis vectors were needed before the reduced solution also
satisfied the full-space stopping test.
"""
import numpy as np

from riemrar.krylov import hybrid_minimize
from riemrar.model import model_excess, model_gradient, random_dense_model
from riemrar.solvers import solve_armijo_gd, solve_newton_quartic

rng = np.random.default_rng(3)
model = random_dense_model(40, rng, sigma=2.0)
theta = 0.5
for solver in (solve_armijo_gd, solve_newton_quartic):
    u, stats = hybrid_minimize(model, solver, theta, seed=0)
    gn = np.linalg.norm(model_gradient(model, u))
    print(f"{solver.__name__:22s} rounds={stats.rounds} r={stats.final_r}/40 inner iters={stats.solver_iterations} "
          f"|grad M(u)|={gn:.2e} <= {theta * np.linalg.norm(u) ** 3:.2e}  M(u)-c={model_excess(model, u):.3e}")
