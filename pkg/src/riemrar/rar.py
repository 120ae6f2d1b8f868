"""Third-order Riemannian adaptive regularization (3-RAR).

Each outer iteration builds the third-order Taylor model of the pullback at the
current point, regularizes it with ``alpha/4 ||v||^4``, minimizes it
approximately with the Krylov hybrid framework, and accepts or rejects the step
from the ratio of actual to predicted decrease.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .krylov import SolverContractError, hybrid_minimize
from .model import (
    QuarticModel,
    line_coefficients,
    min_eig_estimate,
    model_hess_action,
    taylor_excess,
)
from .pullback import build_model_data
from .retractions import ConfigurationError, RetractionSpec, retract
from .solvers import _line_min, solve_armijo_gd, solve_newton_quartic

FIRST_ORDER = "first"
SECOND_ORDER = "second"


@dataclass(frozen=True)
class RarConfig:
    """Algorithm parameters. Defaults are the benchmark settings.

    ``gamma2 == gamma3`` is allowed: the unsuccessful interval then collapses
    to the single value ``gamma2 * alpha``.
    """

    theta: float = 0.1
    eta1: float = 0.1
    eta2: float = 0.9
    gamma1: float = 0.1
    gamma2: float = 2.0
    gamma3: float = 2.0
    alpha_min: float = 1e-10
    alpha0: float = 20.0
    eps1: float = 1e-6
    eps2: float = 1e-4
    mode: str = FIRST_ORDER
    max_outer: int = 500
    retraction: RetractionSpec = field(default_factory=lambda: RetractionSpec.stiefel(2))
    seed: int = 0
    rho_guard: float = 1e-14
    order_p: int = 3

    def __post_init__(self):
        problems = []
        if self.order_p != 3:
            problems.append("only order_p = 3 is implemented")
        if not self.theta > 0:
            problems.append("theta must be positive")
        if not 0 < self.eta1 <= self.eta2 < 1:
            problems.append("need 0 < eta1 <= eta2 < 1")
        if not 0 < self.gamma1 < 1:
            problems.append("need 0 < gamma1 < 1")
        if not 1 < self.gamma2 <= self.gamma3:
            problems.append("need 1 < gamma2 <= gamma3")
        if not 0 < self.alpha_min <= self.alpha0:
            problems.append("need 0 < alpha_min <= alpha0")
        if not (self.eps1 > 0 and self.eps2 > 0):
            problems.append("tolerances must be positive")
        if self.mode not in (FIRST_ORDER, SECOND_ORDER):
            problems.append(f"mode must be {FIRST_ORDER!r} or {SECOND_ORDER!r}")
        if self.max_outer < 0:
            problems.append("max_outer must be nonnegative")
        if problems:
            raise ConfigurationError("; ".join(problems))


@dataclass
class IterationRecord:
    index: int
    f_value: float
    grad_norm: float
    alpha: float
    rho: float
    step_norm: float
    accepted: bool
    krylov_dim: int
    wall_time: float
    lambda_min_est: float = math.nan
    taylor_decrease: float = math.nan
    sufficient_decrease: bool = True
    f_trial: float = math.nan


@dataclass
class RarTrace:
    records: list
    x: np.ndarray
    converged: bool
    status: str
    message: str = ""

    @property
    def iterations(self):
        """Number of solved subproblems (the final stationarity check is not counted)."""
        return sum(1 for r in self.records if r.krylov_dim > 0)

    @property
    def final(self):
        return self.records[-1]

    def invariant_violations(self, alpha_min):
        """Human-readable list of broken driver invariants (empty when all hold)."""
        out = []
        for r in self.records:
            if r.alpha < alpha_min:
                out.append(f"iter {r.index}: alpha {r.alpha} below alpha_min")
            if r.accepted and not r.f_trial < r.f_value:
                out.append(f"iter {r.index}: accepted step did not decrease f")
            if not r.sufficient_decrease:
                out.append(f"iter {r.index}: sufficient decrease failed")
        return out


def update_alpha(alpha, rho, cfg):
    """Midpoint of the interval allowed for the success class of ``rho``."""
    if rho >= cfg.eta2:
        lo, hi = max(cfg.alpha_min, cfg.gamma1 * alpha), alpha
    elif rho >= cfg.eta1:
        lo, hi = alpha, cfg.gamma2 * alpha
    else:
        lo, hi = cfg.gamma2 * alpha, cfg.gamma3 * alpha
    return 0.5 * (lo + hi)


def compute_rho(f_x, f_trial, taylor_decrease, guard=1e-14):
    """Actual over predicted decrease; ``nan`` when the prediction is below the noise guard."""
    if not taylor_decrease >= guard * (1.0 + abs(f_x)):
        return math.nan
    return (f_x - f_trial) / taylor_decrease


def check_second_order(x, data, eps2, seed=0):
    """``(satisfied, lambda_est)`` for ``lambda_min(Hess f(x)) >= -eps2``."""
    if data.spec.geodesic_order < 2:
        raise ConfigurationError(f"{data.spec} does not identify the pullback and Riemannian Hessians")
    manifold = data.manifold
    est = min_eig_estimate(data.H_action, manifold.dim, seed=seed,
                           start=manifold.random_tangent(x, seed))
    return est.value >= -eps2, est.value


def _subproblem_seed(seed, accepted):
    # depends on the base point only, so rejected steps reuse the cached actions
    return np.random.SeedSequence([int(seed) & (2**63 - 1), accepted])


def _negative_curvature_fix(full, u, manifold, x, theta, seed, rounds=3):
    """Move along leftmost eigenvectors of the model Hessian until the curvature condition holds."""
    for k in range(rounds):
        op = lambda w: model_hess_action(full, u, w)
        est = min_eig_estimate(op, manifold.dim, seed=seed + k, start=manifold.random_tangent(x, seed + k))
        if est.value >= -theta * float(np.vdot(u, u)):
            break
        w = est.vector
        k_coef = line_coefficients(full, u, w)
        if k_coef[0] > 0:
            w = -w
            k_coef = line_coefficients(full, u, w)
        t, _ = _line_min(k_coef)
        if t == 0.0:
            break
        u = u + t * w
    return u


def run(objective, x0, config=None, solver: Callable = solve_armijo_gd, manifold=None,
        oracle="auto", callback: Optional[Callable] = None):
    """Minimize ``objective`` over the manifold starting from ``x0``."""
    cfg = config if config is not None else RarConfig()
    spec = cfg.retraction
    x = np.asarray(x0, dtype=float)
    if manifold is None:
        manifold = spec.default_manifold(*x.shape)
    manifold.check_point(x)
    if cfg.mode == SECOND_ORDER and spec.geodesic_order < 2:
        raise ConfigurationError(f"second-order mode needs a retraction of order >= 2, got {spec}")

    t0 = time.perf_counter()
    alpha = cfg.alpha0
    records = []
    data = None
    accepted_count = 0
    status, message = "max_outer", ""
    for i in range(cfg.max_outer + 1):
        if data is None:
            data = build_model_data(objective, spec, manifold, x, oracle)
        f = data.c
        gn = float(np.linalg.norm(data.g))
        lam = math.nan
        stop = gn <= cfg.eps1
        if stop and cfg.mode == SECOND_ORDER:
            stop, lam = check_second_order(x, data, cfg.eps2, seed=cfg.seed)
        if stop or i == cfg.max_outer:
            records.append(IterationRecord(i, f, gn, alpha, math.nan, 0.0, False, 0,
                                           time.perf_counter() - t0, lam))
            if stop:
                status = "converged"
            break

        full = QuarticModel(c=f, g=data.g, H_action=data.H_action, T_action=data.T_action, sigma=alpha,
                            dim=manifold.dim, random_vector=lambda rng, x=x: manifold.random_tangent(x, rng),
                            project=lambda v, x=x: manifold.proj(x, v))
        seq = _subproblem_seed(cfg.seed, accepted_count)
        extra = None
        start = None
        if cfg.mode == SECOND_ORDER:
            eig_seed = int(seq.generate_state(1)[0])

            def extra(u):
                op = lambda w: model_hess_action(full, u, w)
                est = min_eig_estimate(op, manifold.dim, seed=eig_seed, start=manifold.random_tangent(x, eig_seed))
                return est.value >= -cfg.theta * float(np.vdot(u, u))

            if gn == 0.0:
                start = manifold.random_tangent(x, eig_seed)
        try:
            u, hstats = hybrid_minimize(full, solver, cfg.theta, seed=seq, extra_check=extra, start_vector=start,
                                       fallback=solve_newton_quartic)
        except SolverContractError as exc:
            status, message = "solver_contract", str(exc)
            records.append(IterationRecord(i, f, gn, alpha, math.nan, math.nan, False, manifold.dim,
                                           time.perf_counter() - t0))
            break
        decrease, nu2 = hstats.taylor_decrease, hstats.step_norm_sq
        if hstats.extra_failed:
            u = _negative_curvature_fix(full, u, manifold, x, cfg.theta, int(seq.generate_state(1)[0]))
            nu2 = float(np.vdot(u, u))
            decrease = -taylor_excess(full, u)
        suff = decrease >= 0.25 * alpha * nu2 * nu2
        y = retract(spec, x, u)
        f_trial = float(objective.value(y))
        rho = compute_rho(f, f_trial, decrease, cfg.rho_guard)
        accepted = bool(rho >= cfg.eta1)  # nan compares False
        rec = IterationRecord(i, f, gn, alpha, rho, math.sqrt(nu2), accepted, hstats.final_r,
                              time.perf_counter() - t0, lam, decrease, bool(suff), f_trial)
        records.append(rec)
        if callback is not None:
            callback(rec)
        alpha = update_alpha(alpha, rho if not math.isnan(rho) else -math.inf, cfg)
        if accepted:
            x = y
            data = None
            accepted_count += 1
    return RarTrace(records, x, status == "converged", status, message)
