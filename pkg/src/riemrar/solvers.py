"""Euclidean inner solvers for reduced quartic models.

Both solvers stop as soon as the reduced point satisfies

    ||grad M(s)|| <= theta ||s||^3   and   M(s) <= M(0)

and never return a point with ``M(s) > M(0)``. Line-search differences are
computed from the exact quartic along the search direction, so the Armijo test
stays meaningful when the decrease is far below the rounding level of ``M``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MET = "met_contract"
CAP = "iteration_cap"


@dataclass(frozen=True)
class SolverOutcome:
    s_star: np.ndarray
    value: float
    grad_norm: float
    inner_iterations: int
    status: str

    @property
    def met(self):
        return self.status == MET


def _start(model, warm):
    r = model.g.size
    s = np.zeros(r) if warm is None else np.asarray(warm, dtype=float).copy()
    if s.shape != (r,):
        raise ValueError(f"warm start has shape {s.shape}, expected {(r,)}")
    exc, grad = model.excess_and_gradient(s)
    if exc > 0.0:
        s = np.zeros(r)
        exc, grad = 0.0, model.g.copy()
    return s, exc, grad


def _done(s, exc, grad, theta):
    return np.linalg.norm(grad) <= theta * np.linalg.norm(s) ** 3 and exc <= 0.0


def _outcome(model, s, iters, status):
    exc, grad = model.excess_and_gradient(s)
    return SolverOutcome(s, model.c + exc, float(np.linalg.norm(grad)), iters, status)


def solve_armijo_gd(reduced, warm=None, theta=1.0, max_iter=10_000, c1=1e-4, shrink=0.5, step0=1.0):
    """Steepest descent with Armijo backtracking from a unit trial step."""
    if reduced.sigma <= 0:
        raise ValueError("Armijo descent needs sigma > 0")
    s, exc, grad = _start(reduced, warm)
    for it in range(max_iter):
        if _done(s, exc, grad, theta):
            return _outcome(reduced, s, it, MET)
        d = -grad
        k1, k2, k3, k4 = reduced.line_coefficients(s, d, grad)
        t = step0
        while True:
            delta = t * (k1 + t * (k2 + t * (k3 + t * k4)))
            if delta <= c1 * t * k1:
                break
            t *= shrink
            if t < 1e-300:
                return _outcome(reduced, s, it, CAP)
        s = s + t * d
        exc, grad = reduced.excess_and_gradient(s)
    status = MET if _done(s, exc, grad, theta) else CAP
    return _outcome(reduced, s, max_iter, status)


def _line_min(k):
    """Global minimizer over ``t >= 0`` of ``k1 t + k2 t^2 + k3 t^3 + k4 t^4``."""
    k1, k2, k3, k4 = k
    roots = np.roots([4 * k4, 3 * k3, 2 * k2, k1])
    cands = [0.0] + [float(r.real) for r in roots if abs(r.imag) <= 1e-12 * max(1.0, abs(r)) and r.real > 0]
    vals = [t * (k1 + t * (k2 + t * (k3 + t * k4))) for t in cands]
    i = int(np.argmin(vals))
    return cands[i], vals[i]


def solve_newton_quartic(reduced, warm=None, theta=1.0, max_iter=200):
    """Levenberg-damped Newton with exact quartic line search.

    When the model Hessian is indefinite the shifted Newton direction and the
    leftmost eigenvector are both tried and the better one is taken.
    """
    if reduced.sigma <= 0:
        raise ValueError("Newton solver needs sigma > 0")
    s, exc, grad = _start(reduced, warm)
    for it in range(max_iter):
        if _done(s, exc, grad, theta):
            return _outcome(reduced, s, it, MET)
        w, V = np.linalg.eigh(reduced.hessian(s))
        scale = max(1.0, float(np.max(np.abs(w))))
        shift = max(0.0, -w[0]) + 1e-12 * scale
        if w[0] < 0:
            shift += np.sqrt(np.linalg.norm(grad))
        coef = V.T @ grad
        dirs = [-(V @ (coef / (w + shift)))]
        if w[0] < 0:
            nc = V[:, 0] * (-np.sign(coef[0]) if coef[0] != 0 else 1.0)
            dirs.append(nc * np.sqrt(-w[0]))
        dirs.append(-grad)
        best = None
        for d in dirs:
            t, dv = _line_min(reduced.line_coefficients(s, d, grad))
            if t > 0 and dv < 0 and (best is None or dv < best[1]):
                best = (t * d, dv)
        if best is None:
            return _outcome(reduced, s, it, CAP)
        s = s + best[0]
        exc, grad = reduced.excess_and_gradient(s)
    status = MET if _done(s, exc, grad, theta) else CAP
    return _outcome(reduced, s, max_iter, status)


SOLVERS = {"armijo": solve_armijo_gd, "newton": solve_newton_quartic}


def get_solver(name):
    try:
        return SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None
