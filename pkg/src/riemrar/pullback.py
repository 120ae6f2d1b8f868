"""Objectives and derivative oracles of the pullback ``f o R_X`` at zero.

The generic path needs only ``f`` and its Euclidean gradient. The gradient of
the pullback at any tangent ``w`` is obtained exactly (to rounding) by
complex-step differentiation of the holomorphic retraction twin, then Hessian
and third-derivative actions come from central differences of that gradient.

For the Brockett cost there is a closed-form path. It is valid whenever the
retraction's second and third Taylor coefficients at zero are known: the polar
baseline, and any retraction matching the geodesic to third order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .manifolds import Stiefel
from .retractions import POLAR, retract, retract_analytic

EPS = np.finfo(float).eps
HESS_STEP = EPS ** (1 / 3)
TENSOR_STEP = EPS ** (1 / 4)
COMPLEX_STEP = 1e-20


class StepSizeError(ValueError):
    pass


@dataclass(frozen=True)
class Objective:
    """A smooth cost on matrices with its Euclidean gradient."""

    value: Callable[[np.ndarray], float]
    euclid_gradient: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BrockettObjective:
    """``f(X) = 1/2 trace(X^T A X N)`` with symmetric ``A`` and ``N``."""

    A: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        A, N = np.asarray(self.A, float), np.asarray(self.N, float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or N.ndim != 2 or N.shape[0] != N.shape[1]:
            raise ValueError("A and N must be square")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "N", N)

    @classmethod
    def benchmark(cls, A, p):
        return cls(A, np.diag(np.arange(1.0, p + 1)))

    def _check(self, X):
        X = np.asarray(X)
        if X.shape != (self.A.shape[0], self.N.shape[0]):
            raise ValueError(f"expected X of shape {(self.A.shape[0], self.N.shape[0])}, got {X.shape}")
        return X

    def value(self, X):
        X = self._check(X)
        return 0.5 * float(np.sum((self.A @ X) * (X @ self.N)))

    def euclid_gradient(self, X):
        return self.A @ self._check(X) @ self.N

    def euclid_hessian(self, X, U):
        return self.A @ U @ self.N


def _proj2(manifold, X, Z):
    # projecting a large ambient vector leaves rounding of size eps*|Z| in the
    # normal space; a second pass brings it down to eps times the result
    return manifold.proj(X, manifold.proj(X, Z))


def riemannian_gradient(obj, manifold, X):
    return _proj2(manifold, X, obj.euclid_gradient(X))


def _tangent_frame(manifold, X):
    """Projected ambient unit directions, shape ``(n*p, n, p)``."""
    n, p = X.shape
    E = np.eye(n * p).reshape(n * p, n, p)
    return E - _proj_stack(manifold, X, E)


def _proj_stack(manifold, X, Z):
    # normal component of a stack of ambient matrices
    XtZ = np.einsum("ij,kil->kjl", X, Z)
    if isinstance(manifold, Stiefel):
        XtZ = 0.5 * (XtZ + np.swapaxes(XtZ, -1, -2))
    return X @ XtZ


def pullback_grad_at(obj, spec, manifold, X, w, frame=None):
    """Gradient at ``w`` of ``w -> f(R_X(proj(w)))``, projected to ``T_X``.

    Each directional derivative of the retraction is taken by a complex step
    through :func:`retract_analytic`, so the result carries no truncation error.
    """
    w = np.asarray(w, dtype=float)
    if frame is None:
        frame = _tangent_frame(manifold, X)
    Y = retract(spec, X, w)
    Ge = obj.euclid_gradient(Y)
    dR = retract_analytic(spec, X, w + 1j * COMPLEX_STEP * frame).imag / COMPLEX_STEP
    coeffs = np.einsum("ij,kij->k", Ge, dR)
    return _proj2(manifold, X, coeffs.reshape(X.shape))


@dataclass
class PullbackModelData:
    """Derivative data of the pullback at a base point.

    ``c`` and ``g`` are eager; ``H_action`` and ``T_action`` are memoized on the
    exact bytes of their inputs, so repeated calls are bitwise identical and
    cost nothing.
    """

    obj: object
    spec: object
    manifold: object
    base: np.ndarray
    method: str = "auto"
    c: float = field(init=False)
    g: np.ndarray = field(init=False)
    hess_evals: int = field(init=False, default=0)
    tensor_evals: int = field(init=False, default=0)

    def __post_init__(self):
        X = self.base
        self.c = float(self.obj.value(X))
        self.g = riemannian_gradient(self.obj, self.manifold, X)
        if self.method == "auto":
            self.method = "brockett" if brockett_fast_path_applies(self.obj, self.spec, self.manifold) else "generic"
        elif self.method == "brockett" and not brockett_fast_path_applies(self.obj, self.spec, self.manifold):
            raise ValueError(f"closed-form path unavailable for {self.spec} on {self.manifold}")
        elif self.method not in ("brockett", "generic"):
            raise ValueError(f"unknown oracle method {self.method!r}")
        self._frame = None
        self._hess_cache = {}
        self._tensor_cache = {}
        if self.method == "brockett":
            M = X.T @ self.obj.A @ X @ self.obj.N
            self._sym_M = 0.5 * (M + M.T)
            self._M = M.T  # G_e^T X with G_e = A X N

    # -- generic pieces ---------------------------------------------------------
    @property
    def frame(self):
        if self._frame is None:
            self._frame = _tangent_frame(self.manifold, self.base)
        return self._frame

    def value_at(self, w):
        return float(self.obj.value(retract(self.spec, self.base, w)))

    def grad_at(self, w):
        if not np.any(w):
            return self.g.copy()
        return pullback_grad_at(self.obj, self.spec, self.manifold, self.base, w, self.frame)

    # -- actions ------------------------------------------------------------------
    def H_action(self, u):
        u = np.asarray(u, dtype=float)
        key = u.tobytes()
        hit = self._hess_cache.get(key)
        if hit is None:
            self.hess_evals += 1
            hit = self._hess_brockett(u) if self.method == "brockett" else self._hess_fd(u)
            self._hess_cache[key] = hit
        return hit.copy()

    def T_action(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        ku, kv = u.tobytes(), v.tobytes()
        key = (ku, kv) if ku <= kv else (kv, ku)
        hit = self._tensor_cache.get(key)
        if hit is None:
            self.tensor_evals += 1
            if ku > kv:
                u, v = v, u
            hit = self._tensor_brockett(u, v) if self.method == "brockett" else self._tensor_fd(u, v)
            self._tensor_cache[key] = hit
        return hit.copy()

    def _hess_fd(self, u):
        nu = _direction_norm(u)
        if nu == 0.0:
            return np.zeros_like(u)
        d = u / nu
        h = HESS_STEP
        return nu * (self.grad_at(h * d) - self.grad_at(-h * d)) / (2 * h)

    def _tensor_fd(self, u, v):
        nu, nv = _direction_norm(u), _direction_norm(v)
        if nu == 0.0 or nv == 0.0:
            return np.zeros_like(u)
        a, b = u / nu, v / nv
        h = TENSOR_STEP
        s, d = a + b, a - b
        even = (self.grad_at(h * s) + self.grad_at(-h * s)) - (self.grad_at(h * d) + self.grad_at(-h * d))
        return nu * nv * even / (4 * h * h)

    # -- closed form for the Brockett cost -----------------------------------------
    def _hess_brockett(self, u):
        X = self.base
        return _proj2(self.manifold, X, self.obj.A @ u @ self.obj.N - u @ self._sym_M)

    def _tensor_brockett(self, u, v):
        return 0.25 * (self._tensor_diag(u + v) - self._tensor_diag(u - v))

    def _tensor_diag(self, v):
        """``T(v, v)``: one third of the gradient of ``v -> D^3 f_hat(0)[v,v,v]``."""
        X, A, N = self.base, self.obj.A, self.obj.N
        Ge = A @ X @ N
        P = A @ X
        S = v.T @ v
        # 3 <A v N, R2(v,v)> with R2(v,v) = -X S
        grad = -3.0 * (P @ S @ N + v @ N @ v.T @ P + v @ P.T @ v @ N)
        # <Ge, R3(v,v,v)>; the -v S part is shared, polar triples it
        cubic = -(Ge @ S + v @ Ge.T @ v + v @ v.T @ Ge)
        if self.spec.family == POLAR:
            grad += 3.0 * cubic
        else:
            grad += cubic
            M = self._M
            Av = X.T @ v
            C = Av @ M - M @ Av
            grad += v @ (C + C.T) + X @ (S @ M.T - M.T @ S)
        return _proj2(self.manifold, X, grad / 3.0)


def _direction_norm(u):
    # scaled so tiny directions do not square to zero
    peak = float(np.max(np.abs(u))) if u.size else 0.0
    nu = peak * float(np.linalg.norm(u / peak)) if peak > 0.0 else peak
    if not np.isfinite(nu):
        raise StepSizeError("non-finite direction")
    if 0.0 < nu < 1e-150:
        raise StepSizeError("direction norm underflows the difference step")
    return nu


def brockett_fast_path_applies(obj, spec, manifold):
    """Closed form needs a Brockett cost on St(n,p) and a known third Taylor term."""
    if not isinstance(obj, BrockettObjective) or not isinstance(manifold, Stiefel):
        return False
    return spec.family == POLAR or (spec.family == "gawlik-stiefel" and spec.geodesic_order >= 3)


def build_model_data(obj, spec, manifold, X, method="auto"):
    return PullbackModelData(obj, spec, manifold, np.asarray(X, dtype=float), method)
