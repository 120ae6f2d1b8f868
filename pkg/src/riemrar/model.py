"""Quartically regularized third-order polynomials and their calculus.

    M(v) = c + <g, v> + 1/2 <v, H v> + 1/6 <v, T(v, v)> + sigma/4 ||v||^4

``v`` lives either in a tangent space (``n x p`` arrays) or in a coordinate
space ``R^r``; the inner product is always the flattened dot product. A
tangent space is described by ``dim`` and an orthogonal projector ``project``
from the ambient arrays onto it. ``T`` is assumed symmetric in all three slots.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np


def _dot(a, b):
    return float(np.vdot(a, b))


@dataclass
class QuarticModel:
    c: float
    g: np.ndarray
    H_action: Callable[[np.ndarray], np.ndarray]
    T_action: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sigma: float = 0.0
    dim: Optional[int] = None
    random_vector: Optional[Callable[[np.random.Generator], np.ndarray]] = None
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.dim is None:
            self.dim = self.g.size

    def check(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != self.g.shape:
            raise ValueError(f"vector of shape {v.shape} is not in the model space {self.g.shape}")
        return v

    def with_sigma(self, sigma):
        return replace(self, sigma=sigma)

    def sample(self, rng):
        if self.random_vector is not None:
            return self.random_vector(rng)
        return rng.standard_normal(self.g.shape)


@dataclass
class DenseQuarticModel(QuarticModel):
    """Model on ``R^r`` with an explicit matrix ``Hm`` and symmetric tensor ``Tm``."""

    H_action: Callable = field(init=False, repr=False)
    T_action: Callable = field(init=False, repr=False)
    Hm: np.ndarray = None
    Tm: np.ndarray = None

    def __post_init__(self):
        self.Hm = np.asarray(self.Hm, dtype=float)
        self.Tm = np.asarray(self.Tm, dtype=float)
        r = self.Hm.shape[0]
        self._T2 = self.Tm.reshape(r, r * r)
        self.H_action = lambda u: self.Hm @ u
        self.T_action = lambda u, v: self._T2 @ np.outer(u, v).ravel()
        super().__post_init__()

    @classmethod
    def build(cls, c, g, Hm, Tm, sigma=0.0):
        return cls(c=c, g=g, sigma=sigma, Hm=Hm, Tm=Tm)

    def with_sigma(self, sigma):
        return DenseQuarticModel(c=self.c, g=self.g, sigma=sigma, Hm=self.Hm, Tm=self.Tm)

    def Tvv(self, v):
        return self._T2 @ np.outer(v, v).ravel()

    def taylor_excess(self, v):
        """``T(v) - c`` and the regularization term ``sigma/4 ||v||^4`` separately."""
        Hv = self.Hm @ v
        Tvv = self.Tvv(v)
        nv2 = v @ v
        return self.g @ v + 0.5 * v @ Hv + v @ Tvv / 6.0, 0.25 * self.sigma * nv2 * nv2

    def excess_and_gradient(self, v):
        """``(M(v) - c, grad M(v))``."""
        Hv = self.Hm @ v
        Tvv = self.Tvv(v)
        nv2 = v @ v
        exc = (self.g @ v + 0.5 * v @ Hv + v @ Tvv / 6.0) + 0.25 * self.sigma * nv2 * nv2
        return exc, self.g + Hv + 0.5 * Tvv + self.sigma * nv2 * v

    def value_and_gradient(self, v):
        exc, grad = self.excess_and_gradient(v)
        return self.c + exc, grad

    def line_coefficients(self, s, d, grad=None):
        """``(k1, k2, k3, k4)`` with ``M(s + t d) - M(s) = k1 t + k2 t^2 + k3 t^3 + k4 t^4`` exactly.

        Differences computed this way do not cancel against ``M(s)``.
        """
        if grad is None:
            grad = self.excess_and_gradient(s)[1]
        Td = self.Tvv(d)
        a, b, e = s @ s, s @ d, d @ d
        sig = self.sigma
        k1 = grad @ d
        k2 = 0.5 * (d @ (self.Hm @ d)) + 0.5 * (s @ Td) + sig * (b * b + 0.5 * a * e)
        k3 = (d @ Td) / 6.0 + sig * b * e
        k4 = 0.25 * sig * e * e
        return k1, k2, k3, k4

    def hessian(self, v):
        """Dense ``D^2 M(v)``."""
        Tv = np.tensordot(self.Tm, v, axes=([2], [0]))
        return self.Hm + Tv + self.sigma * ((v @ v) * np.eye(v.size) + 2.0 * np.outer(v, v))


def random_dense_model(r, rng, sigma=1.0, scale=1.0):
    """Random model with symmetric ``H`` and fully symmetric ``T`` (for tests and demos)."""
    G = rng.standard_normal((r, r))
    Hm = 0.5 * (G + G.T)
    T = rng.standard_normal((r, r, r))
    Tm = sum(T.transpose(perm) for perm in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]) / 6
    return DenseQuarticModel.build(c=float(rng.standard_normal()), g=scale * rng.standard_normal(r),
                                   Hm=scale * Hm, Tm=scale * Tm, sigma=sigma)


def taylor_excess(M, v):
    """``taylor_value(M, v) - c`` evaluated without ``c``, so it keeps full relative accuracy."""
    v = M.check(v)
    return _dot(M.g, v) + 0.5 * _dot(v, M.H_action(v)) + _dot(v, M.T_action(v, v)) / 6.0


def model_excess(M, v):
    """``model_value(M, v) - c`` evaluated without ``c``."""
    v = M.check(v)
    nv2 = _dot(v, v)
    return taylor_excess(M, v) + 0.25 * M.sigma * nv2 * nv2


def taylor_value(M, v):
    return M.c + taylor_excess(M, v)


def model_value(M, v):
    return M.c + model_excess(M, v)


def model_gradient(M, v):
    v = M.check(v)
    return M.g + M.H_action(v) + 0.5 * M.T_action(v, v) + M.sigma * _dot(v, v) * v


def model_hess_action(M, v, u):
    v, u = M.check(v), M.check(u)
    return M.H_action(u) + M.T_action(v, u) + M.sigma * (_dot(v, v) * u + 2.0 * _dot(v, u) * v)


def line_coefficients(M, s, d):
    """Coefficients ``k1..k4`` of ``M(s + t d) - M(s)`` as a quartic in ``t``."""
    s, d = M.check(s), M.check(d)
    Td = M.T_action(d, d)
    a, b, e = _dot(s, s), _dot(s, d), _dot(d, d)
    sig = M.sigma
    k1 = _dot(model_gradient(M, s), d)
    k2 = 0.5 * _dot(d, M.H_action(d)) + 0.5 * _dot(s, Td) + sig * (b * b + 0.5 * a * e)
    k3 = _dot(d, Td) / 6.0 + sig * b * e
    k4 = 0.25 * sig * e * e
    return k1, k2, k3, k4


class EigEstimate(tuple):
    """``(value, vector)`` pair; ``converged`` is False for low-confidence estimates."""

    def __new__(cls, value, vector, converged=True):
        self = super().__new__(cls, (value, vector))
        self.converged = converged
        return self

    @property
    def value(self):
        return self[0]

    @property
    def vector(self):
        return self[1]


def min_eig_estimate(op, dim, seed=0, start=None, tol=1e-6):
    """Smallest eigenpair of a self-adjoint operator by Lanczos with full reorthogonalization.

    ``start`` fixes the shape of the space (and must lie in it); otherwise a
    Gaussian vector of length ``dim`` is used. The estimate is exact once the
    Krylov space is invariant or reaches ``dim``.
    """
    rng = np.random.default_rng(seed)
    q = np.asarray(start if start is not None else rng.standard_normal(dim), dtype=float)
    shape = q.shape
    q = q.ravel() / np.linalg.norm(q)
    Q = [q]
    alphas, betas = [], []
    theta, y = None, None
    for k in range(dim):
        w = np.asarray(op(Q[-1].reshape(shape)), dtype=float).ravel()
        alphas.append(Q[-1] @ w)
        Qm = np.array(Q)
        for _ in range(2):
            w = w - Qm.T @ (Qm @ w)
        beta = np.linalg.norm(w)
        Tk = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
        evals, evecs = np.linalg.eigh(Tk)
        theta, y = evals[0], evecs[:, 0]
        # residual of the Ritz pair is beta * |last component of y|
        if beta * abs(y[-1]) <= tol * max(1.0, abs(theta)) * 1e-3 or beta <= 1e-14 or k == dim - 1:
            break
        betas.append(beta)
        Q.append(w / beta)
    vec = (np.array(Q).T @ y)
    vec /= np.linalg.norm(vec)
    res = np.linalg.norm(np.asarray(op(vec.reshape(shape)), dtype=float).ravel() - theta * vec)
    return EigEstimate(float(theta), vec.reshape(shape), bool(res <= tol * max(1.0, abs(theta))))
