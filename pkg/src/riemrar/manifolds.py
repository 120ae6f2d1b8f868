"""Stiefel and Grassmann manifolds as embedded matrix manifolds.

Points are ``n x p`` arrays with orthonormal columns. Tangent vectors are
``n x p`` arrays; on the Grassmannian they are horizontal lifts (``X.T @ V = 0``).
Both manifolds carry the embedded (trace) metric.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

POINT_TOL = 1e-10
TANGENT_TOL = 1e-8


def _sym(M):
    return 0.5 * (M + M.T)


def qr_positive(M):
    """Thin QR factorization with a nonnegative diagonal in ``R``."""
    Q, R = np.linalg.qr(M)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs, R * signs[:, None]


@dataclass(frozen=True)
class Manifold:
    """Common behaviour of St(n, p) and Gr(n, p).

    Subclasses only differ in the tangent projection, the dimension and the
    geodesic used as reference exponential.
    """

    n: int
    p: int

    kind = "abstract"

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and isinstance(self.p, (int, np.integer))):
            raise TypeError("n and p must be integers")
        if not 1 <= self.p <= self.n:
            raise ValueError(f"need 1 <= p <= n, got n={self.n}, p={self.p}")

    @property
    def shape(self):
        return (self.n, self.p)

    def __str__(self):
        return f"{self.kind}({self.n},{self.p})"

    # -- validation ---------------------------------------------------------
    def _check_shape(self, *arrays):
        for a in arrays:
            if np.shape(a) != self.shape:
                raise ValueError(f"expected shape {self.shape}, got {np.shape(a)}")

    def is_point(self, X, tol=POINT_TOL):
        X = np.asarray(X)
        if X.shape != self.shape or not np.all(np.isfinite(X)):
            return False
        return np.linalg.norm(X.T @ X - np.eye(self.p)) <= tol

    def check_point(self, X, tol=POINT_TOL):
        if not self.is_point(X, tol):
            raise ValueError(f"not a point on {self}")
        return X

    def tangent_residual(self, X, V):
        raise NotImplementedError

    def is_tangent(self, X, V, tol=TANGENT_TOL):
        V = np.asarray(V)
        if V.shape != self.shape:
            return False
        return self.tangent_residual(X, V) <= tol * (1.0 + np.linalg.norm(V))

    def check_tangent(self, X, V, tol=TANGENT_TOL):
        if not self.is_tangent(X, V, tol):
            raise ValueError(f"not a tangent vector of {self} at the given point")
        return V

    # -- geometry -----------------------------------------------------------
    def proj(self, X, Z):
        raise NotImplementedError

    def inner(self, X, U, V):
        """Embedded metric ``trace(U.T @ V)``; ``X`` is only used for shape checks."""
        self._check_shape(X, U, V)
        return float(np.vdot(U, V))

    def norm(self, X, U):
        return np.sqrt(self.inner(X, U, U))

    @property
    def dim(self):
        raise NotImplementedError

    def random_point(self, seed=None):
        rng = np.random.default_rng(seed)
        Q, _ = qr_positive(rng.standard_normal(self.shape))
        return Q

    def random_tangent(self, X, seed=None):
        rng = np.random.default_rng(seed)
        return self.proj(X, rng.standard_normal(self.shape))

    def exp(self, X, V, t=1.0):
        raise NotImplementedError

    def dist(self, X, Y):
        raise NotImplementedError


class Stiefel(Manifold):
    kind = "St"

    @property
    def dim(self):
        return self.n * self.p - self.p * (self.p + 1) // 2

    def tangent_residual(self, X, V):
        XtV = X.T @ V
        return np.linalg.norm(XtV + XtV.T)

    def proj(self, X, Z):
        self._check_shape(X, Z)
        return Z - X @ _sym(X.T @ Z)

    def exp(self, X, V, t=1.0):
        """Geodesic of the embedded metric, ``t`` units along ``V``.

        Uses ``[X Q] expm(t [[2A, -R^T], [R, 0]]) [I; 0] expm(-t A)`` where
        ``A = X^T V`` and ``QR`` is the QR factorization of ``(I - X X^T) V``.
        """
        X, V = np.asarray(X, float), np.asarray(V, float)
        _check_finite(X, V, t)
        if t < 0:
            raise ValueError("t must be nonnegative")
        self._check_shape(X, V)
        p = self.p
        A = X.T @ V
        A = 0.5 * (A - A.T)
        Q, R = np.linalg.qr(V - X @ A)
        B = np.block([[2 * A, -R.T], [R, np.zeros((p, p))]])
        top = scipy.linalg.expm(t * B)[:, :p]
        return np.hstack([X, Q]) @ top @ scipy.linalg.expm(-t * A)

    def dist(self, X, Y):
        """Ambient Frobenius distance (used for retraction-order fits)."""
        return float(np.linalg.norm(np.asarray(X) - np.asarray(Y)))


class Grassmann(Manifold):
    kind = "Gr"

    @property
    def dim(self):
        return self.p * (self.n - self.p)

    def tangent_residual(self, X, V):
        return np.linalg.norm(X.T @ V)

    def proj(self, X, Z):
        self._check_shape(X, Z)
        return Z - X @ (X.T @ Z)

    def exp(self, X, V, t=1.0):
        """Geodesic via the thin SVD ``V = U S W^T``."""
        X, V = np.asarray(X, float), np.asarray(V, float)
        _check_finite(X, V, t)
        if t < 0:
            raise ValueError("t must be nonnegative")
        self._check_shape(X, V)
        U, s, Wt = np.linalg.svd(V, full_matrices=False)
        return (X @ Wt.T) * np.cos(t * s) @ Wt + (U * np.sin(t * s)) @ Wt

    def dist(self, X, Y):
        """Geodesic distance: 2-norm of the principal angles between spans."""
        X, Y = np.asarray(X), np.asarray(Y)
        # sines from the residual, cosines from the overlap; atan2 is accurate at both ends
        sines = np.linalg.svd(Y - X @ (X.T @ Y), compute_uv=False)
        cosines = np.linalg.svd(X.T @ Y, compute_uv=False)
        angles = np.arctan2(np.sort(sines), np.sort(cosines)[::-1])
        return float(np.linalg.norm(angles))


def _check_finite(X, V, t):
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(V)) and np.isfinite(t)):
        raise ValueError("non-finite input")


def make_manifold(kind, n, p):
    kinds = {"stiefel": Stiefel, "st": Stiefel, "grassmann": Grassmann, "gr": Grassmann}
    try:
        return kinds[kind.lower()](n, p)
    except KeyError:
        raise ValueError(f"unknown manifold kind {kind!r}") from None
