"""Matrix factor maps and the Bessel-type polynomial used by the retractions.

Two flavours live here. ``polar_factor`` and ``qr_q_factor`` are the
numerically robust SVD/QR versions used for forward evaluation. The ``*_analytic``
helpers only use products, transposes and inverses, so they extend
holomorphically to complex input; the pullback oracles rely on that for
complex-step differentiation.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb, factorial

import numpy as np


class RankError(np.linalg.LinAlgError):
    """Raised when a factor map is applied to a numerically rank-deficient matrix."""


RANK_RTOL = 1e-12


@lru_cache(maxsize=None)
def theta_coefficients(m):
    """Coefficients ``c_k`` of ``Theta_m(H) = sum_k c_k H^k`` (powers of ``H``, not ``2H``)."""
    if m < 0:
        raise ValueError("degree must be nonnegative")
    return tuple(comb(m, k) * factorial(2 * m - k) / factorial(2 * m) * 2.0**k for k in range(m + 1))


def theta_poly(m, H, check=True):
    """Evaluate ``Theta_m(H) = sum_k binom(m,k) (2m-k)!/(2m)! (2H)^k``.

    ``H`` must be skew-symmetric when ``check`` is set. Works on stacks of
    square matrices (``H.shape == (..., k, k)``) and on complex input.
    """
    H = np.asarray(H)
    if H.shape[-1] != H.shape[-2]:
        raise ValueError("Theta_m needs square input")
    if check:
        skew_err = np.linalg.norm(H + np.swapaxes(H, -1, -2), axis=(-2, -1))
        if np.any(skew_err > 1e-8 * (1.0 + np.linalg.norm(H, axis=(-2, -1)))):
            raise ValueError("Theta_m is only defined here for skew-symmetric input")
    return _poly_horner(theta_coefficients(m), H)


def _poly_horner(coeffs, H):
    eye = np.broadcast_to(np.eye(H.shape[-1]), H.shape)
    out = coeffs[-1] * eye
    for c in reversed(coeffs[:-1]):
        out = out @ H + c * eye
    return out


def _check_rank(s):
    if s[-1] <= RANK_RTOL * s[0] or not np.isfinite(s[0]):
        raise RankError("matrix is numerically rank deficient")


def polar_factor(M):
    """Orthonormal polar factor ``U V^T`` of a full column-rank ``k x p`` matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise ValueError("polar factor needs a tall k x p matrix, k >= p")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    _check_rank(s)
    return U @ Vt


def qr_q_factor(M):
    """Q factor of the thin QR factorization, normalized so ``diag(R) > 0``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise ValueError("QR factor needs a tall k x p matrix, k >= p")
    Q, R = np.linalg.qr(M)
    d = np.diag(R)
    scale = np.max(np.abs(d)) if d.size else 0.0
    if d.size and (np.min(np.abs(d)) <= RANK_RTOL * scale or scale == 0.0):
        raise RankError("matrix is numerically rank deficient")
    return Q * np.sign(d)


# -- holomorphic variants ---------------------------------------------------

def inv_sqrt_analytic(M, tol=1e-14, maxiter=60):
    """Inverse principal square root by the Denman-Beavers iteration.

    Accepts stacks of matrices with spectrum off the closed negative real axis.
    Only products and inverses are used, so complex perturbations propagate as
    derivatives.
    """
    M = np.asarray(M)
    k = M.shape[-1]
    # determinant scaling keeps the early iterations well conditioned
    logdet = np.log(np.abs(np.linalg.det(M.real)) + 1e-300)
    mu = np.exp(-logdet / k)[..., None, None]
    # Y -> (mu M)^{1/2}, Z -> (mu M)^{-1/2}
    Y = mu * M
    Z = np.broadcast_to(np.eye(k), M.shape).astype(Y.dtype)
    settled = False
    for _ in range(maxiter):
        Yn = 0.5 * (Y + np.linalg.inv(Z))
        Z = 0.5 * (Z + np.linalg.inv(Y))
        delta = np.max(np.abs(Yn.real - Y.real)) / max(np.max(np.abs(Yn.real)), 1.0)
        Y = Yn
        if settled:
            break
        # one extra sweep after convergence so the derivative part settles too
        settled = delta <= tol
    return np.sqrt(mu) * Z


def polar_analytic(M):
    """``M (M^T M)^{-1/2}`` with plain transposes (no conjugation)."""
    M = np.asarray(M)
    return M @ inv_sqrt_analytic(np.swapaxes(M, -1, -2) @ M)


def theta_polar_analytic(m, K):
    """Primary matrix function ``Theta_m(K) (Theta_m(K) Theta_m(-K))^{-1/2}``.

    For skew ``K`` this is the polar factor of ``Theta_m(K)``; the primary-function
    form stays valid for matrices similar to skew ones.
    """
    coeffs = theta_coefficients(m)
    P = _poly_horner(coeffs, K)
    Pm = _poly_horner(coeffs, -K)
    return P @ inv_sqrt_analytic(P @ Pm)


def cholesky_upper_analytic(S):
    """Upper Cholesky factor ``R`` with ``S = R^T R`` using plain transposes."""
    S = np.asarray(S)
    p = S.shape[-1]
    R = np.zeros_like(S)
    for i in range(p):
        d = S[..., i, i] - np.einsum("...k,...k->...", R[..., :i, i], R[..., :i, i])
        R[..., i, i] = np.sqrt(d)
        for j in range(i + 1, p):
            num = S[..., i, j] - np.einsum("...k,...k->...", R[..., :i, i], R[..., :i, j])
            R[..., i, j] = num / R[..., i, i]
    return R


def qr_q_analytic(M):
    """Q factor ``M R^{-1}`` with ``R`` the Cholesky factor of ``M^T M``."""
    M = np.asarray(M)
    R = cholesky_upper_analytic(np.swapaxes(M, -1, -2) @ M)
    return M @ np.linalg.inv(R)
