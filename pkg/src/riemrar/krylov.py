"""Symmetric Krylov basis growth from tensor actions and the hybrid framework.

One orthonormal basis ``u_1, u_2, ...`` is grown from ``T(u_i, u_j)`` for all
pairs. Every inner product ``<u_l, T(u_i, u_j)>`` is recorded once per sorted
index triple, so the tensor coordinates are permutation consistent by
construction. The hybrid framework solves the model restricted to the span of
the completed part of the basis with a pluggable Euclidean solver and checks
the termination conditions in the full space.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .model import DenseQuarticModel, model_gradient, taylor_excess

BREAKDOWN_RTOL = 1e-10


class KrylovContractError(ValueError):
    """An action returned something outside the model space."""


class SolverContractError(RuntimeError):
    """The inner solver failed the full-space conditions at full dimension."""


class BookkeepingError(RuntimeError):
    pass


@dataclass
class KrylovState:
    """Mutable basis and coordinate store for one subproblem.

    ``r`` is the size of the completed part of the basis: every pair
    ``(i, j)`` with ``i <= j <= r`` has been processed, so all tensor
    coordinates inside ``[:r]^3`` are known. ``r_plus`` is the total number
    of basis vectors and ``r_minus`` the value of ``r`` before the last expand.
    """

    shape: tuple
    dim_cap: int
    rng: np.random.Generator
    vectors: list = field(default_factory=list)
    used_pairs: set = field(default_factory=set)
    T_coords: dict = field(default_factory=dict)
    r_minus: int = 0
    r: int = 0
    breakdowns: int = 0
    augments: int = 0
    tensor_calls: int = 0
    hess_calls: int = 0
    project: object = None

    def __post_init__(self):
        self._actions = {}     # pair -> flattened T(u_j, u_i)
        self._H_vectors = {}   # j -> flattened H u_j
        self._cap = 0
        self._grow(min(self.dim_cap, 8))

    def _grow(self, k):
        # dense mirrors of the coordinates, grown geometrically
        if k <= self._cap:
            return
        k = min(self.dim_cap, max(k, 2 * self._cap))
        old = self._cap
        Td, Tf = np.zeros((k, k, k)), np.zeros((k, k, k), dtype=bool)
        Hc, Hf = np.zeros((k, k)), np.zeros((k, k), dtype=bool)
        if old:
            Td[:old, :old, :old], Tf[:old, :old, :old] = self._Td, self._Tfilled
            Hc[:old, :old], Hf[:old, :old] = self.H_coords, self.H_filled
        self._Td, self._Tfilled, self.H_coords, self.H_filled = Td, Tf, Hc, Hf
        self._cap = k

    @classmethod
    def seeded(cls, g, dim_cap, rng, project=None):
        """Basis started from ``g / ||g||``."""
        g = np.asarray(g, dtype=float)
        ng = np.linalg.norm(g)
        if ng == 0.0:
            raise ValueError("the framework needs a nonzero gradient")
        st = cls(g.shape, int(dim_cap), rng, project=project)
        u = g.ravel() / ng
        if project is not None:
            u = np.asarray(project(u.reshape(g.shape)), dtype=float).ravel()
            u /= np.linalg.norm(u)
        st._append(u)
        return st

    @property
    def r_plus(self):
        return len(self.vectors)

    @property
    def basis(self):
        """Basis as an ``(r_plus, size)`` array of flattened vectors."""
        return np.array(self.vectors)

    def lift(self, s):
        s = np.asarray(s, dtype=float)
        return (s @ np.array(self.vectors[: s.size])).reshape(self.shape)

    def gram_error(self):
        U = self.basis
        return float(np.max(np.abs(U @ U.T - np.eye(len(U)))))

    def lifted_gradient(self, s, reduced):
        """Full-space gradient at ``u = sum_j s_j u_j`` of the model the reduced problem sees.

        Inside the span it is the reduced gradient; the part outside the span
        comes from the stored actions, ``(I - U U^T)(sum_j s_j H u_j +
        1/2 sum_ij s_i s_j T(u_i, u_j))``. For exactly multilinear actions
        this is ``grad M(u)``; with noisy oracles it avoids mixing stored
        coordinates with freshly evaluated actions, and it coincides with the
        reduced gradient once the basis spans the space.
        """
        r = s.size
        U = np.array(self.vectors[:r])
        Hs = np.array([self._H_vectors[j] for j in range(r)]).T @ s
        pairs = [(i, j) for i in range(r) for j in range(i, r)]
        w = np.array([(1.0 if i == j else 2.0) * s[i] * s[j] for i, j in pairs])
        Tss = np.array([self._actions[p] for p in pairs]).T @ w
        raw = Hs + 0.5 * Tss
        for _ in range(2):
            raw = raw - U.T @ (U @ raw)
        grad = U.T @ reduced.excess_and_gradient(s)[1] + raw
        return grad.reshape(self.shape)

    def tensor_coord(self, l, i, j):
        """Stored ``<u_l, T(u_i, u_j)>`` (0-based indices, any order)."""
        return self.T_coords[tuple(sorted((l, i, j)))]

    # -- internals --------------------------------------------------------------
    def _record(self, l, i, j, value):
        key = tuple(sorted((l, i, j)))
        if key in self.T_coords:
            return
        self.T_coords[key] = value
        for a, b, c in set(itertools.permutations(key)):
            self._Td[a, b, c] = value
            self._Tfilled[a, b, c] = True

    def _append(self, u):
        k = len(self.vectors)
        if k >= self.dim_cap:
            raise BookkeepingError("basis already spans the space")
        self._grow(k + 1)
        self.vectors.append(u)
        # late coordinates against actions already computed
        for (i, j), a in self._actions.items():
            self._record(k, i, j, float(u @ a))

    def _orthogonalize(self, v):
        U = self.basis
        for _ in range(2):
            v = v - U.T @ (U @ v)
        if self.project is not None:
            # after heavy cancellation the rounding left in v is not tangent
            v = np.asarray(self.project(v.reshape(self.shape)), dtype=float).ravel()
        return v

    def _augment(self, sample):
        for _ in range(20):
            v = np.asarray(sample(self.rng), dtype=float).ravel()
            w = self._orthogonalize(v)
            nw = np.linalg.norm(w)
            if nw > 1e-6 * max(1.0, np.linalg.norm(v)):
                w = self._orthogonalize(w / nw)
                self._append(w / np.linalg.norm(w))
                self.augments += 1
                return True
        return False


def _as_action(out, shape):
    out = np.asarray(out, dtype=float)
    if out.shape != tuple(shape) or not np.all(np.isfinite(out)):
        raise KrylovContractError(f"action returned shape {out.shape}, expected {tuple(shape)} (finite)")
    return out.ravel()


def krylov_sym_expand(state, T_action, sample=None):
    """Process every unused pair ``(i, j)``, ``i <= j`` of the basis at entry.

    Returns the state for chaining. When no pair produced a new direction and
    the basis is not yet full, one random orthonormal vector is appended;
    ``sample(rng)`` draws it (defaults to a Gaussian in the model space).
    """
    r0 = state.r_plus
    appended = False
    for i in range(r0):
        for j in range(i, r0):
            if (i, j) in state.used_pairs:
                continue
            ui, uj = state.vectors[i], state.vectors[j]
            a = _as_action(T_action(uj.reshape(state.shape), ui.reshape(state.shape)), state.shape)
            state.tensor_calls += 1
            state._actions[(i, j)] = a
            for l, ul in enumerate(state.vectors):
                state._record(l, i, j, float(ul @ a))
            state.used_pairs.add((i, j))
            if state.r_plus >= state.dim_cap:
                continue
            w = state._orthogonalize(a)
            if np.linalg.norm(w) > BREAKDOWN_RTOL * max(1.0, np.linalg.norm(a)):
                # heavy cancellation leaves rounding noise along the basis; clean it
                w = state._orthogonalize(w / np.linalg.norm(w))
                state._append(w / np.linalg.norm(w))
                appended = True
            else:
                state.breakdowns += 1
    if not appended and state.r_plus < state.dim_cap:
        state._augment(sample if sample is not None else (lambda rng: rng.standard_normal(state.shape)))
    state.r_minus, state.r = state.r, r0
    return state


def update_H_coords(state, H_action, r=None):
    """Fill missing ``<u_i, H u_j>`` for ``i, j < r`` (default ``state.r``)."""
    r = state.r if r is None else r
    for j in range(r):
        if j not in state._H_vectors:
            state._H_vectors[j] = _as_action(H_action(state.vectors[j].reshape(state.shape)), state.shape)
            state.hess_calls += 1
    for i in range(r):
        for j in range(i, r):
            if state.H_filled[i, j]:
                continue
            # symmetrized so the stored matrix is exactly symmetric
            h = 0.5 * (float(state.vectors[i] @ state._H_vectors[j]) + float(state.vectors[j] @ state._H_vectors[i]))
            state.H_coords[i, j] = state.H_coords[j, i] = h
            state.H_filled[i, j] = state.H_filled[j, i] = True
    return state


def reduced_model(state, full, r=None):
    """The restriction ``s -> M(sum_i s_i u_i)`` as a dense model on ``R^r``."""
    r = state.r if r is None else r
    if r > state.r_plus or not state._Tfilled[:r, :r, :r].all() or not state.H_filled[:r, :r].all():
        raise BookkeepingError(f"coordinates incomplete for r={r}")
    U = np.array(state.vectors[:r])
    g = U @ np.asarray(full.g, dtype=float).ravel()
    return DenseQuarticModel.build(c=full.c, g=g, Hm=state.H_coords[:r, :r].copy(),
                                   Tm=state._Td[:r, :r, :r].copy(), sigma=full.sigma)


@dataclass
class HybridStats:
    rounds: int = 0
    final_r: int = 0
    solver_iterations: int = 0
    breakdowns: int = 0
    augments: int = 0
    tensor_calls: int = 0
    hess_calls: int = 0
    grad_norm: float = np.nan
    value: float = np.nan
    extra_failed: bool = False
    taylor_decrease: float = np.nan
    step_norm_sq: float = np.nan
    fallback_used: bool = False


def _pad(s, r):
    out = np.zeros(r)
    if s is not None:
        out[: s.size] = s
    return out


def hybrid_minimize(full, solver, theta, max_rounds=None, seed=0, extra_check=None, start_vector=None,
                    full_check="lifted", fallback=None):
    """Approximately minimize ``full`` until both full-space conditions hold.

    Returns ``(u, stats)`` with ``||grad M(u)|| <= theta ||u||^3`` and
    ``M(u) <= c``. With ``full_check="lifted"`` the gradient is the multilinear
    extension of the stored actions (see :meth:`KrylovState.lifted_gradient`)
    and the value is the reduced one; ``"direct"`` calls the actions at ``u``.
    The two agree for exact oracles. ``stats.taylor_decrease`` is
    ``c - T(u)`` for the same model. ``extra_check(u)`` adds a further acceptance test; if it
    still fails once the basis spans the space the first-order point is
    returned with ``stats.extra_failed`` set. ``start_vector`` replaces ``g``
    as the first basis direction (the conditions are unchanged). ``fallback`` is
    a second inner solver used once the basis spans the space and ``solver``
    still misses the conditions (plain descent stalls on nearly singular
    models at tiny steps).
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    if full_check not in ("lifted", "direct"):
        raise ValueError(f"unknown full_check {full_check!r}")
    dim_cap = int(full.dim)
    if max_rounds is None:
        max_rounds = dim_cap + 5
    if start_vector is None and not np.any(full.g):
        raise ValueError("the framework needs a nonzero gradient")
    state = KrylovState.seeded(full.g if start_vector is None else start_vector, dim_cap,
                               np.random.default_rng(seed), full.project)
    stats = HybridStats()
    s = None
    u = None
    current = solver
    for rnd in range(1, max_rounds + 1):
        stats.rounds = rnd
        if state.r < state.r_plus or state.r_plus < dim_cap:
            krylov_sym_expand(state, full.T_action, full.sample)
        update_H_coords(state, full.H_action)
        red = reduced_model(state, full)
        out = current(red, _pad(s, state.r), theta)
        s = out.s_star
        stats.solver_iterations += out.inner_iterations
        u = state.lift(s)
        if full_check == "lifted":
            gn = float(np.linalg.norm(state.lifted_gradient(s, red)))
            te, q = red.taylor_excess(s)
            nu2 = float(s @ s)
        else:
            gn = float(np.linalg.norm(model_gradient(full, u)))
            te = taylor_excess(full, u)
            nu2 = float(np.vdot(u, u))
            q = 0.25 * full.sigma * nu2 * nu2
        # M(u) <= c is tested on the excess, which carries no rounding from c
        exc = te + q
        stats.final_r, stats.grad_norm, stats.value = state.r, gn, full.c + exc
        stats.taylor_decrease, stats.step_norm_sq = -te, nu2
        if gn <= theta * nu2**1.5 and exc <= 0.0:
            full_dim = state.r >= dim_cap
            if extra_check is None or extra_check(u):
                break
            if full_dim:
                stats.extra_failed = True
                break
        elif state.r >= dim_cap and fallback is not None and current is not fallback:
            current = fallback
            stats.fallback_used = True
    else:
        raise SolverContractError(
            f"no point met the full-space conditions after {max_rounds} rounds "
            f"(r={state.r}/{dim_cap}, grad={stats.grad_norm:.3e}, theta*|u|^3={theta * np.linalg.norm(u)**3:.3e}, "
            f"M(u)-c={exc:.3e}, inner solver {out.status} with reduced grad {out.grad_norm:.3e})")
    stats.breakdowns, stats.augments = state.breakdowns, state.augments
    stats.tensor_calls, stats.hess_calls = state.tensor_calls, state.hess_calls
    if stats.taylor_decrease < 0.25 * full.sigma * stats.step_norm_sq * stats.step_norm_sq:
        raise BookkeepingError("returned step violates the model decrease bound")
    return u, stats
