import numpy as np
import pytest

from riemrar.krylov import (
    BookkeepingError,
    KrylovContractError,
    KrylovState,
    SolverContractError,
    hybrid_minimize,
    krylov_sym_expand,
    reduced_model,
    update_H_coords,
)
from riemrar.model import DenseQuarticModel, model_gradient, model_value, random_dense_model
from riemrar.solvers import CAP, SolverOutcome, solve_armijo_gd, solve_newton_quartic


def zero_T(u, v):
    return np.zeros_like(u)


def test_zero_tensor_breaks_down_and_augments():
    st = KrylovState.seeded(np.array([1.0, 0.0, 0.0]), 3, np.random.default_rng(0))
    krylov_sym_expand(st, zero_T)
    assert st.breakdowns == 1 and st.augments == 1
    assert st.r_plus == 2 and st.r == 1
    assert st.tensor_coord(0, 0, 0) == 0.0
    assert st.gram_error() <= 1e-12


def S112_tensor():
    T = np.zeros((3, 3, 3))
    for idx in {(0, 0, 1), (0, 1, 0), (1, 0, 0)}:
        T[idx] = 1.0
    return T


def test_hand_traced_expand():
    T = S112_tensor()
    act = lambda u, v: np.einsum("lij,i,j->l", T, u, v)
    assert np.allclose(act(np.eye(3)[0], np.eye(3)[0]), np.eye(3)[1])
    st = KrylovState.seeded(np.eye(3)[0], 3, np.random.default_rng(0))
    krylov_sym_expand(st, act)
    assert np.allclose(st.vectors[1], np.eye(3)[1])
    for perm in [(1, 0, 0), (0, 1, 0), (0, 0, 1)]:
        assert st.tensor_coord(*perm) == 1.0
    assert st.tensor_coord(0, 0, 0) == 0.0


def test_used_pairs_are_not_reprocessed():
    rng = np.random.default_rng(1)
    M = random_dense_model(6, rng)
    st = KrylovState.seeded(M.g, 6, np.random.default_rng(0))
    calls = []
    act = lambda u, v: (calls.append(1), M.T_action(u, v))[1]
    krylov_sym_expand(st, act)
    first = len(calls)
    r_before = st.r_plus
    krylov_sym_expand(st, act)
    new_pairs = r_before * (r_before + 1) // 2 - first
    assert len(calls) - first == new_pairs
    assert st.r_minus <= st.r <= st.r_plus <= st.dim_cap


def test_H_coords_identity_caching_and_symmetry():
    rng = np.random.default_rng(2)
    st = KrylovState.seeded(rng.standard_normal(5), 5, rng)
    krylov_sym_expand(st, lambda u, v: rng.standard_normal(5))
    update_H_coords(st, lambda u: u)
    assert np.allclose(st.H_coords[: st.r, : st.r], np.eye(st.r))
    calls = st.hess_calls
    update_H_coords(st, lambda u: u)
    assert st.hess_calls == calls

    G = rng.standard_normal((5, 5))
    st2 = KrylovState.seeded(rng.standard_normal(5), 5, rng)
    for _ in range(3):
        krylov_sym_expand(st2, lambda u, v: G @ (u + v))
    update_H_coords(st2, lambda u: G @ u)
    Hc = st2.H_coords[: st2.r, : st2.r]
    assert np.array_equal(Hc, Hc.T)


def test_reduced_model_matches_lift():
    rng = np.random.default_rng(3)
    M = random_dense_model(12, rng, sigma=0.8)
    st = KrylovState.seeded(M.g, 12, rng)
    for _ in range(2):
        krylov_sym_expand(st, M.T_action)
    update_H_coords(st, M.H_action)
    red = reduced_model(st, M)
    assert abs(red.g[0] - np.linalg.norm(M.g)) <= 1e-12
    assert np.max(np.abs(red.g[1:])) <= 1e-12
    for _ in range(20):
        s = rng.standard_normal(st.r)
        full = model_value(M, st.lift(s))
        assert abs(red.value_and_gradient(s)[0] - full) <= 1e-10 * (1 + abs(full))


def test_canonical_basis_gives_full_model():
    rng = np.random.default_rng(4)
    M = random_dense_model(4, rng)
    st = KrylovState.seeded(np.eye(4)[0], 4, rng)
    while st.r < 4:
        krylov_sym_expand(st, M.T_action)
    update_H_coords(st, M.H_action)
    red = reduced_model(st, M)
    U = st.basis
    v = rng.standard_normal(4)
    assert abs(red.value_and_gradient(U @ v)[0] - model_value(M, v)) <= 1e-12 * (1 + abs(model_value(M, v)))


def test_tensor_coordinates_recompute():
    rng = np.random.default_rng(5)
    M = random_dense_model(8, rng)
    st = KrylovState.seeded(M.g, 8, rng)
    for _ in range(2):
        krylov_sym_expand(st, M.T_action)
        assert st.gram_error() <= 1e-10
    U = st.basis
    for (l, i, j), val in st.T_coords.items():
        assert abs(val - U[l] @ M.T_action(U[i], U[j])) <= 1e-9


def test_incomplete_coordinates_are_a_bookkeeping_error():
    rng = np.random.default_rng(6)
    M = random_dense_model(5, rng)
    st = KrylovState.seeded(M.g, 5, rng)
    with pytest.raises(BookkeepingError):
        reduced_model(st, M, r=1)


def test_bad_action_shape():
    st = KrylovState.seeded(np.ones(3), 3, np.random.default_rng(0))
    with pytest.raises(KrylovContractError):
        krylov_sym_expand(st, lambda u, v: np.ones(4))


def test_one_dimensional_hybrid_example():
    e1 = np.eye(3)[0]
    full = DenseQuarticModel.build(0.0, -e1, np.eye(3), np.zeros((3, 3, 3)), sigma=1.0)
    u, stats = hybrid_minimize(full, solve_armijo_gd, theta=1.0)
    assert stats.rounds == 1 and stats.final_r == 1
    assert np.allclose(u[1:], 0.0)
    assert np.linalg.norm(model_gradient(full, u)) <= np.linalg.norm(u) ** 3
    assert model_value(full, u) <= full.c


@pytest.mark.parametrize("solver", [solve_armijo_gd, solve_newton_quartic])
def test_hybrid_contract_on_random_models(solver):
    rng = np.random.default_rng(7)
    for k in range(20):
        full = random_dense_model(20, rng, sigma=rng.uniform(0.1, 10))
        theta = float(rng.choice([0.1, 1.0]))
        u, stats = hybrid_minimize(full, solver, theta, seed=k, full_check="direct")
        assert np.linalg.norm(model_gradient(full, u)) <= theta * np.linalg.norm(u) ** 3
        assert model_value(full, u) <= full.c
        assert 1 <= stats.rounds and stats.final_r <= 20
        assert stats.taylor_decrease >= 0.25 * full.sigma * stats.step_norm_sq**2


def test_zero_gradient_needs_start_vector():
    full = random_dense_model(4, np.random.default_rng(8))
    full.g = np.zeros(4)
    with pytest.raises(ValueError):
        hybrid_minimize(full, solve_armijo_gd, 1.0)


def test_broken_solver_is_reported():
    full = random_dense_model(3, np.random.default_rng(9))

    def lazy(red, warm, theta):
        return SolverOutcome(np.zeros(red.g.size), red.c, float(np.linalg.norm(red.g)), 0, CAP)

    with pytest.raises(SolverContractError):
        hybrid_minimize(full, lazy, 1.0)


def test_fallback_solver_takes_over_at_full_dimension():
    full = random_dense_model(3, np.random.default_rng(9))

    def lazy(red, warm, theta):
        return SolverOutcome(np.zeros(red.g.size), red.c, float(np.linalg.norm(red.g)), 0, CAP)

    u, stats = hybrid_minimize(full, lazy, 1.0, fallback=solve_newton_quartic, full_check="direct")
    assert stats.fallback_used
    assert np.linalg.norm(model_gradient(full, u)) <= np.linalg.norm(u) ** 3
