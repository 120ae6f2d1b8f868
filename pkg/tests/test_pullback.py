import numpy as np
import pytest

from riemrar.manifolds import Stiefel
from riemrar.pullback import (
    BrockettObjective,
    StepSizeError,
    build_model_data,
    pullback_grad_at,
    riemannian_gradient,
)
from riemrar.retractions import RetractionSpec, retract


def brockett(n=6, p=3, seed=0):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    obj = BrockettObjective.benchmark((B + B.T) / 2, p)
    M = Stiefel(n, p)
    return obj, M, M.random_point(rng)


def test_value_on_coordinate_frame():
    d = np.array([3.0, -1.0, 2.0, 5.0])
    obj = BrockettObjective.benchmark(np.diag(d), 2)
    X = np.eye(4)[:, :2]
    assert obj.value(X) == pytest.approx(0.5 * (1 * 3.0 + 2 * -1.0))
    zero = BrockettObjective.benchmark(np.zeros((4, 4)), 2)
    assert zero.value(X) == 0.0
    assert not np.any(zero.euclid_gradient(X))


def test_shape_mismatch():
    obj, _, _ = brockett()
    with pytest.raises(ValueError):
        obj.value(np.zeros((5, 3)))


def test_euclid_gradient_matches_fd():
    obj, M, X = brockett()
    G = obj.euclid_gradient(X)
    E = np.random.default_rng(3).standard_normal(X.shape)
    h = 1e-6
    fd = (obj.value(X + h * E) - obj.value(X - h * E)) / (2 * h)
    assert abs(fd - np.vdot(G, E)) <= 1e-7 * max(1.0, abs(fd))


def test_gradient_vanishes_on_eigenbasis():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    A = Q @ np.diag(np.arange(6.0)) @ Q.T
    obj = BrockettObjective.benchmark(A, 3)
    X = Q[:, :3]
    assert np.linalg.norm(riemannian_gradient(obj, Stiefel(6, 3), X)) <= 1e-12


@pytest.mark.parametrize("spec", [RetractionSpec.polar(), RetractionSpec.stiefel(1), RetractionSpec.stiefel(2)], ids=str)
def test_pullback_gradient(spec):
    obj, M, X = brockett()
    g = riemannian_gradient(obj, M, X)
    assert np.linalg.norm(pullback_grad_at(obj, spec, M, X, np.zeros_like(X)) - g) <= 1e-12 * np.linalg.norm(g)
    w = 0.1 * M.random_tangent(X, 5)
    e = M.random_tangent(X, 6)
    G = pullback_grad_at(obj, spec, M, X, w)
    h = 1e-5
    fd = (obj.value(retract(spec, X, w + h * e)) - obj.value(retract(spec, X, w - h * e))) / (2 * h)
    assert abs(np.vdot(G, e) - fd) <= 1e-5 * max(1.0, abs(fd))


def test_constant_objective_has_zero_derivatives():
    obj = BrockettObjective.benchmark(np.zeros((5, 5)), 2)
    M = Stiefel(5, 2)
    X = M.random_point(0)
    data = build_model_data(obj, RetractionSpec.stiefel(1), M, X, "generic")
    u, v = M.random_tangent(X, 1), M.random_tangent(X, 2)
    assert not np.any(data.g)
    assert np.linalg.norm(data.H_action(u)) == 0.0
    assert np.linalg.norm(data.T_action(u, v)) == 0.0


def test_memoized_actions_are_bitwise_stable():
    obj, M, X = brockett()
    data = build_model_data(obj, RetractionSpec.stiefel(1), M, X, "generic")
    u, v = M.random_tangent(X, 1), M.random_tangent(X, 2)
    h1, t1 = data.H_action(u), data.T_action(u, v)
    assert np.array_equal(h1, data.H_action(u))
    assert np.array_equal(t1, data.T_action(v, u))
    assert data.hess_evals == 1 and data.tensor_evals == 1


@pytest.mark.parametrize("spec", [RetractionSpec.polar(), RetractionSpec.stiefel(2), RetractionSpec.stiefel(3)], ids=str)
def test_closed_form_matches_generic(spec):
    obj, M, X = brockett(seed=2)
    fast = build_model_data(obj, spec, M, X, "brockett")
    slow = build_model_data(obj, spec, M, X, "generic")
    for k in range(3):
        u, v = M.random_tangent(X, 10 + k), M.random_tangent(X, 20 + k)
        hf, hs = fast.H_action(u), slow.H_action(u)
        tf, ts = fast.T_action(u, v), slow.T_action(u, v)
        assert np.linalg.norm(hf - hs) <= 1e-5 * np.linalg.norm(hf)
        assert np.linalg.norm(tf - ts) <= 1e-5 * np.linalg.norm(tf)


def test_closed_form_unavailable_for_first_degree_stiefel():
    obj, M, X = brockett()
    assert build_model_data(obj, RetractionSpec.stiefel(1), M, X).method == "generic"
    with pytest.raises(ValueError):
        build_model_data(obj, RetractionSpec.stiefel(1), M, X, "brockett")


def test_outputs_are_tangent_and_taylor_consistent():
    obj, M, X = brockett(seed=4)
    spec = RetractionSpec.stiefel(2)
    data = build_model_data(obj, spec, M, X)
    v = M.random_tangent(X, 1)
    v *= 1e-2 / np.linalg.norm(v)
    for out in (data.g, data.H_action(v), data.T_action(v, v)):
        assert M.is_tangent(X, out, tol=1e-10)
    model = data.c + np.vdot(data.g, v) + 0.5 * np.vdot(v, data.H_action(v)) + np.vdot(v, data.T_action(v, v)) / 6
    assert abs(obj.value(retract(spec, X, v)) - model) <= 1e-6


def test_step_size_error_on_tiny_direction():
    obj, M, X = brockett()
    data = build_model_data(obj, RetractionSpec.stiefel(1), M, X, "generic")
    with pytest.raises(StepSizeError):
        data.H_action(1e-200 * M.random_tangent(X, 1))
