import math
from types import SimpleNamespace

import numpy as np
import pytest

from riemrar.manifolds import Stiefel
from riemrar.pullback import BrockettObjective, Objective, build_model_data
from riemrar.rar import RarConfig, check_second_order, compute_rho, run, update_alpha
from riemrar.retractions import ConfigurationError, RetractionSpec
from riemrar.solvers import solve_newton_quartic


def eigen_instance(n=6, p=3, seed=0):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    A = Q @ np.diag(np.arange(float(n))) @ Q.T
    return BrockettObjective.benchmark(A, p), Q


def random_instance(n=8, p=3, seed=0):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    return BrockettObjective.benchmark((B + B.T) / 2, p), Stiefel(n, p).random_point(rng)


@pytest.mark.parametrize("kwargs", [
    dict(theta=0.0), dict(eta1=0.95), dict(gamma1=1.5), dict(gamma2=3.0, gamma3=2.0),
    dict(alpha0=1e-12), dict(mode="third"), dict(eps1=0.0), dict(order_p=2),
])
def test_config_rejects_bad_parameters(kwargs):
    with pytest.raises(ConfigurationError):
        RarConfig(**kwargs)


def test_equal_gammas_allowed():
    cfg = RarConfig(gamma2=2.0, gamma3=2.0)
    assert update_alpha(5.0, 0.0, cfg) == 10.0


def test_rho_example():
    rho = compute_rho(1.0, 0.5, 1.0 - 0.4)
    assert rho == pytest.approx(5 / 6)
    cfg = RarConfig()
    assert cfg.eta1 <= rho < cfg.eta2
    assert 20.0 <= update_alpha(20.0, rho, cfg) <= 40.0


def test_alpha_midpoint_on_very_successful_step():
    assert update_alpha(20.0, 0.95, RarConfig()) == pytest.approx(11.0)
    assert update_alpha(1e-10, 0.95, RarConfig()) >= 1e-10


def test_rho_guard():
    assert math.isnan(compute_rho(1.0, 0.9, 1e-16))
    assert math.isnan(compute_rho(1.0, 0.9, -1.0))


def test_stationary_start_needs_no_iterations():
    obj, Q = eigen_instance()
    trace = run(obj, Q[:, :3], RarConfig())
    assert trace.converged and trace.iterations == 0
    assert len(trace.records) == 1


@pytest.mark.parametrize("spec", [RetractionSpec.stiefel(2), RetractionSpec.polar(), RetractionSpec.stiefel(1)], ids=str)
def test_converges_with_invariants(spec):
    obj, x0 = random_instance(seed=1)
    cfg = RarConfig(theta=0.25, retraction=spec, seed=3)
    trace = run(obj, x0, cfg)
    assert trace.converged, trace.message
    assert trace.final.grad_norm <= cfg.eps1
    assert trace.invariant_violations(cfg.alpha_min) == []
    assert Stiefel(8, 3).is_point(trace.x)
    accepted = [r for r in trace.records if r.accepted]
    assert all(r.f_trial < r.f_value for r in accepted)


def test_newton_inner_solver():
    obj, x0 = random_instance(seed=2)
    trace = run(obj, x0, RarConfig(theta=2.0), solver=solve_newton_quartic)
    assert trace.converged


def test_grassmann_run():
    obj, x0 = random_instance(seed=4)
    trace = run(obj, x0, RarConfig(retraction=RetractionSpec.grassmann(1)))
    assert trace.converged


def test_trace_is_deterministic():
    obj, x0 = random_instance(seed=5)
    a = run(obj, x0, RarConfig(seed=11))
    b = run(obj, x0, RarConfig(seed=11))
    strip = lambda t: [(r.f_value, r.grad_norm, r.alpha, r.rho, r.step_norm, r.accepted, r.krylov_dim) for r in t.records]
    assert strip(a) == strip(b)


def test_max_outer_reached():
    obj, x0 = random_instance(seed=6)
    trace = run(obj, x0, RarConfig(max_outer=1))
    assert not trace.converged and trace.status == "max_outer"


def test_second_order_check_on_positive_hessian():
    obj, Q = eigen_instance()
    X = Q[:, [2, 1, 0]]  # global minimizer: largest weight on smallest eigenvalue
    data = build_model_data(obj, RetractionSpec.stiefel(2), Stiefel(6, 3), X)
    ok, lam = check_second_order(X, data, 1e-4)
    assert ok and lam > -1e-8


def test_saddle_detected_and_escaped():
    obj, Q = eigen_instance()
    X = Q[:, :3]
    M = Stiefel(6, 3)
    lams = []
    for spec in (RetractionSpec.stiefel(2), RetractionSpec.stiefel(3)):
        ok, lam = check_second_order(X, build_model_data(obj, spec, M, X), 1e-4)
        assert not ok and lam < 0
        lams.append(lam)
    assert abs(lams[0] - lams[1]) <= 1e-4
    cfg = RarConfig(mode="second")
    trace = run(obj, X, cfg)
    assert trace.converged
    assert obj.value(trace.x) < obj.value(X) - 1.0


def test_second_order_needs_order_two():
    obj, Q = eigen_instance()
    data = build_model_data(obj, RetractionSpec.stiefel(2), Stiefel(6, 3), Q[:, :3])
    data.spec = SimpleNamespace(geodesic_order=1)
    with pytest.raises(ConfigurationError):
        check_second_order(Q[:, :3], data, 1e-4)


def test_rotation_invariant_objective_converges():
    # no N weighting: the Hessian has a null direction and plain descent stalls near the end
    A = np.diag(np.arange(5.0))
    obj = Objective(lambda X: float(np.sum(X * (A @ X))), lambda X: 2 * A @ X)
    trace = run(obj, Stiefel(5, 2).random_point(0), RarConfig())
    assert trace.converged, trace.message
