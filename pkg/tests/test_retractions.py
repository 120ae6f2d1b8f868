import numpy as np
import pytest

from riemrar.linalg import (
    RankError,
    polar_analytic,
    polar_factor,
    qr_q_analytic,
    qr_q_factor,
    theta_poly,
)
from riemrar.manifolds import Stiefel
from riemrar.retractions import (
    ConfigurationError,
    RetractionSpec,
    check_axioms,
    estimate_order,
    retract,
    retract_analytic,
    theta_determinant_error,
)

SPECS = [RetractionSpec.polar(), RetractionSpec.stiefel(1), RetractionSpec.stiefel(2),
         RetractionSpec.stiefel(3), RetractionSpec.grassmann(1), RetractionSpec.grassmann(2)]


def test_theta_low_degrees():
    H = np.array([[0.0, -0.7], [0.7, 0.0]])
    I = np.eye(2)
    assert np.allclose(theta_poly(0, H), I)
    assert np.allclose(theta_poly(1, H), I + H)
    assert np.allclose(theta_poly(2, H), I + H + H @ H / 3)


def test_theta_rejects_non_skew():
    with pytest.raises(ValueError):
        theta_poly(2, np.eye(3))


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("a", [0.1, 1.0, 10.0, 100.0])
def test_theta_determinant_identity(m, a):
    assert theta_determinant_error(m, a) <= 1e-10


def test_theta_invertible_for_large_skew():
    rng = np.random.default_rng(0)
    for _ in range(20):
        G = rng.standard_normal((5, 5))
        H = G - G.T
        H *= 1e3 / np.linalg.norm(H, 2)
        for m in range(1, 5):
            assert np.linalg.svd(theta_poly(m, H), compute_uv=False)[-1] > 0


def test_polar_factor_examples():
    assert np.allclose(polar_factor(np.diag([2.0, 3.0])), np.eye(2))
    rot = np.array([[0.0, -2.0], [2.0, 0.0]])
    assert np.allclose(polar_factor(rot), [[0.0, -1.0], [1.0, 0.0]])
    with pytest.raises(RankError):
        polar_factor(np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_qr_factor_examples():
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(qr_q_factor(P), P)
    M = np.random.default_rng(0).standard_normal((6, 3))
    Q = qr_q_factor(M)
    R = Q.T @ M
    assert np.allclose(np.triu(R), R, atol=1e-12) and np.all(np.diag(R) > 0)
    with pytest.raises(RankError):
        qr_q_factor(np.zeros((3, 2)))


def test_analytic_factors_match():
    M = np.random.default_rng(1).standard_normal((6, 3))
    assert np.allclose(polar_analytic(M), polar_factor(M), atol=1e-12)
    assert np.allclose(qr_q_analytic(M), qr_q_factor(M), atol=1e-12)


def test_polar_on_circle():
    X = np.array([[1.0], [0.0]])
    V = np.array([[0.0], [0.1]])
    expected = np.array([[1.0], [0.1]]) / np.sqrt(1.01)
    assert np.allclose(retract(RetractionSpec.polar(), X, V), expected, atol=1e-15)


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_zero_step_and_manifold_output(spec):
    M = spec.default_manifold(7, 3)
    X = M.random_point(0)
    assert np.linalg.norm(retract(spec, X, np.zeros_like(X)) - X) <= 1e-12
    V = M.random_tangent(X, 1)
    assert M.is_point(retract(spec, X, 3.0 * V))


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_axioms_on_random_pairs(spec):
    M = spec.default_manifold(7, 3)
    for k in range(5):
        X = M.random_point(2 * k)
        V = M.random_tangent(X, 2 * k + 1)
        assert check_axioms(spec, X, V).passed


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_analytic_twin_matches_forward(spec):
    M = spec.default_manifold(6, 2)
    X = M.random_point(4)
    V = M.random_tangent(X, 5)
    Y = retract(spec, X, V)
    Z = retract_analytic(spec, X, V)
    if spec.family == "gawlik-grassmann":
        assert M.dist(Y, Z) <= 1e-10
    else:
        assert np.linalg.norm(Y - Z) <= 1e-10


@pytest.mark.parametrize("m", [1, 2, 3])
def test_stiefel_order_at_least_m(m):
    spec = RetractionSpec.stiefel(m)
    M = Stiefel(8, 3)
    t = np.logspace(-3, -1, 9)
    for k in range(3):
        X = M.random_point(k)
        V = M.random_tangent(X, 10 + k)
        V /= np.linalg.norm(V)
        fit = estimate_order(spec, X, V, t)
        assert fit.exceeds_range or fit.slope >= m + 1 - 0.3


def test_polar_order_band():
    M = Stiefel(8, 3)
    X = M.random_point(0)
    V = M.random_tangent(X, 1)
    V /= np.linalg.norm(V)
    fit = estimate_order(RetractionSpec.polar(), X, V, np.logspace(-3, -1, 9))
    assert 2.8 <= fit.slope <= 3.2


def test_estimate_order_argument_checks():
    M = Stiefel(4, 2)
    X = M.random_point(0)
    V = M.random_tangent(X, 1)
    V /= np.linalg.norm(V)
    with pytest.raises(ValueError):
        estimate_order(RetractionSpec.polar(), X, V, np.logspace(-3, -1, 3))
    with pytest.raises(ValueError):
        estimate_order(RetractionSpec.polar(), X, 2 * V, np.logspace(-3, -1, 9))


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        RetractionSpec("exponential", 1)
    with pytest.raises(ConfigurationError):
        RetractionSpec.stiefel(0)
    assert RetractionSpec.stiefel(2).claimed_order == 2
    assert RetractionSpec.grassmann(1).claimed_order == 3


def test_retract_shape_mismatch():
    with pytest.raises(ValueError):
        retract(RetractionSpec.polar(), np.eye(3)[:, :2], np.zeros((3, 1)))
