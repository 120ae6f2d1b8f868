"""Numerical verification suites for the retractions and the derivative oracles.

Each suite returns a list of :class:`Check` rows; ``bench verify`` prints them
and the acceptance tests assert on them.
"""
from __future__ import annotations

import time
from typing import NamedTuple

import numpy as np

from .linalg import theta_poly
from .manifolds import Stiefel
from .pullback import BrockettObjective, build_model_data
from .retractions import (
    RetractionSpec,
    check_axioms,
    estimate_order,
    retract,
    retraction_errors,
    theta_determinant_error,
)


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str


DEFAULT_SPECS = (
    RetractionSpec.polar(),
    RetractionSpec.stiefel(1),
    RetractionSpec.stiefel(2),
    RetractionSpec.stiefel(3),
    RetractionSpec.grassmann(1),
    RetractionSpec.grassmann(2),
)


def parse_spec(text):
    """``polar``, ``stiefel:M`` or ``grassmann:M``."""
    kind, _, m = text.strip().lower().partition(":")
    if kind == "polar":
        return RetractionSpec.polar()
    if kind in ("stiefel", "gawlik-stiefel"):
        return RetractionSpec.stiefel(int(m or 2))
    if kind in ("grassmann", "gawlik-grassmann"):
        return RetractionSpec.grassmann(int(m or 1))
    raise ValueError(f"unknown retraction {text!r}; use polar, stiefel:M or grassmann:M")


def _unit_tangent(manifold, X, seed):
    V = manifold.random_tangent(X, seed)
    return V / np.linalg.norm(V)


def retraction_axioms(specs=DEFAULT_SPECS, trials=10, n=7, p=3, seed=0):
    out = []
    for spec in specs:
        M = spec.default_manifold(n, p)
        worst_zero, worst_c, ok = 0.0, 0.0, True
        for k in range(trials):
            X = M.random_point(seed + 2 * k)
            V = M.random_tangent(X, seed + 2 * k + 1)
            rep = check_axioms(spec, X, V)
            worst_zero = max(worst_zero, rep.zero_error)
            worst_c = max(worst_c, rep.first_order_constant)
            ok &= rep.passed
        out.append(Check(f"axioms {spec} on {M}", bool(ok),
                         f"max |R(0)-X| = {worst_zero:.1e}, max C = {worst_c:.3g} over {trials} pairs"))
    return out


def required_slope(spec):
    """Slope threshold: ``m + 0.7`` (Stiefel), ``2m + 1.7`` (Grassmann); polar is a band."""
    if spec.family == "gawlik-stiefel":
        return spec.m + 0.7
    if spec.family == "gawlik-grassmann":
        return 2 * spec.m + 1.7
    return 2.8


def polar_circle_constant(t_grid=None):
    """Leading constant ``d(t) / t^3`` of the polar map on the unit circle (exact value 1/3)."""
    if t_grid is None:
        t_grid = np.logspace(-3, -1, 9)
    M = Stiefel(2, 1)
    X = np.array([[1.0], [0.0]])
    V = np.array([[0.0], [1.0]])
    d = retraction_errors(RetractionSpec.polar(), X, V, t_grid, M)
    keep = d > 1e-13
    return float(np.median(d[keep] / t_grid[keep] ** 3))


def retraction_order(specs=(RetractionSpec.polar(), RetractionSpec.stiefel(1), RetractionSpec.stiefel(2),
                            RetractionSpec.grassmann(1)), directions=5, n=8, p=3, seed=0):
    t_grid = np.logspace(-3, -1, 9)
    out = []
    for spec in specs:
        M = spec.default_manifold(n, p)
        slopes = []
        for k in range(directions):
            X = M.random_point(seed + 2 * k)
            V = _unit_tangent(M, X, seed + 2 * k + 1)
            fit = estimate_order(spec, X, V, t_grid, M)
            slopes.append(np.inf if fit.exceeds_range else fit.slope)
        lo = min(slopes)
        if spec.family == "polar":
            ok = all(2.8 <= s <= 3.2 for s in slopes)
            detail = f"slopes {_fmt(slopes)} (band [2.8, 3.2])"
        else:
            need = required_slope(spec)
            ok = lo >= need
            detail = f"slopes {_fmt(slopes)} (need >= {need:g}, claimed order {spec.claimed_order})"
        out.append(Check(f"order {spec} on {M}", bool(ok), detail))
        if spec.family == "polar":
            c = polar_circle_constant()
            out.append(Check("polar leading constant on the circle", abs(c - 1 / 3) <= 0.2 / 3,
                             f"d(t)/t^3 = {c:.4f} vs 1/3"))
    return out


def _fmt(xs):
    return "[" + ", ".join(f"{x:.2f}" for x in xs) + "]"


def theta_determinant(ms=(1, 2, 3), amplitudes=(0.1, 1.0, 10.0, 100.0), samples=100, k=6, seed=0):
    worst = max(theta_determinant_error(m, a) for m in ms for a in amplitudes)
    out = [Check("det Theta_m(aJ) = |Theta_m(ia)|^2", worst <= 1e-10, f"max relative error {worst:.2e}")]
    rng = np.random.default_rng(seed)
    smallest = np.inf
    for i in range(samples):
        G = rng.standard_normal((k, k))
        H = G - G.T
        H *= 10 ** rng.uniform(-2, 3) / np.linalg.norm(H, 2)
        for m in ms:
            smin = np.linalg.svd(theta_poly(m, H), compute_uv=False)[-1]
            smallest = min(smallest, smin)
    out.append(Check("Theta_m(H) nonsingular for skew H, |H| <= 1e3", smallest > 0,
                     f"min sigma_min {smallest:.3e} over {samples} matrices x {len(ms)} degrees"))
    return out


def brockett_St63(seed=0):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((6, 6))
    obj = BrockettObjective.benchmark((B + B.T) / 2, 3)
    M = Stiefel(6, 3)
    return obj, M, M.random_point(rng)


def oracle_consistency(specs=(RetractionSpec.polar(), RetractionSpec.stiefel(1), RetractionSpec.stiefel(2)),
                       directions=10, seed=0, method="generic"):
    obj, M, X = brockett_St63(seed)
    out = []
    dirs = [M.random_tangent(X, 100 + k) for k in range(3 * directions)]
    dirs = [d / np.linalg.norm(d) for d in dirs]
    for spec in specs:
        data = build_model_data(obj, spec, M, X, method)
        hsym = tsym = taylor = 0.0
        for k in range(directions):
            a, b, c = dirs[3 * k: 3 * k + 3]
            Ha, Hb = data.H_action(a), data.H_action(b)
            scale = max(np.linalg.norm(Ha), np.linalg.norm(Hb))
            hsym = max(hsym, abs(np.vdot(a, Hb) - np.vdot(b, Ha)) / scale)
            vals = [np.vdot(x, data.T_action(y, z)) for x, y, z in ((a, b, c), (b, a, c), (c, a, b))]
            tscale = max(np.linalg.norm(data.T_action(b, c)), 1e-300)
            tsym = max(tsym, (max(vals) - min(vals)) / tscale)
            v = 1e-2 * a
            t3 = data.c + np.vdot(data.g, v) + 0.5 * np.vdot(v, data.H_action(v)) + np.vdot(v, data.T_action(v, v)) / 6
            taylor = max(taylor, abs(obj.value(retract(spec, X, v)) - t3))
        out.append(Check(f"Hessian symmetry {spec}", hsym <= 1e-6, f"max relative {hsym:.1e}"))
        out.append(Check(f"tensor symmetry {spec}", tsym <= 1e-5, f"max relative {tsym:.1e}"))
        out.append(Check(f"cubic Taylor remainder {spec}", taylor <= 1e-6, f"max {taylor:.1e} at |v| = 1e-2"))
    # pullbacks of retractions matching the geodesic to third order share (g, H, T)
    d3 = build_model_data(obj, RetractionSpec.stiefel(3), M, X, method)
    d5 = build_model_data(obj, RetractionSpec.stiefel(5), M, X, method)
    worst = float(np.linalg.norm(d3.g - d5.g) / np.linalg.norm(d3.g))
    for k in range(directions):
        a, b = dirs[3 * k], dirs[3 * k + 1]
        h3, h5 = d3.H_action(a), d5.H_action(a)
        t3, t5 = d3.T_action(a, b), d5.T_action(a, b)
        worst = max(worst, np.linalg.norm(h3 - h5) / np.linalg.norm(h3), np.linalg.norm(t3 - t5) / np.linalg.norm(t3))
    out.append(Check("GawlikStiefel(3) vs GawlikStiefel(5) derivative data", worst <= 1e-4, f"max relative {worst:.1e}"))
    return out


SUITES = {
    "retraction-axioms": retraction_axioms,
    "retraction-order": retraction_order,
    "theta-determinant": theta_determinant,
    "oracle-consistency": oracle_consistency,
}


def run_suite(name, specs=None):
    """Run one suite; ``specs`` restricts the retraction suites to the given maps."""
    try:
        fn = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}") from None
    t0 = time.perf_counter()
    checks = fn(specs=specs) if specs and name in ("retraction-axioms", "retraction-order", "oracle-consistency") else fn()
    return checks, time.perf_counter() - t0
