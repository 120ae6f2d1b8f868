"""Brockett benchmark: instance generation, experiment grids, CSV traces and plots."""
from __future__ import annotations

import csv
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .manifolds import Stiefel
from .pullback import BrockettObjective
from .rar import FIRST_ORDER, RarConfig, run
from .retractions import RetractionSpec
from .solvers import get_solver

CSV_HEADER = ["iter", "f", "grad_norm", "alpha", "rho", "step_norm", "accepted", "krylov_dim", "wall_time_s"]
SUMMARY_HEADER = ["n", "p", "theta", "runs", "converged", "failed", "mean_iter", "mean_time_s"]


def gen_instance(n, p, seed):
    """Brockett instance ``(A + A^T)/2`` with Gaussian ``A``, ``N = diag(1..p)``, random start."""
    if not (isinstance(n, (int, np.integer)) and isinstance(p, (int, np.integer))) or not 1 <= p <= n:
        raise ValueError(f"need integers n >= p >= 1, got n={n}, p={p}")
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    A = 0.5 * (B + B.T)
    x0 = Stiefel(n, p).random_point(rng)
    return BrockettObjective.benchmark(A, p), x0


def instance_seed(base_seed, n, p, theta, k):
    """``base_seed XOR blake2b-64("n,p,theta,k")``; ``theta`` enters through ``repr``."""
    digest = hashlib.blake2b(f"{n},{p},{float(theta)!r},{k}".encode(), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(digest, "little")) & (2**64 - 1)


def write_instance(path, obj, x0):
    """Plain-text instance: ``n p`` line, then ``A`` and ``x0`` row-major with 17 significant digits."""
    n, p = x0.shape
    with open(path, "w") as fh:
        fh.write(f"{n} {p}\n")
        for M in (obj.A, x0):
            for row in M:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_instance(path):
    with open(path) as fh:
        tokens = fh.read().split()
    n, p = int(tokens[0]), int(tokens[1])
    vals = np.array(tokens[2:], dtype=float)
    if vals.size != n * n + n * p:
        raise ValueError(f"{path}: expected {n * n + n * p} numbers after the header, found {vals.size}")
    A = vals[: n * n].reshape(n, n)
    x0 = vals[n * n:].reshape(n, p)
    return BrockettObjective.benchmark(A, p), x0


@dataclass
class ExperimentSpec:
    sizes: List[Tuple[int, int]] = field(default_factory=lambda: [(10, 5)])
    thetas: List[float] = field(default_factory=lambda: [0.1, 0.25, 2.0])
    instances: int = 20
    base_seed: int = 0
    solver: str = "armijo"
    m_order: int = 2
    retraction: str = "stiefel"
    mode: str = FIRST_ORDER
    eps1: float = 1e-6
    eps2: float = 1e-4
    alpha0: float = 20.0
    max_outer: int = 500
    out: Optional[str] = None
    plots: bool = False
    parallel: int = 1
    max_fail_fraction: float = 0.0

    def __post_init__(self):
        get_solver(self.solver)
        self.retraction_spec()
        if self.instances < 0 or self.parallel < 1:
            raise ValueError("instances must be >= 0 and parallel >= 1")
        for n, p in self.sizes:
            if not 1 <= p <= n:
                raise ValueError(f"bad size {n}x{p}")

    def retraction_spec(self):
        if self.retraction == "polar":
            return RetractionSpec.polar()
        if self.retraction == "stiefel":
            return RetractionSpec.stiefel(self.m_order)
        raise ValueError(f"benchmark retraction must be 'stiefel' or 'polar', got {self.retraction!r}")

    def config(self, theta, seed):
        return RarConfig(theta=theta, alpha0=self.alpha0, eps1=self.eps1, eps2=self.eps2, mode=self.mode,
                         max_outer=self.max_outer, retraction=self.retraction_spec(), seed=seed)

    def tasks(self):
        return [(n, p, float(theta), k) for n, p in self.sizes for theta in self.thetas for k in range(self.instances)]


@dataclass
class RunResult:
    n: int
    p: int
    theta: float
    k: int
    seed: int
    status: str
    converged: bool
    iterations: int
    wall_time_s: float
    final_grad_norm: float
    violations: int
    trace_csv: str = ""
    rows: list = field(default_factory=list, repr=False)


def trace_rows(trace):
    rows = []
    for r in trace.records:
        rows.append([r.index, repr(float(r.f_value)), repr(float(r.grad_norm)), repr(float(r.alpha)),
                     repr(float(r.rho)), repr(float(r.step_norm)), int(r.accepted), r.krylov_dim,
                     f"{r.wall_time:.6f}"])
    return rows


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def run_instance(spec, n, p, theta, k):
    seed = instance_seed(spec.base_seed, n, p, theta, k)
    obj, x0 = gen_instance(n, p, seed)
    cfg = spec.config(theta, seed)
    trace = run(obj, x0, cfg, get_solver(spec.solver))
    rows = trace_rows(trace)
    res = RunResult(n, p, theta, k, seed, trace.status, trace.converged, trace.iterations,
                    trace.final.wall_time, trace.final.grad_norm,
                    len(trace.invariant_violations(cfg.alpha_min)), rows=rows)
    if spec.out:
        path = Path(spec.out) / f"trace_n{n}_p{p}_theta{theta:g}_k{k:03d}.csv"
        write_csv(path, CSV_HEADER, rows)
        res.trace_csv = str(path)
        if spec.plots:
            plot_trace(rows, path.with_suffix(".svg"), f"St({n},{p}) theta={theta:g} k={k}")
    return res


def _run_task(args):
    spec, task = args
    return run_instance(spec, *task)


def run_grid(spec):
    """Run every (size, theta, instance) and return ``(results, summary_rows)``."""
    if spec.out:
        Path(spec.out).mkdir(parents=True, exist_ok=True)
    tasks = spec.tasks()
    if spec.parallel > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=spec.parallel) as pool:
            results = list(pool.map(_run_task, [(spec, t) for t in tasks]))
    else:
        results = [run_instance(spec, *t) for t in tasks]
    summary = summarize(results)
    if spec.out:
        write_csv(Path(spec.out) / "summary.csv", SUMMARY_HEADER, summary)
        write_csv(Path(spec.out) / "runs.csv",
                  ["n", "p", "theta", "k", "seed", "status", "iterations", "wall_time_s", "final_grad_norm", "violations"],
                  [[r.n, r.p, r.theta, r.k, r.seed, r.status, r.iterations, f"{r.wall_time_s:.6f}",
                    repr(float(r.final_grad_norm)), r.violations] for r in results])
    return results, summary


def summarize(results):
    """One row per (n, p, theta); means are over converged runs only."""
    cells = {}
    for r in results:
        cells.setdefault((r.n, r.p, r.theta), []).append(r)
    rows = []
    for (n, p, theta), rs in cells.items():
        ok = [r for r in rs if r.converged]
        mean_it = float(np.mean([r.iterations for r in ok])) if ok else math.nan
        mean_t = float(np.mean([r.wall_time_s for r in ok])) if ok else math.nan
        rows.append([n, p, theta, len(rs), len(ok), len(rs) - len(ok), mean_it, mean_t])
    return rows


def failed_fraction(results):
    if not results:
        return 0.0
    return sum(not r.converged for r in results) / len(results)


def plot_trace(rows, path, title=""):
    """Two-panel SVG: gradient norm against iteration and against wall time."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    it = [int(r[0]) for r in rows]
    g = [float(r[2]) for r in rows]
    t = [float(r[8]) for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.semilogy(it, g, marker="o", ms=3)
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("gradient norm")
    ax2.semilogy(t, g, marker="o", ms=3)
    ax2.set_xlabel("wall time [s]")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def format_summary(rows):
    lines = [f"{'n':>4} {'p':>3} {'theta':>6} {'runs':>5} {'conv':>5} {'fail':>5} {'mean iter':>10} {'mean time [s]':>14}"]
    for n, p, theta, runs, conv, fail, it, t in rows:
        lines.append(f"{n:>4} {p:>3} {theta:>6g} {runs:>5} {conv:>5} {fail:>5} {it:>10.2f} {t:>14.3f}")
    return "\n".join(lines)
