"""Minimize one Brockett instance on St(10,5) and print the iteration log."""
import argparse

from riemrar import RarConfig, run
from riemrar.bench import gen_instance
from riemrar.solvers import get_solver

parser = argparse.ArgumentParser()
parser.add_argument("--seed", type=int, default=1)
parser.add_argument("--theta", type=float, default=0.1)
parser.add_argument("--solver", default="armijo", choices=["armijo", "newton"])
args = parser.parse_args()

obj, x0 = gen_instance(10, 5, args.seed)


def show(rec):
    mark = "acc" if rec.accepted else "rej"
    print(f"{rec.index:3d}  f={rec.f_value: .10f}  |g|={rec.grad_norm:.2e}  alpha={rec.alpha:9.3e}  "
          f"rho={rec.rho: .3f}  |v|={rec.step_norm:.2e}  r={rec.krylov_dim:2d}  {mark}")


trace = run(obj, x0, RarConfig(theta=args.theta, seed=args.seed), get_solver(args.solver), callback=show)
print(f"{trace.status} after {trace.iterations} subproblems, final |g| = {trace.final.grad_norm:.2e}, "
      f"f = {trace.final.f_value:.12f}")
