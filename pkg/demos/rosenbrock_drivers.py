"""Both deterministic drivers on the Rosenbrock banana.

The trust-region driver models curvature with the indefinite-capable
compact SR1 form and solves the ball-constrained subproblem exactly;
the line-search driver uses the two-loop recursion with strong Wolfe
steps.  Both start at the classic (-1.2, 1) point.
"""

import numpy as np

from sr1trust import FunctionObjective, TRConfig, minimize, minimize_lbfgs


def rosen(w):
    return 100.0 * (w[1] - w[0] ** 2) ** 2 + (1.0 - w[0]) ** 2


def rosen_grad(w):
    return np.array([
        -400.0 * w[0] * (w[1] - w[0] ** 2) - 2.0 * (1.0 - w[0]),
        200.0 * (w[1] - w[0] ** 2),
    ])


obj = FunctionObjective(rosen, rosen_grad)
w0 = np.array([-1.2, 1.0])
cfg = TRConfig(max_iter=500, eps=1e-8)

for name, driver in (("sr1 trust region", minimize),
                     ("bfgs line search", minimize_lbfgs)):
    res = driver(obj, w0, cfg)
    print(f"{name}: {res.iterations} iterations, "
          f"f={obj.value(res.w):.3e}, ||g||={res.grad_norm:.3e}, "
          f"w=({res.w[0]:.6f}, {res.w[1]:.6f})")

# a closer look at how the trust region breathes on the way down the
# curved valley: rho is the agreement between model and function, and
# the radius reacts to it
res = minimize(obj, w0, cfg)
print("\n trust-region trace (every 10th iteration)")
print(f"{'iter':>5} {'f':>12} {'||g||':>10} {'delta':>9} {'rho':>7}")
for rec in res.trace[::10]:
    rho = f"{rec.rho:7.3f}" if rec.rho is not None else "      -"
    print(f"{rec.iter:>5} {rec.f:>12.5e} {rec.grad_norm:>10.3e} "
          f"{rec.delta:>9.4f} {rho}")
print(f"{res.trace[-1].iter:>5} {res.trace[-1].f:>12.5e} "
      f"{res.trace[-1].grad_norm:>10.3e} {res.trace[-1].delta:>9.4f}")
