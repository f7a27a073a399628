"""Tour of the trust-region subproblem solver on a low-rank model.

Builds a compact SR1 matrix from quadratic displacement pairs, then
walks the three solution regimes: interior Newton point, boundary
solution via the secular equation, and the degenerate boundary case
where the gradient is blind to the negative eigenspace.  Every solve
is certified internally; this script prints the evidence.
"""

import numpy as np

from sr1trust import (
    CompactSR1,
    PairBuffer,
    assemble_compact,
    lambda_hat_and_gamma,
    solve_subproblem,
    try_update,
)

rng = np.random.Generator(np.random.Philox(42))

# ---------------------------------------------------------------------
# a compact model from pairs of a known indefinite quadratic
n = 12
eigs = np.linspace(-1.5, 3.0, n)
q, _ = np.linalg.qr(rng.normal(size=(n, n)))
h = (q * eigs) @ q.T

buf = PairBuffer(n, capacity=5)
gamma = 1.0
for _ in range(5):
    s = rng.normal(size=n)
    try_update(buf, s, h @ s, assemble_compact(buf, gamma))
    _, gamma = lambda_hat_and_gamma(buf, gamma)
b = assemble_compact(buf, gamma)
print(f"model: n={n}, rank {b.k} correction, gamma={gamma:.4f}")
print(f"model spectrum extremes: {np.linalg.eigvalsh(b.dense())[[0, -1]]}")

g = rng.normal(size=n)

# ---------------------------------------------------------------------
# sweep the radius: small radii give boundary steps with a positive
# shift, large radii let the step align with the negative eigenspace
print("\nradius sweep")
print(f"{'delta':>10} {'sigma*':>12} {'||p*||':>10} {'q(p*)':>12} {'hard':>5}")
for delta in (0.1, 1.0, 10.0, 100.0):
    sol = solve_subproblem(b, g, delta)
    p_norm = np.linalg.norm(sol.p_star)
    print(f"{delta:>10.1f} {sol.sigma_star:>12.6f} {p_norm:>10.4f} "
          f"{sol.q_value:>12.4f} {str(sol.hard_case):>5}")

lam, u = np.linalg.eigh(b.dense())
p = solve_subproblem(b, g, 1e4).p_star
cos = abs(u[:, 0] @ p) / np.linalg.norm(p)
print(f"\nat delta=1e4 the step is {cos:.6f} parallel "
      f"to the minimal eigenvector (lambda_min={lam[0]:.4f})")

# ---------------------------------------------------------------------
# the degenerate case: project the gradient away from the minimal
# eigenvector; the solver has to add an eigenvector component itself
# to reach the boundary
g_blind = g - (u[:, 0] @ g) * u[:, 0]
sol = solve_subproblem(b, g_blind, 5.0)
print(f"\ngradient orthogonal to the minimal eigenspace:")
print(f"  hard_case={sol.hard_case}, sigma*={sol.sigma_star:.6f} "
      f"(= -lambda_min), ||p*||={np.linalg.norm(sol.p_star):.6f} (= delta)")

# the optimality certificate, spelled out for the last solve
resid = b.mat_vec(sol.p_star) + sol.sigma_star * sol.p_star + g_blind
print(f"  stationarity ||(B + sigma I)p + g|| = {np.linalg.norm(resid):.2e}")
print(f"  complementarity sigma*(delta - ||p||) = "
      f"{sol.sigma_star * (5.0 - np.linalg.norm(sol.p_star)):.2e}")
print(f"  shifted spectrum floor lambda_min + sigma = "
      f"{lam[0] + sol.sigma_star:.2e} >= 0")

# ---------------------------------------------------------------------
# the scaling safeguard: for pairs from a convex quadratic, gamma below
# the pencil eigenvalue keeps the model positive definite, above flips
# it indefinite
h_spd = (q * np.linspace(0.5, 3.0, n)) @ q.T
spd_buf = PairBuffer(n, capacity=5)
for _ in range(5):
    s = rng.normal(size=n)
    try_update(spd_buf, s, h_spd @ s, assemble_compact(spd_buf, 1.0))
lam_hat, _ = lambda_hat_and_gamma(spd_buf, 1.0)
print(f"\nconvex-quadratic pairs: pencil eigenvalue lambda_hat={lam_hat:.4f}")
for factor in (0.99, 1.01):
    trial = assemble_compact(spd_buf, factor * lam_hat)
    sign = np.linalg.eigvalsh(trial.dense()).min()
    print(f"  gamma = {factor:.2f}*lambda_hat: min eigenvalue {sign:+.4f}")
