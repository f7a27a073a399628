"""Exact trust-region subproblem solver for compact SR1 models.

Minimizes q(p) = g.p + 0.5*p.B.p over ||p|| <= delta where B is a
CompactSR1.  A thin QR of Psi plus an r-by-r eigendecomposition exposes
the full spectrum of B (the low-rank eigenvalues Lambda1 and the
(n-r)-fold gamma), after which the optimal shift sigma* is either zero,
-lambda_min (possibly with an added eigenvector step on the boundary),
or the largest root of the secular equation
phi(sigma) = 1/||v(sigma)|| - 1/delta found by safeguarded Newton.
Every solution is certified against the Gay/More-Sorensen conditions
before it is returned.
"""

from dataclasses import dataclass

import numpy as np

from .dense_kernels import solve_lower, sym_eig_small, thin_qr
from .errors import NumericalError, RankDeficiencyError

# dropped-eigencomponent threshold for pseudoinverse solves, times max(1,|sigma|)
PSEUDO_RTOL = 1e-10
# near-zero coefficient threshold for hard-case detection, times max(1,||g||)
COEFF_RTOL = 1e-10
# secular residual target at delta <= 1 (tightened as 1/delta for larger radii
# so the boundary certificate keeps slack)
PHI_TOL = 1e-10
# phi = 1/||v|| - 1/delta subtracts two ~1/delta quantities, so float64
# cannot resolve it below ~eps/delta; the target is floored there
_PHI_RESOLUTION = 64.0 * np.finfo(float).eps
MAX_ROOT_ITERS = 50
_MAX_FALLBACK_BISECTIONS = 200
# certificate tolerances
CERT_NORM_RTOL = 1e-8
CERT_RESID_RTOL = 1e-6
CERT_COMP_RTOL = 1e-6
CERT_PSD_ATOL = 1e-8


@dataclass
class SpectralData:
    """Spectral view of (B, g): low-rank eigenvalues and g split."""

    gamma: float
    lam: np.ndarray        # Lambda1 = eigenvalues of the low-rank block, ascending
    basis_map: np.ndarray  # n-by-k orthonormal basis Psi R^-1 U
    g_par: np.ndarray      # basis_map.T @ g
    a_perp_sq: float       # ||g||^2 - ||g_par||^2, clamped at 0
    g_norm: float

    @property
    def lambda_min(self):
        """Smallest eigenvalue of B (gamma covers the complement block)."""
        if self.lam.size:
            return min(float(self.lam[0]), self.gamma)
        return self.gamma


@dataclass
class SubproblemSolution:
    p_star: np.ndarray
    sigma_star: float
    q_value: float
    hard_case: bool
    newton_iters: int


def spectral_prep(b, g):
    """Factor the low-rank block of B and split g against its eigenbasis."""
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("spectral_prep: non-finite gradient")
    g_norm = float(np.sqrt(g @ g))
    k = b.k
    if k == 0:
        return SpectralData(
            gamma=b.gamma,
            lam=np.zeros(0),
            basis_map=np.zeros((b.n, 0)),
            g_par=np.zeros(0),
            a_perp_sq=g_norm * g_norm,
            g_norm=g_norm,
        )
    q, r_mat, rank = thin_qr(b.psi)
    if rank < k:
        raise RankDeficiencyError(
            "spectral_prep: Psi numerically rank deficient; refilter pairs"
        )
    rmrt = r_mat @ b.solve_minv(r_mat.T)
    lam_hat, u = sym_eig_small((rmrt + rmrt.T) / 2.0)
    basis_map = solve_lower(r_mat.T, b.psi.T).T @ u
    g_par = basis_map.T @ g
    a_perp_sq = g_norm * g_norm - float(g_par @ g_par)
    if a_perp_sq < -1e-10 * g_norm * g_norm:
        raise NumericalError("spectral_prep: orthonormal split lost")
    return SpectralData(
        gamma=b.gamma,
        lam=lam_hat + b.gamma,
        basis_map=basis_map,
        g_par=g_par,
        a_perp_sq=max(a_perp_sq, 0.0),
        g_norm=g_norm,
    )


def _v_moments(sd, sigma):
    """(||v||^2, sum of coeff^2/d^3) at a pole-free sigma."""
    d = sd.lam + sigma
    sq = (sd.g_par * sd.g_par) / (d * d)
    v2 = float(np.sum(sq))
    v3 = float(np.sum(sq / d))
    d = sd.gamma + sigma
    v2 += sd.a_perp_sq / (d * d)
    v3 += sd.a_perp_sq / (d * d * d)
    return v2, v3


def secular_phi(sd, sigma, delta):
    """phi(sigma) = 1/||v(sigma)|| - 1/delta.

    At a pole (some lam_i + sigma numerically zero) the value is -1/delta
    when the pole's coefficient is nonzero, else the term is dropped; a
    vanishing v gives +inf.
    """
    pole_tol = PSEUDO_RTOL * max(1.0, abs(sigma))
    coeff_tol = COEFF_RTOL * max(1.0, sd.g_norm)
    v2 = 0.0
    for lam_i, gi in zip(sd.lam, sd.g_par):
        d = lam_i + sigma
        if abs(d) <= pole_tol:
            if abs(gi) > coeff_tol:
                return -1.0 / delta
            continue
        v2 += (gi * gi) / (d * d)
    d = sd.gamma + sigma
    if abs(d) <= pole_tol:
        if np.sqrt(sd.a_perp_sq) > coeff_tol:
            return -1.0 / delta
    else:
        v2 += sd.a_perp_sq / (d * d)
    if v2 == 0.0:
        return np.inf
    return 1.0 / np.sqrt(v2) - 1.0 / delta


def secular_root(sd, delta):
    """Largest root of the secular equation by safeguarded Newton.

    Starts right of every pole at max(0, -lambda_min) plus a small offset;
    phi is increasing and concave there, so Newton from phi < 0 climbs
    monotonically.  Steps leaving the current bracket are bisected.  After
    MAX_ROOT_ITERS the stated fallback bracket is bisected outright; only
    its failure is a defect.  Returns (sigma_star, iterations).
    """
    lam_min = sd.lambda_min
    lo = max(0.0, -lam_min)
    tol = max(PHI_TOL, _PHI_RESOLUTION / delta) / max(1.0, delta)

    def converged(sig, phi_val):
        if abs(phi_val) > tol:
            return False
        # |delta - ||p||| ~ delta^2 |phi| near the root; keep sigma times
        # that two decades under the complementarity slack bound
        return sig * delta * delta * abs(phi_val) <= 1e-8 * max(1.0, delta)

    sigma = lo + 1e-4 * max(1.0, abs(lam_min))
    brk_lo, brk_hi = lo, None
    iters = 0
    for _ in range(MAX_ROOT_ITERS):
        v2, v3 = _v_moments(sd, sigma)
        phi = np.inf if v2 == 0.0 else 1.0 / np.sqrt(v2) - 1.0 / delta
        iters += 1
        if converged(sigma, phi):
            return sigma, iters
        if phi < 0.0:
            brk_lo = max(brk_lo, sigma)
        else:
            brk_hi = sigma if brk_hi is None else min(brk_hi, sigma)
        step = np.inf if v2 == 0.0 else phi / (v3 / v2 ** 1.5)
        cand = sigma - step
        if (
            not np.isfinite(cand)
            or cand <= brk_lo
            or (brk_hi is not None and cand >= brk_hi)
        ):
            if brk_hi is None:
                cand = 2.0 * sigma - brk_lo + 1.0
            else:
                cand = 0.5 * (brk_lo + brk_hi)
        sigma = cand
    lo_fb, hi_fb = lo, lo + sd.g_norm / delta
    for _ in range(_MAX_FALLBACK_BISECTIONS):
        sigma = 0.5 * (lo_fb + hi_fb)
        phi = secular_phi(sd, sigma, delta)
        iters += 1
        if converged(sigma, phi):
            return sigma, iters
        if phi < 0.0:
            lo_fb = sigma
        else:
            hi_fb = sigma
    raise NumericalError("secular_root: no convergence on the fallback bracket")


def solve_shifted(b, sigma, g, sd=None):
    """p = -(B + sigma*I)^-1 g via the low-rank inversion identity.

    When the shift lands on an eigenvalue of B (within PSEUDO_RTOL), the
    spectral pseudoinverse is used instead, dropping those components.
    """
    g = np.asarray(g, dtype=float)
    if sd is None:
        sd = spectral_prep(b, g)
    tau = b.gamma + sigma
    pole_tol = PSEUDO_RTOL * max(1.0, abs(sigma))
    singular = abs(tau) <= pole_tol or (
        sd.lam.size and np.abs(sd.lam + sigma).min() <= pole_tol
    )
    if singular:
        return _solve_pseudo(sd, sigma, g, pole_tol)
    if tau <= 0.0:
        raise ValueError("solve_shifted: gamma + sigma must be positive")
    if b.k == 0:
        return -g / tau
    inner = tau * b.minv + b.psi.T @ b.psi
    vals, vecs = sym_eig_small((inner + inner.T) / 2.0)
    scale = np.abs(vals).max()
    if scale == 0.0 or np.abs(vals).min() < 1e-12 * scale:
        # the shift is near an eigenvalue relative to the inner system's
        # scale (the absolute pole test above can miss that); the spectral
        # route divides the small gaps explicitly and the caller's
        # certificates still vet the result
        return _solve_pseudo(sd, sigma, g, pole_tol)
    z = b.psi.T @ g
    w = vecs @ ((vecs.T @ z) / vals)
    return -(g - b.psi @ w) / tau


def _solve_pseudo(sd, sigma, g, pole_tol):
    p = np.zeros_like(g)
    for i in range(sd.lam.size):
        d = sd.lam[i] + sigma
        if abs(d) <= pole_tol:
            continue
        p -= (sd.g_par[i] / d) * sd.basis_map[:, i]
    d = sd.gamma + sigma
    if abs(d) > pole_tol:
        p -= (g - sd.basis_map @ sd.g_par) / d
    return p


def solve_subproblem(b, g, delta):
    """Global minimizer of the quadratic model on the delta-ball.

    Branches: interior (B positive definite and the Newton point fits),
    boundary at sigma = -lambda_min (the hard case adds an eigenvector
    component sized to reach the boundary), or the secular root.  The
    optimality certificate is checked on every solve.
    """
    g = np.asarray(g, dtype=float)
    if not np.isfinite(delta) or delta <= 0.0:
        raise ValueError(f"solve_subproblem: delta must be positive, got {delta}")
    sd = spectral_prep(b, g)
    lam_min = sd.lambda_min
    hard = False
    newton_iters = 0
    if lam_min > 0.0 and secular_phi(sd, 0.0, delta) >= 0.0:
        sigma = 0.0
        p = solve_shifted(b, sigma, g, sd)
    elif lam_min <= 0.0 and secular_phi(sd, -lam_min, delta) >= 0.0:
        sigma = -lam_min
        p = solve_shifted(b, sigma, g, sd)
        if lam_min < 0.0:
            # gamma > 0 pins the minimal eigenspace inside the low-rank block
            hard = True
            alpha = np.sqrt(max(delta * delta - float(p @ p), 0.0))
            p = p + alpha * sd.basis_map[:, 0]
    else:
        sigma, newton_iters = secular_root(sd, delta)
        p = solve_shifted(b, sigma, g, sd)
        # the exact boundary solution has norm delta; rounding near a pole
        # is amplified by sigma in the complementarity check, so snap onto
        # the ball when within rounding distance (stationarity still guards)
        p_norm = float(np.sqrt(p @ p))
        if p_norm > 0.0 and abs(p_norm - delta) <= 1e-6 * delta:
            p *= delta / p_norm
    q = float(g @ p + 0.5 * (p @ b.mat_vec(p)))
    sol = SubproblemSolution(
        p_star=p, sigma_star=float(sigma), q_value=q,
        hard_case=hard, newton_iters=newton_iters,
    )
    _check_certificate(b, g, delta, sol, lam_min)
    return sol


def _check_certificate(b, g, delta, sol, lam_min):
    """Gay/More-Sorensen global-optimality conditions, or a defect error."""
    p, sigma = sol.p_star, sol.sigma_star
    p_norm = float(np.sqrt(p @ p))
    if p_norm > delta * (1.0 + CERT_NORM_RTOL):
        raise NumericalError(
            f"subproblem certificate: ||p||={p_norm:.6e} exceeds delta={delta:.6e}"
        )
    resid = b.mat_vec(p) + sigma * p + g
    resid_norm = float(np.sqrt(resid @ resid))
    g_norm = float(np.sqrt(g @ g))
    if resid_norm > CERT_RESID_RTOL * max(1.0, g_norm):
        raise NumericalError(
            f"subproblem certificate: stationarity residual {resid_norm:.6e}"
        )
    if abs(sigma * (delta - p_norm)) > CERT_COMP_RTOL * max(1.0, delta):
        raise NumericalError(
            f"subproblem certificate: complementarity {sigma * (delta - p_norm):.6e}"
        )
    if lam_min + sigma < -CERT_PSD_ATOL:
        raise NumericalError(
            f"subproblem certificate: B + sigma*I indefinite ({lam_min + sigma:.6e})"
        )
