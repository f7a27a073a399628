"""Shared test fixtures and independent oracles.

Oracles deliberately use numpy.linalg / scipy, never the package's own
kernels, so every agreement check crosses two implementations.
"""

import numpy as np
import pytest

from sr1trust import PairBuffer, assemble_compact, lambda_hat_and_gamma, try_update

SKIP_RTOL = 1e-8


def rng_for(seed):
    return np.random.Generator(np.random.Philox(seed))


def dense_sr1(gamma, pairs, n):
    """Recursive rank-one update oracle: B <- B + r r^T / (s^T r)."""
    b = gamma * np.eye(n)
    for s, y in pairs:
        r = y - b @ s
        r_norm = np.linalg.norm(r)
        if r_norm == 0.0:
            continue
        if abs(s @ r) < SKIP_RTOL * np.linalg.norm(s) * r_norm:
            continue
        b = b + np.outer(r, r) / (s @ r)
    return b


def random_symmetric(rng, n, eig_low, eig_high):
    """Symmetric matrix with eigenvalues uniform in [eig_low, eig_high]."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = rng.uniform(eig_low, eig_high, size=n)
    return (q * lam) @ q.T


def pairs_from_matrix(h, rng, k):
    """k independent displacement pairs (s, y = H s) from one matrix."""
    n = h.shape[0]
    s_mat = rng.normal(size=(n, k))
    while np.linalg.matrix_rank(s_mat) < k:
        s_mat = rng.normal(size=(n, k))
    return [(s_mat[:, j].copy(), h @ s_mat[:, j]) for j in range(k)]


def filled_buffer(pairs, n, capacity=8):
    """PairBuffer holding whichever pairs pass the update filter."""
    buf = PairBuffer(n, capacity=capacity)
    gamma = 1.0
    for s, y in pairs:
        try_update(buf, s, y, assemble_compact(buf, gamma))
        _, gamma = lambda_hat_and_gamma(buf, gamma)
    return buf, gamma


def random_compact(seed, n=None, k=None, indefinite=False):
    """A CompactSR1 built from random quadratic pairs, plus its gamma."""
    rng = rng_for(seed)
    n = n if n is not None else int(rng.integers(4, 51))
    k = k if k is not None else int(rng.integers(1, 6))
    k = min(k, n - 1)
    lo, hi = (-2.0, 3.0) if indefinite else (0.5, 3.0)
    h = random_symmetric(rng, n, lo, hi)
    buf, gamma = filled_buffer(pairs_from_matrix(h, rng, k), n)
    if not len(buf):
        return random_compact(seed + 100003, n=n, k=k, indefinite=indefinite)
    return assemble_compact(buf, gamma), gamma, rng


def dense_trust_region_oracle(b_dense, g, delta):
    """Exact trust-region solution by full eigendecomposition + brentq.

    Returns (p, sigma, q_value, hard_case).
    """
    from scipy.optimize import brentq

    lam, q = np.linalg.eigh(b_dense)
    gt = q.T @ g

    def p_norm(sigma):
        return float(np.linalg.norm(gt / (lam + sigma)))

    if lam[0] > 0.0 and p_norm(0.0) <= delta:
        p = -q @ (gt / lam)
        return p, 0.0, _q_of(b_dense, g, p), False
    sigma0 = max(0.0, -lam[0])
    tol = 1e-12 * max(1.0, abs(lam[0]))
    at_pole = np.abs(lam + sigma0) <= tol
    # the pseudoinverse branch only applies when g has no component on the
    # minimal eigenspace; otherwise the root lies strictly right of sigma0
    coeff_ok = np.all(
        np.abs(gt[at_pole]) <= 1e-10 * max(1.0, float(np.linalg.norm(g)))
    )
    if lam[0] <= 0.0 and coeff_ok:
        keep = ~at_pole
        pseudo_norm = float(np.linalg.norm(gt[keep] / (lam[keep] + sigma0)))
        if pseudo_norm <= delta:
            p = -q[:, keep] @ (gt[keep] / (lam[keep] + sigma0))
            hard = lam[0] < 0.0
            if hard:
                alpha = np.sqrt(max(delta * delta - pseudo_norm ** 2, 0.0))
                p = p + alpha * q[:, 0]
            return p, sigma0, _q_of(b_dense, g, p), hard

    def f(sigma):
        return p_norm(sigma) - delta

    lo = sigma0 + 1e-14 * max(1.0, abs(lam[0]))
    span = max(1.0, float(np.linalg.norm(g)) / delta)
    hi = sigma0 + span
    while f(hi) > 0.0:
        span *= 2.0
        hi = sigma0 + span
    while f(lo) < 0.0:
        lo = sigma0 + (lo - sigma0) * 0.01 + 1e-300
        if lo == sigma0:
            break
    sigma = brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    p = -q @ (gt / (lam + sigma))
    return p, float(sigma), _q_of(b_dense, g, p), False


def _q_of(b_dense, g, p):
    return float(g @ p + 0.5 * (p @ b_dense @ p))


@pytest.fixture
def rng():
    return rng_for(12345)
