"""Limited-memory SR1 pair storage and the compact matrix form.

The model matrix is never formed densely: B = gamma*I + Psi @ M @ Psi.T
with Psi = Y - gamma*S and M the inverse of
Minv = D + L + L.T - gamma*S.T@S, where D/L are the diagonal and strictly
lower parts of S.T@Y.  Products cost O(n*r) plus an r-by-r solve.
"""

import numpy as np

from .dense_kernels import QR_RANK_RTOL, gen_eig_min, sym_eig_small, thin_qr
from .errors import RankDeficiencyError, SingularMatrixError

# rank-one update acceptance threshold on |s.(y - B s)| (skip rule)
SKIP_RTOL = 1e-8
# smallest relative |eigenvalue| of Minv before its solve counts as singular
MINV_SINGULAR_RTOL = 1e-12
GAMMA_MIN = 1e-8
GAMMA_MAX = 1e8
# lambda-hat below this falls back to gamma = 1
LAMBDA_HAT_FLOOR = 1e-8


class PairBuffer:
    """Ring buffer of at most `capacity` (s, y) pairs with cached Gram blocks.

    The caches S.T@Y and S.T@S are extended incrementally on append and
    sliced on drop, never recomputed from scratch.
    """

    def __init__(self, n, capacity=8):
        if capacity < 1:
            raise ValueError("PairBuffer capacity must be positive")
        self.n = int(n)
        self.capacity = int(capacity)
        self.s_mat = np.zeros((self.n, 0))
        self.y_mat = np.zeros((self.n, 0))
        self.sty = np.zeros((0, 0))
        self.sts = np.zeros((0, 0))

    def __len__(self):
        return self.s_mat.shape[1]

    def append(self, s, y):
        s = np.asarray(s, dtype=float).reshape(self.n)
        y = np.asarray(y, dtype=float).reshape(self.n)
        if len(self) == self.capacity:
            self.drop(0)
        k = len(self)
        sty = np.empty((k + 1, k + 1))
        sty[:k, :k] = self.sty
        sty[:k, k] = self.s_mat.T @ y
        sty[k, :k] = s @ self.y_mat
        sty[k, k] = s @ y
        sts = np.empty((k + 1, k + 1))
        sts[:k, :k] = self.sts
        cross = self.s_mat.T @ s
        sts[:k, k] = cross
        sts[k, :k] = cross
        sts[k, k] = s @ s
        self.sty, self.sts = sty, sts
        self.s_mat = np.hstack([self.s_mat, s[:, None]])
        self.y_mat = np.hstack([self.y_mat, y[:, None]])

    def drop(self, i):
        self.s_mat = np.delete(self.s_mat, i, axis=1)
        self.y_mat = np.delete(self.y_mat, i, axis=1)
        self.sty = np.delete(np.delete(self.sty, i, axis=0), i, axis=1)
        self.sts = np.delete(np.delete(self.sts, i, axis=0), i, axis=1)


class CompactSR1:
    """B = gamma*I + Psi @ M @ Psi.T held in factored form (M = Minv^-1).

    Minv is eigendecomposed once at construction; `minv_singular` reports
    whether its inverse is numerically unavailable, in which case mat_vec
    raises and the caller reassembles with an adjusted gamma.
    """

    def __init__(self, gamma, psi, minv):
        self.gamma = float(gamma)
        self.psi = np.asarray(psi, dtype=float)
        self.minv = np.asarray(minv, dtype=float)
        self.n = self.psi.shape[0]
        k = self.psi.shape[1]
        if k:
            vals, vecs = sym_eig_small((self.minv + self.minv.T) / 2.0)
            scale = np.abs(vals).max()
            self.minv_singular = bool(
                scale == 0.0 or np.abs(vals).min() < MINV_SINGULAR_RTOL * scale
            )
        else:
            vecs, vals = np.zeros((0, 0)), np.zeros(0)
            self.minv_singular = False
        self._m_vecs = vecs
        self._m_vals = vals

    @property
    def k(self):
        return self.psi.shape[1]

    def solve_minv(self, rhs):
        """Apply M = Minv^-1 to a vector or matrix."""
        if self.minv_singular:
            raise SingularMatrixError(
                "CompactSR1: Minv numerically singular; reassemble with adjusted gamma"
            )
        z = self._m_vecs.T @ rhs
        z = (z.T / self._m_vals).T
        return self._m_vecs @ z

    def mat_vec(self, v):
        """B @ v in O(n*k)."""
        v = np.asarray(v, dtype=float)
        if self.k == 0:
            return self.gamma * v
        return self.gamma * v + self.psi @ self.solve_minv(self.psi.T @ v)

    def dense(self):
        """Explicit n-by-n matrix; for small-n diagnostics only."""
        b = self.gamma * np.eye(self.n)
        if self.k:
            b = b + self.psi @ self.solve_minv(self.psi.T)
        return b


def try_update(buf, s, y, b):
    """Append (s, y) unless the rank-one denominator is too small.

    The pair is accepted when |s.(y - B s)| >= SKIP_RTOL*||s||*||y - B s||
    with ||y - B s|| > 0; otherwise the update is skipped and the buffer
    is left untouched.  Returns True when accepted.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(y))):
        raise ValueError("try_update: non-finite pair")
    norm_s = np.sqrt(s @ s)
    if norm_s == 0.0:
        return False
    resid = y - b.mat_vec(s)
    norm_r = np.sqrt(resid @ resid)
    if norm_r == 0.0 or abs(s @ resid) < SKIP_RTOL * norm_s * norm_r:
        return False
    buf.append(s, y)
    return True


def assemble_compact(buf, gamma):
    """Build the compact form at a given gamma > 0.

    Pairs whose Psi = Y - gamma*S column is numerically dependent are
    removed from the buffer (the thin-QR diagonal decides), then
    Minv = D + L + L.T - gamma*S.T@S is formed from the cached blocks.
    """
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0.0:
        raise ValueError(f"assemble_compact: gamma must be positive, got {gamma}")
    while len(buf):
        psi = buf.y_mat - gamma * buf.s_mat
        k = len(buf)
        _, r_mat, rank = thin_qr(psi)
        if rank == k:
            minv = np.tril(buf.sty) + np.tril(buf.sty, -1).T - gamma * buf.sts
            return CompactSR1(gamma, psi, minv)
        diag = np.abs(np.diag(r_mat))
        dmax = diag.max()
        if dmax == 0.0:
            buf.drop(0)
            continue
        buf.drop(int(np.where(diag < QR_RANK_RTOL * dmax)[0][0]))
    return CompactSR1(gamma, np.zeros((buf.n, 0)), np.zeros((0, 0)))


def lambda_hat_and_gamma(buf, gamma_prev):
    """Safeguarded spectral scale for the next initial matrix.

    lambda_hat is the smallest generalized eigenvalue of the pencil
    (D + L + L.T, S.T@S) over the stored pairs; gamma is
    clamp(0.9*lambda_hat, GAMMA_MIN, GAMMA_MAX) when lambda_hat is safely
    positive and 1 otherwise.  A rank-deficient S.T@S sheds the oldest
    pair and retries; an empty buffer returns (None, gamma_prev).
    """
    while len(buf):
        a = np.tril(buf.sty) + np.tril(buf.sty, -1).T
        try:
            lam_hat = gen_eig_min(a, buf.sts)
        except RankDeficiencyError:
            buf.drop(0)
            continue
        if lam_hat > LAMBDA_HAT_FLOOR:
            return lam_hat, min(max(0.9 * lam_hat, GAMMA_MIN), GAMMA_MAX)
        return lam_hat, 1.0
    return None, float(gamma_prev)
