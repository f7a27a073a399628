"""Small dense linear-algebra kernels.

Everything here runs on tiny matrices (at most the limited-memory block,
a dozen columns) and is written out directly on numpy arrays rather than
delegated to a factorization library, so the numerical behaviour of the
compact-form machinery is pinned in one place: Householder thin QR, a
cyclic-Jacobi symmetric eigensolver, and a Cholesky-based smallest
generalized eigenvalue.
"""

import numpy as np

from .errors import NumericalError, RankDeficiencyError

# R-diagonal entries below this fraction of the largest count as zero
QR_RANK_RTOL = 1e-10
# off-diagonal Frobenius target for Jacobi sweeps, relative to the input norm
JACOBI_TOL = 1e-14
_MAX_JACOBI_SWEEPS = 64
# Cholesky pivot floor, relative to trace
CHOL_PIVOT_RTOL = 1e-12


def thin_qr(a):
    """Householder thin QR of an n-by-r matrix, r <= n.

    Returns (q, r_mat, rank): q has orthonormal columns, r_mat is upper
    triangular with nonnegative diagonal, and rank counts diagonal entries
    at or above QR_RANK_RTOL times the largest one.  Nothing is dropped
    here; callers inspect the diagonal to decide which columns go.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("thin_qr expects a matrix")
    n, r = a.shape
    if r > n:
        raise ValueError(f"thin_qr expects r <= n, got shape ({n}, {r})")
    work = a.copy()
    reflectors = []
    for j in range(r):
        x = work[j:, j].copy()
        norm_x = np.sqrt(x @ x)
        if norm_x == 0.0:
            reflectors.append(None)
            continue
        x[0] += np.copysign(norm_x, x[0])
        x /= np.sqrt(x @ x)
        work[j:, j:] -= 2.0 * np.outer(x, x @ work[j:, j:])
        reflectors.append(x)
    r_mat = np.triu(work[:r, :])
    q = np.zeros((n, r))
    q[:r, :r] = np.eye(r)
    for j in range(r - 1, -1, -1):
        v = reflectors[j]
        if v is not None:
            q[j:, :] -= 2.0 * np.outer(v, v @ q[j:, :])
    for j in range(r):
        if r_mat[j, j] < 0.0:
            r_mat[j, :] *= -1.0
            q[:, j] *= -1.0
    diag = np.abs(np.diag(r_mat))
    rank = 0
    if diag.size and diag.max() > 0.0:
        rank = int(np.count_nonzero(diag >= QR_RANK_RTOL * diag.max()))
    return q, r_mat, rank


def sym_eig_small(a):
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi.

    Returns (lam, v) with a = v @ diag(lam) @ v.T, eigenvalues ascending,
    eigenvector columns orthonormal.  Sweeps run until the off-diagonal
    Frobenius norm falls below JACOBI_TOL relative to the input norm.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("sym_eig_small expects a square matrix")
    k = a.shape[0]
    if k == 0:
        return np.zeros(0), np.zeros((0, 0))
    if not np.all(np.isfinite(a)):
        raise ValueError("sym_eig_small: non-finite entries")
    scale = np.abs(a).max()
    if np.abs(a - a.T).max() > 1e-10 * max(1.0, scale):
        raise ValueError("sym_eig_small: input is not symmetric")
    m = (a + a.T) / 2.0
    v = np.eye(k)
    norm_a = np.sqrt(np.sum(m * m))
    if norm_a == 0.0:
        return np.zeros(k), v
    target = JACOBI_TOL * norm_a
    for _ in range(_MAX_JACOBI_SWEEPS):
        off = np.sqrt(2.0 * np.sum(np.triu(m, 1) ** 2))
        if off <= target:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = m[p, q]
                if abs(apq) <= 0.1 * target / k:
                    continue
                theta = (m[q, q] - m[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0.0 else -1.0
                t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = m[:, p].copy(), m[:, q].copy()
                m[:, p] = c * col_p - s * col_q
                m[:, q] = s * col_p + c * col_q
                row_p, row_q = m[p, :].copy(), m[q, :].copy()
                m[p, :] = c * row_p - s * row_q
                m[q, :] = s * row_p + c * row_q
                m[p, q] = m[q, p] = 0.0
                col_p, col_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * col_p - s * col_q
                v[:, q] = s * col_p + c * col_q
    else:
        raise NumericalError("sym_eig_small: Jacobi sweeps did not converge")
    lam = np.diag(m).copy()
    order = np.argsort(lam, kind="stable")
    return lam[order], v[:, order]


def cholesky_lower(a):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises RankDeficiencyError when a pivot falls to CHOL_PIVOT_RTOL times
    the trace or below, i.e. the matrix is not numerically SPD.
    """
    a = np.asarray(a, dtype=float)
    k = a.shape[0]
    if a.shape != (k, k):
        raise ValueError("cholesky_lower expects a square matrix")
    thresh = CHOL_PIVOT_RTOL * max(float(np.trace(a)), 0.0)
    low = np.zeros((k, k))
    for j in range(k):
        d = a[j, j] - low[j, :j] @ low[j, :j]
        if not np.isfinite(d) or d <= thresh:
            raise RankDeficiencyError(
                f"cholesky_lower: pivot {d:.3e} at column {j} is not positive enough"
            )
        piv = np.sqrt(d)
        low[j, j] = piv
        if j + 1 < k:
            low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / piv
    return low


def solve_lower(low, rhs):
    """Forward substitution: solve low @ x = rhs for lower-triangular low.

    rhs may be a vector or a matrix; zero diagonal entries raise.
    """
    low = np.asarray(low, dtype=float)
    k = low.shape[0]
    vec = np.ndim(rhs) == 1
    x = np.array(rhs, dtype=float, copy=True)
    if vec:
        x = x.reshape(k, 1)
    for j in range(k):
        d = low[j, j]
        if d == 0.0:
            raise RankDeficiencyError("solve_lower: zero diagonal entry")
        x[j, :] = (x[j, :] - low[j, :j] @ x[:j, :]) / d
    return x[:, 0] if vec else x


def solve_upper(up, rhs):
    """Back substitution: solve up @ x = rhs for upper-triangular up."""
    up = np.asarray(up, dtype=float)
    k = up.shape[0]
    vec = np.ndim(rhs) == 1
    x = np.array(rhs, dtype=float, copy=True)
    if vec:
        x = x.reshape(k, 1)
    for j in range(k - 1, -1, -1):
        d = up[j, j]
        if d == 0.0:
            raise RankDeficiencyError("solve_upper: zero diagonal entry")
        x[j, :] = (x[j, :] - up[j, j + 1:] @ x[j + 1:, :]) / d
    return x[:, 0] if vec else x


def gen_eig_min(a, bspd):
    """Smallest generalized eigenvalue of a @ u = lam * bspd @ u.

    bspd must be symmetric positive definite; its Cholesky factor reduces
    the pencil to an ordinary symmetric problem for sym_eig_small.
    """
    a = np.asarray(a, dtype=float)
    bspd = np.asarray(bspd, dtype=float)
    if a.shape != bspd.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("gen_eig_min expects two square matrices of equal size")
    if a.shape[0] == 0:
        raise ValueError("gen_eig_min: empty pencil")
    low = cholesky_lower(bspd)
    half = solve_lower(low, (a + a.T) / 2.0)
    c = solve_lower(low, half.T)
    lam, _ = sym_eig_small((c + c.T) / 2.0)
    return float(lam[0])
