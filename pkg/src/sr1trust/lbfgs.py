"""L-BFGS baseline sharing the Wolfe line search with the trust-region driver."""

import time
from collections import deque

import numpy as np

from .errors import LineSearchError
from .trust_region import RunResult, TraceRecord, TRConfig, strong_wolfe_search

# curvature floor on y.s relative to ||y||*||s|| for storing a pair
CURVATURE_RTOL = 1e-8


class LBFGSMemory:
    """Bounded deque of (s, y, y.s) pairs plus the spectral scale gamma_b.

    gamma_b = y.y / y.s from the newest pair sets H0 = I / gamma_b; it
    stays at 1 until a pair is stored.  Callers enforce the curvature
    condition before pushing.
    """

    def __init__(self, capacity=8):
        if capacity < 1:
            raise ValueError("LBFGSMemory capacity must be positive")
        self.pairs = deque(maxlen=int(capacity))
        self.gamma_b = 1.0

    def __len__(self):
        return len(self.pairs)

    def push(self, s, y):
        s = np.asarray(s, dtype=float)
        y = np.asarray(y, dtype=float)
        ys = float(y @ s)
        if ys <= 0.0:
            raise ValueError("LBFGSMemory.push needs positive curvature y.s")
        self.pairs.append((s, y, ys))
        self.gamma_b = float(y @ y) / ys


def two_loop_direction(mem, g):
    """p = -H @ g by the two-loop recursion with H0 = I / gamma_b."""
    q = np.asarray(g, dtype=float).copy()
    coeffs = []
    for s, y, ys in reversed(mem.pairs):
        a = (s @ q) / ys
        q -= a * y
        coeffs.append(a)
    r = q / mem.gamma_b
    for (s, y, ys), a in zip(mem.pairs, reversed(coeffs)):
        b = (y @ r) / ys
        r += (a - b) * s
    return -r


def minimize_lbfgs(obj, w0, cfg=None, callback=None, time_budget=None):
    """L-BFGS with strong Wolfe steps and curvature-guarded pair storage.

    Shares TRConfig for eps / memory / c1 / c2 / iteration limits; the
    trust-region fields are ignored.  Trace records leave delta and rho
    empty.
    """
    cfg = cfg or TRConfig()
    w = np.asarray(w0, dtype=float).copy()
    f = obj.value(w)
    g = np.asarray(obj.grad(w), dtype=float)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise ValueError("minimize_lbfgs: f or g non-finite at the starting point")
    mem = LBFGSMemory(cfg.memory)
    trace = []
    t0 = time.monotonic()
    for k in range(cfg.max_iter):
        g_norm = float(np.sqrt(g @ g))
        if g_norm <= cfg.eps:
            break
        if time_budget is not None and time.monotonic() - t0 > time_budget:
            break
        p = two_loop_direction(mem, g)
        d0 = float(g @ p)
        if d0 >= 0.0:
            # numerically lost positive definiteness; restart from steepest descent
            mem = LBFGSMemory(cfg.memory)
            p = -g
            d0 = -float(g @ g)
        try:
            alpha, f_new, g_new, _ = strong_wolfe_search(
                obj, w, p, f, d0, cfg.c1, cfg.c2, cfg.max_ls_iter
            )
        except LineSearchError:
            trace.append(TraceRecord(
                iter=k, f=f, grad_norm=g_norm, delta=None, rho=None,
                alpha=0.0, batch_size=obj.n_obs,
                wall_seconds=time.monotonic() - t0, accepted_update=False,
            ))
            mem = LBFGSMemory(cfg.memory)
            if callback is not None:
                callback(k, w, trace[-1])
            continue
        s = alpha * np.asarray(p, dtype=float)
        y = g_new - g
        ys = float(y @ s)
        norm_y = float(np.sqrt(y @ y))
        norm_s = float(np.sqrt(s @ s))
        accepted = ys >= CURVATURE_RTOL * norm_y * norm_s and ys > 0.0
        if accepted:
            mem.push(s, y)
        w = w + s
        trace.append(TraceRecord(
            iter=k, f=f_new, grad_norm=float(np.sqrt(g_new @ g_new)),
            delta=None, rho=None, alpha=alpha, batch_size=obj.n_obs,
            wall_seconds=time.monotonic() - t0, accepted_update=accepted,
        ))
        f, g = f_new, g_new
        if callback is not None:
            callback(k, w, trace[-1])
    g_norm = float(np.sqrt(g @ g))
    return RunResult(
        w=w, f=f, grad_norm=g_norm, converged=g_norm <= cfg.eps,
        iterations=len(trace), trace=trace,
    )
