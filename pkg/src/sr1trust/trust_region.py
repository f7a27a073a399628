"""Limited-memory SR1 trust-region driver.

Each iteration assembles the compact model from the stored pairs, solves
the trust-region subproblem exactly, scales the step with a strong Wolfe
line search (negating first if the solver returned an ascent direction),
applies the step unconditionally, then updates the pair buffer, the
spectral safeguard gamma, and the radius from the agreement ratio rho.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, LineSearchError, NumericalError
from .lsr1 import PairBuffer, assemble_compact, lambda_hat_and_gamma, try_update
from .subproblem import solve_subproblem

# |Q| below this counts as a converged subproblem rather than a defect
Q_FLOOR = 1e-16


@dataclass
class TRConfig:
    """Driver constants.

    tau1 is carried for the full threshold chain 0 <= tau1 < tau2 < 0.5
    but no branch of the radius update reads it.
    """

    delta0: float = 1.0
    eps: float = 1e-5
    gamma0: float = 1.0
    tau1: float = 0.0
    tau2: float = 0.25
    tau3: float = 0.75
    eta1: float = 0.25
    eta2: float = 0.5
    eta3: float = 0.8
    eta4: float = 2.0
    memory: int = 8
    c1: float = 1e-4
    c2: float = 0.9
    max_iter: int = 1000
    max_ls_iter: int = 20

    def __post_init__(self):
        if not self.delta0 > 0:
            raise ConfigError("delta0 must be positive")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if not self.gamma0 > 0:
            raise ConfigError("gamma0 must be positive")
        if not 0 <= self.tau1 < self.tau2 < 0.5 < self.tau3 < 1:
            raise ConfigError("need 0 <= tau1 < tau2 < 0.5 < tau3 < 1")
        if not 0 < self.eta1 < self.eta2 <= 0.5 < self.eta3 < 1 < self.eta4:
            raise ConfigError("need 0 < eta1 < eta2 <= 0.5 < eta3 < 1 < eta4")
        if not 0 < self.c1 < self.c2 < 1:
            raise ConfigError("need 0 < c1 < c2 < 1")
        if self.memory < 1:
            raise ConfigError("memory must be at least 1")
        if self.max_iter < 0 or self.max_ls_iter < 1:
            raise ConfigError("max_iter must be >= 0 and max_ls_iter >= 1")


class Objective:
    """Evaluation contract the drivers run against.

    Deterministic problems can ignore the batch interface; the defaults
    evaluate the full function regardless of the index set.
    """

    n_obs = 1

    def value(self, w):
        raise NotImplementedError

    def grad(self, w):
        raise NotImplementedError

    def batch_value(self, w, idx):
        return self.value(w)

    def batch_grad(self, w, idx):
        return self.grad(w)


class FunctionObjective(Objective):
    """Wrap plain f / grad callables as an Objective."""

    def __init__(self, fn, grad_fn, n_obs=1):
        self._fn = fn
        self._grad = grad_fn
        self.n_obs = n_obs

    def value(self, w):
        return float(self._fn(np.asarray(w, dtype=float)))

    def grad(self, w):
        return np.asarray(self._grad(np.asarray(w, dtype=float)), dtype=float)


@dataclass
class TraceRecord:
    """One driver iteration; None fields print as empty CSV cells."""

    iter: int
    f: float
    grad_norm: float
    delta: Optional[float]
    rho: Optional[float]
    alpha: float
    batch_size: int
    wall_seconds: float
    accepted_update: bool
    full_loss: Optional[float] = None


@dataclass
class RunResult:
    w: np.ndarray
    f: float
    grad_norm: float
    converged: bool
    iterations: int
    trace: list = field(default_factory=list)


def strong_wolfe_search(obj, w, p, f0, d0, c1=1e-4, c2=0.9, max_ls_iter=20):
    """Strong Wolfe step along p starting at alpha = 1.

    Returns (alpha, f_new, g_new, ok); ok is False when the probe budget
    ran out and the best Armijo point found so far is returned instead.
    Non-finite probes shrink alpha; if every probe is non-finite a
    LineSearchError is raised.
    """
    if d0 >= 0.0:
        raise ValueError("strong_wolfe_search needs a descent direction")
    w = np.asarray(w, dtype=float)
    p = np.asarray(p, dtype=float)
    budget = [int(max_ls_iter)]
    seen_finite = [False]

    def probe(alpha):
        budget[0] -= 1
        f = obj.value(w + alpha * p)
        if not np.isfinite(f):
            return f, None, np.nan
        seen_finite[0] = True
        g = obj.grad(w + alpha * p)
        return f, g, float(g @ p)

    def fail(a_lo, f_lo, g_lo):
        if a_lo > 0.0 and g_lo is not None:
            return a_lo, f_lo, g_lo, False
        if not seen_finite[0]:
            raise LineSearchError("strong_wolfe_search: all probes non-finite")
        raise LineSearchError("strong_wolfe_search: no acceptable finite step")

    def zoom(a_lo, f_lo, g_lo, a_hi):
        # a_lo always satisfies Armijo (alpha = 0 counts, with g_lo None)
        while budget[0] > 0:
            a = 0.5 * (a_lo + a_hi)
            f, g, slope = probe(a)
            if not np.isfinite(f) or f > f0 + c1 * a * d0 or f >= f_lo:
                a_hi = a
                continue
            if abs(slope) <= -c2 * d0:
                return a, f, g, True
            if slope * (a_hi - a_lo) >= 0.0:
                a_hi = a_lo
            a_lo, f_lo, g_lo = a, f, g
        return fail(a_lo, f_lo, g_lo)

    alpha, a_prev, f_prev, g_prev = 1.0, 0.0, f0, None
    while budget[0] > 0:
        f, g, slope = probe(alpha)
        if not np.isfinite(f):
            alpha = 0.5 * (a_prev + alpha)
            continue
        if f > f0 + c1 * alpha * d0 or (a_prev > 0.0 and f >= f_prev):
            return zoom(a_prev, f_prev, g_prev, alpha)
        if abs(slope) <= -c2 * d0:
            return alpha, f, g, True
        if slope >= 0.0:
            return zoom(alpha, f, g, a_prev)
        a_prev, f_prev, g_prev = alpha, f, g
        alpha *= 2.0
    return fail(a_prev, f_prev, g_prev)


def tr_radius_update(rho, s_norm, delta, cfg):
    """Radius rule: shrink on poor agreement, expand on strong agreement
    with a near-boundary step, otherwise keep."""
    if rho < cfg.tau2:
        return min(cfg.eta1 * delta, cfg.eta2 * s_norm)
    if rho >= cfg.tau3 and s_norm >= cfg.eta3 * delta:
        return cfg.eta4 * delta
    return delta


def _assemble_safeguarded(buf, gamma):
    # a singular Minv is a measure-zero event; nudge gamma off it
    g_try = gamma
    for _ in range(4):
        b = assemble_compact(buf, g_try)
        if not b.minv_singular:
            return b
        g_try *= 0.95
    if len(buf):
        buf.drop(0)
        return _assemble_safeguarded(buf, gamma)
    return b


def minimize(obj, w0, cfg=None, callback=None, time_budget=None):
    """Run the trust-region iteration until ||g|| <= eps or max_iter.

    The step is applied unconditionally (the Wolfe search guarantees
    decrease); rho only steers the radius.  Returns a RunResult whose
    trace has one record per iteration, including line-search failures
    (recorded with alpha = 0 and the radius shrunk by eta1).
    """
    cfg = cfg or TRConfig()
    w = np.asarray(w0, dtype=float).copy()
    f = obj.value(w)
    g = np.asarray(obj.grad(w), dtype=float)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise ValueError("minimize: f or g non-finite at the starting point")
    buf = PairBuffer(w.size, cfg.memory)
    gamma, delta = cfg.gamma0, cfg.delta0
    trace = []
    t0 = time.monotonic()
    for k in range(cfg.max_iter):
        g_norm = float(np.sqrt(g @ g))
        if g_norm <= cfg.eps:
            break
        if time_budget is not None and time.monotonic() - t0 > time_budget:
            break
        b = _assemble_safeguarded(buf, gamma)
        sol = solve_subproblem(b, g, delta)
        p = sol.p_star
        d0 = float(g @ p)
        if d0 > 0.0:
            p, d0 = -p, -d0
        if sol.q_value >= 0.0:
            if abs(sol.q_value) < Q_FLOOR:
                break
            raise NumericalError("minimize: subproblem model value not negative")
        if d0 == 0.0:
            break
        try:
            alpha, f_new, g_new, _ = strong_wolfe_search(
                obj, w, p, f, d0, cfg.c1, cfg.c2, cfg.max_ls_iter
            )
        except LineSearchError:
            trace.append(TraceRecord(
                iter=k, f=f, grad_norm=g_norm, delta=delta, rho=None,
                alpha=0.0, batch_size=obj.n_obs,
                wall_seconds=time.monotonic() - t0, accepted_update=False,
            ))
            delta = cfg.eta1 * delta
            if callback is not None:
                callback(k, w, trace[-1])
            continue
        s = alpha * p
        s_norm = float(np.sqrt(s @ s))
        q_s = float(g @ s + 0.5 * (s @ b.mat_vec(s)))
        stop_after = abs(q_s) < Q_FLOOR
        rho = 1.0 if stop_after else (f_new - f) / q_s
        w = w + s
        y = g_new - g
        accepted = try_update(buf, s, y, b)
        _, gamma = lambda_hat_and_gamma(buf, gamma)
        trace.append(TraceRecord(
            iter=k, f=f_new, grad_norm=float(np.sqrt(g_new @ g_new)),
            delta=delta, rho=rho, alpha=alpha, batch_size=obj.n_obs,
            wall_seconds=time.monotonic() - t0, accepted_update=accepted,
        ))
        delta = tr_radius_update(rho, s_norm, delta, cfg)
        f, g = f_new, g_new
        if callback is not None:
            callback(k, w, trace[-1])
        if stop_after:
            break
    g_norm = float(np.sqrt(g @ g))
    return RunResult(
        w=w, f=f, grad_norm=g_norm, converged=g_norm <= cfg.eps,
        iterations=len(trace), trace=trace,
    )
