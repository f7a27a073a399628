"""Stochastic trust-region driver on overlapping mini-batches.

Consecutive batches share a prescribed fraction of indices so the pair
y = g(next batch, new point) - g(current batch, old point) stays
informative; a momentum term is grafted onto the subproblem step inside
the trust region; the full loss is checkpointed every few iterations and
a stall grows the batch geometrically.  With a full batch and zero
momentum the iteration reduces exactly to the deterministic driver.
"""

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, LineSearchError, NumericalError
from .lsr1 import PairBuffer, lambda_hat_and_gamma, try_update
from .subproblem import solve_subproblem
from .trust_region import (
    Objective,
    Q_FLOOR,
    RunResult,
    TraceRecord,
    TRConfig,
    _assemble_safeguarded,
    strong_wolfe_search,
    tr_radius_update,
)


@dataclass
class BatchSchedule:
    """Mini-batch plan.

    stall_tau is relative: the driver converts it once at run start to the
    absolute threshold stall_tau * max(1, f_full(w0)) and carries that in
    its working copy.
    """

    n_b: int = 100
    overlap: float = 0.33
    growth: float = 1.5
    stall_tau: float = 1e-4
    full_eval_period: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_b < 1:
            raise ConfigError("n_b must be at least 1")
        if not 0.0 <= self.overlap < 1.0:
            raise ConfigError("overlap must lie in [0, 1)")
        if not self.growth > 1.0:
            raise ConfigError("growth must exceed 1")
        if not self.stall_tau > 0.0:
            raise ConfigError("stall_tau must be positive")
        if self.full_eval_period < 2:
            raise ConfigError("full_eval_period must exceed 1")


@dataclass
class MomentumState:
    """Exponentially averaged step; v is created as zeros on first use."""

    v: Optional[np.ndarray] = None
    mu: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.mu < 1.0:
            raise ConfigError("mu must lie in [0, 1)")


def sample_overlapping_batch(prev, n_b, overlap, n_obs, rng):
    """Sorted index batch sharing round(overlap * n_b) entries with prev.

    The shared part is drawn uniformly from prev, the remainder uniformly
    from its complement, without duplicates.  n_b >= n_obs returns the
    full index set; a too-small complement raises the realized overlap.
    """
    if n_b >= n_obs:
        return np.arange(n_obs)
    prev = np.asarray(prev, dtype=int)
    carry = min(int(round(overlap * n_b)), prev.size)
    complement = np.setdiff1d(np.arange(n_obs), prev, assume_unique=False)
    shortfall = (n_b - carry) - complement.size
    if shortfall > 0:
        carry += shortfall
    kept = rng.choice(prev, size=carry, replace=False) if carry else np.zeros(0, int)
    fresh_n = n_b - carry
    fresh = (
        rng.choice(complement, size=fresh_n, replace=False)
        if fresh_n
        else np.zeros(0, int)
    )
    return np.sort(np.concatenate([kept, fresh]))


def blend_into_region(p_star, v, delta):
    """p = min(1, delta/||p* + v||) * (p* + v); a zero sum is left alone."""
    p = np.asarray(p_star, dtype=float) + np.asarray(v, dtype=float)
    norm_p = float(np.sqrt(p @ p))
    if norm_p > 0.0:
        p = min(1.0, delta / norm_p) * p
    return p


def momentum_graft(p_star, state, last_step, delta):
    """Fold the last realized step into the momentum and blend with p*.

    v <- mu*v + last_step, then v <- mu*min(1, delta/||v||)*v (a zero v is
    a no-op), then the blend clamps p* + v back into the region.  Returns
    (p, new_state); mu = 0 leaves p* unchanged.
    """
    if state.mu == 0.0:
        # exact no-op so a zero-momentum run reduces to the plain step
        return np.asarray(p_star, dtype=float), MomentumState(
            v=np.zeros_like(p_star), mu=0.0
        )
    v_prev = state.v if state.v is not None else np.zeros_like(p_star)
    v = state.mu * v_prev + np.asarray(last_step, dtype=float)
    norm_v = float(np.sqrt(v @ v))
    if norm_v > 0.0:
        v = state.mu * min(1.0, delta / norm_v) * v
    return blend_into_region(p_star, v, delta), MomentumState(v=v, mu=state.mu)


def stall_and_grow(f_curr_full, f_prev_full, sched, n_obs):
    """Grow n_b by the schedule's factor when the full loss stalled.

    A stall is f_curr_full > f_prev_full - stall_tau (absolute here);
    growth is ceil(growth * n_b) capped at n_obs.  Returns the schedule
    for the next leg.
    """
    if f_curr_full > f_prev_full - sched.stall_tau:
        return replace(sched, n_b=min(int(n_obs), math.ceil(sched.growth * sched.n_b)))
    return sched


class _BatchView(Objective):
    """Objective restricted to a fixed index set."""

    def __init__(self, obj, idx):
        self._obj = obj
        self._idx = idx
        self.n_obs = len(idx)

    def value(self, w):
        return self._obj.batch_value(w, self._idx)

    def grad(self, w):
        return self._obj.batch_grad(w, self._idx)


def minimize_stochastic(obj, w0, cfg=None, sched=None, mom=None,
                        callback=None, time_budget=None):
    """Run the stochastic trust-region iteration.

    Per iteration: solve the subproblem on the current batch gradient,
    graft momentum, Wolfe-scale on the same batch, step unconditionally,
    checkpoint the full loss every full_eval_period iterations (feeding
    stall_and_grow), then draw the next overlapping batch and form
    y from the two batch gradients.  Trace rows carry the batch size and,
    at checkpoints, the full loss.
    """
    cfg = cfg or TRConfig()
    sched = sched if sched is not None else BatchSchedule()
    w = np.asarray(w0, dtype=float).copy()
    n = w.size
    rng = np.random.Generator(np.random.Philox(sched.rng_seed))
    f_full_prev = obj.value(w)
    if not np.isfinite(f_full_prev):
        raise ValueError("minimize_stochastic: full loss non-finite at start")
    run_sched = replace(sched, stall_tau=sched.stall_tau * max(1.0, f_full_prev))
    idx = sample_overlapping_batch(
        np.zeros(0, int), run_sched.n_b, run_sched.overlap, obj.n_obs, rng
    )
    f = obj.batch_value(w, idx)
    g = np.asarray(obj.batch_grad(w, idx), dtype=float)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise ValueError("minimize_stochastic: batch f or g non-finite at start")
    buf = PairBuffer(n, cfg.memory)
    gamma, delta = cfg.gamma0, cfg.delta0
    state = MomentumState(
        v=mom.v if (mom is not None and mom.v is not None) else np.zeros(n),
        mu=mom.mu if mom is not None else 0.9,
    )
    last_step = np.zeros(n)
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
        p, state = momentum_graft(sol.p_star, state, last_step, delta)
        d0 = float(g @ p)
        if d0 > 0.0:
            p, d0 = -p, -d0
        if sol.q_value >= 0.0:
            if abs(sol.q_value) < Q_FLOOR:
                break
            raise NumericalError("minimize_stochastic: model value not negative")
        if d0 == 0.0:
            break
        view = _BatchView(obj, idx)
        try:
            alpha, f_new, _, _ = strong_wolfe_search(
                view, w, p, f, d0, cfg.c1, cfg.c2, cfg.max_ls_iter
            )
        except LineSearchError:
            trace.append(TraceRecord(
                iter=k, f=f, grad_norm=g_norm, delta=delta, rho=None,
                alpha=0.0, batch_size=len(idx),
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
        last_step = s
        full_loss = None
        if (k + 1) % run_sched.full_eval_period == 0:
            full_loss = obj.value(w)
            run_sched = stall_and_grow(full_loss, f_full_prev, run_sched, obj.n_obs)
            f_full_prev = full_loss
        idx_next = sample_overlapping_batch(
            idx, run_sched.n_b, run_sched.overlap, obj.n_obs, rng
        )
        g_next = np.asarray(obj.batch_grad(w, idx_next), dtype=float)
        f_next = obj.batch_value(w, idx_next)
        y = g_next - g
        accepted = try_update(buf, s, y, b)
        _, gamma = lambda_hat_and_gamma(buf, gamma)
        trace.append(TraceRecord(
            iter=k, f=f_new, grad_norm=float(np.sqrt(g_next @ g_next)),
            delta=delta, rho=rho, alpha=alpha, batch_size=len(idx),
            wall_seconds=time.monotonic() - t0, accepted_update=accepted,
            full_loss=full_loss,
        ))
        delta = tr_radius_update(rho, s_norm, delta, cfg)
        f, g, idx = f_next, g_next, idx_next
        if callback is not None:
            callback(k, w, trace[-1])
        if stop_after:
            break
    g_norm = float(np.sqrt(g @ g))
    return RunResult(
        w=w, f=f, grad_norm=g_norm, converged=g_norm <= cfg.eps,
        iterations=len(trace), trace=trace,
    )
