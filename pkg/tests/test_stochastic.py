import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from sr1trust import (
    BatchSchedule,
    MomentumState,
    NetObjective,
    NetworkSpec,
    TRConfig,
    init_params,
    minimize,
    minimize_stochastic,
    momentum_graft,
    sample_overlapping_batch,
    stall_and_grow,
)
from sr1trust.errors import ConfigError
from sr1trust.stochastic import blend_into_region

from conftest import rng_for


def tiny_net_objective(n_obs=60, seed=9):
    rng = rng_for(seed)
    x = rng.normal(size=(n_obs, 5))
    labels = rng.integers(0, 3, size=n_obs)
    y = np.zeros((n_obs, 3))
    y[np.arange(n_obs), labels] = 1.0
    spec = NetworkSpec((5, 6, 3))
    return NetObjective(spec, x, y), init_params(spec, seed + 1)


class TestBatchSampling:
    def test_prescribed_overlap_is_exact(self):
        rng = rng_for(0)
        prev = np.arange(100)
        batch = sample_overlapping_batch(prev, 100, 0.33, 1000, rng)
        assert batch.size == 100
        assert np.intersect1d(batch, prev).size == 33

    def test_zero_overlap_forces_nothing(self):
        rng = rng_for(1)
        prev = np.arange(50)
        batch = sample_overlapping_batch(prev, 50, 0.0, 1000, rng)
        assert batch.size == 50
        assert np.intersect1d(batch, prev).size == 0

    def test_full_batch_is_identity_range(self):
        rng = rng_for(2)
        batch = sample_overlapping_batch(np.arange(10), 64, 0.33, 64, rng)
        np.testing.assert_array_equal(batch, np.arange(64))

    def test_small_complement_raises_realized_overlap(self):
        rng = rng_for(3)
        prev = np.arange(8)
        # complement has 2 elements; need 6 fresh at overlap 0.25 -> carry grows
        batch = sample_overlapping_batch(prev, 8, 0.25, 10, rng)
        assert batch.size == 8
        assert np.unique(batch).size == 8

    def test_indices_sorted_unique_in_range(self):
        rng = rng_for(4)
        prev = sample_overlapping_batch(np.zeros(0, int), 30, 0.5, 200, rng)
        batch = sample_overlapping_batch(prev, 30, 0.5, 200, rng)
        assert np.all(np.diff(batch) > 0)
        assert batch.min() >= 0 and batch.max() < 200

    def test_deterministic_given_generator_state(self):
        a = sample_overlapping_batch(np.arange(20), 20, 0.4, 100, rng_for(7))
        b = sample_overlapping_batch(np.arange(20), 20, 0.4, 100, rng_for(7))
        np.testing.assert_array_equal(a, b)


class TestMomentumGraft:
    def test_first_iteration_is_identity(self):
        p_star = np.array([0.3, 0.4])
        p, state = momentum_graft(
            p_star, MomentumState(mu=0.9), np.zeros(2), 1.0
        )
        np.testing.assert_allclose(p, p_star, atol=1e-15)
        np.testing.assert_allclose(state.v, np.zeros(2), atol=1e-15)

    def test_zero_momentum_is_exact_noop(self):
        p_star = np.array([0.3, 0.4])
        p, state = momentum_graft(
            p_star, MomentumState(mu=0.0), np.array([5.0, -2.0]), 1.0
        )
        assert np.array_equal(p, p_star)
        assert np.array_equal(state.v, np.zeros(2))

    def test_blend_rescales_to_region(self):
        p = blend_into_region(np.array([3.0, 0.0]), np.array([0.0, 4.0]), 1.0)
        np.testing.assert_allclose(p, [0.6, 0.8], atol=1e-15)
        assert np.linalg.norm(p) == pytest.approx(1.0, abs=1e-15)

    def test_momentum_norm_bounded_by_mu_delta(self):
        state = MomentumState(mu=0.9)
        rng = rng_for(11)
        delta = 0.7
        for _ in range(25):
            p_star = rng.normal(size=3)
            p_star *= min(1.0, delta / np.linalg.norm(p_star))
            p, state = momentum_graft(p_star, state, rng.normal(size=3), delta)
            assert np.linalg.norm(state.v) <= state.mu * delta + 1e-12
            assert np.linalg.norm(p) <= delta + 1e-12

    def test_invalid_mu_rejected(self):
        with pytest.raises(ConfigError):
            MomentumState(mu=1.0)
        with pytest.raises(ConfigError):
            MomentumState(mu=-0.1)


class TestStallAndGrow:
    def sched(self, **kw):
        return BatchSchedule(**{"n_b": 100, "growth": 1.5, "stall_tau": 1.0, **kw})

    def test_clear_improvement_keeps_batch(self):
        out = stall_and_grow(5.0, 20.0, self.sched(), 1000)
        assert out.n_b == 100

    def test_stall_grows_by_factor(self):
        out = stall_and_grow(19.5, 20.0, self.sched(), 1000)
        assert out.n_b == 150

    def test_growth_capped_at_n_obs(self):
        out = stall_and_grow(19.5, 20.0, self.sched(n_b=120), 130)
        assert out.n_b == 130

    def test_equal_losses_count_as_stall(self):
        out = stall_and_grow(20.0, 20.0, self.sched(), 1000)
        assert out.n_b == 150

    def test_schedule_validation(self):
        with pytest.raises(ConfigError):
            BatchSchedule(overlap=1.0)
        with pytest.raises(ConfigError):
            BatchSchedule(growth=1.0)
        with pytest.raises(ConfigError):
            BatchSchedule(full_eval_period=1)
        with pytest.raises(ConfigError):
            BatchSchedule(stall_tau=0.0)


class TestDriver:
    def test_reduces_to_deterministic_on_full_batch(self):
        obj, w0 = tiny_net_objective()
        cfg = TRConfig(max_iter=60)
        det = minimize(obj, w0, cfg)
        sto = minimize_stochastic(
            obj, w0, cfg,
            sched=BatchSchedule(n_b=obj.n_obs, overlap=0.33, rng_seed=5),
            mom=MomentumState(mu=0.0),
        )
        assert sto.iterations == det.iterations
        assert np.abs(sto.w - det.w).max() <= 1e-12
        for a, b in zip(det.trace, sto.trace):
            assert abs(a.f - b.f) <= 1e-12 * max(1.0, abs(a.f))
            assert a.alpha == b.alpha
            assert a.delta == b.delta

    def test_batch_sizes_nondecreasing(self):
        obj, w0 = tiny_net_objective(n_obs=80, seed=3)
        res = minimize_stochastic(
            obj, w0, TRConfig(max_iter=50),
            sched=BatchSchedule(n_b=10, full_eval_period=5, stall_tau=0.5,
                                rng_seed=2),
        )
        sizes = [rec.batch_size for rec in res.trace]
        assert all(b >= a for a, b in zip(sizes, sizes[1:]))

    def test_full_loss_only_at_checkpoints(self):
        obj, w0 = tiny_net_objective(n_obs=40, seed=5)
        res = minimize_stochastic(
            obj, w0, TRConfig(max_iter=21),
            sched=BatchSchedule(n_b=12, full_eval_period=10, rng_seed=1),
        )
        for rec in res.trace:
            if (rec.iter + 1) % 10 == 0:
                assert rec.full_loss is not None
            else:
                assert rec.full_loss is None

    def test_training_loss_decreases(self):
        obj, w0 = tiny_net_objective(n_obs=100, seed=6)
        res = minimize_stochastic(
            obj, w0, TRConfig(max_iter=80),
            sched=BatchSchedule(n_b=25, full_eval_period=8, rng_seed=4),
            mom=MomentumState(mu=0.9),
        )
        assert obj.value(res.w) < obj.value(w0)

    def test_same_seed_reproduces_trace(self):
        obj, w0 = tiny_net_objective(n_obs=50, seed=7)
        kw = dict(
            cfg=TRConfig(max_iter=15),
            sched=BatchSchedule(n_b=10, rng_seed=13),
            mom=MomentumState(mu=0.9),
        )
        r1 = minimize_stochastic(obj, w0, **kw)
        kw["sched"] = BatchSchedule(n_b=10, rng_seed=13)
        kw["mom"] = MomentumState(mu=0.9)
        r2 = minimize_stochastic(obj, w0, **kw)
        assert np.array_equal(r1.w, r2.w)
        assert [r.f for r in r1.trace] == [r.f for r in r2.trace]


@settings(max_examples=40, deadline=None)
@given(hst.integers(0, 10 ** 9))
def test_graft_never_leaves_region_property(seed):
    rng = rng_for(seed)
    n = int(rng.integers(1, 6))
    delta = float(10.0 ** rng.uniform(-2, 2))
    mu = float(rng.uniform(0.0, 0.99))
    state = MomentumState(mu=mu)
    p_star = rng.normal(size=n)
    if np.linalg.norm(p_star) > delta:
        p_star *= delta / np.linalg.norm(p_star)
    p, state = momentum_graft(p_star, state, rng.normal(size=n), delta)
    assert np.linalg.norm(p) <= delta * (1.0 + 1e-12)
    assert np.linalg.norm(state.v) <= mu * delta * (1.0 + 1e-12)
