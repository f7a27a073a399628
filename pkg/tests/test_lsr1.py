import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from sr1trust import (
    CompactSR1,
    PairBuffer,
    assemble_compact,
    lambda_hat_and_gamma,
    try_update,
)
from sr1trust.errors import SingularMatrixError

from conftest import dense_sr1, filled_buffer, pairs_from_matrix, random_symmetric, rng_for


def identity_b(n):
    return CompactSR1(1.0, np.zeros((n, 0)), np.zeros((0, 0)))


class TestTryUpdate:
    def test_accepts_informative_pair(self):
        buf = PairBuffer(3)
        s, y = np.array([1.0, 0, 0]), np.array([2.0, 0, 0])
        assert try_update(buf, s, y, identity_b(3))
        assert len(buf) == 1

    def test_skips_when_secant_already_holds(self):
        buf = PairBuffer(3)
        s = np.array([1.0, 2.0, 0.0])
        assert not try_update(buf, s, s.copy(), identity_b(3))
        assert len(buf) == 0

    def test_skips_near_orthogonal_residual(self):
        buf = PairBuffer(2)
        s = np.array([1.0, 0.0])
        # residual r = (0, 1); s @ r = 0 exactly
        y = np.array([1.0, 1.0])
        assert not try_update(buf, s, y, identity_b(2))

    def test_skip_threshold_is_relative(self):
        buf = PairBuffer(2)
        s = np.array([1.0, 0.0])
        r = np.array([1e-9, 1.0])
        y = s + r  # s @ r = 1e-9 < 1e-8 * |s| * |r|
        assert not try_update(buf, s, y, identity_b(2))
        y = s + np.array([1e-7, 1.0])
        assert try_update(buf, s, y, identity_b(2))

    def test_rejects_nonfinite(self):
        buf = PairBuffer(2)
        with pytest.raises(ValueError):
            try_update(buf, np.array([np.nan, 0.0]), np.zeros(2), identity_b(2))

    def test_empty_buffer_assembles_to_scaled_identity(self):
        buf = PairBuffer(2)
        b = assemble_compact(buf, 1.5)
        assert b.k == 0
        np.testing.assert_allclose(b.dense(), 1.5 * np.eye(2), atol=1e-15)
        assert try_update(buf, np.array([1.0, 0.0]), np.array([3.0, 0.0]), b)


class TestPairBuffer:
    def test_eviction_keeps_latest(self):
        buf = PairBuffer(4, capacity=3)
        for j in range(5):
            s = np.zeros(4)
            s[j % 4] = 1.0 + j
            buf.append(s, 2.0 * s)
        assert len(buf) == 3
        s_mat, y_mat = buf.s_mat, buf.y_mat
        np.testing.assert_allclose(y_mat, 2.0 * s_mat)
        assert s_mat[2 % 4, 0] == 3.0  # pair j=2 survived as oldest

    def test_caches_match_recomputation(self):
        rng = rng_for(77)
        buf = PairBuffer(5, capacity=4)
        for _ in range(6):
            buf.append(rng.normal(size=5), rng.normal(size=5))
        np.testing.assert_allclose(buf.sty, buf.s_mat.T @ buf.y_mat, atol=1e-13)
        np.testing.assert_allclose(buf.sts, buf.s_mat.T @ buf.s_mat, atol=1e-13)

    def test_drop_middle(self):
        buf = PairBuffer(3, capacity=4)
        for j in range(3):
            s = np.zeros(3)
            s[j] = 1.0
            buf.append(s, (j + 1.0) * s)
        buf.drop(1)
        assert len(buf) == 2
        np.testing.assert_allclose(buf.sty, buf.s_mat.T @ buf.y_mat, atol=1e-15)


class TestCompactForm:
    @pytest.mark.parametrize("seed", range(10))
    def test_dense_equals_recursion_oracle(self, seed):
        rng = rng_for(500 + seed)
        n = int(rng.integers(3, 12))
        k = int(rng.integers(1, min(n, 6)))
        h = random_symmetric(rng, n, -2.0, 3.0)
        pairs = pairs_from_matrix(h, rng, k)
        buf, gamma = filled_buffer(pairs, n)
        if not len(buf):
            pytest.skip("all pairs filtered")
        b = assemble_compact(buf, gamma)
        kept = [(buf.s_mat[:, j], buf.y_mat[:, j]) for j in range(len(buf))]
        oracle = dense_sr1(gamma, kept, n)
        scale = max(1.0, np.abs(oracle).max())
        assert np.abs(b.dense() - oracle).max() <= 1e-9 * scale

    def test_secant_equations_hold(self):
        rng = rng_for(9)
        n, k = 7, 4
        h = random_symmetric(rng, n, 0.5, 3.0)
        pairs = pairs_from_matrix(h, rng, k)
        buf, gamma = filled_buffer(pairs, n)
        b = assemble_compact(buf, gamma)
        for j in range(len(buf)):
            s, y = buf.s_mat[:, j], buf.y_mat[:, j]
            assert np.linalg.norm(b.mat_vec(s) - y) <= 1e-8 * max(
                1.0, np.linalg.norm(y)
            )

    def test_full_rank_updates_recover_matrix(self):
        rng = rng_for(21)
        n = 6
        h = random_symmetric(rng, n, 0.5, 3.0)
        pairs = pairs_from_matrix(h, rng, n)
        buf, gamma = filled_buffer(pairs, n, capacity=n)
        assert len(buf) == n
        b = assemble_compact(buf, gamma)
        assert np.linalg.norm(b.dense() - h) <= 1e-7 * np.linalg.norm(h)

    def test_minv_formula(self):
        rng = rng_for(33)
        n, k, gamma = 6, 3, 0.7
        buf = PairBuffer(n)
        for _ in range(k):
            buf.append(rng.normal(size=n), rng.normal(size=n))
        b = assemble_compact(buf, gamma)
        s_mat, y_mat = buf.s_mat, buf.y_mat
        sty = s_mat.T @ y_mat
        expect = np.tril(sty) + np.tril(sty, -1).T - gamma * (s_mat.T @ s_mat)
        np.testing.assert_allclose(b.minv, expect, atol=1e-12)
        np.testing.assert_allclose(b.psi, y_mat - gamma * s_mat, atol=1e-12)

    def test_mat_vec_matches_dense(self):
        rng = rng_for(44)
        n = 9
        h = random_symmetric(rng, n, -1.0, 2.0)
        buf, gamma = filled_buffer(pairs_from_matrix(h, rng, 4), n)
        b = assemble_compact(buf, gamma)
        dense = b.dense()
        for _ in range(5):
            v = rng.normal(size=n)
            np.testing.assert_allclose(b.mat_vec(v), dense @ v, atol=1e-10)

    def test_dependent_psi_column_dropped(self):
        # y = gamma * s makes that Psi column exactly zero
        gamma = 2.0
        buf = PairBuffer(3)
        buf.append(np.array([1.0, 0, 0]), np.array([0.5, 1.0, 0]))
        buf.append(np.array([0.0, 1.0, 0]), gamma * np.array([0.0, 1.0, 0]))
        b = assemble_compact(buf, gamma)
        assert b.k == 1
        assert len(buf) == 1

    def test_gamma_must_be_positive(self):
        buf = PairBuffer(2)
        buf.append(np.array([1.0, 0]), np.array([2.0, 0]))
        with pytest.raises(ValueError):
            assemble_compact(buf, 0.0)

    def test_singular_minv_flagged(self):
        # s=(1,0), y=(2,0), gamma=2: Minv = s.y - gamma s.s = 0
        b = CompactSR1(2.0, np.array([[0.0], [0.0]]) + [[0.0], [0.0]], np.array([[0.0]]))
        b = CompactSR1(2.0, np.array([[1.0], [0.0]]), np.array([[0.0]]))
        assert b.minv_singular
        with pytest.raises(SingularMatrixError):
            b.solve_minv(np.array([1.0]))


class TestGammaRule:
    def test_single_pair_worked_example(self):
        buf = PairBuffer(3)
        buf.append(np.array([1.0, 0, 0]), np.array([2.0, 0, 0]))
        lam_hat, gamma = lambda_hat_and_gamma(buf, 1.0)
        assert lam_hat == pytest.approx(2.0, abs=1e-12)
        assert gamma == pytest.approx(1.8, abs=1e-12)

    def test_diagonal_pairs_take_smallest_curvature(self):
        buf = PairBuffer(2)
        h = np.diag([1.0, 3.0])
        for j in range(2):
            s = np.eye(2)[:, j]
            buf.append(s, h @ s)
        lam_hat, gamma = lambda_hat_and_gamma(buf, 1.0)
        assert lam_hat == pytest.approx(1.0, abs=1e-12)
        assert gamma == pytest.approx(0.9, abs=1e-12)

    def test_empty_buffer_keeps_previous(self):
        buf = PairBuffer(4)
        lam_hat, gamma = lambda_hat_and_gamma(buf, 3.25)
        assert lam_hat is None
        assert gamma == 3.25

    def test_nonpositive_curvature_falls_back_to_one(self):
        buf = PairBuffer(2)
        buf.append(np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
        lam_hat, gamma = lambda_hat_and_gamma(buf, 5.0)
        assert lam_hat == pytest.approx(-1.0, abs=1e-12)
        assert gamma == 1.0

    def test_clamped_to_bounds(self):
        buf = PairBuffer(2)
        buf.append(np.array([1.0, 0.0]), np.array([1e12, 0.0]))
        _, gamma = lambda_hat_and_gamma(buf, 1.0)
        assert gamma == 1e8

    def test_duplicate_s_drops_oldest_and_retries(self):
        buf = PairBuffer(3)
        s = np.array([1.0, 0.0, 0.0])
        buf.append(s, 2.0 * s)
        buf.append(s.copy(), 2.0 * s)  # S^T S singular with both
        lam_hat, gamma = lambda_hat_and_gamma(buf, 1.0)
        assert lam_hat == pytest.approx(2.0, abs=1e-10)
        assert len(buf) == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_scipy_generalized_eig(self, seed):
        from scipy.linalg import eigh

        rng = rng_for(700 + seed)
        n, k = 8, 4
        buf = PairBuffer(n)
        h = random_symmetric(rng, n, 0.4, 5.0)
        for s, y in pairs_from_matrix(h, rng, k):
            buf.append(s, y)
        sty = buf.s_mat.T @ buf.y_mat
        pencil_a = np.tril(sty) + np.tril(sty, -1).T
        pencil_b = buf.s_mat.T @ buf.s_mat
        ref = eigh(pencil_a, pencil_b, eigvals_only=True)[0]
        lam_hat, gamma = lambda_hat_and_gamma(buf, 1.0)
        assert lam_hat == pytest.approx(ref, rel=1e-9)
        assert gamma == pytest.approx(
            min(max(0.9 * ref, 1e-8), 1e8) if ref > 1e-8 else 1.0, rel=1e-12
        )


@settings(max_examples=40, deadline=None)
@given(hst.integers(0, 10 ** 9))
def test_compact_equals_oracle_property(seed):
    rng = rng_for(seed)
    n = int(rng.integers(2, 10))
    k = int(rng.integers(1, min(n, 5) + 1))
    h = random_symmetric(rng, n, -3.0, 4.0)
    buf, gamma = filled_buffer(pairs_from_matrix(h, rng, k), n)
    if not len(buf):
        return
    b = assemble_compact(buf, gamma)
    kept = [(buf.s_mat[:, j], buf.y_mat[:, j]) for j in range(len(buf))]
    oracle = dense_sr1(gamma, kept, n)
    assert np.abs(b.dense() - oracle).max() <= 1e-8 * max(1.0, np.abs(oracle).max())
