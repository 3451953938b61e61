import math

import numpy as np
import pytest

from adaptest.errors import BudgetExceeded, ZeroResidualDegenerate
from adaptest.estimators import (
    gamma_block,
    projection_direction,
    sample_cov,
    scaled_lasso,
    spiked_cov_estimate,
)
from adaptest.model import Dataset, ModelParams, generate_dataset, make_loading, stream


def orthonormal_design(n, p, seed):
    q, _ = np.linalg.qr(stream(seed, 0).standard_normal((n, n)))
    return q[:, :p] * math.sqrt(n)


class TestScaledLasso:
    def test_zero_response_degenerate(self):
        x = orthonormal_design(40, 10, 0)
        with pytest.raises(ZeroResidualDegenerate):
            scaled_lasso(Dataset(x=x, y=np.zeros(40)))

    def test_zero_response_with_floor(self):
        x = orthonormal_design(40, 10, 0)
        fit = scaled_lasso(Dataset(x=x, y=np.zeros(40)), sigma_floor=1e-6)
        assert fit.sigma_hat == 1e-6
        assert np.allclose(fit.beta_hat, 0.0)

    def test_orthonormal_design_soft_threshold(self):
        n, p = 64, 16
        x = orthonormal_design(n, p, 42)
        rng = stream(7, 0)
        beta = np.zeros(p)
        beta[:3] = [3.0, -2.0, 1.5]
        y = x @ beta + 0.5 * rng.standard_normal(n)
        fit = scaled_lasso(Dataset(x=x, y=y))
        lam0 = math.sqrt(2.01 * math.log(p) / n)
        z = x.T @ y / n
        expect = np.sign(z) * np.maximum(np.abs(z) - fit.sigma_hat * lam0, 0.0)
        assert np.max(np.abs(fit.beta_hat - expect)) < 1e-8
        assert fit.converged

    def test_objective_non_increasing(self):
        theta = ModelParams(
            beta=np.concatenate(([5.0, -5.0], np.zeros(18))), sigma_cov=np.eye(20), noise_sd=1.0
        )
        for seed in range(5):
            fit = scaled_lasso(generate_dataset(theta, 400, seed))
            diffs = np.diff(fit.objectives)
            assert np.all(diffs <= 1e-12)

    def test_estimation_envelope_median(self):
        # median error over 50 seeds against the l2 / noise envelopes
        n, p = 400, 20
        theta = ModelParams(
            beta=np.concatenate(([5.0, -5.0], np.zeros(p - 2))), sigma_cov=np.eye(p), noise_sd=1.0
        )
        errs, sig_errs = [], []
        for seed in range(50):
            fit = scaled_lasso(generate_dataset(theta, n, seed))
            errs.append(float(np.linalg.norm(fit.beta_hat - theta.beta)))
            sig_errs.append(abs(fit.sigma_hat - 1.0))
        # envelope constant 1.5 on top of 1.5 sqrt(2 log p / n) = 0.184
        assert np.median(errs) <= 1.5 * 1.5 * math.sqrt(2 * math.log(p) / n)
        assert np.median(sig_errs) <= 0.15


class TestSampleCov:
    def test_scaled_identity_design(self):
        n = 12
        x = math.sqrt(n) * np.eye(n)
        assert np.allclose(sample_cov(Dataset(x=x, y=np.zeros(n))), np.eye(n))

    def test_single_row(self):
        x = np.array([[1.0, 2.0, -1.0]])
        assert np.allclose(sample_cov(Dataset(x=x, y=np.zeros(1))), np.outer(x, x))

    def test_bitwise_symmetry(self):
        x = stream(5, 0).standard_normal((30, 8))
        s = sample_cov(Dataset(x=x, y=np.zeros(30)))
        assert np.array_equal(s, s.T)


class TestProjectionDirection:
    def radius_to_cxi(self, target, xi_vec, n):
        p = xi_vec.size
        return target / (float(np.linalg.norm(xi_vec)) * math.sqrt(math.log(p) / n))

    def test_identity_soft_threshold(self):
        xi = make_loading([1.0, 0.2, 0.0])
        n = 50
        c_xi = self.radius_to_cxi(0.3, xi.original(), n)
        res = projection_direction(np.eye(3), xi, c_xi, n)
        assert res.feasible
        assert np.allclose(res.u_hat, [0.7, 0.0, 0.0], atol=1e-9)

    def test_huge_radius_gives_zero(self):
        xi = make_loading([1.0, 0.2, 0.0])
        n = 50
        c_xi = self.radius_to_cxi(1.5, xi.original(), n)
        res = projection_direction(np.eye(3), xi, c_xi, n)
        assert res.feasible
        assert np.allclose(res.u_hat, 0.0)
        assert res.objective == 0.0

    def test_oracle_objective_dominates(self):
        # the returned point must beat any feasible point, e.g. Sigma^{-1} xi
        rng = stream(9, 0)
        n, p = 300, 12
        x = rng.standard_normal((n, p)) @ np.linalg.cholesky(np.eye(p) + 0.3).T
        s = sample_cov(Dataset(x=x, y=np.zeros(n)))
        xi = make_loading(rng.standard_normal(p))
        res = projection_direction(s, xi, 2.0, n)
        oracle = np.linalg.solve(s, xi.original())
        assert res.feasible
        assert res.objective <= float(oracle @ (s @ oracle)) + 1e-9

    def test_complementary_slackness(self):
        rng = stream(13, 0)
        n, p = 200, 15
        x = rng.standard_normal((n, p))
        s = sample_cov(Dataset(x=x, y=np.zeros(n)))
        xi = make_loading(rng.standard_normal(p))
        res = projection_direction(s, xi, 1.0, n)
        assert res.feasible
        slack = np.abs(s @ res.u_hat - xi.original())
        active = np.abs(res.u_hat) > 1e-8
        assert np.all(np.abs(slack[active] - res.radius) < 1e-6)
        assert np.max(slack) <= res.radius * (1 + 1e-8) + 1e-9

    def test_infeasible_detection(self):
        # rank-one gram cannot reproduce a generic loading at tiny radius
        v = np.array([1.0, 0.0, 0.0])
        s = np.outer(v, v)
        xi = make_loading([0.0, 1.0, 0.0])
        res = projection_direction(s, xi, 0.01, 10**6)
        assert not res.feasible
        assert np.allclose(res.u_hat, 0.0)


class TestSpikedCov:
    def planted(self, p=6, lam=0.5):
        v = np.zeros(p)
        v[:2] = 1.0 / math.sqrt(2)
        return np.eye(p) + lam * np.outer(v, v)

    def test_identity_data_picks_empty_support(self):
        theta = ModelParams(beta=np.zeros(6), sigma_cov=np.eye(6), noise_sd=1.0)
        fit = spiked_cov_estimate(generate_dataset(theta, 4000, 7), 2)
        assert fit.b_hat == ()
        assert not fit.fell_back_identity
        assert np.array_equal(fit.sigma_hat_spike, np.eye(6))

    def test_planted_spike_monte_carlo(self):
        sigma = self.planted()
        theta = ModelParams(beta=np.zeros(6), sigma_cov=sigma, noise_sd=1.0)
        rate_bound = 3.0 * math.sqrt(2 * math.log(6) / 2000)
        support_hits = rate_hits = 0
        for seed in range(50):
            fit = spiked_cov_estimate(generate_dataset(theta, 2000, 100 + seed), 2)
            if {0, 1} <= set(fit.b_hat):
                support_hits += 1
            if np.linalg.norm(fit.sigma_hat_spike - sigma, 2) <= rate_bound:
                rate_hits += 1
            # exact zero pattern off the selected block
            mask = np.ones((6, 6), dtype=bool)
            idx = np.array(fit.b_hat, dtype=int)
            if idx.size:
                mask[np.ix_(idx, idx)] = False
            assert np.array_equal(fit.sigma_hat_spike[mask], np.eye(6)[mask])
            assert np.max(np.abs(fit.omega_hat @ fit.sigma_hat_spike - np.eye(6))) < 1e-10
        assert support_hits >= 45
        assert rate_hits >= 45

    def test_gamma_block_idempotent_and_empty(self):
        rng = stream(3, 0)
        a = rng.standard_normal((5, 5))
        a = (a + a.T) / 2
        g = gamma_block(a, (1, 3))
        assert np.array_equal(gamma_block(g, (1, 3)), g)
        assert np.array_equal(gamma_block(a, ()), np.eye(5))

    def test_budget_exceeded(self):
        theta = ModelParams(beta=np.zeros(10), sigma_cov=np.eye(10), noise_sd=1.0)
        with pytest.raises(BudgetExceeded):
            spiked_cov_estimate(generate_dataset(theta, 100, 0), 3, comb_cap=10)
