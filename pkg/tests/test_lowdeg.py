import math

import numpy as np
import pytest

from adaptest import lowdeg as ld
from adaptest import priors as pri
from adaptest.errors import SizeBudget
from adaptest.model import make_loading, stream


def tiny_comp_sampler(xi, seed, c8=0.4, c9=0.05):
    return pri.sample_comp_prior(
        xi, 1, 2, 3, 1,
        c8=c8, c9=c9, seed=seed, sigma_star=1.0,
        k_eff_override=2, s1_override=1, allow_tiny=True,
    )


def valid_draws(xi, count, start=0):
    out, s = [], start
    while len(out) < count:
        d = tiny_comp_sampler(xi, s)
        s += 1
        if d.valid:
            out.append(d)
    return out


class TestHermiteMoment:
    def test_linear_case(self):
        assert ld.hermite_moment([1], [1], np.array([0.3]), np.array([1.0])) == pytest.approx(0.3)

    def test_quadratic_isserlis(self):
        # E[(U^2-1)(V^2-1)]/2 = rho^2 for unit-variance pairs
        rho = 0.45
        assert ld.hermite_moment([2], [2], np.array([rho]), np.array([1.0])) == pytest.approx(rho**2)

    def test_mixed_index(self):
        v = ld.hermite_moment([1, 1], [2], np.array([0.2, 0.4]), np.array([0.5]))
        assert v == pytest.approx(math.sqrt(2) * 0.2 * 0.4 * 0.25, rel=1e-12)

    def test_degree_mismatch_vanishes(self):
        rng = stream(0, 0)
        for _ in range(50):
            a, b = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            mu = rng.integers(0, 3, size=a)
            nu = rng.integers(0, 3, size=b)
            if mu.sum() == nu.sum():
                continue
            r = rng.standard_normal(a) * 0.2
            c = rng.standard_normal(b) * 0.2
            assert ld.hermite_moment(mu, nu, r, c) == 0.0

    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(5)
        r = np.array([0.2, 0.4])
        c = np.array([0.5])
        cov = np.block([[np.eye(2), np.outer(r, c)], [np.outer(c, r), np.eye(1)]])
        chol = np.linalg.cholesky(cov)
        z = rng.standard_normal((1_000_000, 3)) @ chol.T
        h2 = (z[:, 2] ** 2 - 1) / math.sqrt(2)
        samples = z[:, 0] * z[:, 1] * h2
        se = float(np.std(samples)) / math.sqrt(len(samples))
        formula = ld.hermite_moment([1, 1], [2], r, c)
        assert abs(float(np.mean(samples)) - formula) <= 3 * se

    def test_rank_one_gaussian_invariant(self):
        with pytest.raises(ValueError):
            ld.RankOneGaussian(r=np.array([2.0]), c=np.array([0.6]))


class TestLdNorm:
    xi = make_loading([1.0, 0.9, 0.8])

    def test_degree_zero_is_one(self):
        draws = valid_draws(self.xi, 6)
        assert ld.ld_norm(draws, 0, 2) == 1.0

    def test_point_mass_is_one(self):
        draws = [pri.point_mass_draw(self.xi, 1.0) for _ in range(4)]
        for deg in (0, 1, 2, 3):
            assert ld.ld_norm(draws, deg, 2) == 1.0

    def test_nondecreasing_in_degree_and_at_least_one(self):
        draws = valid_draws(self.xi, 20)
        vals = [ld.ld_norm(draws, d, 2) for d in range(5)]
        assert vals[0] == 1.0
        for a, b in zip(vals, vals[1:]):
            assert b >= a - 1e-13
        assert all(v >= 1.0 for v in vals)

    def test_converges_to_closed_form(self):
        draws = valid_draws(self.xi, 10)
        pairs = [(draws[i], draws[i + 1]) for i in range(0, 9, 2)]
        closed = float(np.mean([pri.chi2_pair_closed_form(a, b, 2) for a, b in pairs]))
        assert ld.ld_norm(draws, 8, 2) == pytest.approx(closed, rel=1e-9)

    def test_sign_alignment_per_index(self):
        d1, d2 = valid_draws(self.xi, 2)
        r1, c1 = d1.rank_one_factors()
        r2, c2 = d2.rank_one_factors()
        for alpha in ld._indices_up_to(r1.size + c1.size, 3):
            mu, nu = alpha[: r1.size], alpha[r1.size :]
            f1 = ld.hermite_moment(mu, nu, r1, c1)
            f2 = ld.hermite_moment(mu, nu, r2, c2)
            assert f1 * f2 >= 0.0

    def test_size_budget(self):
        draws = valid_draws(self.xi, 2)
        with pytest.raises(SizeBudget):
            ld.ld_norm(draws, 4, 2, index_cap=10)


class TestUniformBound:
    def test_hand_value(self):
        assert ld.ld_uniform_bound(1, 1, 1) == pytest.approx(math.log(9 * 6**4), rel=1e-12)

    def test_monotone_grid(self):
        vals = [
            ld.ld_uniform_bound(n, p, d)
            for n in (1, 2, 4)
            for p in (1, 3)
            for d in (1, 2)
        ]
        for n in (1, 2):
            assert ld.ld_uniform_bound(n + 1, 2, 2) > ld.ld_uniform_bound(n, 2, 2)
        assert ld.ld_uniform_bound(2, 3, 2) > ld.ld_uniform_bound(2, 2, 2)
        assert ld.ld_uniform_bound(2, 2, 3) > ld.ld_uniform_bound(2, 2, 2)
        assert all(np.isfinite(vals))

    def test_dominates_tiny_instances(self):
        xi = make_loading([1.0, 0.9, 0.8])
        draws = valid_draws(xi, 6)
        for deg in (1, 2):
            assert math.log(ld.ld_norm(draws, deg, 2)) <= ld.ld_uniform_bound(2, 3, deg)
