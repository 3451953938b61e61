import math
from dataclasses import dataclass

import numpy as np
import pytest

from adaptest import scca
from adaptest.errors import NotPD, OddPairCount, ScanBudgetExceeded
from adaptest.inference import mixed_test


@dataclass
class FakeInstance:
    r: np.ndarray
    rows: int = 1

    def cross_covariance(self):
        return self.r


class TestStatistics:
    def test_single_entry_matrix(self):
        r = np.zeros((3, 4))
        r[1, 2] = 1.0
        inst = FakeInstance(r)
        assert scca.scan_stat(inst, 2) == pytest.approx(0.25)
        assert scca.entrywise_max(inst) == 1.0
        assert scca.max_col(inst, 2) == pytest.approx(0.5)

    def test_all_ones_global_sum(self):
        assert scca.global_sum(FakeInstance(np.ones((2, 2)))) == 1.0

    def test_scan_equals_entrywise_at_s1(self):
        rng = np.random.default_rng(0)
        inst = FakeInstance(rng.standard_normal((5, 7)))
        assert scca.scan_stat(inst, 1) == pytest.approx(scca.entrywise_max(inst))

    def test_scan_budget(self):
        inst = FakeInstance(np.zeros((30, 30)))
        with pytest.raises(ScanBudgetExceeded):
            scca.scan_stat(inst, 10, comb_cap=1000)


class TestGeneration:
    def test_not_pd(self):
        with pytest.raises(NotPD):
            scca.gen_scca(scca.SccaParams(n=10, s=1, p1=2, p2=2, lam=1.0), "alt", 0)

    def test_null_cross_covariance_envelope(self):
        params = scca.SccaParams(n=5000, s=2, p1=10, p2=40, lam=0.0)
        bad = 0
        for seed in range(20):
            inst = scca.gen_scca(params, "null", seed)
            r = inst.cross_covariance()
            if np.max(np.abs(r)) > 5 * math.sqrt(math.log(10 * 40) / 5000):
                bad += 1
        assert bad == 0

    def test_alt_on_support_mean(self):
        params = scca.SccaParams(n=40_000, s=2, p1=10, p2=40, lam=0.3)
        inst = scca.gen_scca(params, "alt", 3)
        r = inst.cross_covariance()
        sup1 = np.flatnonzero(inst.delta1)
        sup2 = np.flatnonzero(inst.delta2)
        on = float(r[np.ix_(sup1, sup2)].mean())
        se = 1.0 / math.sqrt(params.n * 4)
        assert abs(on - params.lam / params.s) <= 3 * se

    def test_scalar_correlation(self):
        params = scca.SccaParams(n=10_000, s=1, p1=1, p2=1, lam=0.3)
        inst = scca.gen_scca(params, "alt", 9)
        corr = float(np.corrcoef(inst.u1[:, 0], inst.u2[:, 0])[0, 1])
        assert abs(corr - 0.3) <= 3.0 / math.sqrt(params.n)

    def test_determinism(self):
        params = scca.SccaParams(n=100, s=2, p1=5, p2=6, lam=0.2)
        a = scca.gen_scca(params, "alt", 42)
        b = scca.gen_scca(params, "alt", 42)
        assert a.u1.tobytes() == b.u1.tobytes()
        assert a.u2.tobytes() == b.u2.tobytes()
        assert np.array_equal(a.delta1, b.delta1)


class TestThresholdsAndBoundaries:
    def test_boundary_arithmetic(self):
        b = scca.boundary_table(10**4, 4, 10, 100)
        assert b["scan"] == pytest.approx(math.sqrt(4 * math.log(100) / 10**4), rel=1e-12)
        assert b["scan"] == pytest.approx(0.042919, rel=1e-4)

    def test_boundary_ordering(self):
        for (n, s, p1, p2) in ((4000, 2, 10, 40), (10**4, 4, 20, 200), (10**5, 8, 50, 500)):
            b = scca.boundary_table(n, s, p1, p2)
            assert b["scan"] <= b["entrywise"] * (1 + 1e-12)
            assert b["scan"] <= b["max_col"] * (1 + 1e-12)
            assert b["entrywise"] / b["scan"] == pytest.approx(math.sqrt(s), rel=1e-12)
            assert b["max_col"] / b["scan"] == pytest.approx(math.sqrt(p1 / s), rel=1e-12)

    def test_threshold_uses_exact_scan_count(self):
        t = scca.thresholds(1000, 2, 6, 8, big_c=1.0)
        n_scan = math.comb(6, 2) * math.comb(8, 2)
        assert t["scan"] == pytest.approx(math.sqrt(math.log(n_scan) / (1000 * 4)), rel=1e-12)


class TestReduction:
    def test_tau_red_arithmetic(self):
        v = scca.reduction_tau(0.1, 1.0, 0.2, 5, 100)
        expect = 0.1 / (2 - 0.01 * 0.04) * 0.04 * 5 / 10
        assert v == pytest.approx(expect, abs=1e-12)
        assert v == pytest.approx(1.00020e-3, rel=1e-4)

    def test_odd_pair_count(self):
        params = scca.SccaParams(n=11, s=1, p1=2, p2=3, lam=0.0)
        inst = scca.gen_scca(params, "null", 0)
        with pytest.raises(OddPairCount):
            scca.reduce_to_lt(inst, 1.0, 0.1, 0.0, 0)

    def test_null_moments(self):
        params = scca.SccaParams(n=20_000, s=2, p1=10, p2=40, lam=0.0)
        inst = scca.gen_scca(params, "null", 7)
        ds, problem, tau_red = scca.reduce_to_lt(inst, 1.0, 0.1, 0.0, 11)
        m = ds.n
        assert m == 10_000
        beta0 = np.zeros(50)
        beta0[0] = 0.0 - tau_red
        v1 = ds.y - ds.x @ beta0
        z = np.concatenate((v1[:, None], ds.x), axis=1)
        emp = z.T @ z / m
        assert np.max(np.abs(emp - np.eye(51))) <= 5.0 / math.sqrt(m)
        # third moments vanish for a centered Gaussian
        rng = np.random.default_rng(0)
        for _ in range(20):
            i, j, k = rng.integers(0, 51, size=3)
            third = float(np.mean(z[:, i] * z[:, j] * z[:, k]))
            assert abs(third) <= 6.0 / math.sqrt(m)
        # fourth moments: E z_i^2 z_j^2 = 1 + 2 delta_ij
        for _ in range(10):
            i, j = rng.integers(0, 51, size=2)
            fourth = float(np.mean(z[:, i] ** 2 * z[:, j] ** 2))
            assert abs(fourth - (3.0 if i == j else 1.0)) <= 30.0 / math.sqrt(m)

    def test_problem_fields(self):
        params = scca.SccaParams(n=200, s=3, p1=12, p2=20, lam=0.2)
        inst = scca.gen_scca(params, "alt", 1)
        ds, problem, tau_red = scca.reduce_to_lt(inst, 2.0, 0.3, 1.5, 4)
        assert problem.k_u == 12
        assert problem.xi.k_xi == 12
        assert problem.t0 == 1.5
        assert tau_red == pytest.approx(scca.reduction_tau(0.3, 2.0, 0.2, 3, 12))

    def test_determinism(self):
        params = scca.SccaParams(n=100, s=2, p1=5, p2=6, lam=0.1)
        inst = scca.gen_scca(params, "alt", 3)
        a, _, _ = scca.reduce_to_lt(inst, 1.0, 0.1, 0.0, 8)
        b, _, _ = scca.reduce_to_lt(inst, 1.0, 0.1, 0.0, 8)
        assert a.x.tobytes() == b.x.tobytes()
        assert a.y.tobytes() == b.y.tobytes()

    def test_composed_with_mixed_test_reports_error(self):
        # hardness-transfer integration: the composed decision rule has a
        # well-defined total error at the pilot configuration (no pass/fail
        # claim on its value)
        params = scca.SccaParams(n=240, s=1, p1=6, p2=10, lam=0.25)
        errors = 0.0
        reps = 6
        for i in range(reps):
            for hyp, want_reject in (("null", False), ("alt", True)):
                inst = scca.gen_scca(params, hyp, 100 + i)
                ds, problem, _ = scca.reduce_to_lt(inst, 1.0, 0.2, 0.0, 200 + i)
                dec = mixed_test(ds, problem)
                scca_reject = not dec.reject  # decision inversion
                errors += float(scca_reject != want_reject)
        total_error = errors / reps
        assert 0.0 <= total_error <= 2.0
        assert np.isfinite(total_error)


class TestCalibration:
    def test_null_false_positive_rate(self):
        params = scca.SccaParams(n=2000, s=2, p1=8, p2=16, lam=0.0)
        thr = scca.calibrate_thresholds(params, 300, seed=0, level=0.05)
        fp = {k: 0 for k in scca.STATISTICS}
        reps = 300
        for i in range(reps):
            inst = scca.gen_scca(params, "null", 10_000 + i)
            rep = scca.stat_report(inst, params.s, thr)
            for k in scca.STATISTICS:
                fp[k] += rep.decisions[k]
        for k, count in fp.items():
            rate = count / reps
            assert rate <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / reps)
