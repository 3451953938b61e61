"""Sparse CCA detection instances, cross-covariance test statistics, and
the pairwise reduction to linear-functional testing.

An instance is n paired Gaussian rows (U1, U2); under the alternative a
hidden s x s block of the cross-covariance carries the value lambda / s.
Five statistics of the sample cross-covariance R_hat are implemented
with their thresholds and detection-boundary formulas; the reduction
consumes rows two at a time and outputs a regression sample whose null
maps to a point alternative of the linear test (decision inversion: use
one minus the linear test's decision).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import NotPD, OddPairCount, ScanBudgetExceeded
from .model import Dataset, TestProblem, make_loading, stream

STATISTICS = ("scan", "entrywise", "max_col", "max_row", "global_sum")


@dataclass(frozen=True)
class SccaParams:
    n: int
    s: int
    p1: int
    p2: int
    lam: float

    def __post_init__(self):
        if not (1 <= self.s <= min(self.p1, self.p2)):
            raise ValueError("need 1 <= s <= min(p1, p2)")


@dataclass(frozen=True)
class SccaInstance:
    params: SccaParams
    u1: np.ndarray
    u2: np.ndarray
    hypothesis: str
    delta1: np.ndarray | None = None
    delta2: np.ndarray | None = None

    @property
    def rows(self) -> int:
        return self.u1.shape[0]

    def cross_covariance(self) -> np.ndarray:
        return self.u1.T @ self.u2 / self.rows


@dataclass(frozen=True)
class StatReport:
    values: dict
    thresholds: dict
    decisions: dict


def _flat_support_vector(p: int, s: int, rng) -> np.ndarray:
    v = np.zeros(p)
    v[np.sort(rng.choice(p, size=s, replace=False))] = 1.0 / math.sqrt(s)
    return v


def gen_scca(params: SccaParams, hypothesis: str, seed: int) -> SccaInstance:
    """Sample an instance by Cholesky of the joint (p1 + p2) covariance.

    Null: independent standard normals.  Alternative: planted directions
    delta1, delta2 drawn uniformly with flat s^{-1/2} entries and joint
    cross block lambda delta1 delta2'.
    """
    if hypothesis not in ("null", "alt"):
        raise ValueError("hypothesis must be 'null' or 'alt'")
    if params.lam >= 1.0:
        raise NotPD("cross-correlation lambda must be below 1")
    rng = stream(seed, 0)
    p1, p2 = params.p1, params.p2
    d1 = d2 = None
    joint = np.eye(p1 + p2)
    if hypothesis == "alt":
        d1 = _flat_support_vector(p1, params.s, rng)
        d2 = _flat_support_vector(p2, params.s, rng)
        cross = params.lam * np.outer(d1, d2)
        joint[:p1, p1:] = cross
        joint[p1:, :p1] = cross.T
    chol = np.linalg.cholesky(joint)
    z = rng.standard_normal((params.n, p1 + p2)) @ chol.T
    return SccaInstance(
        params=params,
        u1=z[:, :p1],
        u2=z[:, p1:],
        hypothesis=hypothesis,
        delta1=d1,
        delta2=d2,
    )


# --- test statistics ---------------------------------------------------------


def scan_stat(inst: SccaInstance, s: int, comb_cap: int = 10_000_000) -> float:
    """Max averaged s x s submatrix of R_hat, exact over all supports.

    For a fixed row set the optimal column set is the top-s column sums,
    so the cost is C(p1, s) * p2 log p2 even though the enumerated space
    has C(p1, s) * C(p2, s) candidates (which must fit the cap).
    """
    r = inst.cross_covariance()
    p1, p2 = r.shape
    if math.comb(p1, s) * math.comb(p2, s) > comb_cap:
        raise ScanBudgetExceeded("scan enumeration exceeds the configured cap")
    best = -math.inf
    for rows in combinations(range(p1), s):
        colsums = r[list(rows)].sum(axis=0)
        top = np.sort(colsums)[-s:]
        best = max(best, float(top.sum()))
    return best / (s * s)


def entrywise_max(inst: SccaInstance) -> float:
    return float(inst.cross_covariance().max())


def max_col(inst: SccaInstance, s: int) -> float:
    return float(inst.cross_covariance().sum(axis=0).max()) / s


def max_row(inst: SccaInstance, s: int) -> float:
    return float(inst.cross_covariance().sum(axis=1).max()) / s


def global_sum(inst: SccaInstance) -> float:
    r = inst.cross_covariance()
    return float(r.sum()) / (r.shape[0] * r.shape[1])


def log_n_scan(p1: int, p2: int, s: int) -> float:
    return (
        math.lgamma(p1 + 1)
        - math.lgamma(s + 1)
        - math.lgamma(p1 - s + 1)
        + math.lgamma(p2 + 1)
        - math.lgamma(s + 1)
        - math.lgamma(p2 - s + 1)
    )


def thresholds(n: int, s: int, p1: int, p2: int, big_c: float = 1.0) -> dict:
    """Rejection thresholds at a common multiplier big_c.

    n is the number of rows entering R_hat.  The scan threshold uses the
    exact log candidate count; the entrywise and global-sum thresholds
    follow the null fluctuation scales of those statistics.
    """
    return {
        "scan": big_c * math.sqrt(log_n_scan(p1, p2, s) / (n * s * s)),
        "entrywise": big_c * math.sqrt(math.log(p1 * p2) / n),
        "max_col": big_c * math.sqrt(p1 * math.log(p2) / (n * s * s)),
        "max_row": big_c * math.sqrt(p2 * math.log(p1) / (n * s * s)),
        "global_sum": big_c * math.sqrt(1.0 / (n * p1 * p2)),
    }


def boundary_table(n: int, s: int, p1: int, p2: int) -> dict:
    """Detection-boundary values of lambda for each statistic, constant 1."""
    return {
        "scan": math.sqrt(s * math.log(p2) / n),
        "entrywise": s * math.sqrt(math.log(p2) / n),
        "max_col": math.sqrt(p1 * math.log(p2) / n),
        "max_row": math.sqrt(p2 * math.log(p1) / n),
        "global_sum": math.sqrt(p1 * p2 / (n * s * s)),
    }


def stat_values(inst: SccaInstance, s: int) -> dict:
    return {
        "scan": scan_stat(inst, s),
        "entrywise": entrywise_max(inst),
        "max_col": max_col(inst, s),
        "max_row": max_row(inst, s),
        "global_sum": global_sum(inst),
    }


def stat_report(inst: SccaInstance, s: int, thresh: dict) -> StatReport:
    values = stat_values(inst, s)
    return StatReport(
        values=values,
        thresholds=dict(thresh),
        decisions={k: values[k] > thresh[k] for k in values},
    )


# --- reduction to linear-functional testing ----------------------------------


def reduction_tau(c10: float, sigma_star: float, rho: float, k_star: int, p6: int) -> float:
    """Exact induced functional value of the mapped alternative."""
    return c10 * sigma_star / (2.0 - c10**2 * rho**2) * rho**2 * k_star / math.sqrt(p6)


def reduce_to_lt(
    inst: SccaInstance,
    sigma_star: float,
    c10: float,
    t0: float,
    seed: int,
    alpha: float = 0.05,
    eta: float = 0.05,
) -> tuple[Dataset, TestProblem, float]:
    """Map an SCCA instance to a linear-test sample, consuming row pairs.

    Each output row uses two input rows (U1, U2) and (U1', U2'):
    the response is sigma_star * mean-normalized sum of U1', the design
    stacks -c10 U1 + sqrt(1 - c10^2) V_fresh with (U2 + U2')/sqrt(2),
    and the response is re-anchored by beta0 = (t0 - tau_red) e1 so the
    SCCA null lands exactly on a linear-test alternative point (and the
    SCCA alternative inside the linear-test null class).  Callers must
    invert the linear test's decision.
    """
    if not 0.0 < c10 < 1.0:
        raise ValueError("need 0 < c10 < 1")
    if inst.rows % 2 != 0:
        raise OddPairCount("reduction consumes rows two at a time")
    rng = stream(seed, 0)
    p6, p7 = inst.params.p1, inst.params.p2
    s = inst.params.s
    u1, u2 = inst.u1[0::2], inst.u2[0::2]
    u1p, u2p = inst.u1[1::2], inst.u2[1::2]
    m = u1.shape[0]

    w1 = u1p.sum(axis=1) / math.sqrt(p6)
    v_star = rng.standard_normal((m, p6))
    v1 = sigma_star * w1
    v2 = -c10 * u1 + math.sqrt(1.0 - c10**2) * v_star
    v3 = (u2 + u2p) / math.sqrt(2.0)

    tau_red = reduction_tau(c10, sigma_star, inst.params.lam, s, p6)
    x = np.concatenate((v2, v3), axis=1)
    beta0 = np.zeros(p6 + p7)
    beta0[0] = t0 - tau_red
    y = v1 + x @ beta0

    xi = make_loading(np.concatenate((np.ones(p6), np.zeros(p7))))
    problem = TestProblem(xi=xi, t0=t0, k_u=4 * s, alpha=alpha, eta=eta)
    return Dataset(x=x, y=y, seed=seed), problem, tau_red


def calibrate_thresholds(
    params: SccaParams,
    reps: int,
    seed: int,
    level: float = 0.05,
) -> dict:
    """Null Monte Carlo thresholds: per-statistic empirical (1 - level) quantile."""
    samples = {k: np.empty(reps) for k in STATISTICS}
    for i in range(reps):
        inst = gen_scca(params, "null", seed + i)
        for k, v in stat_values(inst, params.s).items():
            samples[k][i] = v
    return {k: float(np.quantile(v, 1.0 - level, method="higher")) for k, v in samples.items()}
