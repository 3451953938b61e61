"""Point estimators: scaled lasso, sample covariance, the inf-norm
constrained debiasing direction, and the exhaustive sparse signed-spiked
covariance estimator.

The lasso and the direction program are both solved by cyclic coordinate
descent on the Gram matrix with an active-set schedule; coordinates are
visited in ascending index order so results are deterministic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, ZeroResidualDegenerate
from .model import Dataset, LoadingVector


@dataclass(frozen=True)
class ScaledLassoFit:
    beta_hat: np.ndarray
    sigma_hat: float
    iterations: int
    converged: bool
    objectives: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class ProjectionResult:
    u_hat: np.ndarray
    feasible: bool
    radius: float
    objective: float


@dataclass(frozen=True)
class SpikedCovFit:
    sigma_hat_spike: np.ndarray
    omega_hat: np.ndarray
    b_hat: tuple
    fell_back_identity: bool


def sample_cov(data: Dataset) -> np.ndarray:
    """n^{-1} X'X, symmetrized so the result is bitwise symmetric."""
    g = data.x.T @ data.x / data.n
    return (g + g.T) / 2.0


def _soft(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _cd_quadratic_l1(
    gram: np.ndarray,
    lin: np.ndarray,
    pen: np.ndarray,
    beta0: np.ndarray,
    kkt_tol: float,
    max_passes: int,
) -> tuple[np.ndarray, bool, int]:
    """Minimize  v' G v / 2 - lin' v + sum_j pen_j |v_j|  by coordinate descent.

    Full passes in ascending index order alternate with sweeps over the
    active set until the stationarity violation drops below kkt_tol.
    Returns (v, converged, passes).  Coordinates with G_jj = 0 are held
    at zero (a zero column cannot move the objective's quadratic part).
    """
    p = lin.size
    diag = np.diag(gram).copy()
    v = beta0.copy()
    g = gram @ v if np.any(v) else np.zeros(p)
    movable = diag > 0.0

    def sweep(idx) -> float:
        nonlocal g
        delta_max = 0.0
        for j in idx:
            z = lin[j] - g[j] + diag[j] * v[j]
            new = _soft(z, pen[j]) / diag[j]
            d = new - v[j]
            if d != 0.0:
                g += gram[:, j] * d
                v[j] = new
                delta_max = max(delta_max, abs(d) * math.sqrt(diag[j]))
        return delta_max

    def kkt_violation() -> float:
        r = lin - g
        viol = np.where(
            v != 0.0,
            np.abs(r - pen * np.sign(v)),
            np.maximum(np.abs(r) - pen, 0.0),
        )
        return float(np.max(viol[movable], initial=0.0))

    all_idx = np.flatnonzero(movable)
    passes = 0
    while passes < max_passes:
        sweep(all_idx)
        passes += 1
        if kkt_violation() <= kkt_tol:
            return v, True, passes
        # polish the active set before the next full pass
        for _ in range(50):
            if passes >= max_passes:
                break
            active = np.flatnonzero((v != 0.0) & movable)
            if active.size == 0:
                break
            d = sweep(active)
            passes += 1
            if d <= kkt_tol * 1e-2:
                break
    return v, kkt_violation() <= kkt_tol, passes


def scaled_lasso(
    data: Dataset,
    *,
    lam0: float | None = None,
    max_outer: int = 500,
    rel_tol: float = 1e-8,
    sigma_floor: float = 0.0,
    gram: np.ndarray | None = None,
    xty: np.ndarray | None = None,
) -> ScaledLassoFit:
    """Joint estimate of (beta, sigma) by alternating minimization.

    For fixed sigma the beta-step is a lasso with per-column weights
    ||X_j||_2 / sqrt(n) and penalty level sigma * sqrt(2.01 log p / n);
    the sigma-step is the exact minimizer ||Y - X beta||_2 / sqrt(n).
    Stops when sigma changes by less than rel_tol (relative) or after
    max_outer rounds.
    """
    n, p = data.n, data.p
    if n < 2:
        raise ValueError("need at least two samples")
    if lam0 is None:
        lam0 = math.sqrt(2.01 * math.log(p) / n)
    g = sample_cov(data) if gram is None else gram
    b = data.x.T @ data.y / n if xty is None else xty
    yty = float(data.y @ data.y) / n
    weights = np.sqrt(np.diag(g))
    if np.any(weights == 0.0):
        raise ValueError("columns of X must not be identically zero")

    beta = np.zeros(p)
    sigma = math.sqrt(yty)
    objectives = []
    converged = False
    it = 0
    for it in range(1, max_outer + 1):
        if sigma <= 0.0:
            break
        beta, _, _ = _cd_quadratic_l1(
            g,
            b,
            sigma * lam0 * weights,
            beta,
            kkt_tol=1e-10 * max(1.0, sigma),
            max_passes=2000,
        )
        res2 = max(yty - 2.0 * float(b @ beta) + float(beta @ (g @ beta)), 0.0)
        sigma_new = math.sqrt(res2)
        objectives.append(
            res2 / (2.0 * sigma_new) + sigma_new / 2.0 + lam0 * float(weights @ np.abs(beta))
            if sigma_new > 0.0
            else math.inf
        )
        if sigma_new == 0.0:
            sigma = 0.0
            break
        done = abs(sigma_new / sigma - 1.0) < rel_tol
        sigma = sigma_new
        if done:
            converged = True
            break
    if sigma == 0.0:
        if sigma_floor > 0.0:
            sigma = sigma_floor
            converged = True
        else:
            raise ZeroResidualDegenerate("zero residual: sigma_hat is undefined")
    return ScaledLassoFit(
        beta_hat=beta,
        sigma_hat=max(sigma, sigma_floor),
        iterations=it,
        converged=converged,
        objectives=tuple(objectives),
    )


def projection_direction(
    sigma_hat: np.ndarray,
    xi: LoadingVector,
    c_xi: float,
    n: int,
    *,
    max_passes: int = 5000,
) -> ProjectionResult:
    """Solve  min u' S u  s.t.  ||S u - xi||_inf <= C_xi ||xi||_2 sqrt(log p / n).

    Solved through the equivalent l1-penalized quadratic
    min_v v'Sv/2 - xi'v + r ||v||_1, whose stationary points satisfy the
    constrained problem's KKT system.  If no feasible point emerges
    within the pass budget the zero-direction fallback is returned with
    feasible = False.
    """
    p = sigma_hat.shape[0]
    xi_orig = xi.original()
    norm2 = float(np.linalg.norm(xi_orig))
    radius = c_xi * norm2 * math.sqrt(math.log(p) / n)
    tol = 1e-9 * max(norm2, 1.0)

    diag = np.diag(sigma_hat)
    dead = diag == 0.0
    if np.any(dead & (np.abs(xi_orig) > radius + tol)):
        return ProjectionResult(u_hat=np.zeros(p), feasible=False, radius=radius, objective=0.0)

    v, ok, _ = _cd_quadratic_l1(
        sigma_hat,
        xi_orig,
        np.full(p, radius),
        np.zeros(p),
        kkt_tol=tol,
        max_passes=max_passes,
    )
    if not ok or np.max(np.abs(sigma_hat @ v - xi_orig)) > radius * (1.0 + 1e-8) + tol:
        return ProjectionResult(u_hat=np.zeros(p), feasible=False, radius=radius, objective=0.0)
    return ProjectionResult(
        u_hat=v,
        feasible=True,
        radius=radius,
        objective=float(v @ (sigma_hat @ v)),
    )


# --- exhaustive sparse signed-spiked covariance estimation -------------------


def gamma_block(a: np.ndarray, b_set) -> np.ndarray:
    """Identity outside b_set x b_set; the principal submatrix of `a` inside."""
    p = a.shape[0]
    out = np.eye(p)
    idx = np.fromiter(b_set, dtype=int, count=len(b_set))
    if idx.size:
        out[np.ix_(idx, idx)] = a[np.ix_(idx, idx)]
    return out


def _opnorm_sym(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(a))))


def _opnorm(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[0])


def _diag_bound(d: int, n: int, logp: float, gamma_star: float) -> float:
    s = math.sqrt(d / n) + math.sqrt(gamma_star * d * logp / n)
    return 2.0 * s + s * s


def _cross_bound(d: int, bsz: int, n: int, logp: float, gamma_star: float, gb_norm: float) -> float:
    return math.sqrt(gb_norm) * (
        math.sqrt(d / n) + math.sqrt(bsz / n) + math.sqrt(gamma_star * d * logp / n)
    )


def spiked_cov_estimate(
    data: Dataset,
    k_u: int,
    gamma_star: float = 3.0,
    m1: float = 10.0,
    *,
    comb_cap: int = 5_000_000,
) -> SpikedCovFit:
    """Exhaustive-search estimator for identity-plus-sparse-spike covariance.

    Candidate supports B with |B| <= k_u are screened, in ascending
    (|B|, lexicographic) order, by requiring every D in the complement
    with |D| <= k_u to look like pure identity noise: the D-block must be
    near I in operator norm and the D x B cross block must be small.
    The first survivor B is kept and the estimate is identity outside
    B x B.  Eigenvalues of the kept block must stay inside
    [1/(2 m1), 2 m1] so the inverse is well defined; if no candidate
    survives, the identity is returned with fell_back_identity = True.
    """
    if data.n < 2:
        raise ValueError("need at least two samples")
    n = data.n
    p = data.p
    s = sample_cov(data)
    logp = math.log(p)

    checked = 0

    def d_subsets(b_set: tuple) -> list[tuple]:
        comp = [j for j in range(p) if j not in b_set]
        out = []
        for d in range(1, min(k_u, len(comp)) + 1):
            out.extend(itertools.combinations(comp, d))
        return out

    eye = np.eye(p)
    for bsz in range(0, k_u + 1):
        for b_set in itertools.combinations(range(p), bsz):
            idx = np.array(b_set, dtype=int)
            gb = gamma_block(s, b_set)
            gb_norm = max(_opnorm_sym(s[np.ix_(idx, idx)]), 1.0) if bsz else 1.0
            if bsz:
                ev = np.linalg.eigvalsh(s[np.ix_(idx, idx)])
                if ev[0] < 1.0 / (2.0 * m1) or ev[-1] > 2.0 * m1:
                    continue
            ok = True
            for d_set in d_subsets(b_set):
                checked += 1
                if checked > comb_cap:
                    raise BudgetExceeded(f"enumeration exceeded cap {comb_cap}")
                didx = np.array(d_set, dtype=int)
                block = s[np.ix_(didx, didx)] - eye[np.ix_(didx, didx)]
                if _opnorm_sym(block) > _diag_bound(len(d_set), n, logp, gamma_star):
                    ok = False
                    break
                if bsz and _opnorm(s[np.ix_(didx, idx)]) > _cross_bound(
                    len(d_set), bsz, n, logp, gamma_star, gb_norm
                ):
                    ok = False
                    break
            if ok:
                omega = np.eye(p)
                if bsz:
                    omega[np.ix_(idx, idx)] = np.linalg.inv(s[np.ix_(idx, idx)])
                return SpikedCovFit(
                    sigma_hat_spike=gb,
                    omega_hat=omega,
                    b_hat=b_set,
                    fell_back_identity=False,
                )
    return SpikedCovFit(
        sigma_hat_spike=np.eye(p),
        omega_hat=np.eye(p),
        b_hat=(),
        fell_back_identity=True,
    )
