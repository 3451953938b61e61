"""Experiment orchestration: configuration parsing, Monte Carlo drivers
for size/power, interval-length sweeps and phase diagrams, and result
tables.

A configuration is a flat key = value text file.  Results are rows
(config digest, replicate, metric, value, se); per-replicate rows carry
no standard error, aggregate rows (replicate -1) carry a binomial or
delta-method one.  Replicates fan out over a thread pool but each owns
the stream (master_seed, replicate), and aggregation reduces in
replicate order, so tables are bit-identical for any thread count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError
from .estimators import scaled_lasso, sample_cov, projection_direction, spiked_cov_estimate
from .inference import (
    Constants,
    TestDecision,
    debiased_ci,
    known_sigma_ci,
    mixed_ci,
    mixed_test,
    plugin_ci,
    spiked_ci,
)
from .model import Dataset, LoadingVector, ModelParams, TestProblem, generate_dataset, make_loading
from .priors import PriorDraw, sample_nu1_prior, sample_nu2_prior
from .profiles import example_profiles, nu1 as nu1_value, regular_phase

TEST_MODES = ("mixed", "plugin", "debiased", "known_sigma", "spiked")


@dataclass
class ExperimentConfig:
    kind: str = "size_power"
    n: int = 200
    p: int = 100
    k_u: int = 4
    k: int = 2
    degree: int = 1
    alpha: float = 0.05
    eta: float = 0.05
    reps: int = 100
    master_seed: int = 0
    threads: int = 1
    out: str = "."
    modes: str = "mixed"
    loading: str = "regular"
    loading_k: int = 4
    loading_a: float = 1.0
    loading_l: int = 2
    loading_q: float = 2.0
    loading_csv: str = ""
    beta_scale: float = 1.0
    t0: float = 0.0
    tau_grid: str = "0.0"
    null_source: str = "point"
    sigma_star: float = 5.0
    noise_sd: float = 1.0
    scan_all_m: bool = False
    m_grid: int = 16
    gamma_xi_grid: str = "0.2,0.4,0.6"
    gamma_tau_grid: str = "0.2,0.4,0.6"
    gamma_u: float = 0.3
    gamma_n: float = 0.8

    def taus(self) -> list[float]:
        return [float(v) for v in str(self.tau_grid).split(",") if v != ""]

    def mode_list(self) -> list[str]:
        out = [m.strip() for m in str(self.modes).split(",") if m.strip()]
        for m in out:
            if m not in TEST_MODES:
                raise ConfigError(f"unknown test mode {m!r}")
        return out


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    f = _FIELDS[name]
    if f.type == "bool" or isinstance(f.default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean {name} = {raw!r}")
    try:
        if isinstance(f.default, int) and not isinstance(f.default, bool):
            return int(raw)
        if isinstance(f.default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name} = {raw!r}") from exc
    return raw.strip()


def parse_config(text: str) -> ExperimentConfig:
    """Parse key = value lines; '#' starts a comment, blank lines skipped."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return ExperimentConfig(**values)


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def config_digest(cfg: ExperimentConfig) -> str:
    """Stable hash of the semantic fields: thread budget and output path
    do not change what is computed, so they stay out of the digest."""
    payload = dataclasses.asdict(cfg)
    payload.pop("threads", None)
    payload.pop("out", None)
    canon = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ResultRow:
    digest: str
    replicate: int
    metric: str
    value: float
    se: float | None = None


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    buf.write("digest,replicate,metric,value,se\n")
    for r in rows:
        se = "" if r.se is None else repr(float(r.se))
        buf.write(f"{r.digest},{r.replicate},{r.metric},{repr(float(r.value))},{se}\n")
    return buf.getvalue()


def _binomial_se(mean: float, count: int) -> float:
    if count <= 0:
        return 0.0
    return math.sqrt(max(mean * (1.0 - mean), 0.0) / count)


def build_loading(cfg: ExperimentConfig) -> LoadingVector:
    if cfg.loading_csv:
        raw = np.loadtxt(cfg.loading_csv, delimiter=",", skiprows=1, ndmin=1)
        return make_loading(raw)
    params = {
        "K": cfg.loading_k,
        "a": cfg.loading_a,
        "k_u": cfg.k_u,
        "L": cfg.loading_l,
        "q": cfg.loading_q,
        "p": cfg.p,
    }
    return example_profiles(cfg.loading, params, cfg.master_seed)


def null_point(xi: LoadingVector, k: int, target: float, scale: float, p: int, noise_sd: float) -> ModelParams:
    """Model point with support on the k largest loading coordinates and
    xi'beta equal to target exactly (beta = 0 when target = 0)."""
    beta = np.zeros(p)
    if target != 0.0:
        denom = float(np.sum(xi.coords[:k]))
        if denom == 0.0:
            raise ConfigError("loading has no mass on the first k coordinates")
        beta[xi.perm[:k]] = target / denom
    return ModelParams(beta=beta, sigma_cov=np.eye(p), noise_sd=noise_sd)


def null_draw_theta(cfg: ExperimentConfig, xi: LoadingVector, rep: int) -> ModelParams:
    """Null model point for one replicate, per cfg.null_source.

    Prior sources re-anchor a least-favorable draw to t0; degenerate or
    invalid draws fall back to the fixed null point for that replicate.
    """
    if cfg.null_source == "point":
        return null_point(xi, cfg.k, cfg.t0, cfg.beta_scale, cfg.p, cfg.noise_sd)
    seed = cfg.master_seed + 3_000_017 * (rep + 1)
    if cfg.null_source == "nu2":
        draw = sample_nu2_prior(xi, cfg.k_u, cfg.n, cfg.p, cfg.sigma_star, seed=seed)
    elif cfg.null_source == "nu1":
        tau = 0.0125 * nu1_value(xi, cfg.k_u) / math.sqrt(cfg.n)
        draw = sample_nu1_prior(xi, cfg.k_u, cfg.n, tau, seed=seed, sigma_star=cfg.sigma_star)
    else:
        raise ConfigError(f"unknown null_source {cfg.null_source!r}")
    if not draw.valid:
        return null_point(xi, cfg.k, cfg.t0, cfg.beta_scale, cfg.p, cfg.noise_sd)
    return translate_draw(draw, xi, cfg.t0)


def translate_draw(draw: PriorDraw, xi: LoadingVector, t0: float) -> ModelParams:
    """Re-anchor a prior draw so that xi'beta = t0; adds at most one
    support coordinate (the first support coordinate of xi).

    Prior draws live in the magnitude-sorted coordinate system; the
    result is permuted back to original coordinates so it can feed the
    estimators directly.
    """
    j0 = int(np.flatnonzero(xi.coords)[0])
    beta_s = draw.beta.copy()
    beta_s[j0] += (t0 - draw.tau) / float(xi.coords[j0])
    sigma_s = draw.theta.sigma_cov
    beta = np.empty_like(beta_s)
    beta[xi.perm] = beta_s
    sigma = np.empty_like(sigma_s)
    sigma[np.ix_(xi.perm, xi.perm)] = sigma_s
    return ModelParams(beta=beta, sigma_cov=sigma, noise_sd=draw.theta.noise_sd)


def run_single_test(
    mode: str,
    data: Dataset,
    problem: TestProblem,
    constants: Constants,
    seed: int,
    scan_all_m: bool = False,
) -> TestDecision:
    """Dispatch one test mode on one dataset.

    plugin / debiased are the single-interval endpoints; known_sigma uses
    the identity design covariance; spiked fits the exhaustive estimator
    on the first data half.
    """
    xi = problem.xi
    n, p = data.n, data.p
    if mode == "mixed":
        return mixed_test(data, problem, constants, scan_all_m=scan_all_m)
    if mode == "plugin":
        fit = scaled_lasso(data, sigma_floor=constants.sigma_floor)
        ci = plugin_ci(fit, xi.original(), problem.k_u, n, p, problem.alpha, constants)
        return TestDecision(reject=not ci.covers(problem.t0), interval=ci, m_used=0, t0=problem.t0)
    if mode == "debiased":
        gram = sample_cov(data)
        fit = scaled_lasso(data, gram=gram, xty=data.x.T @ data.y / n, sigma_floor=constants.sigma_floor)
        proj = projection_direction(gram, xi, constants.c_xi, n)
        ci = debiased_ci(data, fit, proj, xi.original(), problem.k_u, problem.alpha, constants)
        return TestDecision(reject=not ci.covers(problem.t0), interval=ci, m_used=p, t0=problem.t0)
    if mode == "known_sigma":
        ci = known_sigma_ci(data, np.eye(p), xi.original(), problem.k_u, problem.alpha, seed, constants)
        return TestDecision(reject=not ci.covers(problem.t0), interval=ci, m_used=p, t0=problem.t0)
    if mode == "spiked":
        from .inference import split_half

        half1, _ = split_half(data, seed)
        spk = spiked_cov_estimate(half1, problem.k_u)
        ci = spiked_ci(data, spk, xi, problem.k_u, problem.alpha, seed, constants)
        return TestDecision(reject=not ci.covers(problem.t0), interval=ci, m_used=p, t0=problem.t0)
    raise ConfigError(f"unknown test mode {mode!r}")


def _map_replicates(worker, reps: int, threads: int) -> list:
    if reps == 0:
        return []
    if threads <= 1:
        return [worker(i) for i in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(reps)))


def run_size_power(cfg: ExperimentConfig, constants: Constants = Constants()) -> list[ResultRow]:
    """Empirical rejection rates under the null point and shifted
    alternatives, per test mode and per tau on the grid."""
    digest = config_digest(cfg)
    xi = build_loading(cfg)
    if xi.p != cfg.p:
        raise ConfigError("loading dimension disagrees with p")
    modes = cfg.mode_list()
    taus = cfg.taus()
    theta_alts = [
        null_point(xi, cfg.k, cfg.t0 + tau, cfg.beta_scale, cfg.p, cfg.noise_sd) for tau in taus
    ]
    problem = TestProblem(xi=xi, t0=cfg.t0, k_u=cfg.k_u, alpha=cfg.alpha, eta=cfg.eta)

    def worker(rep: int):
        out = []
        base = cfg.master_seed
        theta_null = null_draw_theta(cfg, xi, rep)
        data_null = generate_dataset(theta_null, cfg.n, seed=base + 1_000_003 * (rep + 1))
        for mode in modes:
            dec = run_single_test(mode, data_null, problem, constants, seed=base + rep, scan_all_m=cfg.scan_all_m)
            out.append((f"reject/null/{mode}", rep, float(dec.reject)))
            out.append((f"radius/null/{mode}", rep, float(dec.interval.radius)))
        for tau, theta_alt in zip(taus, theta_alts):
            data_alt = generate_dataset(theta_alt, cfg.n, seed=base + 2_000_003 * (rep + 1))
            for mode in modes:
                dec = run_single_test(mode, data_alt, problem, constants, seed=base + rep, scan_all_m=cfg.scan_all_m)
                out.append((f"reject/alt/{mode}/tau={repr(float(tau))}", rep, float(dec.reject)))
        return out

    per_rep = _map_replicates(worker, cfg.reps, cfg.threads)
    rows = [
        ResultRow(digest, rep, metric, value)
        for chunk in per_rep
        for metric, rep, value in chunk
    ]
    rows.extend(_aggregate(digest, rows, cfg.reps))
    return rows


def _aggregate(digest: str, rows: list[ResultRow], reps: int) -> list[ResultRow]:
    grouped: dict[str, list[float]] = {}
    for r in rows:
        if r.replicate >= 0:
            grouped.setdefault(r.metric, []).append(r.value)
    out = []
    for metric in sorted(grouped):
        vals = grouped[metric]
        mean = math.fsum(vals) / len(vals)
        if metric.startswith("reject/"):
            se = _binomial_se(mean, len(vals))
        else:
            var = math.fsum((v - mean) ** 2 for v in vals) / max(len(vals) - 1, 1)
            se = math.sqrt(var / len(vals))
        out.append(ResultRow(digest, -1, "mean/" + metric, mean, se))
    return out


def m_cutoff_grid(p: int, size: int) -> list[int]:
    """At least `size` distinct cutoffs in 0..p (all of them if p is small),
    log-spaced with both endpoints."""
    want = min(size, p + 1)
    num = max(size - 2, 1)
    while True:
        grid = sorted({0, p} | {int(round(v)) for v in np.geomspace(1, p, num=num)})
        if len(grid) >= want or num > 4 * (p + 1):
            return grid
        num *= 2


def run_length_sweep(cfg: ExperimentConfig, constants: Constants = Constants()) -> list[ResultRow]:
    """Realized mixed-interval radii over a grid of cutoffs m."""
    digest = config_digest(cfg)
    xi = build_loading(cfg)
    if xi.p != cfg.p:
        raise ConfigError("loading dimension disagrees with p")
    theta = null_point(xi, cfg.k, cfg.t0, cfg.beta_scale, cfg.p, cfg.noise_sd)
    grid = m_cutoff_grid(cfg.p, cfg.m_grid)

    def worker(rep: int):
        data = generate_dataset(theta, cfg.n, seed=cfg.master_seed + 1_000_003 * (rep + 1))
        gram = sample_cov(data)
        fit = scaled_lasso(data, gram=gram, xty=data.x.T @ data.y / data.n, sigma_floor=constants.sigma_floor)
        out = []
        for m in grid:
            ci = mixed_ci(data, fit, xi, m, cfg.k_u, cfg.alpha, cfg.eta, constants, gram=gram)
            out.append((f"radius/m={m}", rep, ci.radius))
        return out

    per_rep = _map_replicates(worker, cfg.reps, cfg.threads)
    rows = [ResultRow(digest, rep, metric, value) for chunk in per_rep for metric, rep, value in chunk]
    rows.extend(_aggregate(digest, rows, cfg.reps))
    return rows


def run_phase_diagram(cfg: ExperimentConfig, constants: Constants = Constants()) -> list[ResultRow]:
    """Power of the mixed test over a (gamma_xi, gamma_tau) grid.

    Sizes follow the exponent parametrization n = p^gamma_n and
    k_u = p^gamma_u; each cell's metric name carries its phase label.
    """
    digest = config_digest(cfg)
    p = cfg.p
    n = max(int(round(p**cfg.gamma_n)), 4)
    k_u = max(int(round(p**cfg.gamma_u)), 1)
    g_xi = [float(v) for v in str(cfg.gamma_xi_grid).split(",") if v != ""]
    g_tau = [float(v) for v in str(cfg.gamma_tau_grid).split(",") if v != ""]
    rows: list[ResultRow] = []
    for gxi in g_xi:
        k_xi = min(max(int(round(p**gxi)), 1), p)
        xi = make_loading(np.concatenate((np.ones(k_xi), np.zeros(p - k_xi))))
        for gtau in g_tau:
            tau = p**gtau / math.sqrt(n)
            label, _ = regular_phase(gxi, cfg.gamma_u, cfg.gamma_n, gtau)
            theta_alt = null_point(xi, min(cfg.k, k_u), cfg.t0 + tau, cfg.beta_scale, p, cfg.noise_sd)
            problem = TestProblem(xi=xi, t0=cfg.t0, k_u=k_u, alpha=cfg.alpha, eta=cfg.eta)

            def worker(rep: int):
                data = generate_dataset(theta_alt, n, seed=cfg.master_seed + 1_000_003 * (rep + 1))
                dec = mixed_test(data, problem, constants)
                return float(dec.reject)

            vals = _map_replicates(worker, cfg.reps, cfg.threads)
            metric = f"reject/gxi={gxi}/gtau={gtau}/label={label}"
            rows.extend(ResultRow(digest, i, metric, v) for i, v in enumerate(vals))
    rows.extend(_aggregate(digest, rows, cfg.reps))
    return rows


RUNNERS = {
    "size_power": run_size_power,
    "length_sweep": run_length_sweep,
    "phase_diagram": run_phase_diagram,
}


def run_experiment(cfg: ExperimentConfig, constants: Constants = Constants()) -> list[ResultRow]:
    if cfg.kind not in RUNNERS:
        raise ConfigError(f"unknown experiment kind {cfg.kind!r}")
    return RUNNERS[cfg.kind](cfg, constants)


def plotdata_rows(rows: list[ResultRow]) -> list[tuple[str, float, float, float]]:
    """(series, x, y, se) triples from aggregate rows whose metric ends
    with a numeric key=value component."""
    out = []
    for r in rows:
        if r.replicate != -1:
            continue
        parts = r.metric.split("/")
        x = math.nan
        series_parts = []
        for part in parts:
            if "=" in part:
                key, val = part.split("=", 1)
                try:
                    x = float(val)
                    series_parts.append(key)
                    continue
                except ValueError:
                    pass
            series_parts.append(part)
        out.append(("/".join(series_parts), x, r.value, 0.0 if r.se is None else r.se))
    return out
