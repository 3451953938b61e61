"""Core data model: loading vectors, model points, datasets, and the map
between joint covariances and regression parameters.

The observation model is Y = X beta + eps with Gaussian rows
X_i ~ N(0, Sigma) and eps ~ N(0, sigma^2 I).  A model point is
theta = (beta, Sigma, sigma) together with the regularity constants
(m1, m2) bounding the spectrum of Sigma and the noise level.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroLoading, CholeskyFailure, NotPositiveDefinite

_MASK64 = (1 << 64) - 1


def stream(master_seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for logical stream (master_seed, index).

    Parallel schedulers may hand replicates to workers in any order; the
    stream key alone fixes the bits each replicate consumes.
    """
    key = [int(master_seed) & _MASK64, int(index) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key))


def sign(x):
    """Sign with the convention sign(0) = +1."""
    return np.where(np.asarray(x, dtype=float) < 0.0, -1.0, 1.0)


@dataclass(frozen=True)
class LoadingVector:
    """Loading of the linear functional, stored magnitude-sorted.

    coords holds the entries sorted by decreasing absolute value with
    stable ties; perm maps sorted position -> original index (0-based);
    k_xi counts the nonzero entries.
    """

    coords: np.ndarray
    perm: np.ndarray
    k_xi: int

    @property
    def p(self) -> int:
        return self.coords.size

    def original(self) -> np.ndarray:
        """Entries in original coordinate order."""
        out = np.empty_like(self.coords)
        out[self.perm] = self.coords
        return out

    def split(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Split into the top-m magnitude part and the remainder.

        Both pieces are returned in original coordinate order; they sum
        to the original vector exactly.
        """
        m = int(m)
        head = np.zeros(self.p)
        tail = np.zeros(self.p)
        head[self.perm[:m]] = self.coords[:m]
        tail[self.perm[m:]] = self.coords[m:]
        return head, tail

    def tail_max(self, m: int) -> float:
        """|xi_{m+1}| with the convention xi_{p+1} = 0."""
        return float(abs(self.coords[m])) if m < self.p else 0.0


def make_loading(raw) -> LoadingVector:
    """Sort a raw loading by decreasing magnitude, recording the permutation.

    Ties keep original order (stable sort) for reproducibility.
    """
    raw = np.asarray(raw, dtype=float).ravel()
    if raw.size == 0 or not np.any(raw != 0.0):
        raise AllZeroLoading("loading vector must have a nonzero entry")
    perm = np.argsort(-np.abs(raw), kind="stable")
    coords = raw[perm]
    return LoadingVector(coords=coords, perm=perm, k_xi=int(np.count_nonzero(raw)))


@dataclass(frozen=True)
class ModelParams:
    """One model point theta = (beta, Sigma, sigma) with regularity bounds."""

    beta: np.ndarray
    sigma_cov: np.ndarray
    noise_sd: float
    m1: float = 10.0
    m2: float = 10.0

    @property
    def p(self) -> int:
        return self.beta.size

    def check(self) -> bool:
        """Eigenvalue window and noise bound, by dense eigendecomposition."""
        ev = np.linalg.eigvalsh(self.sigma_cov)
        return bool(
            ev[0] >= 1.0 / self.m1 - 1e-12
            and ev[-1] <= self.m1 + 1e-12
            and 0.0 < self.noise_sd <= self.m2
        )


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError("row counts of x and y disagree")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class JointCovariance:
    """Covariance of one observation z = (y, x) stacked as (p+1) x (p+1)."""

    sigma_z: np.ndarray

    @property
    def p(self) -> int:
        return self.sigma_z.shape[0] - 1

    @property
    def yy(self) -> float:
        return float(self.sigma_z[0, 0])

    @property
    def xy(self) -> np.ndarray:
        return self.sigma_z[1:, 0]

    @property
    def xx(self) -> np.ndarray:
        return self.sigma_z[1:, 1:]


@dataclass(frozen=True)
class TestProblem:
    xi: LoadingVector
    t0: float
    k_u: int
    alpha: float
    eta: float

    def __post_init__(self):
        if self.k_u < 1:
            raise ValueError("k_u must be at least 1")
        if not 0.0 < self.alpha + self.eta < 1.0:
            raise ValueError("alpha + eta must lie in (0, 1)")


def h_map(jc: JointCovariance, m1: float = 10.0, m2: float = 10.0) -> ModelParams:
    """Recover theta = (beta, Sigma, sigma) from a joint covariance.

    beta = Sigma_xx^{-1} Sigma_xy, Sigma = Sigma_xx, and sigma^2 is the
    Schur complement of the x-block.
    """
    xx = jc.xx
    xy = jc.xy
    beta = np.linalg.solve(xx, xy)
    schur = jc.yy - float(xy @ beta)
    if schur <= 0.0:
        raise NotPositiveDefinite(f"Schur complement {schur!r} is not positive")
    return ModelParams(beta=beta, sigma_cov=xx.copy(), noise_sd=float(np.sqrt(schur)), m1=m1, m2=m2)


def h_inv(theta: ModelParams) -> JointCovariance:
    """Joint covariance of (y, x) induced by theta."""
    p = theta.p
    sb = theta.sigma_cov @ theta.beta
    sz = np.empty((p + 1, p + 1))
    sz[0, 0] = float(theta.beta @ sb) + theta.noise_sd**2
    sz[0, 1:] = sb
    sz[1:, 0] = sb
    sz[1:, 1:] = theta.sigma_cov
    return JointCovariance(sigma_z=sz)


def _cholesky_with_jitter(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-12 * np.trace(sigma) / sigma.shape[0]
    try:
        return np.linalg.cholesky(sigma + jitter * np.eye(sigma.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure("covariance is not numerically positive definite") from exc


def generate_dataset(theta: ModelParams, n: int, seed: int) -> Dataset:
    """Draw n rows X_i ~ N(0, Sigma) and Y = X beta + N(0, sigma^2 I).

    Bit-reproducible for fixed (seed, n, p): the design is drawn first,
    then the noise, from a single counter-based stream.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = stream(seed, 0)
    chol = _cholesky_with_jitter(theta.sigma_cov)
    x = rng.standard_normal((n, theta.p)) @ chol.T
    eps = theta.noise_sd * rng.standard_normal(n)
    return Dataset(x=x, y=x @ theta.beta + eps, seed=seed)


# ---------------------------------------------------------------------------
# Serialization: CSV (one header row, round-trip floats) and a small
# column-major binary container.

_MAGIC = b"ADTB"
_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def dataset_to_csv(ds: Dataset, fh: io.TextIOBase) -> None:
    cols = ["y"] + [f"x{j + 1}" for j in range(ds.p)]
    fh.write(",".join(cols) + "\n")
    for i in range(ds.n):
        fh.write(",".join([_fmt(ds.y[i])] + [_fmt(v) for v in ds.x[i]]) + "\n")


def dataset_from_csv(fh: io.TextIOBase) -> Dataset:
    header = fh.readline().strip().split(",")
    p = len(header) - 1
    rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[1] != p + 1:
        raise ValueError("ragged dataset CSV")
    return Dataset(x=data[:, 1:].copy(), y=data[:, 0].copy())


def dataset_to_bytes(ds: Dataset) -> bytes:
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<IQQ", _VERSION, ds.n, ds.p))
    buf.write(np.ascontiguousarray(ds.y, dtype="<f8").tobytes())
    buf.write(np.asfortranarray(ds.x.astype("<f8")).tobytes(order="F"))
    return buf.getvalue()


def dataset_from_bytes(raw: bytes) -> Dataset:
    if raw[:4] != _MAGIC:
        raise ValueError("bad container magic")
    version, n, p = struct.unpack("<IQQ", raw[4:24])
    if version != _VERSION:
        raise ValueError(f"unsupported container version {version}")
    off = 24
    y = np.frombuffer(raw, dtype="<f8", count=n, offset=off).copy()
    off += 8 * n
    x = np.frombuffer(raw, dtype="<f8", count=n * p, offset=off).reshape((n, p), order="F").copy()
    return Dataset(x=x, y=y)


def params_to_csv(theta: ModelParams, fh: io.TextIOBase) -> None:
    """One row per coordinate; scalar fields are replicated down the rows."""
    p = theta.p
    cols = ["beta", "noise_sd", "m1", "m2"] + [f"cov{j + 1}" for j in range(p)]
    fh.write(",".join(cols) + "\n")
    for j in range(p):
        row = [
            _fmt(theta.beta[j]),
            _fmt(theta.noise_sd),
            _fmt(theta.m1),
            _fmt(theta.m2),
        ] + [_fmt(v) for v in theta.sigma_cov[j]]
        fh.write(",".join(row) + "\n")


def params_from_csv(fh: io.TextIOBase) -> ModelParams:
    fh.readline()
    rows = [line.strip().split(",") for line in fh if line.strip()]
    p = len(rows)
    beta = np.array([float(r[0]) for r in rows])
    cov = np.array([[float(v) for v in r[4:]] for r in rows])
    if cov.shape != (p, p):
        raise ValueError("ragged params CSV")
    first = rows[0]
    return ModelParams(
        beta=beta,
        sigma_cov=cov,
        noise_sd=float(first[1]),
        m1=float(first[2]),
        m2=float(first[3]),
    )


def params_to_bytes(theta: ModelParams) -> bytes:
    buf = io.BytesIO()
    buf.write(b"ADTP")
    buf.write(struct.pack("<IQ", _VERSION, theta.p))
    buf.write(struct.pack("<ddd", theta.noise_sd, theta.m1, theta.m2))
    buf.write(np.ascontiguousarray(theta.beta, dtype="<f8").tobytes())
    buf.write(np.asfortranarray(theta.sigma_cov.astype("<f8")).tobytes(order="F"))
    return buf.getvalue()


def params_from_bytes(raw: bytes) -> ModelParams:
    if raw[:4] != b"ADTP":
        raise ValueError("bad container magic")
    version, p = struct.unpack("<IQ", raw[4:16])
    if version != _VERSION:
        raise ValueError(f"unsupported container version {version}")
    noise_sd, m1, m2 = struct.unpack("<ddd", raw[16:40])
    off = 40
    beta = np.frombuffer(raw, dtype="<f8", count=p, offset=off).copy()
    off += 8 * p
    cov = np.frombuffer(raw, dtype="<f8", count=p * p, offset=off).reshape((p, p), order="F").copy()
    return ModelParams(beta=beta, sigma_cov=cov, noise_sd=noise_sd, m1=m1, m2=m2)
