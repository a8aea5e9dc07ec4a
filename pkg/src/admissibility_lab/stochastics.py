"""Gaussian sampling, the sample mean, and conjugate-normal formulas.

Random numbers come from keyed Philox streams.  A replication index ``r``
always lives in block ``r // BLOCK_SIZE`` and every block owns its own key,
so the numbers seen by replication ``r`` do not depend on how blocks are
distributed over workers.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from .errors import DimensionError, NumericalError

__all__ = [
    "BLOCK_SIZE",
    "GaussianModel",
    "Sample",
    "substream",
    "block_ranges",
    "map_blocks",
    "draw_samples",
    "draw_sample_means",
    "iter_samples",
    "posterior_params",
    "marginal_of_mean",
    "model_from_spec",
    "model_to_spec",
]

BLOCK_SIZE = 4096


def _cholesky(matrix: np.ndarray, name: str) -> np.ndarray:
    try:
        factor = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{name} is not positive definite") from exc
    if not np.all(np.diag(factor) > 0):
        raise NumericalError(f"{name} is not positive definite")
    return factor


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """State of nature ``mu`` with known covariance ``sigma`` and ``n`` samples."""

    mu: np.ndarray
    sigma: np.ndarray
    n: int = 1

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        sigma = np.array(self.sigma, dtype=float)
        if mu.ndim != 1 or mu.size == 0:
            raise DimensionError(f"mu must be a nonempty vector, got shape {mu.shape}")
        if sigma.shape != (mu.size, mu.size):
            raise DimensionError(f"sigma has shape {sigma.shape}, expected {(mu.size, mu.size)}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise ValueError("mu and sigma must be finite")
        if np.max(np.abs(sigma - sigma.T)) > 1e-12:
            raise NumericalError("sigma is not symmetric")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        chol = _cholesky(sigma, "sigma")
        for arr in (mu, sigma, chol):
            arr.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.mu.size

    @property
    def chol(self) -> np.ndarray:
        """Lower-triangular factor ``L`` with ``L L^T = sigma``."""
        return self._chol

    @property
    def mean_cov(self) -> np.ndarray:
        """Covariance of the sample mean, ``sigma / n``."""
        return self.sigma / self.n

    def with_mu(self, mu: Any) -> "GaussianModel":
        return GaussianModel(mu, self.sigma, self.n)

    def with_n(self, n: int) -> "GaussianModel":
        return GaussianModel(self.mu, self.sigma, n)

    def __repr__(self) -> str:
        return f"GaussianModel(mu={self.mu.tolist()}, sigma={self.sigma.tolist()}, n={self.n})"


@dataclass(frozen=True, eq=False)
class Sample:
    draws: np.ndarray
    mean: np.ndarray

    @classmethod
    def from_draws(cls, draws: Any) -> "Sample":
        draws = np.array(draws, dtype=float)
        if draws.ndim != 2 or draws.shape[0] == 0:
            raise DimensionError(f"draws must be an (n, d) matrix, got shape {draws.shape}")
        mean = draws[0].copy() if draws.shape[0] == 1 else draws.mean(axis=0)
        draws.setflags(write=False)
        mean.setflags(write=False)
        return cls(draws, mean)

    @property
    def n(self) -> int:
        return self.draws.shape[0]

    @property
    def dim(self) -> int:
        return self.draws.shape[1]


def substream(seed: int, tag: str = "", index: int = 0) -> np.random.Generator:
    """Independent Philox generator keyed by ``(seed, tag, index)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF,
                                 zlib.crc32(tag.encode())])
    k0 = int(ss.generate_state(1, np.uint64)[0])
    key = np.array([k0, int(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def block_ranges(replications: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int, int]]:
    """``(block_index, start, stop)`` triples covering ``range(replications)``."""
    return [
        (b, start, min(start + block_size, replications))
        for b, start in enumerate(range(0, replications, block_size))
    ]


def map_blocks(fn: Callable[[int, int, int], Any], replications: int, workers: int = 1) -> list:
    """Apply ``fn(block, start, stop)`` to every block and return results in block order."""
    blocks = block_ranges(replications)
    if workers <= 1 or len(blocks) == 1:
        return [fn(*blk) for blk in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda blk: fn(*blk), blocks))


def draw_samples(model: GaussianModel, rng: np.random.Generator) -> Sample:
    """``n`` i.i.d. draws from ``N(mu, sigma)`` via the Cholesky factor of ``sigma``."""
    z = rng.standard_normal((model.n, model.dim))
    return Sample.from_draws(model.mu + z @ model.chol.T)


def _block_means(model: GaussianModel, rng: np.random.Generator, count: int) -> np.ndarray:
    z = rng.standard_normal((count, model.n, model.dim))
    draws = model.mu + z @ model.chol.T
    if model.n == 1:
        return draws[:, 0, :]
    return draws.mean(axis=1)


def draw_sample_means(
    model: GaussianModel,
    seed: int,
    replications: int,
    tag: str = "samples",
    workers: int = 1,
) -> np.ndarray:
    """Sample means of ``replications`` independent data sets, shape ``(replications, d)``.

    Row ``r`` is the mean of the ``n`` draws made for replication ``r``; the
    draws for different values of ``mu`` share the same underlying normals,
    which gives common random numbers across states as well as across rules.
    """

    def work(block, start, stop):
        return _block_means(model, substream(seed, tag, block), stop - start)

    return np.concatenate(map_blocks(work, replications, workers), axis=0)


def iter_samples(model: GaussianModel, seed: int, replications: int, tag: str = "samples") -> Iterator[Sample]:
    """Full :class:`Sample` objects for each replication, consistent with :func:`draw_sample_means`."""
    for block, start, stop in block_ranges(replications):
        rng = substream(seed, tag, block)
        z = rng.standard_normal((stop - start, model.n, model.dim))
        for row in model.mu + z @ model.chol.T:
            yield Sample.from_draws(row)


def posterior_params(
    prior_mean: Any,
    prior_cov: Any,
    model: GaussianModel,
    xbar: Any,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior of ``mu`` given the sample mean under a normal prior.

    Returns ``((P0 + n P)^{-1} (P0 m0 + n P xbar), (P0 + n P)^{-1})`` where
    ``P0`` and ``P`` are the prior and sampling precisions.
    """
    m0 = np.asarray(prior_mean, dtype=float)
    s0 = np.asarray(prior_cov, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    d = model.dim
    if m0.shape != (d,) or s0.shape != (d, d) or xbar.shape != (d,):
        raise DimensionError("prior mean, prior covariance and xbar must match the model dimension")
    _cholesky(s0, "prior covariance")
    try:
        p0 = np.linalg.inv(s0)
        p = np.linalg.inv(model.sigma)
        post_prec = p0 + model.n * p
        post_cov = np.linalg.inv(post_prec)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular matrix in posterior update") from exc
    post_cov = 0.5 * (post_cov + post_cov.T)
    post_mean = post_cov @ (p0 @ m0 + model.n * (p @ xbar))
    return post_mean, post_cov


def marginal_of_mean(tau: float, model: GaussianModel) -> tuple[np.ndarray, np.ndarray]:
    """Marginal law of the sample mean under the prior ``mu ~ N(0, tau^2 sigma)``."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    n = model.n
    return np.zeros(model.dim), ((n * tau**2 + 1.0) / n) * model.sigma


def model_from_spec(spec: dict, dim: int | None = None) -> GaussianModel:
    """Parse ``{"mu": [...], "sigma": [[...]], "n": k}`` or the ``sigma_diag`` shorthand.

    ``mu`` may be omitted, in which case it defaults to the origin.
    """
    if not isinstance(spec, dict):
        raise ValueError("model spec must be an object")
    if "sigma" in spec and "sigma_diag" in spec:
        raise ValueError("give either 'sigma' or 'sigma_diag', not both")
    if "sigma" in spec:
        sigma = np.asarray(spec["sigma"], dtype=float)
    elif "sigma_diag" in spec:
        sigma = np.diag(np.asarray(spec["sigma_diag"], dtype=float))
    elif dim is not None:
        sigma = np.eye(dim)
    else:
        raise ValueError("model spec needs 'sigma' or 'sigma_diag'")
    mu = spec.get("mu")
    if mu is None:
        mu = np.zeros(sigma.shape[0] if sigma.ndim == 2 else 0)
    n = spec.get("n", 1)
    if isinstance(n, bool) or not isinstance(n, int):
        raise ValueError(f"'n' must be an integer, got {n!r}")
    return GaussianModel(mu, sigma, n)


def model_to_spec(model: GaussianModel) -> dict:
    return {"mu": model.mu.tolist(), "sigma": model.sigma.tolist(), "n": model.n}
