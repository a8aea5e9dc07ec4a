"""Numerical probes of the admissibility arguments.

* ``f_value``/``fd_hessian`` -- the risk difference ``F(mu) = R(mu, rule) - R(mu, SA)``
  and its finite-difference Hessian at the origin.
* ``g_matrix_at_zero``/``hessian_at_zero`` -- the moment matrices ``E(0)``, ``G(0)``
  and the Hessian ``n (S^-1 G + G^T S^-1)`` they predict.
* ``blyth_*`` -- Bayes-risk gap between the sample-average rule and the Bayes
  rule under the prior ``N(center, tau^2 sigma)``, normalised by prior mass.
* ``consistency_*`` -- decay of the sample-average risk with the sample size.

All integrals are taken as expectations, so density normalising constants
never appear.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import special

from .errors import DimensionError, NumericalError, UnsupportedRegionError
from .geometry import Ball, Box, FeasibleRegion, center_of, project
from .risk import ObjectiveKind, _mean_se, sample_average_rule, sample_losses
from .rules import DecisionRule, SampleAverageLinear, apply_rule_to_means, bayes_shrink_factor
from .stochastics import (
    BLOCK_SIZE,
    GaussianModel,
    _cholesky,
    draw_sample_means,
    map_blocks,
    substream,
)

__all__ = [
    "GMatrixEstimate",
    "BlythReport",
    "ConsistencyReport",
    "f_value",
    "fd_hessian",
    "claim_margins",
    "g_matrix_at_zero",
    "hessian_at_zero",
    "hessian_trace_at_zero",
    "hessian_trace_std_error",
    "blyth_numerator",
    "blyth_denominator",
    "blyth_cross_term",
    "blyth_scan",
    "loglog_slope",
    "consistency_scan",
    "consistency_slope",
]


# --------------------------------------------------------------------------
# risk difference and its curvature at the origin


def _paired_f_samples(mu, rule, kind, model, region, replications, seed, workers=1) -> np.ndarray:
    model = model.with_mu(mu)
    means = draw_sample_means(model, seed, replications, workers=workers)
    kind = ObjectiveKind(kind)
    return (
        sample_losses(rule, kind, model, region, means)
        - sample_losses(sample_average_rule(kind), kind, model, region, means)
    )


def f_value(
    mu: Any,
    rule: DecisionRule,
    kind: ObjectiveKind,
    model: GaussianModel,
    region: FeasibleRegion,
    replications: int,
    seed: int,
    workers: int = 1,
) -> tuple[float, float]:
    """Paired estimate of ``R(mu, rule) - R(mu, SA)`` and its standard error.

    ``model`` supplies ``sigma`` and ``n``; its ``mu`` is replaced by the argument.
    """
    return _mean_se(_paired_f_samples(mu, rule, kind, model, region, replications, seed, workers))


def fd_hessian(
    rule: DecisionRule,
    kind: ObjectiveKind,
    model: GaussianModel,
    region: FeasibleRegion,
    replications: int,
    seed: int,
    step: float = 0.05,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference Hessian of ``f_value`` at the origin with its standard errors.

    Every stencil point reuses the same sample stream, so the stencil is
    evaluated per replication and the standard error comes from the spread of
    those per-replication Hessians.
    """
    d = model.dim
    h = step
    eye = np.eye(d)
    cache: dict[tuple, np.ndarray] = {}

    def f_at(offset):
        key = tuple(np.round(offset / h).astype(int))
        if key not in cache:
            cache[key] = _paired_f_samples(offset, rule, kind, model, region, replications, seed, workers)
        return cache[key]

    zero = np.zeros(d)
    hess = np.empty((d, d))
    se = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            if i == j:
                per = (f_at(h * eye[i]) - 2.0 * f_at(zero) + f_at(-h * eye[i])) / h**2
            else:
                per = (
                    f_at(h * (eye[i] + eye[j]))
                    - f_at(h * (eye[i] - eye[j]))
                    - f_at(h * (eye[j] - eye[i]))
                    + f_at(-h * (eye[i] + eye[j]))
                ) / (4.0 * h**2)
            hess[i, j], se[i, j] = _mean_se(per)
            hess[j, i], se[j, i] = hess[i, j], se[i, j]
    return hess, se


def claim_margins(rule: DecisionRule, region: FeasibleRegion, means: np.ndarray, n: int) -> np.ndarray:
    """``y^T (rule(y) - SA(y))`` for each row ``y``; nonnegative because SA minimizes ``y^T x``."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    diff = apply_rule_to_means(rule, region, means, n) - apply_rule_to_means(
        SampleAverageLinear(), region, means, n
    )
    return np.einsum("ij,ij->i", means, diff)


@dataclass(frozen=True, eq=False)
class GMatrixEstimate:
    """Monte Carlo estimates of ``E(0)`` and ``G(0)``.

    ``matrix[i, j] = E[y_i (rule(y) - SA(y))_j]`` and
    ``e_vector = E[rule(y) - SA(y)]`` with ``y ~ N(0, sigma/n)``.
    ``matrix_cov`` is the covariance of the row-major flattened ``matrix``
    estimate; it gives standard errors of any linear function of ``G``.
    """

    matrix: np.ndarray
    e_vector: np.ndarray
    matrix_std_errors: np.ndarray
    e_std_errors: np.ndarray
    replications: int
    matrix_cov: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    @property
    def trace_std_error(self) -> float:
        d = self.matrix.shape[0]
        w = np.eye(d).ravel()
        return float(math.sqrt(max(w @ self.matrix_cov @ w, 0.0)))


def g_matrix_at_zero(
    rule: DecisionRule,
    region: FeasibleRegion,
    sigma: Any,
    n: int,
    replications: int,
    seed: int,
    workers: int = 1,
) -> GMatrixEstimate:
    sigma = np.asarray(sigma, dtype=float)
    d = sigma.shape[0]
    model = GaussianModel(np.zeros(d), sigma, n)
    y = draw_sample_means(model, seed, replications, workers=workers)
    diff = apply_rule_to_means(rule, region, y, n) - apply_rule_to_means(SampleAverageLinear(), region, y, n)
    products = (y[:, :, None] * diff[:, None, :]).reshape(replications, d * d)
    mean = products.mean(axis=0)
    cov = np.atleast_2d(np.cov(products, rowvar=False)) / replications
    e_mean, e_se = diff.mean(axis=0), diff.std(axis=0, ddof=1) / math.sqrt(replications)
    return GMatrixEstimate(
        matrix=mean.reshape(d, d),
        e_vector=e_mean,
        matrix_std_errors=np.sqrt(np.clip(np.diag(cov), 0.0, None)).reshape(d, d),
        e_std_errors=e_se,
        replications=replications,
        matrix_cov=cov,
    )


def _inverse(sigma: Any) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    try:
        _cholesky(sigma, "sigma")
        return np.linalg.inv(sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("sigma is singular") from exc


def _hessian_map(sigma_inv: np.ndarray, n: int) -> np.ndarray:
    """Linear map taking row-major ``vec(G)`` to ``vec(n (S^-1 G + G^T S^-1))``."""
    d = sigma_inv.shape[0]
    out = np.empty((d * d, d * d))
    for k in range(d * d):
        g = np.zeros(d * d)
        g[k] = 1.0
        g = g.reshape(d, d)
        out[:, k] = (n * (sigma_inv @ g + g.T @ sigma_inv)).ravel()
    return out


def hessian_at_zero(g: GMatrixEstimate, sigma: Any, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Predicted ``Hess F(0) = n (S^-1 G(0) + G(0)^T S^-1)`` and entrywise standard errors."""
    sigma_inv = _inverse(sigma)
    hess = n * (sigma_inv @ g.matrix + g.matrix.T @ sigma_inv)
    a = _hessian_map(sigma_inv, n)
    cov = a @ g.matrix_cov @ a.T
    d = hess.shape[0]
    return hess, np.sqrt(np.clip(np.diag(cov), 0.0, None)).reshape(d, d)


def hessian_trace_at_zero(g: GMatrixEstimate, sigma: Any, n: int) -> float:
    """``trace(Hess F(0)) = 2 n trace(S^-1 G(0))``."""
    return float(2 * n * np.trace(_inverse(sigma) @ g.matrix))


def hessian_trace_std_error(g: GMatrixEstimate, sigma: Any, n: int) -> float:
    # trace(S^-1 G) = sum_ij (S^-1)_ji G_ij, i.e. weights S^-T in row-major order
    w = 2 * n * _inverse(sigma).T.ravel()
    return float(math.sqrt(max(w @ g.matrix_cov @ w, 0.0)))


# --------------------------------------------------------------------------
# Blyth numerator: importance sampling over the marginal of the sample mean


@dataclass(frozen=True)
class _Stratum:
    """Mixture component with density ``q`` known through ``log(q(x) / m(x))``."""

    name: str
    sampler: Any
    log_ratio: Any


def _gaussian_logpdf(x: np.ndarray, cov: np.ndarray) -> np.ndarray:
    chol = np.linalg.cholesky(cov)
    sol = np.linalg.solve(chol, x.T).T
    k = cov.shape[0]
    return -0.5 * np.einsum("ij,ij->i", sol, sol) - np.log(np.diag(chol)).sum() - 0.5 * k * math.log(2 * math.pi)


def _box_strata(half_widths: np.ndarray, cov: np.ndarray) -> list[_Stratum]:
    """One component per coordinate subset S (the face cells of the scaled box):
    coordinates in S uniform on the slab where the two projections can differ,
    the rest drawn from the exact conditional law given x_S."""
    d = half_widths.size
    band = half_widths
    out = [_Stratum("marginal", _marginal_sampler(cov), lambda x: np.zeros(x.shape[0]))]
    for size in range(1, d + 1):
        for subset in itertools.combinations(range(d), size):
            s_idx = np.array(subset)
            c_idx = np.array([i for i in range(d) if i not in subset], dtype=int)
            v_ss = cov[np.ix_(s_idx, s_idx)]
            log_u = -np.log(2 * band[s_idx]).sum()
            if c_idx.size:
                v_cs = cov[np.ix_(c_idx, s_idx)]
                gain = np.linalg.solve(v_ss, v_cs.T).T
                cond = cov[np.ix_(c_idx, c_idx)] - gain @ v_cs.T
                cond_chol = np.linalg.cholesky(0.5 * (cond + cond.T))
            else:
                gain = cond_chol = None

            def sampler(rng, k, s_idx=s_idx, c_idx=c_idx, gain=gain, cond_chol=cond_chol):
                x = np.empty((k, d))
                x[:, s_idx] = rng.uniform(-1.0, 1.0, (k, s_idx.size)) * band[s_idx]
                if c_idx.size:
                    z = rng.standard_normal((k, c_idx.size))
                    x[:, c_idx] = x[:, s_idx] @ gain.T + z @ cond_chol.T
                return x

            def log_ratio(x, s_idx=s_idx, v_ss=v_ss, log_u=log_u):
                xs = x[:, s_idx]
                inside = np.all(np.abs(xs) < band[s_idx], axis=1)
                return np.where(inside, log_u - _gaussian_logpdf(xs, v_ss), -np.inf)

            out.append(_Stratum("S=" + ",".join(map(str, subset)), sampler, log_ratio))
    return out


def _ball_strata(radius: float, d: int, cov: np.ndarray) -> list[_Stratum]:
    log_vol = 0.5 * d * math.log(math.pi) - special.gammaln(0.5 * d + 1) + d * math.log(radius)

    def sampler(rng, k):
        z = rng.standard_normal((k, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return z * (radius * rng.uniform(size=(k, 1)) ** (1.0 / d))

    def log_ratio(x):
        inside = np.linalg.norm(x, axis=1) < radius
        return np.where(inside, -log_vol - _gaussian_logpdf(x, cov), -np.inf)

    return [
        _Stratum("marginal", _marginal_sampler(cov), lambda x: np.zeros(x.shape[0])),
        _Stratum("ball", sampler, log_ratio),
    ]


def _marginal_sampler(cov):
    chol = np.linalg.cholesky(cov)

    def sampler(rng, k):
        return rng.standard_normal((k, cov.shape[0])) @ chol.T

    return sampler


def _allocate(replications: int, weights: Sequence[float]) -> list[int]:
    raw = np.asarray(weights) * replications
    counts = np.floor(raw).astype(int)
    counts[0] += replications - counts.sum()
    if np.any(counts < 2):
        raise ValueError(f"replications={replications} too small for {len(weights)} strata")
    return counts.tolist()


def _stratum_weights(strata: list[_Stratum], d: int) -> list[float]:
    """A quarter of the budget on the plain marginal; the rest split evenly over
    subset sizes, then evenly within a size."""
    if len(strata) == 1:
        return [1.0]
    if len(strata) == 2:
        return [0.5, 0.5]
    sizes = [0] + [s.name.count(",") + 1 for s in strata[1:]]
    per_size = {k: sizes.count(k) for k in set(sizes)}
    return [0.25 if k == 0 else 0.75 / d / per_size[k] for k in sizes]


def _mixture_estimate(
    integrand,
    strata: list[_Stratum],
    weights: list[float],
    replications: int,
    seed: int,
    tag: str,
    workers: int = 1,
) -> tuple[float, float]:
    """Stratified multiple-importance-sampling estimate of ``E_m[integrand]``.

    Samples from component ``S`` are weighted by ``m / sum_T c_T q_T`` with
    ``c_T`` the realised sample fractions (balance heuristic), so the estimate
    is unbiased and every weight is bounded by ``1 / c_marginal``.
    """
    counts = _allocate(replications, weights)
    log_c = np.log(np.asarray(counts, dtype=float) / replications)
    total = 0.0
    var = 0.0
    for j, (stratum, count) in enumerate(zip(strata, counts)):

        def work(block, start, stop, stratum=stratum, j=j):
            x = stratum.sampler(substream(seed, f"{tag}/{stratum.name}", block), stop - start)
            logs = np.stack([log_c[t] + strata[t].log_ratio(x) for t in range(len(strata))])
            weight = np.exp(-special.logsumexp(logs, axis=0))
            return integrand(x) * weight

        values = np.concatenate(map_blocks(work, count, workers))
        total += values.sum()
        var += count * values.var(ddof=1)
    return total / replications, math.sqrt(var) / replications


def _centered(region: FeasibleRegion) -> FeasibleRegion:
    if isinstance(region, Box):
        return Box(-region.half_widths, region.half_widths)
    if isinstance(region, Ball):
        return Ball(np.zeros(region.dim), region.radius)
    raise UnsupportedRegionError("Blyth quantities need a box or a ball")


def blyth_numerator(
    tau: float,
    region: FeasibleRegion,
    sigma: Any,
    n: int,
    replications: int,
    seed: int,
    method: str = "importance",
    workers: int = 1,
) -> tuple[float, float]:
    """``E ||P(s xbar) - P(xbar)||^2`` with ``xbar`` from the prior-marginal law.

    ``P`` projects onto the region translated to the origin, ``s = n tau^2/(n tau^2+1)``
    and ``xbar ~ N(0, (n tau^2 + 1)/n * sigma)``.  ``method="plain"`` draws
    from that law directly; ``"importance"`` (default) mixes in components
    concentrated where the two projections differ, which keeps the relative
    error bounded as ``tau`` grows.
    """
    sigma = np.asarray(sigma, dtype=float)
    region = _centered(region)
    if sigma.shape != (region.dim, region.dim):
        raise DimensionError("sigma does not match the region dimension")
    _cholesky(sigma, "sigma")
    s = bayes_shrink_factor(tau, n)
    cov = (n * tau**2 + 1.0) / n * sigma

    def integrand(x):
        diff = project(s * x, region) - project(x, region)
        return np.einsum("ij,ij->i", diff, diff)

    if method == "plain":
        strata = [_Stratum("marginal", _marginal_sampler(cov), lambda x: np.zeros(x.shape[0]))]
    elif method == "importance":
        if isinstance(region, Box):
            strata = _box_strata(region.half_widths / s, cov)
        else:
            strata = _ball_strata(region.radius / s, region.dim, cov)
    else:
        raise ValueError(f"unknown method '{method}'")
    weights = _stratum_weights(strata, region.dim)
    return _mixture_estimate(integrand, strata, weights, replications, seed, "blyth-num", workers)


def blyth_cross_term(
    tau: float,
    box: FeasibleRegion,
    sigma: Any,
    n: int,
    replications: int,
    seed: int,
) -> tuple[float, float]:
    """MC estimate of ``E[2 <s xbar - P(s xbar), P(xbar) - P(s xbar)>]`` over ``xbar``
    whose face signature at scale ``1/s`` is not all-interior."""
    from .geometry import face_labels

    if not isinstance(box, Box):
        raise UnsupportedRegionError("the cross term is defined for boxes")
    sigma = np.asarray(sigma, dtype=float)
    box = _centered(box)
    s = bayes_shrink_factor(tau, n)
    model = GaussianModel(np.zeros(box.dim), (n * tau**2 + 1.0) * sigma, n)
    x = draw_sample_means(model, seed, replications, tag="blyth-cross")
    sx = s * x
    p_sx = project(sx, box)
    term = 2.0 * np.einsum("ij,ij->i", sx - p_sx, project(x, box) - p_sx)
    keep = np.any(face_labels(x, box, 1.0 / s) != 0, axis=1)
    term = np.where(keep, term, 0.0)
    return _mean_se(term)


def blyth_denominator(
    omega0: FeasibleRegion,
    tau: float,
    sigma: Any,
    replications: int = 1_000_000,
    seed: int = 0,
    center: Any = None,
) -> tuple[float, float]:
    """Prior mass ``P(mu in omega0)`` for ``mu ~ N(center, tau^2 sigma)``.

    Exact (product of normal CDF differences) when ``sigma`` is diagonal,
    otherwise Monte Carlo with at least 10^6 draws.
    """
    if not isinstance(omega0, Box):
        raise UnsupportedRegionError("omega0 must be a box")
    if np.any(omega0.upper <= omega0.lower):
        raise ValueError("omega0 must have positive volume")
    sigma = np.asarray(sigma, dtype=float)
    d = omega0.dim
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    lo, hi = omega0.lower - c, omega0.upper - c
    if np.count_nonzero(sigma - np.diag(np.diag(sigma))) == 0:
        sd = tau * np.sqrt(np.diag(sigma))
        a, b = lo / sd, hi / sd
        # pick the tail that keeps precision
        mass = np.where(a >= 0, special.ndtr(-a) - special.ndtr(-b), special.ndtr(b) - special.ndtr(a))
        return float(np.prod(mass)), 0.0
    if replications < 1_000_000:
        raise ValueError("non-diagonal sigma needs at least 10^6 Monte Carlo draws")
    model = GaussianModel(np.zeros(d), tau**2 * sigma, 1)
    mu = draw_sample_means(model, seed, replications, tag="blyth-den")
    inside = np.all((mu >= lo) & (mu <= hi), axis=1).astype(float)
    return _mean_se(inside)


def loglog_slope(x: Sequence[float], y: Sequence[float], upper_half: bool = True) -> tuple[float, float]:
    """OLS slope of ``log y`` on ``log x`` with its residual standard error.

    With ``upper_half`` only the largest ``len - len // 2`` points are used.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if upper_half:
        k = x.size // 2
        x, y = x[k:], y[k:]
    if x.size < 2:
        raise ValueError("need at least two points for a slope")
    if np.any(y <= 0) or np.any(x <= 0):
        raise NumericalError("log-log slope needs positive values")
    lx, ly = np.log(x), np.log(y)
    lx0 = lx - lx.mean()
    slope = float(lx0 @ (ly - ly.mean()) / (lx0 @ lx0))
    if x.size < 3:
        return slope, float("nan")
    resid = ly - ly.mean() - slope * lx0
    stderr = math.sqrt(resid @ resid / (x.size - 2) / (lx0 @ lx0))
    return slope, float(stderr)


@dataclass
class BlythReport:
    taus: list[float]
    numerators: list[float]
    numerator_ses: list[float]
    denominators: list[float]
    denominator_ses: list[float]
    ratios: list[float]
    slope: float
    slope_stderr: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.taus)
        if any(len(v) != k for v in (self.numerators, self.denominators, self.ratios)):
            raise ValueError("BlythReport columns must have equal length")

    @property
    def ratio_ses(self) -> list[float]:
        return [
            r * math.hypot(ns / num if num > 0 else 0.0, ds / den)
            for r, num, ns, den, ds in zip(
                self.ratios, self.numerators, self.numerator_ses, self.denominators, self.denominator_ses
            )
        ]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ratio_ses"] = self.ratio_ses
        return out


def blyth_scan(
    region: FeasibleRegion,
    sigma: Any,
    n: int,
    taus: Sequence[float],
    omega0: Box | None = None,
    replications: int = 1_000_000,
    seed: int = 0,
    method: str = "importance",
    workers: int = 1,
) -> BlythReport:
    """Numerator, denominator and ratio over an increasing ``tau`` grid, plus the
    fitted log-log slope of the ratio over the largest half of the grid.

    ``omega0`` defaults to the unit cube around the region center.
    """
    taus = [float(t) for t in taus]
    if len(taus) < 4 or any(b <= a for a, b in zip(taus, taus[1:])) or taus[0] <= 0:
        raise ValueError("taus must be positive, strictly increasing and have at least 4 entries")
    center = center_of(region)
    if omega0 is None:
        omega0 = Box(center - 1.0, center + 1.0)
    nums, num_ses, dens, den_ses, ratios = [], [], [], [], []
    for tau in taus:
        num, num_se = blyth_numerator(tau, region, sigma, n, replications, seed, method, workers)
        den, den_se = blyth_denominator(omega0, tau, sigma, max(replications, 1_000_000), seed, center)
        if den <= 0:
            raise NumericalError(f"prior mass of omega0 underflowed at tau={tau}")
        nums.append(num)
        num_ses.append(num_se)
        dens.append(den)
        den_ses.append(den_se)
        ratios.append(num / den)
    try:
        slope, slope_se = loglog_slope(taus, ratios)
    except NumericalError:
        slope, slope_se = float("nan"), float("nan")
    return BlythReport(taus, nums, num_ses, dens, den_ses, ratios, slope, slope_se)


# --------------------------------------------------------------------------
# consistency


@dataclass
class ConsistencyReport:
    n_list: list[int]
    risks: list[float]
    std_errors: list[float]
    slope: float
    slope_stderr: float


def consistency_scan(
    rule: DecisionRule,
    kind: ObjectiveKind,
    model: GaussianModel,
    region: FeasibleRegion,
    n_list: Sequence[int],
    replications: int,
    seed: int,
    workers: int = 1,
) -> ConsistencyReport:
    """Risk of ``rule`` at state ``model.mu`` for each sample size in ``n_list``.

    The slope is ``nan`` when a risk in the fitted half is not positive.
    """
    n_list = [int(v) for v in n_list]
    if len(n_list) < 4:
        raise ValueError("n_list needs at least 4 entries")
    ratios = [b / a for a, b in zip(n_list, n_list[1:])]
    if n_list[0] < 1 or min(ratios) <= 1 or max(ratios) - min(ratios) > 1e-9 * max(ratios):
        raise ValueError("n_list must be an increasing geometric sequence")
    risks, ses = [], []
    for n in n_list:
        m = model.with_n(n)
        means = draw_sample_means(m, seed, replications, workers=workers)
        value, se = _mean_se(sample_losses(rule, kind, m, region, means))
        risks.append(value)
        ses.append(se)
    try:
        slope, slope_se = loglog_slope(n_list, risks)
    except NumericalError:
        slope, slope_se = float("nan"), float("nan")
    return ConsistencyReport(n_list, risks, ses, slope, slope_se)


def consistency_slope(
    rule: DecisionRule,
    kind: ObjectiveKind,
    model: GaussianModel,
    region: FeasibleRegion,
    n_list: Sequence[int],
    replications: int,
    seed: int,
    workers: int = 1,
) -> float:
    return consistency_scan(rule, kind, model, region, n_list, replications, seed, workers).slope
