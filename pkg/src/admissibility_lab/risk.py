"""Optimality-gap losses and Monte Carlo risk estimation with common random numbers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import ConstraintViolationError, DimensionError, InvalidRuleError
from .geometry import Ball, Box, FeasibleRegion, VPolytope, contains, linear_minimize, project
from .rules import (
    BayesProjectedQuadratic,
    BayesScaledLinear,
    Constant,
    DecisionRule,
    JamesStein,
    SampleAverageLinear,
    SampleAverageQuadratic,
    apply_rule_to_means,
    bayes_shrink_factor,
)
from .stochastics import GaussianModel, draw_sample_means

__all__ = [
    "ObjectiveKind",
    "RiskEstimate",
    "StateComparison",
    "Comparison",
    "VERDICT_THRESHOLD",
    "optimal_action",
    "loss",
    "sample_losses",
    "estimate_risk",
    "risk_quadrature_1d",
    "compare_rules",
    "dominance_verdict",
    "sample_average_rule",
]

VERDICT_THRESHOLD = 3.0


class ObjectiveKind(str, enum.Enum):
    """Objective ``F(x, xi)`` and the loss it induces.

    LINEAR         F = xi^T x
    QUADRATIC      F = 0.5 ||x||^2 - xi^T x   (loss 0.5 ||x - mu||^2 - 0.5 ||x(mu) - mu||^2)
    SQUARED_ERROR  F = ||x - xi||^2           (loss ||x - mu||^2 - ||x(mu) - mu||^2)

    SQUARED_ERROR is the classical mean-estimation setting; its loss is exactly
    twice the QUADRATIC loss.
    """

    LINEAR = "linear"
    QUADRATIC = "quadratic"
    SQUARED_ERROR = "squared_error"


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    std_error: float
    replications: int
    seed: int

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")
        if self.value < -3 * self.std_error - 1e-12:
            raise ValueError(f"risk estimate {self.value} is negative beyond noise")


def sample_average_rule(kind: ObjectiveKind) -> DecisionRule:
    """The sample-average (ERM) rule for an objective kind."""
    return SampleAverageLinear() if ObjectiveKind(kind) is ObjectiveKind.LINEAR else SampleAverageQuadratic()


def optimal_action(kind: ObjectiveKind, mu: Any, region: FeasibleRegion) -> np.ndarray:
    """The true optimum ``x(mu)`` for state ``mu``."""
    kind = ObjectiveKind(kind)
    mu = np.asarray(mu, dtype=float)
    if kind is ObjectiveKind.LINEAR:
        return linear_minimize(mu, region)
    return project(mu, region)


def _losses(kind: ObjectiveKind, mu: np.ndarray, x: np.ndarray, region: FeasibleRegion) -> np.ndarray:
    opt = optimal_action(kind, mu, region)
    if kind is ObjectiveKind.LINEAR:
        return x @ mu - opt @ mu
    # ||x - mu||^2 - ||opt - mu||^2 written to cancel exactly when x == opt
    gap = np.einsum("...i,...i->...", x - opt, x + opt - 2.0 * mu)
    return 0.5 * gap if kind is ObjectiveKind.QUADRATIC else gap


def loss(kind: ObjectiveKind, mu: Any, x: Any, region: FeasibleRegion) -> float | np.ndarray:
    """Optimality gap of action ``x`` (or a batch of actions) under state ``mu``."""
    kind = ObjectiveKind(kind)
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    if mu.shape != (region.dim,) or x.shape[-1] != region.dim:
        raise DimensionError("mu and x must match the region dimension")
    if not np.all(contains(region, x, tol=1e-9)):
        raise ConstraintViolationError("action lies outside the feasible region")
    out = _losses(kind, mu, x, region)
    return float(out) if np.ndim(out) == 0 else out


def sample_losses(
    rule: DecisionRule,
    kind: ObjectiveKind,
    model: GaussianModel,
    region: FeasibleRegion,
    means: np.ndarray,
) -> np.ndarray:
    """Per-replication losses of ``rule`` given precomputed sample means."""
    actions = apply_rule_to_means(rule, region, means, model.n)
    return _losses(ObjectiveKind(kind), model.mu, actions, region)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    if values.size < 2:
        raise ValueError("need at least two replications for a standard error")
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def estimate_risk(
    rule: DecisionRule,
    kind: ObjectiveKind,
    model: GaussianModel,
    region: FeasibleRegion,
    replications: int,
    seed: int,
    workers: int = 1,
) -> RiskEstimate:
    """Monte Carlo risk ``E[loss(mu, rule(data))]`` over ``replications`` data sets."""
    if replications < 2:
        raise ValueError("replications must be at least 2")
    if model.dim != region.dim:
        raise DimensionError(f"model dimension {model.dim} != region dimension {region.dim}")
    means = draw_sample_means(model, seed, replications, workers=workers)
    values = sample_losses(rule, kind, model, region, means)
    value, se = _mean_se(values)
    return RiskEstimate(value, se, replications, seed)


# --------------------------------------------------------------------------
# one-dimensional quadrature oracle


def _interval(region: FeasibleRegion) -> tuple[float, float]:
    if isinstance(region, Box):
        return float(region.lower[0]), float(region.upper[0])
    if isinstance(region, Ball):
        c = float(region.center[0])
        return c - region.radius, c + region.radius
    if isinstance(region, VPolytope):
        v = region.vertices[:, 0]
        return float(v.min()), float(v.max())
    raise TypeError(f"unknown region {region!r}")


def _breakpoints_1d(rule: DecisionRule, region: FeasibleRegion, n: int) -> list[float]:
    """Points where the 1-d action is discontinuous or has a kink."""
    lo, hi = _interval(region)
    if isinstance(rule, (SampleAverageLinear, BayesScaledLinear)):
        return [0.0]
    if isinstance(rule, SampleAverageQuadratic):
        return [lo, hi]
    if isinstance(rule, BayesProjectedQuadratic):
        s = bayes_shrink_factor(rule.tau, n)
        c = 0.5 * (lo + hi)
        return [c + (lo - c) / s, c + (hi - c) / s]
    if isinstance(rule, Constant):
        return []
    if isinstance(rule, JamesStein):
        raise InvalidRuleError("James-Stein is undefined in dimension 1")
    raise TypeError(f"unknown rule {rule!r}")


_Z_MAX = 40.0


def _std_normal_pdf(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def risk_quadrature_1d(
    rule: DecisionRule,
    kind: ObjectiveKind,
    model: GaussianModel,
    region: FeasibleRegion,
    nodes: int = 200,
) -> float:
    """Deterministic risk for a one-dimensional problem.

    The sample mean is ``N(mu, sigma/n)``.  When the action is smooth in the
    sample mean the expectation is a single Gauss-Hermite rule with ``nodes``
    points.  Otherwise the standardized line is truncated to ``[-40, 40]``
    (the Gaussian mass outside is below 1e-300), cut at the rule's
    breakpoints, and each analytic piece is integrated with ``nodes``-point
    Gauss-Legendre; a global Hermite rule converges only at O(1/sqrt(nodes))
    across a jump.
    """
    if model.dim != 1 or region.dim != 1:
        raise DimensionError("risk_quadrature_1d needs a one-dimensional model and region")
    if nodes < 200:
        raise ValueError("use at least 200 quadrature nodes")
    kind = ObjectiveKind(kind)
    mu = float(model.mu[0])
    sd = math.sqrt(float(model.sigma[0, 0]) / model.n)

    def integrand(y: np.ndarray) -> np.ndarray:
        actions = apply_rule_to_means(rule, region, y[:, None], model.n)
        return _losses(kind, model.mu, actions, region)

    cuts = sorted(b for b in _breakpoints_1d(rule, region, model.n) if np.isfinite(b))
    if not cuts:
        x, w = np.polynomial.hermite.hermgauss(nodes)
        y = mu + math.sqrt(2.0) * sd * x
        return float(np.dot(w, integrand(y)) / math.sqrt(math.pi))

    gx, gw = np.polynomial.legendre.leggauss(nodes)
    inner = [z for z in ((c - mu) / sd for c in cuts) if -_Z_MAX < z < _Z_MAX]
    edges = [-_Z_MAX] + inner + [_Z_MAX]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        z = 0.5 * (b - a) * gx + 0.5 * (a + b)
        total += 0.5 * (b - a) * float(np.dot(gw * _std_normal_pdf(z), integrand(mu + sd * z)))
    return total


# --------------------------------------------------------------------------
# paired comparisons


@dataclass(frozen=True)
class StateComparison:
    mu: tuple[float, ...]
    risk_a: RiskEstimate
    risk_b: RiskEstimate
    difference: float
    difference_se: float


@dataclass(frozen=True)
class Comparison:
    rule_a: DecisionRule
    rule_b: DecisionRule
    kind: ObjectiveKind
    states: list[StateComparison] = field(default_factory=list)
    verdict: str = "inconclusive"
    threshold: float = VERDICT_THRESHOLD


def dominance_verdict(
    differences: Sequence[float],
    std_errors: Sequence[float],
    threshold: float = VERDICT_THRESHOLD,
) -> str:
    """Classify paired differences ``R(A) - R(B)``.

    ``A-dominates`` when no state shows A worse by more than ``threshold``
    standard errors and at least one shows it better by more than that;
    ``B-dominates`` symmetrically; ``no-dominance`` when witnesses point both
    ways or every difference is within noise; ``inconclusive`` when a
    difference or standard error is not finite.
    """
    diff = np.asarray(differences, dtype=float)
    se = np.asarray(std_errors, dtype=float)
    if diff.size == 0 or not (np.all(np.isfinite(diff)) and np.all(np.isfinite(se))):
        return "inconclusive"
    a_better = diff < -threshold * se
    b_better = diff > threshold * se
    if a_better.any() and not b_better.any():
        return "A-dominates"
    if b_better.any() and not a_better.any():
        return "B-dominates"
    return "no-dominance"


def compare_rules(
    rule_a: DecisionRule,
    rule_b: DecisionRule,
    kind: ObjectiveKind,
    model_grid: Sequence[GaussianModel],
    region: FeasibleRegion,
    replications: int,
    seed: int,
    workers: int = 1,
) -> Comparison:
    """Risk differences ``R(mu, A) - R(mu, B)`` on a grid of states, using
    identical sample streams for both rules."""
    if not model_grid:
        raise ValueError("model grid must not be empty")
    if replications < 2:
        raise ValueError("replications must be at least 2")
    kind = ObjectiveKind(kind)
    states = []
    for model in model_grid:
        means = draw_sample_means(model, seed, replications, workers=workers)
        la = sample_losses(rule_a, kind, model, region, means)
        lb = sample_losses(rule_b, kind, model, region, means)
        ra = RiskEstimate(*_mean_se(la), replications, seed)
        rb = RiskEstimate(*_mean_se(lb), replications, seed)
        diff, diff_se = _mean_se(la - lb)
        states.append(StateComparison(tuple(model.mu.tolist()), ra, rb, diff, diff_se))
    verdict = dominance_verdict([s.difference for s in states], [s.difference_se for s in states])
    return Comparison(rule_a, rule_b, kind, states, verdict)
