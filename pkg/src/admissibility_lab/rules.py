"""Decision rules mapping observed data to a feasible action.

Every rule here is a function of the sample mean (and the known sample size),
so :func:`apply_rule` only ever looks at ``sample.mean`` and ``sample.n``.
The batch entry point :func:`apply_rule_to_means` takes a ``(k, d)`` array of
sample means and is what the Monte Carlo code calls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from .errors import ConstraintViolationError, DimensionError, InvalidRuleError
from .geometry import FeasibleRegion, center_of, contains, linear_minimize, project
from .stochastics import Sample

__all__ = [
    "SampleAverageLinear",
    "SampleAverageQuadratic",
    "BayesScaledLinear",
    "BayesProjectedQuadratic",
    "JamesStein",
    "Constant",
    "DecisionRule",
    "apply_rule",
    "apply_rule_to_means",
    "bayes_shrink_factor",
    "james_stein_factor",
    "rule_from_spec",
    "rule_to_spec",
    "rule_label",
]


@dataclass(frozen=True)
class SampleAverageLinear:
    """argmin of ``xbar^T x`` over the region."""


@dataclass(frozen=True)
class SampleAverageQuadratic:
    """Projection of the sample mean onto the region."""


@dataclass(frozen=True)
class BayesScaledLinear:
    """argmin of ``(shrink * xbar)^T x``; with ``shrink = n/(n+1)`` this is the Bayes rule
    for the prior ``N(0, sigma)``."""

    shrink: float

    def __post_init__(self):
        if not 0 < self.shrink <= 1:
            raise InvalidRuleError(f"shrink must lie in (0, 1], got {self.shrink}")


@dataclass(frozen=True)
class BayesProjectedQuadratic:
    """Bayes rule for the prior ``N(center, tau^2 sigma)``: projection of the
    posterior mean ``center + s (xbar - center)``, ``s = n tau^2 / (n tau^2 + 1)``."""

    tau: float

    def __post_init__(self):
        if not (self.tau > 0 and np.isfinite(self.tau)):
            raise InvalidRuleError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class JamesStein:
    projected: bool = True
    positive_part: bool = False


@dataclass(frozen=True, eq=False)
class Constant:
    point: np.ndarray

    def __post_init__(self):
        point = np.array(self.point, dtype=float)
        if point.ndim != 1 or not np.all(np.isfinite(point)):
            raise InvalidRuleError("constant rule needs a finite point")
        point.setflags(write=False)
        object.__setattr__(self, "point", point)

    def __eq__(self, other):
        return isinstance(other, Constant) and np.array_equal(self.point, other.point)

    def __hash__(self):
        return hash(tuple(self.point.tolist()))


DecisionRule = Union[
    SampleAverageLinear,
    SampleAverageQuadratic,
    BayesScaledLinear,
    BayesProjectedQuadratic,
    JamesStein,
    Constant,
]


def bayes_shrink_factor(tau: float, n: int) -> float:
    return n * tau**2 / (n * tau**2 + 1.0)


def james_stein_factor(means: np.ndarray, n: int, positive_part: bool = False) -> np.ndarray:
    """Shrinkage factor ``1 - (d - 2) / (n ||xbar||^2)`` for each row of ``means``."""
    means = np.atleast_2d(means)
    d = means.shape[1]
    sq = np.einsum("ij,ij->i", means, means)
    with np.errstate(divide="ignore"):
        factor = 1.0 - (d - 2) / (n * sq)
    if positive_part:
        factor = np.maximum(factor, 0.0)
    return factor


def apply_rule_to_means(rule: DecisionRule, region: FeasibleRegion, means: Any, n: int) -> np.ndarray:
    """Actions for a batch of sample means (rows), each computed from ``n`` draws."""
    means = np.asarray(means, dtype=float)
    single = means.ndim == 1
    means = np.atleast_2d(means)
    if means.shape[1] != region.dim:
        raise DimensionError(f"sample dimension {means.shape[1]} != region dimension {region.dim}")

    if isinstance(rule, SampleAverageLinear):
        out = linear_minimize(means, region)
    elif isinstance(rule, SampleAverageQuadratic):
        out = project(means, region)
    elif isinstance(rule, BayesScaledLinear):
        # argmin is invariant to positive scaling; forming shrink * means could
        # flush tiny coordinates to zero and change the tie-break
        out = linear_minimize(means, region)
    elif isinstance(rule, BayesProjectedQuadratic):
        s = bayes_shrink_factor(rule.tau, n)
        c = center_of(region)
        out = project(c + s * (means - c), region)
    elif isinstance(rule, JamesStein):
        if region.dim < 3:
            raise InvalidRuleError(f"James-Stein needs dimension >= 3, got {region.dim}")
        shrunk = james_stein_factor(means, n, rule.positive_part)[:, None] * means
        if rule.projected:
            out = project(shrunk, region)
        else:
            inside = contains(region, shrunk, tol=0.0)
            if not np.all(inside):
                raise ConstraintViolationError(
                    "unprojected James-Stein estimate left the region; use a larger enclosing box"
                )
            out = shrunk
    elif isinstance(rule, Constant):
        if rule.point.shape != (region.dim,) or not contains(region, rule.point):
            raise ConstraintViolationError(f"constant point {rule.point.tolist()} is not in the region")
        out = np.broadcast_to(rule.point, means.shape).copy()
    else:
        raise InvalidRuleError(f"unknown rule {rule!r}")
    return out[0] if single else out


def apply_rule(rule: DecisionRule, region: FeasibleRegion, sample: Sample) -> np.ndarray:
    return apply_rule_to_means(rule, region, sample.mean, sample.n)


_NAMES = {
    SampleAverageLinear: "sample_average_linear",
    SampleAverageQuadratic: "sample_average_quadratic",
    BayesScaledLinear: "bayes_scaled_linear",
    BayesProjectedQuadratic: "bayes_projected_quadratic",
    JamesStein: "james_stein",
    Constant: "constant",
}


def rule_to_spec(rule: DecisionRule) -> dict:
    spec: dict[str, Any] = {"rule": _NAMES[type(rule)]}
    if isinstance(rule, BayesScaledLinear):
        spec["shrink"] = rule.shrink
    elif isinstance(rule, BayesProjectedQuadratic):
        spec["tau"] = rule.tau
    elif isinstance(rule, JamesStein):
        spec["projected"] = rule.projected
        spec["positive_part"] = rule.positive_part
    elif isinstance(rule, Constant):
        spec["point"] = rule.point.tolist()
    return spec


def rule_from_spec(spec: dict) -> DecisionRule:
    """Parse e.g. ``{"rule": "james_stein", "projected": true, "positive_part": false}``."""
    if not isinstance(spec, dict) or "rule" not in spec:
        raise InvalidRuleError("rule spec must be an object with a 'rule' key")
    name = spec["rule"]
    extra = set(spec) - {"rule"}

    def expect(*keys):
        unknown = extra - set(keys)
        if unknown:
            raise InvalidRuleError(f"unexpected keys for rule '{name}': {sorted(unknown)}")

    if name == "sample_average_linear":
        expect()
        return SampleAverageLinear()
    if name == "sample_average_quadratic":
        expect()
        return SampleAverageQuadratic()
    if name == "bayes_scaled_linear":
        expect("shrink")
        return BayesScaledLinear(float(spec["shrink"]))
    if name == "bayes_projected_quadratic":
        expect("tau")
        return BayesProjectedQuadratic(float(spec["tau"]))
    if name == "james_stein":
        expect("projected", "positive_part")
        projected = spec.get("projected", True)
        positive = spec.get("positive_part", False)
        if not isinstance(projected, bool) or not isinstance(positive, bool):
            raise InvalidRuleError("'projected' and 'positive_part' must be booleans")
        return JamesStein(projected, positive)
    if name == "constant":
        expect("point")
        return Constant(spec["point"])
    raise InvalidRuleError(f"unknown rule '{name}'")


def rule_label(rule: DecisionRule) -> str:
    """Compact, stable text label used in reports."""
    spec = rule_to_spec(rule)
    name = spec.pop("rule")
    if not spec:
        return name
    args = ",".join(f"{k}={json.dumps(v, separators=(',', ':'))}" for k, v in spec.items())
    return f"{name}({args})"
