"""Experiment configuration: JSON parsing, validation and canonical form.

A configuration is a JSON object.  Validation errors carry the dotted path of
the offending field (``rules[1].tau``) or, for malformed JSON, the line and
column of the syntax error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from .errors import ConfigError, InvalidRuleError, NumericalError
from .geometry import Box, FeasibleRegion, VPolytope, contains, region_from_spec, region_to_spec
from .risk import ObjectiveKind
from .rules import DecisionRule, rule_from_spec, rule_to_spec
from .stochastics import GaussianModel, model_from_spec

__all__ = ["EXPERIMENTS", "ExperimentConfig", "default_grid", "load_config", "parse_config"]

EXPERIMENTS = ("risk", "compare", "stein", "blyth", "trace", "consistency")
MIN_REPLICATIONS = 100

_KNOWN = {
    "experiment", "kind", "region", "model", "rules", "grid", "taus", "n_list",
    "mu", "omega0", "method", "replications", "seed", "output_dir",
}


def default_grid(dim: int) -> list[list[float]]:
    """States ``{0, 1/2, 1, 2, 4} * e1`` plus the unit diagonal scaled the same way."""
    scales = (0.0, 0.5, 1.0, 2.0, 4.0)
    e1 = np.zeros(dim)
    e1[0] = 1.0
    diag = np.full(dim, 1.0 / math.sqrt(dim))
    grid = [(t * e1).tolist() for t in scales]
    if dim > 1:
        grid += [(t * diag).tolist() for t in scales[1:]]
    return grid


@dataclass
class ExperimentConfig:
    """Validated experiment settings, stored in canonical JSON-ready form."""

    experiment: str
    region: dict
    model: dict
    replications: int
    seed: int = 0
    kind: str | None = None
    rules: list = field(default_factory=list)
    grid: list | None = None
    taus: list | None = None
    n_list: list | None = None
    mu: list | None = None
    omega0: dict | None = None
    method: str | None = None
    output_dir: str = "out"

    # parsed views -------------------------------------------------------

    @property
    def region_obj(self) -> FeasibleRegion:
        return region_from_spec(self.region)

    @property
    def model_obj(self) -> GaussianModel:
        return model_from_spec(self.model)

    @property
    def rule_objs(self) -> list[DecisionRule]:
        return [rule_from_spec(r) for r in self.rules]

    @property
    def kind_obj(self) -> ObjectiveKind | None:
        return None if self.kind is None else ObjectiveKind(self.kind)

    @property
    def omega0_obj(self) -> Box | None:
        return None if self.omega0 is None else region_from_spec(self.omega0)

    @property
    def grid_points(self) -> list[list[float]]:
        return self.grid if self.grid is not None else default_grid(self.region_obj.dim)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}

    @classmethod
    def from_dict(cls, data: Any) -> "ExperimentConfig":
        return parse_config(data)


def _fail(path: str, msg: str):
    raise ConfigError(msg, path)


def _int(data: dict, key: str, default=None, minimum=None) -> int | None:
    if key not in data:
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(key, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(key, f"must be >= {minimum}, got {value}")
    return value


def _vector(value: Any, path: str, dim: int) -> list[float]:
    if not isinstance(value, list) or len(value) != dim:
        _fail(path, f"expected a list of {dim} numbers")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            _fail(f"{path}[{i}]", f"expected a finite number, got {v!r}")
        out.append(float(v))
    return out


def _positive_list(value: Any, path: str, integer: bool) -> list:
    if not isinstance(value, list) or len(value) < 4:
        _fail(path, "expected a list of at least 4 values")
    out = []
    for i, v in enumerate(value):
        ok = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not ok or not v > 0 or not math.isfinite(v):
            _fail(f"{path}[{i}]", f"expected a positive {'integer' if integer else 'number'}, got {v!r}")
        out.append(int(v) if integer else float(v))
    if any(b <= a for a, b in zip(out, out[1:])):
        _fail(path, "values must be strictly increasing")
    return out


def parse_config(data: Any) -> ExperimentConfig:
    """Validate a decoded JSON object.

    Raises :class:`ConfigError` for schema problems.  A covariance that is not
    positive definite surfaces as :class:`NumericalError`.
    """
    if not isinstance(data, dict):
        _fail("$", "configuration must be a JSON object")
    unknown = sorted(set(data) - _KNOWN)
    if unknown:
        _fail(unknown[0], "unknown field")

    exp = data.get("experiment")
    if exp not in EXPERIMENTS:
        _fail("experiment", f"expected one of {list(EXPERIMENTS)}, got {exp!r}")

    if "region" not in data:
        _fail("region", "required")
    try:
        region = region_from_spec(data["region"])
    except (ValueError, TypeError, KeyError) as exc:
        _fail("region", str(exc))
    dim = region.dim

    model_spec = data.get("model", {})
    if not isinstance(model_spec, dict):
        _fail("model", "expected an object")
    if "mu" in model_spec:
        _fail("model.mu", "states come from 'grid' (or 'mu' for consistency), not the model")
    bad = sorted(set(model_spec) - {"sigma", "sigma_diag", "n"})
    if bad:
        _fail(f"model.{bad[0]}", "unknown field")
    try:
        model = model_from_spec(model_spec, dim=dim)
    except NumericalError:
        raise
    except (ValueError, TypeError) as exc:
        _fail("model", str(exc))
    if model.dim != dim:
        _fail("model", f"dimension {model.dim} does not match region dimension {dim}")

    replications = _int(data, "replications", minimum=MIN_REPLICATIONS)
    if replications is None:
        _fail("replications", "required")
    seed = _int(data, "seed", default=0, minimum=0)

    kind = data.get("kind")
    needs_kind = exp in ("risk", "compare", "stein", "consistency")
    if kind is None and needs_kind:
        _fail("kind", "required for this experiment")
    if kind is not None:
        try:
            kind = ObjectiveKind(kind).value
        except ValueError:
            _fail("kind", f"expected one of {[k.value for k in ObjectiveKind]}, got {kind!r}")
        if exp == "trace" and kind != "linear":
            _fail("kind", "the trace experiment is defined for the linear objective")
        if exp == "blyth":
            _fail("kind", "not used by the blyth experiment")

    rules_raw = data.get("rules", [])
    if not isinstance(rules_raw, list):
        _fail("rules", "expected a list")
    rules = []
    for i, spec in enumerate(rules_raw):
        try:
            rules.append(rule_to_spec(rule_from_spec(spec)))
        except (InvalidRuleError, ValueError, TypeError) as exc:
            _fail(f"rules[{i}]", str(exc))
    wanted = {"risk": (1, None), "compare": (2, 2), "stein": (2, 2), "trace": (1, None),
              "consistency": (1, None), "blyth": (0, 0)}[exp]
    if len(rules) < wanted[0] or (wanted[1] is not None and len(rules) > wanted[1]):
        want = f"exactly {wanted[0]}" if wanted[0] == wanted[1] else f"at least {wanted[0]}"
        _fail("rules", f"{exp} needs {want} rule(s), got {len(rules)}")

    for i, spec in enumerate(rules):
        if spec["rule"] == "james_stein" and dim < 3:
            _fail(f"rules[{i}]", f"james_stein needs dimension >= 3, got {dim}")
        if spec["rule"] == "constant":
            if len(spec["point"]) != dim or not contains(region, np.asarray(spec["point"])):
                _fail(f"rules[{i}].point", "must be a point of the region")
    if kind in ("quadratic", "squared_error") and isinstance(region, VPolytope):
        _fail("region", "quadratic objectives need a box or a ball (projection onto a polytope is unsupported)")

    grid = data.get("grid")
    if grid is not None:
        if exp not in ("risk", "compare", "stein"):
            _fail("grid", f"not used by the {exp} experiment")
        if not isinstance(grid, list) or not grid:
            _fail("grid", "expected a nonempty list of states")
        grid = [_vector(g, f"grid[{i}]", dim) for i, g in enumerate(grid)]

    taus = n_list = mu = omega0 = None
    if exp == "blyth":
        if "taus" not in data:
            _fail("taus", "required for blyth")
        taus = _positive_list(data["taus"], "taus", integer=False)
        if "omega0" in data:
            try:
                o = region_from_spec(data["omega0"])
            except (ValueError, TypeError, KeyError) as exc:
                _fail("omega0", str(exc))
            if not isinstance(o, Box) or o.dim != dim or np.any(o.upper <= o.lower):
                _fail("omega0", "expected a box of positive volume in the region dimension")
            omega0 = region_to_spec(o)
        if type(region).__name__ not in ("Box", "Ball"):
            _fail("region", "blyth needs a box or a ball")
    elif "taus" in data or "omega0" in data:
        _fail("taus" if "taus" in data else "omega0", f"not used by the {exp} experiment")

    if exp == "consistency":
        if "n_list" not in data:
            _fail("n_list", "required for consistency")
        n_list = _positive_list(data["n_list"], "n_list", integer=True)
        ratios = [b / a for a, b in zip(n_list, n_list[1:])]
        if max(ratios) - min(ratios) > 1e-9 * max(ratios):
            _fail("n_list", "must be a geometric sequence")
        if "mu" not in data:
            _fail("mu", "required for consistency")
        mu = _vector(data["mu"], "mu", dim)
    elif "n_list" in data or "mu" in data:
        _fail("n_list" if "n_list" in data else "mu", f"not used by the {exp} experiment")

    method = None
    if exp == "blyth":
        method = data.get("method", "importance")
        if method not in ("importance", "plain"):
            _fail("method", f"expected 'importance' or 'plain', got {method!r}")
    elif "method" in data:
        _fail("method", f"not used by the {exp} experiment")

    output_dir = data.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        _fail("output_dir", "expected a nonempty string")

    model_canon = {"sigma": model.sigma.tolist(), "n": model.n}
    return ExperimentConfig(
        experiment=exp,
        region=region_to_spec(region),
        model=model_canon,
        replications=replications,
        seed=seed,
        kind=kind,
        rules=rules,
        grid=grid,
        taus=taus,
        n_list=n_list,
        mu=mu,
        omega0=omega0,
        method=method,
        output_dir=output_dir,
    )


def load_config(text: str) -> ExperimentConfig:
    """Decode and validate JSON text; syntax errors report line and column."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from exc
    return parse_config(data)
