"""Built-in experiment configurations.

Default replications: 10^5 for risk and comparison scans, 10^6 for Blyth
scans and for the finite-difference Hessian in the trace preset (its
per-replication stencil has variance of order 1/h^2).  Default state grid for
dominance scans: ``{0, 1/2, 1, 2, 4} * e1`` plus the unit diagonal
``(1,...,1)/sqrt(d)`` scaled the same way (see :func:`config.default_grid`).
"""

from __future__ import annotations

import copy

from .config import ExperimentConfig, parse_config
from .geometry import UNCONSTRAINED_BOUND

__all__ = ["PRESETS", "preset_names", "get_preset", "presets"]

BLYTH_TAUS = [2.0, 4.0, 8.0, 16.0, 32.0]
RISK_REPS = 100_000
BLYTH_REPS = 1_000_000


def _cube(d: int, half: float = 1.0) -> dict:
    return {"box": {"lower": [-half] * d, "upper": [half] * d}}


def _eye(d: int) -> list[list[float]]:
    return [[1.0 if i == j else 0.0 for j in range(d)] for i in range(d)]


def _box_dominance(d: int) -> dict:
    return {
        "experiment": "compare",
        "kind": "quadratic",
        "region": _cube(d),
        "model": {"sigma": _eye(d), "n": 1},
        "rules": [
            {"rule": "james_stein", "projected": True, "positive_part": False},
            {"rule": "sample_average_quadratic"},
        ],
        "replications": RISK_REPS,
        "seed": 0,
    }


def _blyth_box(d: int) -> dict:
    return {
        "experiment": "blyth",
        "region": _cube(d),
        "model": {"sigma": _eye(d), "n": 1},
        "taus": list(BLYTH_TAUS),
        "replications": BLYTH_REPS,
        "seed": 0,
    }


PRESETS: dict[str, dict] = {
    "stein-d3": {
        "experiment": "stein",
        "kind": "squared_error",
        "region": _cube(3, UNCONSTRAINED_BOUND),
        "model": {"sigma": _eye(3), "n": 1},
        "rules": [
            {"rule": "james_stein", "projected": False, "positive_part": False},
            {"rule": "sample_average_quadratic"},
        ],
        "grid": [[t, 0.0, 0.0] for t in (0.0, 0.5, 1.0, 2.0, 4.0)],
        "replications": RISK_REPS,
        "seed": 0,
    },
    "box-dominance-d3": _box_dominance(3),
    "box-dominance-d4": _box_dominance(4),
    **{f"blyth-box-d{d}": _blyth_box(d) for d in range(1, 6)},
    "blyth-ball-d5": {
        "experiment": "blyth",
        "region": {"ball": {"center": [0.0] * 5, "radius": 1.0}},
        "model": {"sigma": _eye(5), "n": 1},
        "taus": list(BLYTH_TAUS),
        "replications": BLYTH_REPS,
        "seed": 0,
    },
    "consistency-linear": {
        "experiment": "consistency",
        "kind": "linear",
        "region": _cube(2),
        "model": {"sigma": _eye(2), "n": 1},
        "rules": [{"rule": "sample_average_linear"}],
        "mu": [0.3, 0.7],
        "n_list": [1, 4, 16, 64, 256],
        "replications": RISK_REPS,
        "seed": 0,
    },
    "trace-constant-rule": {
        "experiment": "trace",
        "kind": "linear",
        "region": _cube(2),
        "model": {"sigma": _eye(2), "n": 1},
        "rules": [{"rule": "constant", "point": [0.0, 0.0]}],
        "replications": BLYTH_REPS,
        "seed": 0,
    },
}


def preset_names() -> list[str]:
    return list(PRESETS)


def get_preset(name: str, **overrides) -> ExperimentConfig:
    """Validated preset; keyword overrides (``seed``, ``replications``, ``output_dir``) replace fields."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset '{name}'; choose from {preset_names()}")
    data = copy.deepcopy(PRESETS[name])
    data.setdefault("output_dir", f"out/{name}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return parse_config(data)


def presets() -> list[tuple[str, ExperimentConfig]]:
    return [(name, get_preset(name)) for name in PRESETS]
