"""Risk, dominance and admissibility experiments for sample-average decision rules."""

from .errors import (
    ConfigError,
    ConstraintViolationError,
    DimensionError,
    InvalidRuleError,
    LabError,
    NumericalError,
    UnsupportedRegionError,
)
from .geometry import Ball, Box, VPolytope, contains, linear_minimize, project
from .risk import ObjectiveKind, RiskEstimate, compare_rules, estimate_risk, risk_quadrature_1d
from .rules import (
    BayesProjectedQuadratic,
    BayesScaledLinear,
    Constant,
    JamesStein,
    SampleAverageLinear,
    SampleAverageQuadratic,
    apply_rule,
)
from .stochastics import GaussianModel, Sample

__version__ = "0.1.0"
