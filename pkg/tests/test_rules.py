from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from admissibility_lab.errors import ConstraintViolationError, DimensionError, InvalidRuleError
from admissibility_lab.geometry import Ball, Box, VPolytope, contains, linear_minimize, project, unconstrained_box
from admissibility_lab.rules import (
    BayesProjectedQuadratic,
    BayesScaledLinear,
    Constant,
    JamesStein,
    SampleAverageLinear,
    SampleAverageQuadratic,
    apply_rule,
    apply_rule_to_means,
    bayes_shrink_factor,
    james_stein_factor,
    rule_from_spec,
    rule_label,
    rule_to_spec,
)
from admissibility_lab.stochastics import GaussianModel, Sample, draw_sample_means

CUBE3 = Box([-1] * 3, [1] * 3)


def test_sample_average_rules():
    x = np.array([0.5, -2.0, 0.0])
    np.testing.assert_array_equal(apply_rule_to_means(SampleAverageLinear(), CUBE3, x, 1), [-1, 1, -1])
    np.testing.assert_array_equal(apply_rule_to_means(SampleAverageQuadratic(), CUBE3, x, 1), [0.5, -1, 0])


def test_apply_rule_uses_mean_only():
    draws = np.array([[0.0, 1.0, 3.0], [2.0, -3.0, -1.0]])
    s = Sample.from_draws(draws)
    for rule in (SampleAverageQuadratic(), JamesStein(), BayesProjectedQuadratic(1.0)):
        np.testing.assert_array_equal(apply_rule(rule, CUBE3, s), apply_rule_to_means(rule, CUBE3, s.mean, 2))


def test_bayes_projected_matches_formula():
    box = Box([0, 0], [2, 4])  # center (1, 2)
    rule = BayesProjectedQuadratic(tau=0.5)
    x = np.array([3.0, -1.0])
    s = bayes_shrink_factor(0.5, 4)
    assert s == pytest.approx(0.5)
    expected = np.clip(np.array([1, 2]) + s * (x - [1, 2]), box.lower, box.upper)
    np.testing.assert_allclose(apply_rule_to_means(rule, box, x, 4), expected)


def test_james_stein_factor_and_positive_part():
    x = np.array([[1.0, 0.0, 0.0], [0.1, 0.1, 0.1]])
    f = james_stein_factor(x, n=1)
    assert f[0] == pytest.approx(0.0)
    assert f[1] == pytest.approx(1 - 1 / 0.03)
    assert james_stein_factor(x, 1, positive_part=True)[1] == 0.0


def test_james_stein_needs_three_dims():
    with pytest.raises(InvalidRuleError):
        apply_rule_to_means(JamesStein(), Box([-1, -1], [1, 1]), [0.1, 0.2], 1)


def test_unprojected_js_must_stay_inside():
    big = unconstrained_box(3)
    out = apply_rule_to_means(JamesStein(projected=False), big, [2.0, 0.0, 0.0], 1)
    np.testing.assert_allclose(out, [1.5, 0, 0])
    with pytest.raises(ConstraintViolationError):
        apply_rule_to_means(JamesStein(projected=False), CUBE3, [0.01, 0.0, 0.0], 1)


def test_constant_rule_checks_membership():
    np.testing.assert_array_equal(apply_rule_to_means(Constant([0, 0, 0]), CUBE3, [[5, 5, 5]], 1), [[0, 0, 0]])
    with pytest.raises(ConstraintViolationError):
        apply_rule_to_means(Constant([2, 0, 0]), CUBE3, [0, 0, 0], 1)
    with pytest.raises(InvalidRuleError):
        Constant([np.nan])


def test_invalid_parameters():
    with pytest.raises(InvalidRuleError):
        BayesScaledLinear(0.0)
    with pytest.raises(InvalidRuleError):
        BayesProjectedQuadratic(-1.0)
    with pytest.raises(DimensionError):
        apply_rule_to_means(SampleAverageLinear(), CUBE3, [1.0, 2.0], 1)


@pytest.mark.parametrize(
    "rule",
    [
        SampleAverageLinear(),
        SampleAverageQuadratic(),
        BayesScaledLinear(0.3),
        BayesProjectedQuadratic(2.0),
        JamesStein(True, False),
        JamesStein(True, True),
        JamesStein(False, True),
        Constant([0.25, -0.5, 1.0]),
    ],
)
def test_spec_round_trip(rule):
    spec = rule_to_spec(rule)
    assert rule_from_spec(spec) == rule
    assert rule_to_spec(rule_from_spec(spec)) == spec


def test_spec_errors():
    with pytest.raises(InvalidRuleError):
        rule_from_spec({"rule": "nope"})
    with pytest.raises(InvalidRuleError):
        rule_from_spec({"rule": "james_stein", "shrink": 1})
    with pytest.raises(InvalidRuleError):
        rule_from_spec({"rule": "james_stein", "projected": "yes"})


def test_labels():
    assert rule_label(SampleAverageQuadratic()) == "sample_average_quadratic"
    assert rule_label(JamesStein()) == "james_stein(projected=true,positive_part=false)"
    assert rule_label(BayesProjectedQuadratic(2.0)) == "bayes_projected_quadratic(tau=2.0)"


# --- invariants -------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(
    hnp.arrays(np.float64, (20, 3), elements=st.floats(-20, 20)),
    st.floats(1e-3, 1.0),
)
def test_bayes_linear_equals_sa_linear(means, shrink):
    for region in (CUBE3, VPolytope(np.eye(3))):
        np.testing.assert_array_equal(
            apply_rule_to_means(BayesScaledLinear(shrink), region, means, 1),
            apply_rule_to_means(SampleAverageLinear(), region, means, 1),
        )
    # the ball argmin normalises c, which can move the last bit
    ball = Ball([0.5, 0, 0], 2.0)
    np.testing.assert_allclose(
        apply_rule_to_means(BayesScaledLinear(shrink), ball, means, 1),
        apply_rule_to_means(SampleAverageLinear(), ball, means, 1),
        rtol=0, atol=1e-12,
    )


def test_range_invariant_all_rules():
    """Every rule maps 10^5 sample means into the region."""
    model = GaussianModel([0.3, -0.2, 0.1], np.diag([1.0, 2.0, 0.5]), n=2)
    means = draw_sample_means(model, 0, 100_000) * 3
    regions = [CUBE3, Box([0, -2, -1], [3, 1, 0.5]), Ball([0.2, 0.1, 0.0], 1.3)]
    rules = [
        SampleAverageLinear(),
        SampleAverageQuadratic(),
        BayesScaledLinear(0.5),
        BayesProjectedQuadratic(0.7),
        JamesStein(True, False),
        JamesStein(True, True),
    ]
    for region in regions:
        for rule in rules:
            out = apply_rule_to_means(rule, region, means, model.n)
            assert out.shape == means.shape
            assert np.all(contains(region, out, tol=1e-9)), rule_label(rule)
    poly = VPolytope([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    out = apply_rule_to_means(SampleAverageLinear(), poly, means[:2000], 1)
    assert np.all(contains(poly, out))


def test_constant_and_linear_rules_batch_rowwise():
    means = np.random.default_rng(1).normal(size=(30, 3))
    batch = apply_rule_to_means(SampleAverageLinear(), CUBE3, means, 1)
    for m, row in zip(means, batch):
        np.testing.assert_array_equal(linear_minimize(m, CUBE3), row)
    np.testing.assert_array_equal(apply_rule_to_means(SampleAverageQuadratic(), CUBE3, means, 1), project(means, CUBE3))
