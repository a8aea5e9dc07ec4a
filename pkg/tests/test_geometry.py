from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy.optimize import linprog, minimize

from admissibility_lab.errors import DimensionError, UnsupportedRegionError
from admissibility_lab.geometry import (
    Ball,
    Box,
    FaceLabel,
    FaceSignature,
    VPolytope,
    center_of,
    contains,
    diameter,
    face_labels,
    face_signature,
    linear_minimize,
    project,
    region_from_spec,
    region_to_spec,
    unconstrained_box,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False, allow_subnormal=False)


def vectors(d):
    return hnp.arrays(np.float64, d, elements=finite)


@st.composite
def boxes(draw, d=None):
    d = d or draw(st.integers(1, 5))
    lo = draw(hnp.arrays(np.float64, d, elements=st.floats(-5, 5)))
    width = draw(hnp.arrays(np.float64, d, elements=st.floats(0.01, 5)))
    return Box(lo, lo + width)


@st.composite
def balls(draw, d=None):
    d = d or draw(st.integers(1, 5))
    c = draw(hnp.arrays(np.float64, d, elements=st.floats(-5, 5)))
    return Ball(c, draw(st.floats(0.01, 5)))


# --- linear minimization -------------------------------------------------


def test_box_argmin_examples():
    box = Box([-1, -1], [1, 1])
    np.testing.assert_array_equal(linear_minimize([1, -2], box), [-1, 1])
    # zero coefficient resolves to the lower bound
    np.testing.assert_array_equal(linear_minimize([0, 3], box), [-1, -1])


def test_ball_argmin_examples():
    ball = Ball([1, 0], 2)
    np.testing.assert_allclose(linear_minimize([3, 4], ball), [1 - 1.2, -1.6])
    np.testing.assert_array_equal(linear_minimize([0, 0], ball), [1, 0])


def test_polytope_argmin_tie_is_lexicographic():
    square = VPolytope([[1, 1], [-1, 1], [1, -1], [-1, -1]])
    # c = (0, 1): both (-1,-1) and (1,-1) are optimal
    np.testing.assert_array_equal(linear_minimize([0, 1], square), [-1, -1])
    np.testing.assert_array_equal(linear_minimize([0, 0], square), [-1, -1])
    np.testing.assert_array_equal(linear_minimize([-1, -1], square), [1, 1])


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_box_argmin_matches_lp(data):
    box = data.draw(boxes())
    c = data.draw(vectors(box.dim))
    x = linear_minimize(c, box)
    res = linprog(c, bounds=list(zip(box.lower, box.upper)), method="highs")
    assert c @ x <= res.fun + 1e-7 * (1 + abs(res.fun))
    assert contains(box, x)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_argmin_positive_scale_invariance(data):
    region = data.draw(st.one_of(boxes(), balls()))
    c = data.draw(vectors(region.dim))
    a = data.draw(st.floats(1e-3, 1e3))
    np.testing.assert_allclose(linear_minimize(a * c, region), linear_minimize(c, region), atol=1e-9)


def test_polytope_argmin_matches_enumeration():
    rng = np.random.default_rng(3)
    verts = rng.normal(size=(12, 3))
    poly = VPolytope(verts)
    for c in rng.normal(size=(50, 3)):
        x = linear_minimize(c, poly)
        assert c @ x == pytest.approx(np.min(verts @ c), abs=1e-12)


def test_batch_argmin_matches_rowwise():
    box = Box([-1, 0, 2], [1, 3, 4])
    cs = np.random.default_rng(0).normal(size=(20, 3))
    batch = linear_minimize(cs, box)
    for c, row in zip(cs, batch):
        np.testing.assert_array_equal(linear_minimize(c, box), row)


# --- projection -----------------------------------------------------------


def test_projection_examples():
    np.testing.assert_array_equal(project([2, -3, 0.5], Box([-1] * 3, [1] * 3)), [1, -1, 0.5])
    np.testing.assert_allclose(project([3, 4], Ball([0, 0], 1)), [0.6, 0.8])
    np.testing.assert_array_equal(project([0.1, 0.2], Ball([0, 0], 1)), [0.1, 0.2])


def test_projection_onto_polytope_unsupported():
    with pytest.raises(UnsupportedRegionError):
        project([0, 0], VPolytope([[0, 0], [1, 0], [0, 1]]))


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_projection_idempotent_and_feasible(data):
    region = data.draw(st.one_of(boxes(), balls()))
    y = data.draw(vectors(region.dim))
    p = project(y, region)
    assert contains(region, p, tol=1e-9)
    np.testing.assert_allclose(project(p, region), p, atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_projection_variational_inequality(data):
    # <y - P(y), z - P(y)> <= 0 for every feasible z
    region = data.draw(st.one_of(boxes(), balls()))
    y = data.draw(vectors(region.dim))
    z = project(data.draw(vectors(region.dim)), region)
    p = project(y, region)
    assert (y - p) @ (z - p) <= 1e-8 * (1 + np.abs(y).max() ** 2)


def test_projection_optimality_bulk():
    """10^4 random cases against the variational inequality with random feasible witnesses."""
    rng = np.random.default_rng(11)
    for region in (Box([-1, -2, 0], [1, 0.5, 3]), Ball([0.5, -1, 2], 1.5)):
        y = rng.normal(scale=4, size=(10_000, 3))
        p = project(y, region)
        z = project(rng.normal(scale=4, size=(10_000, 3)), region)
        assert np.all(contains(region, p, tol=1e-9))
        np.testing.assert_allclose(project(p, region), p, atol=1e-12)
        assert np.all(np.einsum("ij,ij->i", y - p, z - p) <= 1e-9)


def test_projection_matches_numerical_minimizer():
    ball = Ball([0.3, -0.2, 0.1], 0.7)
    y = np.array([2.0, 1.0, -1.0])
    cons = {"type": "ineq", "fun": lambda x: ball.radius**2 - np.sum((x - ball.center) ** 2)}
    res = minimize(lambda x: np.sum((x - y) ** 2), ball.center, constraints=[cons], method="SLSQP", tol=1e-12)
    np.testing.assert_allclose(project(y, ball), res.x, atol=1e-6)


# --- containment / misc ---------------------------------------------------


def test_contains_polytope():
    tri = VPolytope([[0, 0], [1, 0], [0, 1]])
    assert contains(tri, [0.2, 0.2])
    assert not contains(tri, [0.8, 0.8])
    np.testing.assert_array_equal(contains(tri, [[0.1, 0.1], [1.0, 1.0]]), [True, False])


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        project([1, 2, 3], Box([0, 0], [1, 1]))
    with pytest.raises(DimensionError):
        linear_minimize([1], Ball([0, 0], 1))


def test_invalid_regions():
    with pytest.raises(ValueError):
        Box([1, 0], [0, 1])
    with pytest.raises(ValueError):
        Ball([0, 0], 0.0)


def test_diameter_and_center():
    assert diameter(Box([0, 0], [3, 4])) == pytest.approx(5.0)
    assert diameter(Ball([1, 1], 2)) == 4.0
    assert diameter(VPolytope([[0, 0], [3, 0], [0, 4]])) == pytest.approx(5.0)
    np.testing.assert_array_equal(center_of(Box([0, 2], [2, 4])), [1, 3])


def test_unconstrained_box():
    box = unconstrained_box(3)
    np.testing.assert_array_equal(box.upper, [1e6] * 3)


@pytest.mark.parametrize(
    "region",
    [Box([-1, 0], [1, 2]), Ball([0.5, 0.5, 0.5], 2.0), VPolytope([[0, 0], [1, 0], [0, 1]])],
)
def test_region_spec_round_trip(region):
    again = region_from_spec(region_to_spec(region))
    assert region_to_spec(again) == region_to_spec(region)


# --- faces ----------------------------------------------------------------


def test_face_signature_example():
    box = Box([-1, -1, -1], [1, 1, 1])
    sig = face_signature([2.0, 0.0, -1.5], box)
    assert sig.labels == (FaceLabel.PLUS, FaceLabel.ZERO, FaceLabel.MINUS)
    assert sig.plus == (0,) and sig.zero == (1,) and sig.minus == (2,)
    assert sig.face_dim == 1
    assert str(sig) == "(plus, zero, minus)"


def test_face_signature_scale():
    box = Box([-1, -1], [1, 1])
    np.testing.assert_array_equal(face_labels([[1.5, -2.5]], box, scale=2.0), [[0, -1]])
    with pytest.raises(ValueError):
        face_labels([0, 0], box, scale=0.5)
    with pytest.raises(UnsupportedRegionError):
        face_labels([0, 0], Ball([0, 0], 1))


def test_signatures_count_and_cells_cover():
    assert len(FaceSignature.all_signatures(3)) == 27
    box = Box([-1, -2], [1, 2])
    for y in np.random.default_rng(0).normal(scale=3, size=(200, 2)):
        hits = [s for s in FaceSignature.all_signatures(2) if s.cell_contains(y, box, 1.5)]
        assert face_signature(y, box, 1.5) in hits


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_orthogonality_on_face_cells(data):
    box = data.draw(boxes())
    s = data.draw(st.floats(0.05, 0.999))
    y = box.center + data.draw(vectors(box.dim)) / 5
    sig = face_labels(y, box, 1.0 / s)
    ys = box.center + s * (y - box.center)
    a = ys - project(ys, box)
    b = project(y, box) - project(ys, box)
    # interior coordinates of the scaled cell have a == 0; the others are clipped in both, so b == 0
    assert np.all(a[sig == 0] == 0)
    assert np.all(b[sig != 0] == 0)
    assert abs(a @ b) <= 1e-10


def test_faces_enumerated_for_unit_square():
    sigs = {s.labels for s in FaceSignature.all_signatures(2)}
    assert sigs == set(itertools.product(list(FaceLabel), repeat=2))
