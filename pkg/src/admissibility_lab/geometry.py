"""Feasible regions, linear minimization, Euclidean projection and box faces.

Every function accepts either a single point of shape ``(d,)`` or a batch of
points of shape ``(k, d)`` and returns an array of the same leading shape.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from .errors import DimensionError, UnsupportedRegionError

__all__ = [
    "Box",
    "Ball",
    "VPolytope",
    "FeasibleRegion",
    "FaceLabel",
    "FaceSignature",
    "linear_minimize",
    "project",
    "face_signature",
    "face_labels",
    "diameter",
    "contains",
    "center_of",
    "region_from_spec",
    "region_to_spec",
    "UNCONSTRAINED_BOUND",
    "unconstrained_box",
]

# Half-width of the sentinel box standing in for R^d.
UNCONSTRAINED_BOUND = 1e6


def _vector(values: Any, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"{name} must be a nonempty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = _vector(self.lower, "lower")
        upper = _vector(self.upper, "upper")
        if lower.shape != upper.shape:
            raise DimensionError(f"lower has dimension {lower.size}, upper has {upper.size}")
        if np.any(lower > upper):
            raise ValueError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def __repr__(self) -> str:
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vector(self.center, "center"))
        radius = float(self.radius)
        if not (np.isfinite(radius) and radius > 0):
            raise ValueError(f"ball radius must be positive and finite, got {self.radius!r}")
        object.__setattr__(self, "radius", radius)

    @property
    def dim(self) -> int:
        return self.center.size

    def __repr__(self) -> str:
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


@dataclass(frozen=True, eq=False)
class VPolytope:
    """Convex hull of finitely many vertices.

    Vertices are stored in lexicographic order; this is what makes the
    tie-break of :func:`linear_minimize` pick the lexicographically smallest
    minimizing vertex.
    """

    vertices: np.ndarray
    _sorted: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[0] == 0 or verts.shape[1] == 0:
            raise DimensionError(
                f"vertices must be a nonempty list of equal-length vectors, got shape {verts.shape}"
            )
        if not np.all(np.isfinite(verts)):
            raise ValueError("vertices must be finite")
        verts.setflags(write=False)
        order = np.lexsort(verts.T[::-1])
        srt = verts[order]
        srt.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "_sorted", srt)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __repr__(self) -> str:
        return f"VPolytope(vertices={self.vertices.tolist()})"


FeasibleRegion = Union[Box, Ball, VPolytope]


def unconstrained_box(dim: int) -> Box:
    """The sentinel box [-1e6, 1e6]^d used for 'effectively unconstrained' problems."""
    return Box(np.full(dim, -UNCONSTRAINED_BOUND), np.full(dim, UNCONSTRAINED_BOUND))


def _as_points(x: Any, region: FeasibleRegion, name: str = "point") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim not in (1, 2) or arr.shape[-1] != region.dim:
        raise DimensionError(
            f"{name} has shape {arr.shape}, region has dimension {region.dim}"
        )
    return arr


def center_of(region: FeasibleRegion) -> np.ndarray:
    if isinstance(region, Box):
        return region.center
    if isinstance(region, Ball):
        return region.center
    if isinstance(region, VPolytope):
        return region.vertices.mean(axis=0)
    raise UnsupportedRegionError(f"unknown region type {type(region).__name__}")


def linear_minimize(c: Any, region: FeasibleRegion) -> np.ndarray:
    """Return a minimizer of ``c^T x`` over ``region``.

    Ties are broken deterministically: for a box a zero coefficient selects the
    lower bound, for a ball ``c = 0`` selects the center, and for a polytope
    the lexicographically smallest minimizing vertex is returned.
    """
    c = _as_points(c, region, "c")
    if isinstance(region, Box):
        return np.where(c < 0, region.upper, region.lower)
    if isinstance(region, Ball):
        # rescale by max |c_i| first so tiny or huge coefficients do not under/overflow
        peak = np.max(np.abs(c), axis=-1, keepdims=True)
        c = c / np.where(peak > 0, peak, 1.0)
        norms = np.linalg.norm(c, axis=-1, keepdims=True)
        safe = np.where(norms > 0, norms, 1.0)
        step = np.where(norms > 0, c / safe, 0.0)
        return region.center - region.radius * step
    if isinstance(region, VPolytope):
        verts = region._sorted
        values = c @ verts.T
        idx = np.argmin(values, axis=-1)
        return verts[idx]
    raise UnsupportedRegionError(f"unknown region type {type(region).__name__}")


def project(y: Any, region: FeasibleRegion) -> np.ndarray:
    """Euclidean projection onto a box or a ball."""
    if isinstance(region, VPolytope):
        raise UnsupportedRegionError("projection onto a vertex-described polytope is not supported")
    y = _as_points(y, region, "y")
    if isinstance(region, Box):
        return np.clip(y, region.lower, region.upper)
    if isinstance(region, Ball):
        offset = y - region.center
        norms = np.linalg.norm(offset, axis=-1, keepdims=True)
        scale = np.where(norms > region.radius, region.radius / np.where(norms > 0, norms, 1.0), 1.0)
        return region.center + offset * scale
    raise UnsupportedRegionError(f"unknown region type {type(region).__name__}")


def contains(region: FeasibleRegion, x: Any, tol: float = 1e-9) -> np.ndarray | bool:
    """Membership test with absolute tolerance ``tol``.

    Polytope membership is decided by a nonnegative least-squares fit of
    barycentric weights over the vertices.
    """
    x = _as_points(x, region, "x")
    if isinstance(region, Box):
        ok = np.all((x >= region.lower - tol) & (x <= region.upper + tol), axis=-1)
    elif isinstance(region, Ball):
        ok = np.linalg.norm(x - region.center, axis=-1) <= region.radius + tol
    elif isinstance(region, VPolytope):
        ok = _in_hull(x, region.vertices, tol)
    else:
        raise UnsupportedRegionError(f"unknown region type {type(region).__name__}")
    return bool(ok) if np.ndim(ok) == 0 else ok


def _in_hull(x: np.ndarray, verts: np.ndarray, tol: float) -> np.ndarray | bool:
    from scipy.optimize import nnls

    points = np.atleast_2d(x)
    # Barycentric weights w >= 0 with V^T w = x and sum(w) = 1, heavily weighting the sum row.
    a = np.vstack([verts.T, 1e3 * np.ones(verts.shape[0])])
    out = np.empty(points.shape[0], dtype=bool)
    for k, p in enumerate(points):
        w, _ = nnls(a, np.append(p, 1e3))
        out[k] = np.linalg.norm(verts.T @ w - p) <= tol and abs(w.sum() - 1.0) <= 1e-6
    return out if x.ndim == 2 else bool(out[0])


def diameter(region: FeasibleRegion) -> float:
    if isinstance(region, Box):
        return float(np.linalg.norm(region.upper - region.lower))
    if isinstance(region, Ball):
        return 2.0 * region.radius
    if isinstance(region, VPolytope):
        v = region.vertices
        best = 0.0
        for i in range(v.shape[0]):
            best = max(best, float(np.max(np.linalg.norm(v - v[i], axis=1))))
        return best
    raise UnsupportedRegionError(f"unknown region type {type(region).__name__}")


class FaceLabel(enum.IntEnum):
    MINUS = -1
    ZERO = 0
    PLUS = 1

    def __str__(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class FaceSignature:
    """Per-coordinate membership of a point in the face/normal-cone cells of a box.

    ``plus`` coordinates sit at or beyond the scaled upper bound, ``minus`` at or
    beyond the scaled lower bound, ``zero`` strictly inside the scaled slab.
    """

    labels: tuple[FaceLabel, ...]

    @property
    def plus(self) -> tuple[int, ...]:
        return tuple(i for i, lab in enumerate(self.labels) if lab is FaceLabel.PLUS)

    @property
    def minus(self) -> tuple[int, ...]:
        return tuple(i for i, lab in enumerate(self.labels) if lab is FaceLabel.MINUS)

    @property
    def zero(self) -> tuple[int, ...]:
        return tuple(i for i, lab in enumerate(self.labels) if lab is FaceLabel.ZERO)

    @property
    def face_dim(self) -> int:
        return len(self.zero)

    def cell_contains(self, y: Any, box: Box, scale: float = 1.0) -> bool:
        """Is ``y`` in the closed cell ``F' + N_F'`` described by this signature?"""
        yc = np.asarray(y, dtype=float) - box.center
        bound = scale * box.half_widths
        for i, lab in enumerate(self.labels):
            if lab is FaceLabel.PLUS and not yc[i] >= bound[i]:
                return False
            if lab is FaceLabel.MINUS and not yc[i] <= -bound[i]:
                return False
            if lab is FaceLabel.ZERO and not -bound[i] <= yc[i] <= bound[i]:
                return False
        return True

    def __str__(self) -> str:
        return "(" + ", ".join(str(lab) for lab in self.labels) + ")"

    @classmethod
    def all_signatures(cls, dim: int) -> list["FaceSignature"]:
        """Every signature of a ``dim``-dimensional box, one per face."""
        return [cls(tuple(combo)) for combo in itertools.product(list(FaceLabel), repeat=dim)]


def face_labels(y: Any, box: FeasibleRegion, scale: float = 1.0) -> np.ndarray:
    """Vectorized face labels (+1, -1, 0) for points relative to ``scale * box``."""
    if not isinstance(box, Box):
        raise UnsupportedRegionError("face signatures are defined for boxes only")
    if scale < 1:
        raise ValueError(f"scale must be >= 1, got {scale}")
    yc = _as_points(y, box, "y") - box.center
    bound = scale * box.half_widths
    return np.where(yc >= bound, 1, np.where(yc <= -bound, -1, 0)).astype(np.int8)


def face_signature(y: Any, box: FeasibleRegion, scale: float = 1.0) -> FaceSignature:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimensionError("face_signature takes a single point; use face_labels for batches")
    labels = face_labels(y, box, scale)
    return FaceSignature(tuple(FaceLabel(int(v)) for v in labels))


def region_from_spec(spec: dict) -> FeasibleRegion:
    """Build a region from its JSON form, e.g. ``{"box": {"lower": [..], "upper": [..]}}``."""
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ValueError("region spec must be an object with exactly one of 'box', 'ball', 'vpolytope'")
    (kind, body), = spec.items()
    if not isinstance(body, dict):
        raise ValueError(f"region '{kind}' body must be an object")
    if kind == "box":
        return Box(body["lower"], body["upper"])
    if kind == "ball":
        return Ball(body["center"], body["radius"])
    if kind == "vpolytope":
        return VPolytope(body["vertices"])
    raise ValueError(f"unknown region kind '{kind}'")


def region_to_spec(region: FeasibleRegion) -> dict:
    if isinstance(region, Box):
        return {"box": {"lower": region.lower.tolist(), "upper": region.upper.tolist()}}
    if isinstance(region, Ball):
        return {"ball": {"center": region.center.tolist(), "radius": region.radius}}
    if isinstance(region, VPolytope):
        return {"vpolytope": {"vertices": region.vertices.tolist()}}
    raise UnsupportedRegionError(f"unknown region type {type(region).__name__}")
