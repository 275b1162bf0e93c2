"""Bernstein/Bezier machinery for piecewise spline trajectories.

A trajectory is a chain of Bezier curves sharing degree and dimension.  The
planner treats the stacked control points as decision variables, so besides
plain evaluation this module provides the linear maps from the stacked
control-point vector to sampled positions/derivatives, the junction
continuity system, and the Gram matrices of squared-derivative integrals.

Stacking convention for the decision vector (used by every linear map here):
index(piece i, control point v, dimension m) = (i * (h + 1) + v) * d + m,
i.e. piece-major, then control-point index, then dimension.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

__all__ = [
    "BezierCurve",
    "PiecewiseSpline",
    "SplineShape",
    "bernstein_basis",
    "bernstein_weights",
    "derivative_curve",
    "hodograph_matrix",
    "evaluation_weights",
    "evaluation_matrix",
    "continuity_system",
    "effort_gram",
    "spline_from_vector",
    "vector_from_spline",
]


def bernstein_basis(degree: int, index: int, t: float, duration: float) -> float:
    """Bernstein polynomial B_v^h(t) on [0, duration].

    Returns C(h, v) * (t/T)^v * (1 - t/T)^(h - v).
    """
    if not 0 <= index <= degree:
        raise ValueError(f"basis index {index} outside 0..{degree}")
    if not 0.0 <= t <= duration:
        raise ValueError(f"t={t} outside [0, {duration}]")
    s = t / duration
    return comb(degree, index) * s**index * (1.0 - s) ** (degree - index)


def bernstein_weights(degree: int, t: float, duration: float) -> np.ndarray:
    """All h+1 Bernstein basis values at t, as a vector."""
    if not 0.0 <= t <= duration:
        raise ValueError(f"t={t} outside [0, {duration}]")
    s = t / duration
    v = np.arange(degree + 1)
    binom = np.array([comb(degree, k) for k in v], dtype=float)
    # 0**0 at the endpoints must evaluate to 1
    with np.errstate(invalid="ignore"):
        out = binom * s**v * (1.0 - s) ** (degree - v)
    return out


@dataclass(frozen=True)
class BezierCurve:
    """One Bezier piece: (h+1, d) control points over [0, duration]."""

    control_points: np.ndarray
    duration: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.control_points, dtype=float))
        if not np.all(np.isfinite(pts)):
            raise ValueError("control points must be finite")
        if self.duration <= 0.0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        object.__setattr__(self, "control_points", pts)

    @property
    def degree(self) -> int:
        return self.control_points.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]

    def eval(self, t: float, order: int = 0) -> np.ndarray:
        """Evaluate the order-th time derivative at t in [0, duration]."""
        if not 0.0 <= t <= self.duration:
            raise ValueError(f"t={t} outside [0, {self.duration}]")
        if order < 0:
            raise ValueError("derivative order must be >= 0")
        if order > self.degree:
            return np.zeros(self.dim)
        curve = self
        for _ in range(order):
            curve = derivative_curve(curve)
        w = bernstein_weights(curve.degree, t, curve.duration)
        return w @ curve.control_points


def hodograph_matrix(degree: int, duration: float) -> np.ndarray:
    """(h, h+1) map from control points to derivative-curve control points."""
    if degree < 1:
        raise ValueError("cannot differentiate a degree-0 curve")
    D = np.zeros((degree, degree + 1))
    scale = degree / duration
    for v in range(degree):
        D[v, v] = -scale
        D[v, v + 1] = scale
    return D


def derivative_curve(curve: BezierCurve) -> BezierCurve:
    """Hodograph: the degree h-1 curve whose value is the time derivative."""
    D = hodograph_matrix(curve.degree, curve.duration)
    return BezierCurve(D @ curve.control_points, curve.duration)


@dataclass(frozen=True)
class PiecewiseSpline:
    """Chain of Bezier pieces with matching degree and dimension."""

    pieces: tuple

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if len(pieces) == 0:
            raise ValueError("need at least one piece")
        h, d = pieces[0].degree, pieces[0].dim
        for p in pieces:
            if p.degree != h or p.dim != d:
                raise ValueError("pieces must share degree and dimension")
        object.__setattr__(self, "pieces", pieces)

    @property
    def degree(self) -> int:
        return self.pieces[0].degree

    @property
    def dim(self) -> int:
        return self.pieces[0].dim

    @property
    def durations(self) -> np.ndarray:
        return np.array([p.duration for p in self.pieces])

    @property
    def duration(self) -> float:
        return float(np.sum(self.durations))

    def locate(self, t: float) -> tuple:
        """Piece index and local time for t; boundaries belong to the later piece."""
        if not 0.0 <= t <= self.duration:
            raise ValueError(f"t={t} outside [0, {self.duration}]")
        ends = np.cumsum(self.durations)
        i = int(np.searchsorted(ends, t, side="right"))
        if i >= len(self.pieces):  # t == total duration
            i = len(self.pieces) - 1
        start = ends[i] - self.pieces[i].duration
        return i, t - start

    def eval(self, t: float, order: int = 0) -> np.ndarray:
        i, t_loc = self.locate(t)
        return self.pieces[i].eval(t_loc, order)


@dataclass(frozen=True)
class SplineShape:
    """Degree, dimension and piece durations; fixes the decision-vector layout."""

    degree: int
    dim: int
    durations: tuple

    def __post_init__(self):
        durations = tuple(float(x) for x in self.durations)
        if any(x <= 0 for x in durations):
            raise ValueError("piece durations must be positive")
        object.__setattr__(self, "durations", durations)

    @property
    def pieces(self) -> int:
        return len(self.durations)

    @property
    def points_per_piece(self) -> int:
        return self.degree + 1

    @property
    def num_points(self) -> int:
        return self.pieces * self.points_per_piece

    @property
    def num_vars(self) -> int:
        return self.num_points * self.dim

    @property
    def duration(self) -> float:
        return float(sum(self.durations))

    def locate(self, t: float) -> tuple:
        ends = np.cumsum(self.durations)
        if not 0.0 <= t <= ends[-1]:
            raise ValueError(f"t={t} outside [0, {ends[-1]}]")
        i = int(np.searchsorted(ends, t, side="right"))
        if i >= self.pieces:
            i = self.pieces - 1
        return i, t - (ends[i] - self.durations[i])


def _derivative_weights(degree: int, duration: float, t_loc: float, order: int) -> np.ndarray:
    """Weights w with w @ ctrl_pts = order-th derivative of one piece at t_loc."""
    if order > degree:
        return np.zeros(degree + 1)
    w = bernstein_weights(degree - order, t_loc, duration)
    for r in range(order):
        w = w @ hodograph_matrix(degree - order + 1 + r, duration)
    return w


def evaluation_weights(shape: SplineShape, t: float, order: int) -> np.ndarray:
    """Per-control-point weights (num_points,) realizing spline evaluation.

    Only the entries of the piece containing t are nonzero; applying the
    weights to each coordinate of the control points reproduces
    PiecewiseSpline.eval(t, order).
    """
    i, t_loc = shape.locate(t)
    w = np.zeros(shape.num_points)
    if order > shape.degree:
        return w
    block = _derivative_weights(shape.degree, shape.durations[i], t_loc, order)
    w[i * shape.points_per_piece : (i + 1) * shape.points_per_piece] = block
    return w


def evaluation_matrix(shape: SplineShape, t: float, order: int) -> np.ndarray:
    """(d, num_vars) linear map: M @ vec = spline eval at (t, order)."""
    return _expand_rows(shape, evaluation_weights(shape, t, order))


def _expand_rows(shape: SplineShape, w: np.ndarray) -> np.ndarray:
    """Expand point weights to the dim-interleaved stacked layout."""
    M = np.zeros((shape.dim, shape.num_vars))
    for m in range(shape.dim):
        M[m, m :: shape.dim] = w
    return M


def continuity_system(shape: SplineShape, order: int) -> tuple:
    """Equalities gluing consecutive pieces up to the given derivative order.

    Returns (A, b) with A @ vec = b (b is zero): for each junction i and each
    j in 0..order, the order-j derivative at the end of piece i equals the
    one at the start of piece i+1.
    """
    if order > shape.degree:
        raise ValueError(f"continuity order {order} exceeds degree {shape.degree}")
    rows = []
    npp = shape.points_per_piece
    for i in range(shape.pieces - 1):
        for j in range(order + 1):
            w = np.zeros(shape.num_points)
            w[i * npp : (i + 1) * npp] = _derivative_weights(
                shape.degree, shape.durations[i], shape.durations[i], j
            )
            w[(i + 1) * npp : (i + 2) * npp] -= _derivative_weights(
                shape.degree, shape.durations[i + 1], 0.0, j
            )
            rows.append(_expand_rows(shape, w))
    if not rows:
        return np.zeros((0, shape.num_vars)), np.zeros(0)
    A = np.vstack(rows)
    return A, np.zeros(A.shape[0])


def effort_gram(degree: int, duration: float, order: int) -> np.ndarray:
    """Gram matrix G of the order-th derivative energy over one piece.

    ctrl' G ctrl (per coordinate) equals the integral over the piece of the
    squared order-th derivative.  Uses the Bernstein product integral
    int_0^T B_a^m B_b^m dt = T * C(m,a) C(m,b) / ((2m+1) C(2m,a+b)).
    """
    if order < 1:
        raise ValueError("effort order must be >= 1")
    n = degree + 1
    if order > degree:
        return np.zeros((n, n))
    D = np.eye(n)
    for r in range(order):
        D = hodograph_matrix(degree - r, duration) @ D
    m = degree - order
    M = np.empty((m + 1, m + 1))
    for a in range(m + 1):
        for b in range(m + 1):
            M[a, b] = duration * comb(m, a) * comb(m, b) / ((2 * m + 1) * comb(2 * m, a + b))
    G = D.T @ M @ D
    return 0.5 * (G + G.T)


def spline_from_vector(shape: SplineShape, vec: np.ndarray) -> PiecewiseSpline:
    """Rebuild the spline from the stacked decision vector."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (shape.num_vars,):
        raise ValueError(f"expected vector of length {shape.num_vars}, got {vec.shape}")
    pts = vec.reshape(shape.num_points, shape.dim)
    npp = shape.points_per_piece
    pieces = [
        BezierCurve(pts[i * npp : (i + 1) * npp], shape.durations[i])
        for i in range(shape.pieces)
    ]
    return PiecewiseSpline(tuple(pieces))


def vector_from_spline(spline: PiecewiseSpline) -> np.ndarray:
    return np.concatenate([p.control_points.reshape(-1) for p in spline.pieces])
