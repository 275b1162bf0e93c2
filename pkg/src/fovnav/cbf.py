"""Safety-distance, range, and field-of-view barriers with their
second-order barrier-function constraint rows.

Each barrier b maps the observer pose z = (x, y, yaw) to a scalar whose
nonnegativity means "the neighbor is on the safe side": far enough, close
enough to stay detectable, and inside the angular sensing sector.  The
barriers have relative degree 2 under double-integrator dynamics, so the
control enters through the second Lie derivative.  With odd-power class-K
gains alpha_1(s) = g1 * s^(2mu+1) and alpha_2(s) = g2 * s^(2mu+1) the
constraint linear in the acceleration u = (ux, uy, uyaw) reads

    grad(b) . u  +  Lf2b + (2mu+1) g1 b^(2mu) Lfb
                 +  g2 (Lfb + g1 b^(2mu+1))^(2mu+1)  >=  0,

where Lfb = grad(b) . w and Lf2b = w' Hess(b) w with w the pose rates.
The neighbor is treated as static at its current estimate: without
communication only the present belief is available over the horizon.
"""

import math
from dataclasses import dataclass

import numpy as np

from .state import RobotState

TWO_PI = 2.0 * math.pi

# barrier row kinds
MIN_DISTANCE = "min_distance"
MAX_RANGE = "max_range"
FOV_LEFT = "fov_left"
FOV_RIGHT = "fov_right"
FOV_SINGLE = "fov_single"

# linearization points sitting exactly on the sign discontinuity of the
# reflex-angle sector row are nudged off it before differentiation
_RAY_EPS = 1e-9


@dataclass(frozen=True)
class SensingModel:
    """Planar angular sensing sector: aperture, max range, min distance."""

    fov_angle: float  # aperture beta_H in (0, 2*pi]
    range: float  # R_s [m]
    min_distance: float  # D_s [m]

    def __post_init__(self):
        if not 0.0 < self.fov_angle <= TWO_PI:
            raise ValueError(f"fov_angle must be in (0, 2*pi], got {self.fov_angle}")
        if self.range <= 0.0:
            raise ValueError("range must be positive")
        if not 0.0 <= self.min_distance < self.range:
            raise ValueError("need 0 <= min_distance < range")

    def fov_kinds(self) -> tuple:
        """Field-of-view row kinds active for this aperture."""
        if self.fov_angle == TWO_PI:
            return ()
        if self.fov_angle < math.pi:
            return (FOV_LEFT, FOV_RIGHT)
        return (FOV_SINGLE,)

    def row_kinds(self) -> tuple:
        """All barrier row kinds: distance, range, then FoV rows."""
        return (MIN_DISTANCE, MAX_RANGE) + self.fov_kinds()


@dataclass(frozen=True)
class CbfParams:
    """Gains of the two class-K layers and the odd-power exponent."""

    gamma1: float = 1.0
    gamma2: float = 1.0
    mu: int = 0

    def __post_init__(self):
        if self.gamma1 <= 0.0 or self.gamma2 <= 0.0:
            raise ValueError("gamma1 and gamma2 must be positive")
        if self.mu < 0 or int(self.mu) != self.mu:
            raise ValueError("mu must be a nonnegative integer")


@dataclass(frozen=True)
class HocbfRow:
    """One linear-in-control constraint a_u . u + b_const >= 0."""

    a_u: np.ndarray  # coefficients on (ux, uy, uyaw)
    b_const: float
    barrier_value: float
    kind: str

    def __post_init__(self):
        a = np.asarray(self.a_u, dtype=float).reshape(3)
        if not (np.all(np.isfinite(a)) and math.isfinite(self.b_const)):
            raise ValueError("constraint row must be finite")
        object.__setattr__(self, "a_u", a)


def odd_power_alpha(s: float, gamma: float, mu: int) -> float:
    """Extended class-K gain: gamma * s^(2mu+1), odd so it recovers from s < 0."""
    return gamma * s ** (2 * mu + 1)


def body_frame(rel_world: np.ndarray, yaw: float) -> np.ndarray:
    """Rotate a world-frame relative position into the observer body frame."""
    dx, dy = rel_world
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([c * dx + s * dy, -s * dx + c * dy])


def b_sr(rel_world: np.ndarray, sensing: SensingModel) -> np.ndarray:
    """Safety-distance and range barrier values [|p|^2 - Ds^2, Rs^2 - |p|^2]."""
    sq = float(rel_world[0] ** 2 + rel_world[1] ** 2)
    return np.array([sq - sensing.min_distance**2, sensing.range**2 - sq])


def b_fov(rel_body: np.ndarray, fov_angle: float) -> np.ndarray:
    """Field-of-view barrier values for the given aperture.

    Two rows below pi (left/right cone edges), one row from pi up
    (half-plane, or the reflex-angle form with a sign switch on body-y),
    and none for a full 2*pi aperture.
    """
    if not 0.0 < fov_angle <= TWO_PI:
        raise ValueError(f"fov_angle must be in (0, 2*pi], got {fov_angle}")
    bx, by = float(rel_body[0]), float(rel_body[1])
    if fov_angle == TWO_PI:
        return np.array([])
    if fov_angle < math.pi:
        tan_half = math.tan(fov_angle / 2.0)
        return np.array([tan_half * bx + by, tan_half * bx - by])
    if fov_angle == math.pi:
        return np.array([bx])
    tan_rest = math.tan(math.pi - fov_angle / 2.0)
    sign_y = 1.0 if by >= 0.0 else -1.0
    return np.array([tan_rest * bx + sign_y * by])


def _fov_coefficients(kind: str, rel_body: np.ndarray, fov_angle: float) -> tuple:
    """(alpha, beta) with b = alpha * body_x + beta * body_y for a FoV row."""
    if fov_angle == math.pi:
        return 1.0, 0.0
    if fov_angle < math.pi:
        tan_half = math.tan(fov_angle / 2.0)
        return tan_half, 1.0 if kind == FOV_LEFT else -1.0
    by = rel_body[1]
    if abs(by) < _RAY_EPS:
        by = _RAY_EPS
    return math.tan(math.pi - fov_angle / 2.0), (1.0 if by >= 0.0 else -1.0)


def barrier_value_grad_hess(
    kind: str, state: RobotState, neighbor_pos: np.ndarray, sensing: SensingModel
) -> tuple:
    """Barrier value, gradient and Hessian with respect to z = (x, y, yaw).

    The neighbor position is a constant; for the distance/range rows the
    yaw channel vanishes, for the FoV rows it enters through the body-frame
    rotation (d body_x / d yaw = body_y, d body_y / d yaw = -body_x).
    """
    rel = np.asarray(neighbor_pos, dtype=float) - state.position
    if kind == MIN_DISTANCE or kind == MAX_RANGE:
        sq = float(rel @ rel)
        sgn = 1.0 if kind == MIN_DISTANCE else -1.0
        value = (
            sq - sensing.min_distance**2 if kind == MIN_DISTANCE else sensing.range**2 - sq
        )
        grad = np.array([-2.0 * sgn * rel[0], -2.0 * sgn * rel[1], 0.0])
        hess = np.diag([2.0 * sgn, 2.0 * sgn, 0.0])
        return value, grad, hess
    if sensing.fov_angle == TWO_PI:
        raise ValueError("no field-of-view rows for an omnidirectional sensor")
    c, s = math.cos(state.yaw), math.sin(state.yaw)
    body = body_frame(rel, state.yaw)
    if sensing.fov_angle > math.pi and abs(body[1]) < _RAY_EPS:
        body = np.array([body[0], _RAY_EPS])
    alpha, beta = _fov_coefficients(kind, body, sensing.fov_angle)
    bx, by = body
    value = alpha * bx + beta * by
    grad = np.array(
        [
            -alpha * c + beta * s,
            -alpha * s - beta * c,
            alpha * by - beta * bx,
        ]
    )
    hess = np.zeros((3, 3))
    hess[0, 2] = hess[2, 0] = alpha * s + beta * c
    hess[1, 2] = hess[2, 1] = -alpha * c + beta * s
    hess[2, 2] = -value
    return value, grad, hess


def hocbf_row(
    state: RobotState,
    neighbor_pos: np.ndarray,
    sensing: SensingModel,
    params: CbfParams,
    kind: str,
) -> HocbfRow:
    """Linear-in-control constraint row for one barrier at one state."""
    if kind not in (MIN_DISTANCE, MAX_RANGE) and kind not in sensing.fov_kinds():
        raise ValueError(f"row kind {kind!r} not active for this sensing model")
    value, grad, hess = barrier_value_grad_hess(kind, state, neighbor_pos, sensing)
    w = state.pose_rate
    lfb = float(grad @ w)
    lf2b = float(w @ hess @ w)
    g1, g2, mu = params.gamma1, params.gamma2, params.mu
    # d/dt alpha_1(b) = (2mu+1) g1 b^(2mu) db/dt, psi_1 = db/dt + alpha_1(b)
    alpha1_rate = (2 * mu + 1) * g1 * value ** (2 * mu) * lfb
    psi1 = lfb + odd_power_alpha(value, g1, mu)
    b_const = lf2b + alpha1_rate + odd_power_alpha(psi1, g2, mu)
    return HocbfRow(a_u=grad, b_const=b_const, barrier_value=value, kind=kind)


def hocbf_rows(
    state: RobotState,
    neighbor_pos: np.ndarray,
    sensing: SensingModel,
    params: CbfParams,
) -> list:
    """All active constraint rows for one neighbor at one state."""
    return [hocbf_row(state, neighbor_pos, sensing, params, k) for k in sensing.row_kinds()]
