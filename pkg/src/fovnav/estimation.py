"""Per-neighbor particle filters with sensing-sector-aware updates.

Each robot runs one filter per neighbor.  Particles diffuse with a
zero-velocity random walk (no communication means no intent model), are
reweighted by Gaussian detections when the neighbor is seen, and are
penalized inside the observer's sensing sector when it is not: a particle
the camera should have seen but did not is less credible.  The weighted
cloud yields the point estimate, a 95% confidence ellipsoid, and the
ellipsoid distances used to prioritize constraint slacks.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cbf import SensingModel
from .state import RobotState

# chi-square 2-dof quantile at 0.95: -2 ln(0.05)
CHI2_2_95 = -2.0 * math.log(0.05)


@dataclass(frozen=True)
class FilterParams:
    """Process/measurement covariances and the out-of-view penalty."""

    process_cov: np.ndarray  # (2,2) [m^2/s]
    measurement_cov: np.ndarray  # (2,2) [m^2]
    fov_penalty: float = 0.1  # epsilon in [0,1)
    resample_threshold: float = 0.5  # ESS fraction triggering resampling
    workspace: tuple = ((-10.0, -10.0), (10.0, 10.0))  # degeneracy reinit bounds

    def __post_init__(self):
        for name in ("process_cov", "measurement_cov"):
            m = np.asarray(getattr(self, name), dtype=float).reshape(2, 2)
            if not np.allclose(m, m.T):
                raise ValueError(f"{name} must be symmetric")
            if np.any(np.linalg.eigvalsh(m) < 0):
                raise ValueError(f"{name} must be positive semidefinite")
            object.__setattr__(self, name, m)
        if not 0.0 <= self.fov_penalty < 1.0:
            raise ValueError("fov_penalty must be in [0, 1)")
        if not 0.0 < self.resample_threshold <= 1.0:
            raise ValueError("resample_threshold must be in (0, 1]")


@dataclass(frozen=True)
class ParticleSet:
    """Weighted position hypotheses for one neighbor.

    The generator is owned by the set and advances with each stochastic
    operation; rebuilding from the same seed and replaying the same call
    sequence reproduces the cloud bit for bit.
    """

    positions: np.ndarray  # (N, 2)
    weights: np.ndarray  # (N,), normalized
    rng_seed: int
    rng: np.random.Generator = None
    degenerate: bool = False

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(pos) != len(w) or len(pos) == 0:
            raise ValueError("need matching, nonempty positions and weights")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must not all vanish")
        if abs(total - 1.0) > 1e-12:
            w = w / total
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        if self.rng is None:
            object.__setattr__(self, "rng", np.random.default_rng(self.rng_seed))

    @property
    def size(self) -> int:
        return len(self.weights)

    @staticmethod
    def uniform(n: int, bounds, seed: int) -> "ParticleSet":
        """n particles uniform over ((xmin, ymin), (xmax, ymax))."""
        rng = np.random.default_rng(seed)
        lo, hi = np.asarray(bounds[0], float), np.asarray(bounds[1], float)
        pos = rng.uniform(lo, hi, size=(n, 2))
        return ParticleSet(pos, np.full(n, 1.0 / n), seed, rng)

    @staticmethod
    def gaussian(n: int, center, sigma: float, seed: int) -> "ParticleSet":
        """n particles in a tight isotropic cloud at a known position."""
        rng = np.random.default_rng(seed)
        pos = np.asarray(center, float) + sigma * rng.standard_normal((n, 2))
        return ParticleSet(pos, np.full(n, 1.0 / n), seed, rng)


def pf_predict(ps: ParticleSet, params: FilterParams, dt: float) -> ParticleSet:
    """Diffuse particles by the random-walk process noise; weights unchanged."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cov = params.process_cov * dt
    if not cov.any():
        return ps
    chol = np.linalg.cholesky(cov + 1e-18 * np.eye(2))
    noise = ps.rng.standard_normal(ps.positions.shape) @ chol.T
    return replace(ps, positions=ps.positions + noise, degenerate=False)


def _sector_mask(positions: np.ndarray, observer: RobotState, sensing: SensingModel) -> np.ndarray:
    rel = positions - observer.position
    dist = np.hypot(rel[:, 0], rel[:, 1])
    ok = (dist >= sensing.min_distance) & (dist <= sensing.range)
    if sensing.fov_angle < 2.0 * math.pi:
        c, s = math.cos(observer.yaw), math.sin(observer.yaw)
        body_x = c * rel[:, 0] + s * rel[:, 1]
        body_y = -s * rel[:, 0] + c * rel[:, 1]
        ok &= np.abs(np.arctan2(body_y, body_x)) <= sensing.fov_angle / 2.0
    return ok


def _systematic_resample(ps: ParticleSet) -> ParticleSet:
    n = ps.size
    offsets = (ps.rng.random() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(ps.weights), offsets)
    idx = np.minimum(idx, n - 1)
    return replace(ps, positions=ps.positions[idx], weights=np.full(n, 1.0 / n))


def _reinitialize(ps: ParticleSet, params: FilterParams) -> ParticleSet:
    lo, hi = np.asarray(params.workspace[0], float), np.asarray(params.workspace[1], float)
    pos = ps.rng.uniform(lo, hi, size=(ps.size, 2))
    return replace(ps, positions=pos, weights=np.full(ps.size, 1.0 / ps.size), degenerate=True)


def pf_update(
    ps: ParticleSet,
    measurement,
    observer_state: RobotState,
    sensing: SensingModel,
    params: FilterParams,
) -> ParticleSet:
    """Measurement update, or sector penalty when no detection arrived.

    With a measurement (absolute neighbor position): Gaussian reweighting by
    the measurement covariance, then systematic resampling once the
    effective sample size drops below the configured fraction.  Without
    one: particles inside the observer's sector are scaled by the penalty
    factor, which preserves the normalized distribution when all or none
    are inside.  Total weight underflow reinitializes uniformly over the
    workspace and flags the set as degenerate.
    """
    if measurement is not None:
        delta = ps.positions - np.asarray(measurement, dtype=float)
        info = np.linalg.inv(params.measurement_cov)
        log_like = -0.5 * np.einsum("ni,ij,nj->n", delta, info, delta)
        log_like -= log_like.max()  # scale invariance of the posterior
        w = ps.weights * np.exp(log_like)
        total = w.sum()
        if total <= 0 or not np.isfinite(total):
            return _reinitialize(ps, params)
        w /= total
        out = replace(ps, weights=w, degenerate=False)
        ess = 1.0 / float(w @ w)
        if ess < params.resample_threshold * ps.size:
            out = _systematic_resample(out)
        return out
    inside = _sector_mask(ps.positions, observer_state, sensing)
    if not inside.any():
        return replace(ps, degenerate=False)
    w = ps.weights.copy()
    w[inside] *= params.fov_penalty
    total = w.sum()
    if total <= 0:
        return _reinitialize(ps, params)
    return replace(ps, weights=w / total, degenerate=False)


def estimate(ps: ParticleSet) -> tuple:
    """Weighted mean and weighted covariance of the cloud."""
    mean = ps.weights @ ps.positions
    delta = ps.positions - mean
    cov = (ps.weights[:, None] * delta).T @ delta
    return mean, cov


@dataclass(frozen=True)
class ConfidenceEllipsoid:
    """{r : (r - center)' shape^-1 (r - center) <= 1}."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(2)
        S = np.asarray(self.shape, dtype=float).reshape(2, 2)
        S = 0.5 * (S + S.T)
        if np.any(np.linalg.eigvalsh(S) <= 0):
            raise ValueError("shape must be positive definite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", S)

    def contains(self, point) -> bool:
        d = np.asarray(point, dtype=float) - self.center
        return float(d @ np.linalg.solve(self.shape, d)) <= 1.0


def confidence_ellipsoid_95(ps: ParticleSet) -> ConfidenceEllipsoid:
    """95% ellipsoid under a Gaussian fit of the weighted cloud."""
    mean, cov = estimate(ps)
    if np.linalg.eigvalsh(0.5 * (cov + cov.T)).min() < 1e-9:
        cov = cov + 1e-6 * np.eye(2)
    return ConfidenceEllipsoid(mean, CHI2_2_95 * cov)


def distance_to_ellipsoid(point, ell: ConfidenceEllipsoid) -> float:
    """Euclidean distance from a point to the ellipsoid (0 inside).

    Solved via the Lagrange-multiplier equation of the closest-point
    projection in the ellipse eigenbasis, bracketed and bisected to below
    1e-9 m.
    """
    p = np.asarray(point, dtype=float) - ell.center
    evals, evecs = np.linalg.eigh(ell.shape)
    a = np.sqrt(evals)  # semi-axes
    q = evecs.T @ p
    if float(q @ (q / evals)) <= 1.0:
        return 0.0

    def f(t):
        return float(np.sum((a * q / (t + evals)) ** 2)) - 1.0

    hi = max(a.max() * np.linalg.norm(q), 1.0)
    while f(hi) > 0.0:
        hi *= 2.0
    lo = 0.0
    # plain bisection: f is monotone decreasing on (0, inf)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    t = 0.5 * (lo + hi)
    closest = evals * q / (t + evals)
    return float(np.linalg.norm(q - closest))


def priority_weights(distances, cost_factor: float, decay: float) -> list:
    """Slack weights by proximity: closest neighbor gets the full cost.

    distances: iterable of (neighbor_id, d) pairs.  Returns (neighbor_id,
    weight) sorted ascending by distance (ties by id), with the j-th entry
    weighted cost_factor * decay^j.
    """
    if cost_factor <= 0:
        raise ValueError("cost_factor must be positive")
    if not 0.0 < decay < 1.0:
        raise ValueError("decay must be in (0, 1)")
    ranked = sorted(distances, key=lambda item: (item[1], item[0]))
    return [(nid, cost_factor * decay**j) for j, (nid, _) in enumerate(ranked)]
