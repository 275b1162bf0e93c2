import math

import numpy as np
import pytest

from fovnav.cbf import SensingModel
from fovnav.estimation import (
    CHI2_2_95,
    ConfidenceEllipsoid,
    FilterParams,
    ParticleSet,
    confidence_ellipsoid_95,
    distance_to_ellipsoid,
    estimate,
    pf_predict,
    pf_update,
    priority_weights,
)
from fovnav.state import RobotState

SENSING = SensingModel(fov_angle=2 * math.pi / 3, range=3.0, min_distance=0.2)


def default_params(**kw):
    base = dict(
        process_cov=0.25 * np.eye(2),
        measurement_cov=0.05 * np.eye(2),
        fov_penalty=0.1,
        resample_threshold=0.5,
        workspace=((-5.0, -5.0), (5.0, 5.0)),
    )
    base.update(kw)
    return FilterParams(**base)


def observer(x=0.0, y=0.0, yaw=0.0):
    return RobotState(np.array([x, y]), yaw, np.zeros(2), 0.0)


class TestPredict:
    def test_zero_process_noise_keeps_positions(self):
        ps = ParticleSet.uniform(50, ((-1, -1), (1, 1)), seed=0)
        out = pf_predict(ps, default_params(process_cov=np.zeros((2, 2))), dt=0.1)
        np.testing.assert_array_equal(out.positions, ps.positions)

    def test_mean_displacement_statistically_zero(self):
        n = 10_000
        ps = ParticleSet.uniform(n, ((-1, -1), (1, 1)), seed=1)
        params = default_params()
        out = pf_predict(ps, params, dt=0.1)
        disp = out.positions - ps.positions
        sigma = math.sqrt(0.25 * 0.1)
        assert np.abs(disp.mean(axis=0)).max() < 3 * sigma / math.sqrt(n)

    def test_weights_unchanged_bit_exact(self):
        ps = ParticleSet.uniform(64, ((-1, -1), (1, 1)), seed=2)
        out = pf_predict(ps, default_params(), dt=0.1)
        assert out.weights is ps.weights or (out.weights == ps.weights).all()

    def test_bad_dt(self):
        ps = ParticleSet.uniform(8, ((-1, -1), (1, 1)), seed=3)
        with pytest.raises(ValueError):
            pf_predict(ps, default_params(), dt=0.0)


class TestUpdate:
    def test_no_measurement_none_inside_unchanged(self):
        # cloud entirely behind the observer
        ps = ParticleSet.gaussian(100, (-2.0, 0.0), 0.1, seed=4)
        out = pf_update(ps, None, observer(), SENSING, default_params())
        np.testing.assert_array_equal(out.weights, ps.weights)

    def test_no_measurement_all_inside_unchanged(self):
        ps = ParticleSet.gaussian(100, (1.0, 0.0), 0.05, seed=5)
        out = pf_update(ps, None, observer(), SENSING, default_params())
        np.testing.assert_allclose(out.weights, ps.weights, atol=1e-15)

    def test_partial_penalty_shifts_mass_outside(self):
        pos = np.array([[1.0, 0.0]] * 50 + [[-1.0, 0.0]] * 50)
        ps = ParticleSet(pos, np.full(100, 0.01), rng_seed=6)
        out = pf_update(ps, None, observer(), SENSING, default_params())
        assert out.weights[50:].sum() > 0.9
        assert out.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_convergence_50_in_view_updates(self):
        # 15 seeds, truth fixed, fresh measurement each step; a static
        # target warrants little diffusion, so the tracking error is not
        # dominated by the random-walk floor
        truth = np.array([1.2, 0.3])
        params = default_params(process_cov=0.01 * np.eye(2))
        errors = []
        for seed in range(15):
            rng = np.random.default_rng(1000 + seed)
            ps = ParticleSet.uniform(100, ((-2, -2), (2, 2)), seed=seed)
            for _ in range(50):
                ps = pf_predict(ps, params, dt=0.1)
                meas = truth + rng.multivariate_normal(np.zeros(2), params.measurement_cov)
                ps = pf_update(ps, meas, observer(), SENSING, params)
            mean, _ = estimate(ps)
            errors.append(np.linalg.norm(mean - truth))
        assert np.mean(errors) < 0.1

    def test_count_constant_and_normalized(self):
        params = default_params()
        ps = ParticleSet.uniform(100, ((-2, -2), (2, 2)), seed=7)
        rng = np.random.default_rng(7)
        for k in range(30):
            ps = pf_predict(ps, params, dt=0.1)
            meas = rng.normal(size=2) if k % 3 == 0 else None
            ps = pf_update(ps, meas, observer(), SENSING, params)
            assert ps.size == 100
            assert ps.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_determinism_bit_identical(self):
        params = default_params()

        def run():
            ps = ParticleSet.uniform(100, ((-2, -2), (2, 2)), seed=9)
            for k in range(20):
                ps = pf_predict(ps, params, dt=0.1)
                meas = np.array([1.0, 0.5]) if k % 2 else None
                ps = pf_update(ps, meas, observer(), SENSING, params)
            return ps

        a, b = run(), run()
        assert (a.positions == b.positions).all()
        assert (a.weights == b.weights).all()

    def test_degeneracy_reinitializes(self):
        pos = np.array([[1.0, 0.0]] * 10)
        ps = ParticleSet(pos, np.full(10, 0.1), rng_seed=10)
        out = pf_update(ps, None, observer(), SENSING, default_params(fov_penalty=0.0))
        assert out.degenerate
        assert out.weights.sum() == pytest.approx(1.0)
        assert out.size == 10


class TestEstimate:
    def test_single_particle(self):
        ps = ParticleSet(np.array([[0.7, -0.2]]), np.array([1.0]), rng_seed=0)
        mean, cov = estimate(ps)
        np.testing.assert_allclose(mean, [0.7, -0.2])
        np.testing.assert_allclose(cov, np.zeros((2, 2)))

    def test_two_equal_particles(self):
        ps = ParticleSet(np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([0.5, 0.5]), rng_seed=0)
        mean, _ = estimate(ps)
        np.testing.assert_allclose(mean, [1.0, 0.0])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        pos = rng.normal(size=(40, 2))
        w = rng.uniform(0.1, 1.0, size=40)
        ps = ParticleSet(pos, w, rng_seed=0)
        mean, cov = estimate(ps)
        wn = w / w.sum()
        m_ref = sum(wn[i] * pos[i] for i in range(40))
        c_ref = sum(wn[i] * np.outer(pos[i] - m_ref, pos[i] - m_ref) for i in range(40))
        np.testing.assert_allclose(mean, m_ref, atol=1e-12)
        np.testing.assert_allclose(cov, c_ref, atol=1e-12)


class TestConfidenceEllipsoid:
    def test_isotropic_radius(self):
        rng = np.random.default_rng(12)
        sigma = 0.3
        pos = sigma * rng.standard_normal((200_00, 2))
        ps = ParticleSet(pos, np.full(len(pos), 1.0 / len(pos)), rng_seed=0)
        ell = confidence_ellipsoid_95(ps)
        mean, cov = estimate(ps)
        np.testing.assert_allclose(ell.shape, CHI2_2_95 * cov, atol=1e-12)
        radius = math.sqrt(np.linalg.eigvalsh(ell.shape).max())
        assert radius == pytest.approx(sigma * math.sqrt(CHI2_2_95), rel=0.05)

    def test_monte_carlo_coverage(self):
        rng = np.random.default_rng(13)
        cov = np.array([[0.09, 0.03], [0.03, 0.05]])
        pts = rng.multivariate_normal([1.0, -2.0], cov, size=10_000)
        ps = ParticleSet(pts, np.full(len(pts), 1e-4), rng_seed=0)
        ell = confidence_ellipsoid_95(ps)
        inside = np.mean([ell.contains(p) for p in pts])
        assert 0.93 <= inside <= 0.97

    def test_degenerate_cloud_regularized(self):
        ps = ParticleSet(np.array([[1.0, 2.0]] * 5), np.full(5, 0.2), rng_seed=0)
        ell = confidence_ellipsoid_95(ps)
        np.testing.assert_allclose(ell.center, [1.0, 2.0])
        assert np.linalg.eigvalsh(ell.shape).min() > 0


class TestDistanceToEllipsoid:
    def test_inside_zero(self):
        ell = ConfidenceEllipsoid(np.zeros(2), np.eye(2))
        assert distance_to_ellipsoid([0.3, 0.2], ell) == 0.0

    def test_unit_circle(self):
        ell = ConfidenceEllipsoid(np.zeros(2), np.eye(2))
        assert distance_to_ellipsoid([3.0, 0.0], ell) == pytest.approx(2.0, abs=1e-9)

    def test_matches_dense_boundary_sampling(self):
        rng = np.random.default_rng(14)
        theta = np.linspace(0, 2 * math.pi, 100_000, endpoint=False)
        circle = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        for _ in range(10):
            A = rng.normal(size=(2, 2))
            S = A @ A.T + 0.1 * np.eye(2)
            center = rng.normal(size=2)
            ell = ConfidenceEllipsoid(center, S)
            L = np.linalg.cholesky(S)
            boundary = center + circle @ L.T
            point = rng.normal(size=2) * 3
            ref = np.linalg.norm(boundary - point, axis=1).min()
            got = distance_to_ellipsoid(point, ell)
            if float((point - center) @ np.linalg.solve(S, point - center)) <= 1.0:
                ref = 0.0
            assert got == pytest.approx(ref, abs=1e-4)


class TestPriorityWeights:
    def test_single_neighbor(self):
        assert priority_weights([(7, 1.0)], 1000.0, 0.1) == [(7, 1000.0)]

    def test_three_neighbors_decay(self):
        out = priority_weights([(1, 2.0), (2, 0.5), (3, 1.0)], 1000.0, 0.1)
        assert out == [(2, 1000.0), (3, 100.0), (1, pytest.approx(10.0))]

    def test_permutation_invariance(self):
        items = [(1, 2.0), (2, 0.5), (3, 1.0), (4, 0.9)]
        a = priority_weights(items, 50.0, 0.2)
        b = priority_weights(items[::-1], 50.0, 0.2)
        assert a == b

    def test_closest_gets_largest(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            items = [(i, float(d)) for i, d in enumerate(rng.uniform(0, 5, size=6))]
            out = priority_weights(items, 10.0, 0.3)
            best = min(items, key=lambda kv: (kv[1], kv[0]))[0]
            assert out[0][0] == best
            assert max(w for _, w in out) == out[0][1]
