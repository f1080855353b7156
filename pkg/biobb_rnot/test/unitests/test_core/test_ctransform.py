import math
import numpy as np
import pytest
from biobb_rnot.core.ctransform import (InnerSolverConfig, PotentialModel, build_potential_model, c_transform_value,
                                        inner_solve, interpolate, lse_init, pool_c_transform, stationarity_residual)
from biobb_rnot.core.embedding import select_landmarks
from biobb_rnot.core.errors import ConfigError
from biobb_rnot.core.geometry import Sphere, Torus
from biobb_rnot.core.network import MlpConfig, MlpParams, init, zeros
from biobb_rnot.core.rcpm import RcpmModel


def _flat_model(manifold, m=4):
    landmarks = select_landmarks(manifold, m, 'fps', np.random.default_rng(0))
    return PotentialModel(manifold, landmarks, zeros(MlpConfig(input_dim=m, hidden=(8,))))


def _small_model(manifold, seed=0, m=6, scale=0.1, shift=0.0):
    """ Softplus prepotential with a shrunk output layer, so that d^2/2 - psi stays convex near its minimiser. """
    landmarks = select_landmarks(manifold, m, 'fps', np.random.default_rng(0))
    params = init(MlpConfig(input_dim=m, hidden=(16,), activation='softplus', init_seed=seed))
    weights = params.weights[:-1] + (scale * params.weights[-1],)
    biases = params.biases[:-1] + (params.biases[-1] + shift,)
    return PotentialModel(manifold, landmarks, MlpParams(params.config, weights, biases))


def _circle_grid(n):
    return np.linspace(0.0, 2 * math.pi, n, endpoint=False)[:, None]


POOL_INNER = InnerSolverConfig(optimizer='gd', step_size=0.5, init_temperature=1e-6, residual_tol=1e-10,
                               max_iters=2000)


class TestCTransform():
    def setup_class(self):
        self.sphere = Sphere(2)
        rng = np.random.default_rng(11)
        self.x = self.sphere.sample_uniform(rng, 20)
        self.pool = self.sphere.sample_uniform(rng, 50)

    @pytest.mark.parametrize('optimizer, step_size', [('gd', 0.5), ('momentum', 0.1)])
    def test_flat_potential_maps_to_identity(self, optimizer, step_size):
        model = _flat_model(self.sphere)
        cfg = InnerSolverConfig(optimizer=optimizer, step_size=step_size, max_iters=3000, residual_tol=1e-6)
        result = inner_solve(model, self.x, self.pool, cfg)
        assert np.all(result.converged)
        assert not np.any(result.failed)
        np.testing.assert_allclose(self.sphere.dist(result.y_star, self.x), np.zeros(len(self.x)), atol=1e-5)
        assert np.all(result.value <= result.init_value + 1e-12)

    def test_adam_keeps_the_best_iterate(self):
        model = _flat_model(self.sphere)
        result = inner_solve(model, self.x, self.pool, InnerSolverConfig(max_iters=200))
        assert np.all(result.value <= result.init_value + 1e-12)
        assert np.all(result.iterations <= 200)

    def test_start_at_source(self):
        model = _flat_model(Torus(2))
        x = Torus(2).sample_uniform(np.random.default_rng(0), 5)
        result = inner_solve(model, x, x, InnerSolverConfig(lse_init=False))
        np.testing.assert_array_equal(result.iterations, np.zeros(5, dtype=int))
        np.testing.assert_allclose(result.value, np.zeros(5), atol=1e-14)

    def test_trace(self):
        model = _flat_model(self.sphere)
        cfg = InnerSolverConfig(optimizer='gd', step_size=0.5, record_trace=True)
        result = inner_solve(model, self.x[:2], self.pool, cfg)
        assert result.trace
        iteration, row, value, residual = result.trace[0]
        assert iteration == 1 and row in (0, 1)

    def test_stationarity_residual(self):
        model = _flat_model(self.sphere)
        np.testing.assert_allclose(stationarity_residual(model, self.x, self.x), np.zeros(len(self.x)), atol=1e-12)

    def test_pool_c_transform(self):
        circle = Torus(1)
        pool = np.array([[1.0], [1.0], [3.0]])
        values, index = pool_c_transform(circle, np.array([[1.0], [2.9]]), pool, np.zeros(3))
        assert index.tolist() == [0, 2]
        np.testing.assert_allclose(values, [0.0, 0.005], atol=1e-12)
        values, index = pool_c_transform(circle, np.array([[1.0]]), pool, np.array([0.0, 0.0, 10.0]))
        assert index.tolist() == [2]
        assert values[0] == pytest.approx(2.0 - 10.0)

    def test_lse_init_picks_the_best_pool_point(self):
        model = _flat_model(self.sphere)
        y0 = lse_init(model, self.x, self.pool, 1e-7)
        nearest = self.pool[np.argmin(self.sphere.pairwise_dist(self.x, self.pool), axis=1)]
        np.testing.assert_allclose(y0, nearest, atol=1e-6)

    def test_interpolate(self):
        x, y = self.x[:5], self.pool[:5]
        np.testing.assert_array_equal(interpolate(self.sphere, x, y, 0.0), x)
        np.testing.assert_array_equal(interpolate(self.sphere, x, y, 1.0), y)
        mid = interpolate(self.sphere, x, y, 0.5)
        np.testing.assert_allclose(self.sphere.dist(x, mid), 0.5 * self.sphere.dist(x, y), atol=1e-10)
        np.testing.assert_allclose(self.sphere.dist(mid, y), 0.5 * self.sphere.dist(x, y), atol=1e-10)

    def test_build_potential_model(self):
        landmarks = select_landmarks(self.sphere, 5, 'fps', np.random.default_rng(0))
        model = build_potential_model(landmarks, {'hidden': [7]})
        assert model.params.config.sizes == (5, 7, 1)
        with pytest.raises(ConfigError, match="hidden"):
            build_potential_model(landmarks, {'hiden': [7]})

    def test_inner_config(self):
        with pytest.raises(ConfigError):
            InnerSolverConfig.from_dict({'optimizer': 'lbfgs'})
        with pytest.raises(ConfigError, match="max_iters"):
            InnerSolverConfig.from_dict({'max_iter': 3})
        assert InnerSolverConfig.from_dict(None).max_iters == 2500
        assert math.isclose(InnerSolverConfig.from_dict({'step_size': 0.1}).step_size, 0.1)

    @pytest.mark.parametrize('manifold', [Sphere(2), Torus(2)])
    def test_shift_moves_the_c_transform(self, manifold):
        rng = np.random.default_rng(5)
        x, pool = manifold.sample_uniform(rng, 16), manifold.sample_uniform(rng, 64)
        cfg = InnerSolverConfig(optimizer='gd', step_size=0.5, max_iters=2000, residual_tol=1e-10)
        base, _ = c_transform_value(_small_model(manifold), x, pool, cfg)
        shifted, _ = c_transform_value(_small_model(manifold, shift=0.75), x, pool, cfg)
        np.testing.assert_allclose(shifted, base - 0.75, atol=1e-6)

    def test_value_is_below_every_pool_candidate(self):
        model = _small_model(self.sphere, scale=0.3)
        candidates = self.sphere.sample_uniform(np.random.default_rng(6), 400)
        value, result = c_transform_value(model, self.x, candidates, POOL_INNER)
        costs = 0.5 * self.sphere.pairwise_dist(self.x, candidates) ** 2 - model.value(candidates)[None, :]
        assert np.all(value[:, None] <= costs + 1e-9)
        bound, _ = pool_c_transform(self.sphere, self.x, candidates, model.value(candidates))
        assert np.all(value <= bound + 1e-9)
        assert not np.any(result.failed)

    def test_matches_brute_force_on_the_circle(self):
        circle = Torus(1)
        model = _small_model(circle)
        x = _circle_grid(48) + 0.05
        value, result = c_transform_value(model, x, _circle_grid(2048), POOL_INNER)
        dense = _circle_grid(100000)
        exact, _ = pool_c_transform(circle, x, dense, model.value(dense))
        assert np.all(value >= exact - 1e-6)
        np.testing.assert_allclose(value, exact, atol=1e-4)
        # psi is nonzero, so the minimiser moves off x.
        assert np.max(circle.dist(result.y_star, x)) > 1e-3

    def test_c_transform_is_a_sup_norm_contraction(self):
        circle = Torus(1)
        first, second = _small_model(circle, seed=0), _small_model(circle, seed=1)
        x = _circle_grid(48) + 0.05
        pool = _circle_grid(2048)
        dense = _circle_grid(20000)
        gap = np.max(np.abs(first.value(dense) - second.value(dense)))
        assert gap > 1e-3
        first_c, _ = c_transform_value(first, x, pool, POOL_INNER)
        second_c, _ = c_transform_value(second, x, pool, POOL_INNER)
        assert np.max(np.abs(first_c - second_c)) <= gap + 1e-4

        rng = np.random.default_rng(8)
        values, other = rng.standard_normal(len(self.pool)), rng.standard_normal(len(self.pool))
        discrete, _ = pool_c_transform(self.sphere, self.x, self.pool, values)
        discrete_other, _ = pool_c_transform(self.sphere, self.x, self.pool, other)
        assert np.max(np.abs(discrete - discrete_other)) <= np.max(np.abs(values - other)) + 1e-12

    def test_double_transform_recovers_c_concave_potential(self):
        circle = Torus(1)
        rng = np.random.default_rng(9)
        model = RcpmModel(circle, circle.sample_uniform(rng, 5), 0.2 * rng.standard_normal(5))
        grid = _circle_grid(2048)
        phi = model.value(grid)
        np.testing.assert_allclose(phi, pool_c_transform(circle, grid, model.sites, -model.alphas)[0], atol=1e-12)
        phi_c, _ = pool_c_transform(circle, grid, grid, phi)
        phi_cc, _ = pool_c_transform(circle, grid, grid, phi_c)
        assert np.all(phi_cc >= phi - 1e-12)
        assert np.max(phi_cc - phi) <= 5e-3
        phi_ccc, _ = pool_c_transform(circle, grid, grid, phi_cc)
        np.testing.assert_allclose(phi_ccc, phi_c, atol=1e-12)
