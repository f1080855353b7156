import math
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from biobb_rnot.core.errors import ManifoldMismatchError
from biobb_rnot.core.geometry import Sphere, Torus, WrappedNormalSpec, manifold_from_dict, south_pole

MANIFOLDS = (Sphere(2), Sphere(3), Torus(1), Torus(3))
seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
manifolds = st.sampled_from(MANIFOLDS)


def _away_from_cut_locus(manifold, x, y, margin):
    if isinstance(manifold, Torus):
        return bool(np.all(np.abs(manifold.log_map(x, y)) < math.pi - margin))
    return bool(manifold.dist(x, y) < math.pi - margin)


class TestGeometry():
    @settings(max_examples=60, deadline=None)
    @given(manifold=manifolds, seed=seeds)
    def test_exp_inverts_log(self, manifold, seed):
        x, y = manifold.sample_uniform(np.random.default_rng(seed), 2)
        assume(_away_from_cut_locus(manifold, x, y, 1e-4))
        v = manifold.log_map(x, y)
        assert np.linalg.norm(v) == pytest.approx(float(manifold.dist(x, y)), abs=1e-9)
        assert float(manifold.dist(manifold.exp_map(x, v), y)) < 1e-8

    @settings(max_examples=60, deadline=None)
    @given(manifold=manifolds, seed=seeds)
    def test_distance_is_a_bounded_symmetric(self, manifold, seed):
        x, y = manifold.sample_uniform(np.random.default_rng(seed), 2)
        assert float(manifold.dist(x, y)) == pytest.approx(float(manifold.dist(y, x)), abs=1e-12)
        assert 0.0 <= float(manifold.dist(x, y)) <= manifold.diameter + 1e-12
        assert float(manifold.dist(x, x)) == pytest.approx(0.0, abs=1e-7)

    @settings(max_examples=30, deadline=None)
    @given(manifold=manifolds, seed=seeds)
    def test_half_squared_distance_gradient(self, manifold, seed):
        x, y = manifold.sample_uniform(np.random.default_rng(seed), 2)
        assume(_away_from_cut_locus(manifold, x, y, 1e-2))
        h = 1e-6
        gradient = -manifold.log_map(x, y)
        basis = manifold.tangent_basis(x)
        for k in range(manifold.dim):
            e = basis[:, k]
            forward = manifold.sqdist_half(manifold.exp_map(x, h * e), y)
            backward = manifold.sqdist_half(manifold.exp_map(x, -h * e), y)
            assert (forward - backward) / (2 * h) == pytest.approx(float(gradient @ e), abs=1e-5)

    def test_tangent_basis_is_orthonormal(self):
        manifold = Sphere(3)
        x = manifold.sample_uniform(np.random.default_rng(0), 5)
        basis = manifold.tangent_basis(x)
        for point, frame in zip(x, basis):
            np.testing.assert_allclose(frame.T @ frame, np.eye(3), atol=1e-12)
            np.testing.assert_allclose(point @ frame, np.zeros(3), atol=1e-12)

    def test_antipodal_log_is_perturbed(self):
        manifold = Sphere(2)
        x = np.array([[0.0, 0.0, 1.0]])
        y = np.array([[0.0, 0.0, -1.0]])
        assert manifold.cut_locus_mask(x, y)[0]
        logs, used, counts, failed = manifold.log_map_safe(x, y)
        assert counts[0] == 1
        assert not failed[0]
        assert np.linalg.norm(logs[0]) == pytest.approx(math.pi, abs=1e-6)
        assert float(manifold.dist(used[0], x[0])) == pytest.approx(1e-7, rel=1e-3)

    def test_torus_half_turn_is_defined(self):
        manifold = Torus(1)
        assert not manifold.cut_locus_mask(np.array([0.0]), np.array([math.pi]))
        assert float(manifold.dist(np.array([0.1]), np.array([2 * math.pi - 0.1]))) == pytest.approx(0.2)

    @pytest.mark.parametrize('sigma', [0.3, 3.0])
    def test_wrapped_normal_on_circle_is_normalised(self, sigma):
        manifold = Torus(1)
        grid = np.linspace(0.0, 2 * math.pi, 20000, endpoint=False)[:, None]
        spec = WrappedNormalSpec(np.array([math.pi]), sigma)
        density = np.exp(manifold.log_density(spec, grid))
        assert density.sum() * (2 * math.pi / len(grid)) == pytest.approx(1.0, abs=1e-6)

    def test_wrapped_normal_on_sphere_is_normalised(self):
        manifold = Sphere(2)
        spec = WrappedNormalSpec(south_pole(manifold), 0.5)
        samples = manifold.sample_uniform(np.random.default_rng(1), 200000)
        mass = np.mean(np.exp(manifold.log_density(spec, samples))) * math.exp(manifold.log_volume())
        assert mass == pytest.approx(1.0, abs=0.03)

    def test_uniform_log_density(self):
        manifold = Sphere(2)
        assert manifold.log_density('uniform', np.array([[0.0, 0.0, 1.0]]))[0] == pytest.approx(-math.log(4 * math.pi))

    def test_point_checks(self):
        with pytest.raises(ManifoldMismatchError):
            Sphere(2).check_points(np.array([1.0, 1.0, 0.0]))
        with pytest.raises(ManifoldMismatchError):
            Torus(2).check_points(np.array([0.0, 7.0]))
        with pytest.raises(ManifoldMismatchError):
            Sphere(2).check_points(np.array([1.0, 0.0]))

    def test_manifold_from_dict(self):
        assert manifold_from_dict({'kind': 'torus', 'dim': 3}) == Torus(3)
        assert manifold_from_dict({}) == Sphere(2)
        with pytest.raises(ValueError):
            manifold_from_dict({'kind': 'hyperbolic', 'dim': 2})
        with pytest.raises(ValueError):
            Sphere(0)

    def test_sphere_exp_rejects_normal_component(self):
        manifold = Sphere(2)
        x = np.array([0.0, 0.0, 1.0])
        with pytest.raises(ManifoldMismatchError):
            manifold.exp_map(x, np.array([0.3, 0.0, 0.2]))
        with pytest.raises(ManifoldMismatchError):
            manifold.exp_map(np.tile(x, (2, 1)), np.array([[0.1, 0.0, 0.0], [0.0, 0.1, 1e-3]]))
        rounding = np.array([0.5, 0.0, 1e-12])
        assert float(manifold.dist(manifold.exp_map(x, rounding), x)) == pytest.approx(0.5, abs=1e-10)

    def test_wrapped_normal_mean_distance(self):
        manifold = Sphere(2)
        spec = WrappedNormalSpec(south_pole(manifold), 0.3)
        samples = manifold.sample_wrapped_normal(spec, np.random.default_rng(2), 100000)
        # Rayleigh mean sigma * sqrt(pi / 2) of the tangent radius.
        assert float(np.mean(manifold.dist(spec.center, samples))) == pytest.approx(0.3 * math.sqrt(math.pi / 2),
                                                                                     abs=5e-3)

    @pytest.mark.parametrize('manifold', [Sphere(2), Sphere(4)])
    def test_uniform_sphere_mean_vanishes(self, manifold):
        samples = manifold.sample_uniform(np.random.default_rng(3), 200000)
        np.testing.assert_allclose(samples.mean(axis=0), np.zeros(manifold.ambient_dim), atol=1e-2)
        assert float(np.mean(np.sum(samples ** 2, axis=-1))) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize('dim', [1, 3])
    def test_uniform_torus_circular_mean_vanishes(self, dim):
        samples = Torus(dim).sample_uniform(np.random.default_rng(4), 200000)
        resultant = np.abs(np.mean(np.exp(1j * samples), axis=0))
        np.testing.assert_array_less(resultant, 1e-2)
        assert np.all((samples >= 0.0) & (samples < 2 * math.pi))
