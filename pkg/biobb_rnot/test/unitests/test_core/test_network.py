import numpy as np
import pytest
from biobb_rnot.core.ctransform import PotentialModel
from biobb_rnot.core.embedding import select_landmarks
from biobb_rnot.core.geometry import Sphere, Torus
from biobb_rnot.core.network import (MlpConfig, MlpParams, forward, grad_input, grad_params, init, psi_and_grad,
                                     zeros)


class TestNetwork():
    def setup_class(self):
        self.config = MlpConfig(input_dim=4, hidden=(6, 5), activation='softplus', init_seed=1)
        self.params = init(self.config)
        rng = np.random.default_rng(0)
        self.params = MlpParams.unflatten(self.config, self.params.flatten() + 0.1 * rng.standard_normal(self.config.n_params))
        self.features = rng.uniform(0.0, np.pi, size=(3, 4))

    def test_sizes(self):
        assert self.config.sizes == (4, 6, 5, 1)
        assert self.config.n_params == 4 * 6 + 6 + 6 * 5 + 5 + 5 + 1
        assert forward(self.params, self.features).shape == (3,)
        assert isinstance(forward(self.params, self.features[0]), float)

    def test_parameter_gradient(self):
        weights = np.array([0.2, 0.5, 0.3])
        _, gradient = grad_params(self.params, self.features, weights)
        flat = self.params.flatten()
        h = 1e-6
        numeric = np.empty_like(flat)
        for k in range(len(flat)):
            step = np.zeros_like(flat)
            step[k] = h
            up = forward(MlpParams.unflatten(self.config, flat + step), self.features) @ weights
            down = forward(MlpParams.unflatten(self.config, flat - step), self.features) @ weights
            numeric[k] = (up - down) / (2 * h)
        np.testing.assert_allclose(gradient.flatten(), numeric, atol=1e-7)

    def test_input_gradient(self):
        _, grads = grad_input(self.params, self.features)
        h = 1e-6
        for k in range(4):
            step = np.zeros(4)
            step[k] = h
            numeric = (forward(self.params, self.features + step) - forward(self.params, self.features - step)) / (2 * h)
            np.testing.assert_allclose(grads[:, k], numeric, atol=1e-7)

    def test_riemannian_gradient(self):
        manifold = Sphere(2)
        landmarks = select_landmarks(manifold, 4, 'fps', np.random.default_rng(3))
        model = PotentialModel(manifold, landmarks, self.params)
        y = manifold.sample_uniform(np.random.default_rng(4), 5)
        _, grads, flagged = psi_and_grad(model, y)
        assert not np.any(flagged)
        np.testing.assert_allclose(np.sum(grads * y, axis=1), np.zeros(5), atol=1e-12)
        h = 1e-6
        basis = manifold.tangent_basis(y)
        for k in range(manifold.dim):
            e = basis[:, :, k]
            numeric = (model.value(manifold.exp_map(y, h * e)) - model.value(manifold.exp_map(y, -h * e))) / (2 * h)
            np.testing.assert_allclose(np.sum(grads * e, axis=1), numeric, atol=1e-6)

    def test_zero_network_is_flat(self):
        manifold = Torus(2)
        landmarks = select_landmarks(manifold, 3, 'rnd', np.random.default_rng(0))
        model = PotentialModel(manifold, landmarks, zeros(MlpConfig(input_dim=3, hidden=(4,))))
        y = manifold.sample_uniform(np.random.default_rng(1), 6)
        values, grads, _ = model.value_and_grad(y)
        np.testing.assert_array_equal(values, np.zeros(6))
        np.testing.assert_array_equal(grads, np.zeros((6, 2)))

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            MlpConfig(input_dim=0)
        with pytest.raises(ValueError):
            MlpConfig(input_dim=2, activation='tanh')
        with pytest.raises(ValueError):
            MlpParams.unflatten(self.config, np.zeros(3))
