import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from biobb_rnot.core.ctransform import InnerSolverConfig, PotentialModel, build_potential_model
from biobb_rnot.core.embedding import select_landmarks
from biobb_rnot.core.errors import ConfigError, ManifoldMismatchError
from biobb_rnot.core.evaluation import EvalConfig, evaluate
from biobb_rnot.core.geometry import Sphere, Torus, WrappedNormalSpec, south_pole
from biobb_rnot.core.measures import UniformMeasure, WrappedNormalMeasure
from biobb_rnot.core.network import MlpConfig, MlpParams, init, zeros
from biobb_rnot.core.semidual import TrainConfig, envelope_grad, monge_gap, semidual_loss, train

EXACT_INNER = InnerSolverConfig(optimizer='gd', step_size=0.5, max_iters=2000, residual_tol=1e-11, lse_init=False)
POOL_INNER = InnerSolverConfig(optimizer='gd', step_size=0.5, max_iters=2000, residual_tol=1e-10,
                               init_temperature=1e-6)


class TestSemidual():
    def setup_class(self):
        self.manifold = Sphere(2)
        landmarks = select_landmarks(self.manifold, 6, 'fps', np.random.default_rng(0))
        config = MlpConfig(input_dim=6, hidden=(5,), activation='softplus', init_seed=2)
        self.model = PotentialModel(self.manifold, landmarks,
                                    MlpParams.unflatten(config, 0.1 * init(config).flatten()))
        rng = np.random.default_rng(5)
        self.xs = self.manifold.sample_uniform(rng, 8)
        self.ys = self.manifold.sample_uniform(rng, 8)

    def test_flat_potential_loss(self):
        flat = self.model.with_params(zeros(self.model.params.config))
        loss, result = semidual_loss(flat, self.xs, self.ys, EXACT_INNER)
        assert loss == pytest.approx(0.0, abs=1e-12)
        assert np.all(result.converged)

    def test_last_bias_gradient_vanishes(self):
        gradient = envelope_grad(self.model, self.xs, self.ys, EXACT_INNER)
        assert gradient.biases[-1][0] == pytest.approx(0.0, abs=1e-12)

    def test_envelope_gradient_matches_differences(self):
        gradient = envelope_grad(self.model, self.xs, self.ys, EXACT_INNER).flatten()
        flat = self.model.params.flatten()
        config = self.model.params.config
        h = 1e-5
        for k in np.random.default_rng(1).choice(len(flat), size=6, replace=False):
            step = np.zeros_like(flat)
            step[k] = h
            up, _ = semidual_loss(self.model.with_params(MlpParams.unflatten(config, flat + step)),
                                  self.xs, self.ys, EXACT_INNER)
            down, _ = semidual_loss(self.model.with_params(MlpParams.unflatten(config, flat - step)),
                                    self.xs, self.ys, EXACT_INNER)
            assert gradient[k] == pytest.approx((up - down) / (2 * h), abs=1e-6)

    def test_batch_checks(self):
        with pytest.raises(ValueError):
            semidual_loss(self.model, np.empty((0, 3)), self.ys)
        with pytest.raises(ManifoldMismatchError):
            semidual_loss(self.model, self.xs[:, :2], self.ys)

    def test_train(self):
        source = UniformMeasure(self.manifold)
        target = WrappedNormalMeasure(self.manifold, WrappedNormalSpec(south_pole(self.manifold), 0.3))
        cfg = TrainConfig(batch_size=8, steps=4, seed=9, checkpoint_every=2, log_every=0)
        inner = InnerSolverConfig(max_iters=50)
        written = []

        def checkpoint_fn(model, step):
            written.append(step)
            return "step%d" % step

        model, report = train(source, target, self.model, cfg, inner, checkpoint_fn)
        again, _ = train(source, target, self.model, cfg, inner)
        assert len(report.records) == 4
        assert written == [2, 4]
        assert report.checkpoints == ['step2', 'step4']
        assert all(np.isfinite(record.loss) for record in report.records)
        np.testing.assert_array_equal(model.params.flatten(), again.params.flatten())
        assert not np.array_equal(model.params.flatten(), self.model.params.flatten())

    def test_train_manifold_mismatch(self):
        torus = UniformMeasure(Torus(2))
        with pytest.raises(ManifoldMismatchError):
            train(torus, torus, self.model, TrainConfig(steps=1, batch_size=2))

    def test_monge_gap_of_identity(self):
        flat = self.model.with_params(zeros(self.model.params.config))
        source = UniformMeasure(self.manifold)
        gap = monge_gap(flat, source, source, 16, EXACT_INNER, np.random.default_rng(0))
        assert gap.cost == pytest.approx(0.0, abs=1e-12)
        assert gap.absolute == pytest.approx(0.0, abs=1e-12)
        assert np.isnan(gap.relative)

    def test_train_config(self):
        assert TrainConfig.from_dict({'steps': 3}).steps == 3
        with pytest.raises(ConfigError, match="batch_size"):
            TrainConfig.from_dict({'batchsize': 3})
        with pytest.raises(ConfigError):
            TrainConfig.from_dict({'learning_rate': 0})

    def test_fresh_model(self):
        landmarks = select_landmarks(self.manifold, 3, 'rnd', np.random.default_rng(0))
        model = build_potential_model(landmarks, {'hidden': [4], 'init_seed': 1})
        assert model.params.config.n_params == 3 * 4 + 4 + 4 + 1

    def test_shift_leaves_the_loss_unchanged(self):
        params = self.model.params
        shifted = self.model.with_params(MlpParams(params.config, params.weights,
                                                   params.biases[:-1] + (params.biases[-1] + 2.5,)))
        loss, _ = semidual_loss(self.model, self.xs, self.ys, EXACT_INNER)
        moved, _ = semidual_loss(shifted, self.xs, self.ys, EXACT_INNER)
        assert moved == pytest.approx(loss, abs=1e-9)

    @pytest.mark.parametrize('scale', [0.1, 1.0, 5.0])
    @pytest.mark.parametrize('seed', [0, 1, 2])
    def test_loss_is_bounded_by_discrete_transport_cost(self, scale, seed):
        rng = np.random.default_rng(seed)
        xs, ys = self.manifold.sample_uniform(rng, 16), self.manifold.sample_uniform(rng, 16)
        config = self.model.params.config
        model = self.model.with_params(MlpParams.unflatten(config, scale * init(config).flatten()))
        loss, _ = semidual_loss(model, xs, ys, POOL_INNER)
        cost = 0.5 * self.manifold.pairwise_dist(xs, ys) ** 2
        rows, cols = linear_sum_assignment(cost)
        assert -loss <= cost[rows, cols].mean() + 1e-9


@pytest.mark.slow
class TestSphereHeadline():
    def setup_class(self):
        self.sphere = Sphere(2)
        self.source = UniformMeasure(self.sphere)
        self.target = WrappedNormalMeasure(self.sphere, WrappedNormalSpec(south_pole(self.sphere), 0.3))
        landmarks = select_landmarks(self.sphere, 128, 'fps', np.random.default_rng(0))
        self.initial = build_potential_model(landmarks, {'init_seed': 0})
        self.inner = InnerSolverConfig()
        self.model, self.report = train(self.source, self.target, self.initial,
                                        TrainConfig(batch_size=256, steps=1000, seed=0, log_every=0), self.inner)

    def test_trained_map_matches_the_target(self):
        cfg = EvalConfig(n_samples=1024, n_batches=5, seed=1)
        report = evaluate(self.model, self.source, self.target, cfg, self.inner, threads=2)
        assert report.kl_mean <= 0.05
        assert report.ess_mean >= 0.90
        assert report.monge_gap_rel < 0.01
        assert not report.unreliable
        untrained = evaluate(self.initial, self.source, self.target, EvalConfig(n_samples=256, n_batches=2, seed=1),
                             self.inner, threads=2)
        assert report.kl_mean < untrained.kl_mean
        assert report.ess_mean > untrained.ess_mean

    def test_inner_solves_stay_accurate(self):
        assert self.report.records[-1].mean_residual < 1e-2
