""" Semi-dual training of RNOT prepotentials.

The loss L(theta) = -mean_i psi^c(x_i) - mean_j psi(y_j) is minimised with Adam.
Its gradient follows from the envelope theorem: with y*_i the inner minimiser
at x_i held fixed, grad L = mean_i grad_theta psi(y*_i) - mean_j grad_theta psi(y_j).
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Mapping, NamedTuple, Optional
import numpy as np
from biobb_common.tools import file_utils as fu
from biobb_rnot.core.config import dataclass_from_dict
from biobb_rnot.core.ctransform import InnerSolveResult, InnerSolverConfig, PotentialModel, inner_solve
from biobb_rnot.core.embedding import featurize
from biobb_rnot.core.errors import ManifoldMismatchError, TrainingAbortedError
from biobb_rnot.core.measures import Measure
from biobb_rnot.core.network import MlpGradient, MlpParams, grad_params
from biobb_rnot.core.optim import Adam

REPORT_COLUMNS = ('step', 'loss', 'mean_residual', 'mean_iters', 'failures', 'ms')


@dataclass(frozen=True)
class TrainConfig:
    """ Outer loop settings.

    Args:
        batch_size (int): (256) Source and target samples per step.
        steps (int): (1000) Number of outer steps.
        learning_rate (float): (1e-3) Outer Adam step size.
        beta1 (float): (0.9) Adam first moment decay.
        beta2 (float): (0.999) Adam second moment decay.
        eps (float): (1e-8) Adam denominator offset.
        seed (int): (0) Root seed of the batch draws.
        checkpoint_every (int): (0) Steps between checkpoints; 0 disables them.
        log_every (int): (100) Steps between progress lines; 0 disables them.
        max_failure_fraction (float): (0.5) Fraction of failed inner solves that marks a bad step.
        max_failure_streak (int): (10) Consecutive bad steps that abort training; 0 disables the check.
    """
    batch_size: int = 256
    steps: int = 1000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0
    log_every: int = 100
    max_failure_fraction: float = 0.5
    max_failure_streak: int = 10

    def __post_init__(self):
        if int(self.batch_size) < 1 or int(self.steps) < 1:
            raise ValueError("batch_size and steps must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    @classmethod
    def from_dict(cls, section: Optional[Mapping], **overrides) -> 'TrainConfig':
        return dataclass_from_dict(cls, section, 'train', **overrides)


class StepRecord(NamedTuple):
    step: int
    loss: float
    mean_residual: float
    mean_iters: float
    failures: int
    ms: float


@dataclass
class TrainReport:
    records: List[StepRecord] = field(default_factory=list)
    checkpoints: List[str] = field(default_factory=list)

    def rows(self) -> List[tuple]:
        return [tuple(record) for record in self.records]


class MongeGap(NamedTuple):
    absolute: float
    relative: float
    cost: float
    loss: float


def _check_batches(model: PotentialModel, xs: np.ndarray, ys: np.ndarray):
    xs = np.array(xs, dtype=float, ndmin=2)
    ys = np.array(ys, dtype=float, ndmin=2)
    if len(xs) == 0 or len(ys) == 0:
        raise ValueError("Source and target batches must be nonempty")
    try:
        model.manifold.check_shape(xs, ys)
    except ManifoldMismatchError as err:
        raise ManifoldMismatchError("Batches do not match the model manifold: %s" % err) from err
    return xs, ys


def semidual_loss(model: PotentialModel, xs: np.ndarray, ys: np.ndarray,
                  inner: InnerSolverConfig = InnerSolverConfig()):
    """ Monte Carlo semi-dual loss; the target batch is the softmin pool.

    Returns:
        tuple: (loss, InnerSolveResult of the source batch).
    """
    xs, ys = _check_batches(model, xs, ys)
    result = inner_solve(model, xs, ys, inner)
    valid = np.isfinite(result.value)
    if not np.any(valid):
        return float('nan'), result
    return float(-np.mean(result.value[valid]) - np.mean(model.value(ys))), result


def envelope_grad(model: PotentialModel, xs: np.ndarray, ys: np.ndarray,
                  inner: InnerSolverConfig = InnerSolverConfig(),
                  result: Optional[InnerSolveResult] = None) -> MlpGradient:
    """ Gradient of the semi-dual loss in the network parameters, with the inner
    minimisers treated as constants. Rows with a non-finite value are left out.
    """
    xs, ys = _check_batches(model, xs, ys)
    if result is None:
        result = inner_solve(model, xs, ys, inner)
    y_star = result.y_star[np.isfinite(result.value)]
    if len(y_star) == 0:
        raise TrainingAbortedError("No inner solve produced a finite value")
    _, grad_star = grad_params(model.params, featurize(model.landmarks, y_star), np.full(len(y_star), 1.0 / len(y_star)))
    _, grad_target = grad_params(model.params, featurize(model.landmarks, ys), np.full(len(ys), 1.0 / len(ys)))
    return MlpGradient.unflatten(model.params.config, grad_star.flatten() - grad_target.flatten())


def semidual_step(model: PotentialModel, xs: np.ndarray, ys: np.ndarray, optimizer: Adam,
                  inner: InnerSolverConfig = InnerSolverConfig()):
    """ One outer Adam step. Returns (new model, loss, gradient, inner result). """
    loss, result = semidual_loss(model, xs, ys, inner)
    gradient = envelope_grad(model, xs, ys, inner, result).flatten()
    if not np.isfinite(loss) or not np.all(np.isfinite(gradient)):
        return model, loss, gradient, result
    flat = optimizer.step(model.params.flatten(), gradient)
    return model.with_params(MlpParams.unflatten(model.params.config, flat)), loss, gradient, result


def train(source: Measure, target: Measure, model_init: PotentialModel, cfg: TrainConfig = TrainConfig(),
          inner: InnerSolverConfig = InnerSolverConfig(),
          checkpoint_fn: Optional[Callable[[PotentialModel, int], str]] = None,
          out_log: Optional[logging.Logger] = None, global_log: Optional[logging.Logger] = None):
    """ Train ``model_init`` for ``cfg.steps`` outer steps.

    Each step draws its batches from a child of ``SeedSequence(cfg.seed)``, so the
    result depends only on the seed. ``checkpoint_fn(model, step)`` is called every
    ``cfg.checkpoint_every`` steps and returns the path it wrote.

    Raises:
        TrainingAbortedError: On a non-finite loss or gradient, or when more than
            ``max_failure_fraction`` of the inner solves fail for
            ``max_failure_streak`` consecutive steps.
    """
    if source.manifold != model_init.manifold or target.manifold != model_init.manifold:
        raise ManifoldMismatchError("Source %r, target %r and model %r must share a manifold"
                                    % (source.manifold, target.manifold, model_init.manifold))
    optimizer = Adam(model_init.params.config.n_params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    seeds = np.random.SeedSequence(cfg.seed).spawn(int(cfg.steps))
    report = TrainReport()
    model = model_init
    last_good = None
    streak = 0
    for step in range(int(cfg.steps)):
        rng = np.random.default_rng(seeds[step])
        xs = source.sample(rng, cfg.batch_size)
        ys = target.sample(rng, cfg.batch_size)
        start = time.perf_counter()
        model, loss, gradient, result = semidual_step(model, xs, ys, optimizer, inner)
        if not np.isfinite(loss) or not np.all(np.isfinite(gradient)):
            raise TrainingAbortedError("Non-finite loss or gradient at step %d" % step, step, last_good)
        failures = int(np.sum(result.failed | ~np.isfinite(result.value)))
        streak = streak + 1 if failures > cfg.max_failure_fraction * len(result) else 0
        if cfg.max_failure_streak > 0 and streak >= cfg.max_failure_streak:
            raise TrainingAbortedError("Inner solver failed on more than %.0f%% of the batch for %d steps"
                                       % (100 * cfg.max_failure_fraction, streak), step, last_good)
        finite = result.residual[np.isfinite(result.residual)]
        record = StepRecord(step, loss, float(np.mean(finite)) if finite.size else float('nan'),
                            float(np.mean(result.iterations)), failures, 1000.0 * (time.perf_counter() - start))
        report.records.append(record)
        if cfg.log_every and (step + 1) % cfg.log_every == 0:
            fu.log('Step %d/%d: loss %.6g, mean residual %.3g, mean iterations %.1f, failures %d'
                   % (step + 1, cfg.steps, record.loss, record.mean_residual, record.mean_iters, failures),
                   out_log, global_log)
        if checkpoint_fn and cfg.checkpoint_every and (step + 1) % cfg.checkpoint_every == 0:
            last_good = checkpoint_fn(model, step + 1)
            report.checkpoints.append(last_good)
    return model, report


def monge_gap(model: PotentialModel, source: Measure, target: Measure, n_samples: int,
              inner: InnerSolverConfig, rng: np.random.Generator) -> MongeGap:
    """ E_mu[c(x, T(x))] + L(theta) estimated on ``n_samples`` fresh samples.

    The relative gap divides by the transport cost and is NaN when that cost is
    below 1e-12.
    """
    xs = source.sample(rng, n_samples)
    ys = target.sample(rng, n_samples)
    loss, result = semidual_loss(model, xs, ys, inner)
    valid = np.isfinite(result.value)
    cost = float(np.mean(model.manifold.sqdist_half(xs[valid], result.y_star[valid])))
    gap = abs(cost + loss)
    return MongeGap(gap, gap / cost if cost >= 1e-12 else float('nan'), cost, loss)
