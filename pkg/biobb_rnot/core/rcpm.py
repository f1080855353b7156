""" Discrete c-concave potentials (RCPM baseline) and the quantization harness.

phi_m(x) = min_i (c(x, s_i) + alpha_i) over m sites s_i, optionally smoothed into
-gamma log sum_i exp(-(c(x, s_i) + alpha_i) / gamma). With gamma = 0 the transport
map x -> exp_x(-grad phi_m(x)) sends every point to its minimising site, so its
pushforward has at most m atoms; ``quantization_table`` measures the best error
any m-atom measure can reach.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Mapping, NamedTuple, Optional, Sequence, Tuple
import numpy as np
from scipy.special import logsumexp, softmax
from scipy.stats import linregress
from biobb_common.tools import file_utils as fu
from biobb_rnot.core.ctransform import InnerSolverConfig, inner_solve
from biobb_rnot.core.embedding import farthest_point_order, select_landmarks_fps
from biobb_rnot.core.errors import ManifoldMismatchError, TrainingAbortedError
from biobb_rnot.core.geometry import Manifold, manifold_from_dict
from biobb_rnot.core.measures import Measure
from biobb_rnot.core.optim import Adam, RiemannianDescent
from biobb_rnot.core.semidual import StepRecord, TrainConfig, TrainReport

CI_Z = 1.96


@dataclass(frozen=True)
class RcpmModel:
    """ m sites with offsets ``alphas`` and smoothing ``gamma`` (0 is the hard minimum). """
    manifold: Manifold
    sites: np.ndarray
    alphas: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        sites = self.manifold.check_points(np.array(self.sites, dtype=float, ndmin=2))
        alphas = np.array(self.alphas, dtype=float).reshape(-1)
        if len(sites) < 1:
            raise ValueError("An RCPM needs at least one site")
        if alphas.shape != (len(sites),):
            raise ValueError("Expected %d alphas, got %d" % (len(sites), alphas.size))
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative, got %r" % self.gamma)
        object.__setattr__(self, 'sites', sites)
        object.__setattr__(self, 'alphas', alphas)

    @property
    def m(self) -> int:
        return len(self.sites)

    def costs(self, x: np.ndarray) -> np.ndarray:
        """ c(x, s_i) + alpha_i, shape (n, m). """
        x = np.array(x, dtype=float, ndmin=2)
        self.manifold.check_shape(x)
        return 0.5 * self.manifold.pairwise_dist(x, self.sites) ** 2 + self.alphas[None, :]

    def weights(self, x: np.ndarray) -> np.ndarray:
        """ d phi / d alpha: one-hot argmin (lowest index on ties) or softmin weights. """
        costs = self.costs(x)
        if self.gamma == 0:
            weights = np.zeros_like(costs)
            weights[np.arange(len(costs)), np.argmin(costs, axis=1)] = 1.0
            return weights
        return softmax(-costs / self.gamma, axis=1)

    def value(self, x: np.ndarray) -> np.ndarray:
        costs = self.costs(x)
        if self.gamma == 0:
            return costs.min(axis=1)
        return -self.gamma * logsumexp(-costs / self.gamma, axis=1)

    def value_and_grad(self, x: np.ndarray, perturb_scale: float = 1e-7):
        """ (phi(x), grad phi(x) = -sum_i w_i log_x(s_i), flagged) for a batch. """
        x = np.array(x, dtype=float, ndmin=2)
        weights = self.weights(x)
        logs, _, counts, failed = self.manifold.log_map_safe(x[:, None, :], self.sites[None, :, :], perturb_scale)
        grads = -np.einsum('nm,nmd->nd', weights, logs)
        flagged = np.any((counts > 0) & (weights > 0), axis=1)
        return self.value(x), grads, flagged

    def transport(self, x: np.ndarray) -> np.ndarray:
        x = np.array(x, dtype=float, ndmin=2)
        if self.gamma == 0:
            return self.sites[np.argmin(self.costs(x), axis=1)]
        _, grads, _ = self.value_and_grad(x)
        return self.manifold.exp_map(x, -grads)

    def to_dict(self) -> dict:
        return {'kind': 'rcpm', 'manifold': self.manifold.to_dict(), 'gamma': self.gamma,
                'alphas': self.alphas.tolist(), 'sites': self.sites.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping) -> 'RcpmModel':
        return cls(manifold_from_dict(data['manifold']), np.asarray(data['sites'], dtype=float),
                   np.asarray(data['alphas'], dtype=float), float(data.get('gamma', 0.0)))


def rcpm_potential(model: RcpmModel, x: np.ndarray):
    values = model.value(x)
    return float(values[0]) if np.ndim(x) == 1 else values


def rcpm_transport(model: RcpmModel, x: np.ndarray) -> np.ndarray:
    """ Hard minimum: the argmin site. Smoothed: exp_x(-grad phi_gamma(x)). """
    out = model.transport(x)
    return out[0] if np.ndim(x) == 1 else out


def _site_gradient(manifold: Manifold, sites: np.ndarray, points: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """ mean_k sum over points of w_ki grad_{s_i} c(points_k, s_i), tangent at each site. """
    logs, _, _, _ = manifold.log_map_safe(sites[None, :, :], points[:, None, :])
    return -np.einsum('km,kmd->md', weights, logs) / len(points)


def rcpm_train(source: Measure, target: Measure, m: int, gamma: float, cfg: TrainConfig = TrainConfig(),
               inner: InnerSolverConfig = InnerSolverConfig(),
               out_log: Optional[logging.Logger] = None, global_log: Optional[logging.Logger] = None):
    """ Fit sites and offsets by the semi-dual objective with phi_m on the source side.

    The loss is -mean phi_m(x) - mean phi_m^c(y), where phi_m^c(y) = min_z c(z, y) - phi_m(z)
    is solved numerically with the source batch as the softmin pool. Sites start at a
    farthest-point selection of target samples and all offsets at 0. Offsets follow Adam,
    sites follow Riemannian Adam.

    Returns:
        tuple: (RcpmModel, TrainReport)
    """
    if source.manifold != target.manifold:
        raise ManifoldMismatchError("Source %r and target %r must share a manifold" % (source.manifold, target.manifold))
    if int(m) < 1:
        raise ValueError("The number of RCPM sites must be >= 1, got %r" % m)
    manifold = source.manifold
    init_seed, *step_seeds = np.random.SeedSequence(cfg.seed).spawn(int(cfg.steps) + 1)
    init_rng = np.random.default_rng(init_seed)
    candidates = target.sample(init_rng, max(16 * int(m), int(cfg.batch_size)))
    sites = select_landmarks_fps(manifold, int(m), candidates, init_rng).landmarks.copy()
    model = RcpmModel(manifold, sites, np.zeros(int(m)), gamma)
    alpha_optimizer = Adam(int(m), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    site_optimizer = RiemannianDescent(manifold, int(m), 'adam', cfg.learning_rate, beta1=cfg.beta1,
                                       beta2=cfg.beta2, eps=cfg.eps)
    report = TrainReport()
    for step in range(int(cfg.steps)):
        rng = np.random.default_rng(step_seeds[step])
        xs = source.sample(rng, cfg.batch_size)
        ys = target.sample(rng, cfg.batch_size)
        start = time.perf_counter()
        result = inner_solve(model, ys, xs, inner)
        valid = np.isfinite(result.value)
        loss = float(-np.mean(model.value(xs)) - np.mean(result.value[valid])) if np.any(valid) else float('nan')
        z_star = result.y_star[valid]
        w_x, w_z = model.weights(xs), model.weights(z_star)
        alpha_grad = -w_x.mean(axis=0) + w_z.mean(axis=0)
        site_grad = -_site_gradient(manifold, model.sites, xs, w_x) + _site_gradient(manifold, model.sites, z_star, w_z)
        if not np.isfinite(loss) or not np.all(np.isfinite(alpha_grad)) or not np.all(np.isfinite(site_grad)):
            raise TrainingAbortedError("Non-finite RCPM loss or gradient at step %d" % step, step)
        model = RcpmModel(manifold, site_optimizer.step(model.sites, site_grad),
                          alpha_optimizer.step(model.alphas, alpha_grad), gamma)
        finite = result.residual[np.isfinite(result.residual)]
        record = StepRecord(step, loss, float(np.mean(finite)) if finite.size else float('nan'),
                            float(np.mean(result.iterations)), int(np.sum(~valid | result.failed)),
                            1000.0 * (time.perf_counter() - start))
        report.records.append(record)
        if cfg.log_every and (step + 1) % cfg.log_every == 0:
            fu.log('RCPM step %d/%d: loss %.6g, mean residual %.3g' % (step + 1, cfg.steps, loss, record.mean_residual),
                   out_log, global_log)
    return model, report


class SlopeFit(NamedTuple):
    """ Least-squares slope of log V against log m with its 95% half-width. """
    slope: float
    stderr: float
    ci: float


class QuantizationTable(NamedTuple):
    rows: List[Tuple[int, float]]
    fit: SlopeFit


def lloyd(manifold: Manifold, samples: np.ndarray, m: int, rng: np.random.Generator,
          max_iters: int = 50, tol: float = 1e-6) -> Tuple[np.ndarray, float]:
    """ Geodesic k-means on ``samples``.

    Centres start at a farthest-point traversal from a random sample. Each iteration
    assigns samples to their nearest centre and moves every centre by the mean of
    the logarithms of its cell (one exp retraction). A centre left with an empty
    cell is moved onto the sample farthest from its nearest centre. Iteration stops
    after ``max_iters`` or when the distortion changes by less than ``tol`` relative.

    Returns:
        tuple: (centres (m, D), mean squared distance to the nearest centre)
    """
    samples = np.array(samples, dtype=float, ndmin=2)
    if int(m) < 1 or len(samples) < int(m):
        raise ValueError("Lloyd needs 1 <= m <= number of samples, got m=%r for %d samples" % (m, len(samples)))
    centers = samples[farthest_point_order(manifold, samples, int(m), int(rng.integers(len(samples))))]
    previous = np.inf
    for _ in range(int(max_iters)):
        dists = manifold.pairwise_dist(samples, centers)
        labels = np.argmin(dists, axis=1)
        nearest = dists[np.arange(len(samples)), labels]
        distortion = float(np.mean(nearest ** 2))
        if np.isfinite(previous) and previous - distortion <= tol * previous:
            break
        previous = distortion
        logs, _, _, _ = manifold.log_map_safe(centers[labels], samples)
        sums = np.zeros((len(centers), samples.shape[1]))
        np.add.at(sums, labels, logs)
        counts = np.bincount(labels, minlength=len(centers))
        centers = manifold.exp_map(centers, sums / np.maximum(counts, 1)[:, None])
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            centers[empty] = samples[np.argsort(-nearest, kind='stable')[:empty.size]]
    dists = manifold.pairwise_dist(samples, centers)
    return centers, float(np.mean(np.min(dists, axis=1) ** 2))


def circle_quantization_error(m: int) -> float:
    """ Exact V_m of the uniform measure on the unit circle: m equal arcs give pi^2 / (3 m^2). """
    return math.pi ** 2 / (3.0 * int(m) ** 2)


def fit_slope(ms: Sequence[int], values: Sequence[float]) -> SlopeFit:
    ms, values = np.asarray(ms, dtype=float), np.asarray(values, dtype=float)
    keep = np.isfinite(values) & (values > 0)
    if np.count_nonzero(keep) < 2:
        return SlopeFit(float('nan'), float('nan'), float('nan'))
    fit = linregress(np.log(ms[keep]), np.log(values[keep]))
    stderr = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    return SlopeFit(float(fit.slope), stderr, CI_Z * stderr)


def quantization_table(nu: Measure, m_grid: Sequence[int], rng: np.random.Generator, n_samples: int = 10000,
                       restarts: int = 5, max_iters: int = 50, tol: float = 1e-6, threads: int = 1,
                       out_log: Optional[logging.Logger] = None,
                       global_log: Optional[logging.Logger] = None) -> QuantizationTable:
    """ Estimate the quantization error V_m = min over m-point codebooks of E d(c, Y)^2
    for every m of ``m_grid``, best of ``restarts`` Lloyd runs on one shared sample.

    The rows are followed by the log-log slope fit; for a p-dimensional measure the
    slope tends to -2/p.
    """
    m_grid = [int(m) for m in m_grid]
    if not m_grid or any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ValueError("The m grid must be a nonempty increasing sequence")
    samples = nu.sample(rng, int(n_samples))
    seeds = np.random.SeedSequence(int(rng.integers(2 ** 63))).spawn(len(m_grid) * int(restarts))
    tasks = [(m, seeds[i * int(restarts) + r]) for i, m in enumerate(m_grid) for r in range(int(restarts))]

    def run(task):
        m, seed = task
        return lloyd(nu.manifold, samples, m, np.random.default_rng(seed), max_iters, tol)[1]

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as executor:
        distortions = list(executor.map(run, tasks))
    rows = []
    for i, m in enumerate(m_grid):
        best = min(distortions[i * int(restarts):(i + 1) * int(restarts)])
        rows.append((m, best))
        fu.log('Quantization m=%d: V=%.6g' % (m, best), out_log, global_log)
    return QuantizationTable(rows, fit_slope([m for m, _ in rows], [v for _, v in rows]))


rcpm_rmse_lower_bound_demo = quantization_table
