""" Implicit c-transform layer.

For the quadratic cost c(x, y) = d(x, y)^2 / 2 the c-transform of a prepotential
psi is psi^c(x) = min_y F(x, y) with F(x, y) = c(x, y) - psi(y). The minimum is
approximated by Riemannian descent on y started from a LogSumExp (softmin) guess
over a pool of target points; the minimiser y*(x) is the transport map T(x).
"""
import logging
from dataclasses import dataclass
from typing import List, Mapping, Optional, Tuple
import numpy as np
from scipy.special import softmax
from biobb_rnot.core.config import check_keys, dataclass_from_dict
from biobb_rnot.core.embedding import LandmarkSet, featurize
from biobb_rnot.core.errors import ConfigError, ManifoldMismatchError
from biobb_rnot.core.geometry import Manifold
from biobb_rnot.core.network import MlpConfig, MlpParams, forward, init, psi_and_grad
from biobb_rnot.core.optim import OPTIMIZERS, RiemannianDescent

DEGENERATE_MEAN = 1e-12


@dataclass(frozen=True)
class PotentialModel:
    """ Prepotential psi = f_theta o phi on ``manifold``. """
    manifold: Manifold
    landmarks: LandmarkSet
    params: MlpParams

    def __post_init__(self):
        if self.landmarks.manifold != self.manifold:
            raise ManifoldMismatchError("Landmarks live on %r, model on %r" % (self.landmarks.manifold, self.manifold))
        if self.params.config.input_dim != self.landmarks.M:
            raise ManifoldMismatchError("Network input_dim %d differs from the %d landmarks"
                                        % (self.params.config.input_dim, self.landmarks.M))

    def value(self, y: np.ndarray) -> np.ndarray:
        return forward(self.params, featurize(self.landmarks, np.asarray(y, dtype=float)))

    def value_and_grad(self, y: np.ndarray, perturb_scale: float = 1e-7):
        """ (values, Riemannian gradients, flagged) of psi; see ``network.psi_and_grad``. """
        return psi_and_grad(self, y, perturb_scale)

    def with_params(self, params: MlpParams) -> 'PotentialModel':
        return PotentialModel(self.manifold, self.landmarks, params)


@dataclass(frozen=True)
class InnerSolverConfig:
    """ Settings of the inner minimisation over y.

    Args:
        max_iters (int): (2500) Iteration cap.
        step_size (float): (5e-2) Riemannian step size.
        optimizer (str): ('adam') One of gd, momentum, adam.
        momentum (float): (0.9) Heavy-ball coefficient.
        beta1 (float): (0.9) Adam first moment decay.
        beta2 (float): (0.999) Adam second moment decay.
        eps (float): (1e-8) Adam denominator offset.
        init_temperature (float): (0.1) Softmin temperature of the initial guess.
        init_pool_size (int): (None) Pool points used by the initial guess; None uses the whole pool.
        residual_tol (float): (1e-4) Stop when the stationarity residual drops below this value.
        perturb_scale (float): (1e-7) Step used to leave a cut locus.
        lse_init (bool): (True) Start from the softmin guess; False starts at y = x.
        record_trace (bool): (False) Keep (iteration, point, value, residual) rows.
    """
    max_iters: int = 2500
    step_size: float = 5e-2
    optimizer: str = 'adam'
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init_temperature: float = 0.1
    init_pool_size: Optional[int] = None
    residual_tol: float = 1e-4
    perturb_scale: float = 1e-7
    lse_init: bool = True
    record_trace: bool = False

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError("Unknown optimizer %r, expected one of %s" % (self.optimizer, OPTIMIZERS))
        if not self.init_temperature > 0:
            raise ValueError("init_temperature must be positive")
        if self.residual_tol < 0:
            raise ValueError("residual_tol must be nonnegative")
        if self.init_pool_size is not None and int(self.init_pool_size) < 1:
            raise ValueError("init_pool_size must be >= 1")

    @classmethod
    def from_dict(cls, section: Optional[Mapping]) -> 'InnerSolverConfig':
        return dataclass_from_dict(cls, section, 'inner')


@dataclass
class InnerSolveResult:
    """ Batched outcome of the inner minimisation, one row per source point.

    ``value`` and ``residual`` are recomputed at ``y_star``; ``residual`` is NaN
    where log_{y*}(x) stayed undefined after the perturbation attempts.
    """
    y_star: np.ndarray
    value: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    failed: np.ndarray
    perturbations: np.ndarray
    init_value: np.ndarray
    trace: Optional[List[Tuple[int, int, float, float]]] = None

    def __len__(self) -> int:
        return len(self.value)


def lse_weights(manifold: Manifold, x: np.ndarray, pool: np.ndarray, pool_values: np.ndarray,
                gamma: float) -> np.ndarray:
    """ Softmax over k of (psi(y_k) - c(x, y_k)) / gamma, shape (n, K). """
    if not gamma > 0:
        raise ValueError("The softmin temperature must be positive, got %r" % gamma)
    scores = (pool_values[None, :] - 0.5 * manifold.pairwise_dist(x, pool) ** 2) / gamma
    return softmax(scores, axis=1)


def weighted_mean_point(manifold: Manifold, weights: np.ndarray, pool: np.ndarray) -> np.ndarray:
    """ Extrinsic weighted mean of ``pool`` projected back to the manifold.

    The torus averages each angle through its unit vector (circular mean). Rows
    whose ambient mean is degenerate fall back to their largest-weight pool point.
    """
    fallback = pool[np.argmax(weights, axis=1)]
    if manifold.kind == 'torus':
        cos, sin = weights @ np.cos(pool), weights @ np.sin(pool)
        degenerate = np.any(np.hypot(cos, sin) <= DEGENERATE_MEAN, axis=1)
        means = manifold.project(np.arctan2(sin, cos))
    else:
        ambient = weights @ pool
        degenerate = np.linalg.norm(ambient, axis=1) <= DEGENERATE_MEAN
        ambient[degenerate] = fallback[degenerate]
        means = manifold.project(ambient)
    means[degenerate] = fallback[degenerate]
    return means


def lse_init(model, x: np.ndarray, pool: np.ndarray, gamma: float) -> np.ndarray:
    """ Softmin initial guess y0(x) = Proj(sum_k softmax_k((psi(y_k) - c(x, y_k)) / gamma) y_k). """
    manifold = model.manifold
    x = np.array(x, dtype=float, ndmin=2)
    pool = np.array(pool, dtype=float, ndmin=2)
    if len(pool) == 0:
        raise ValueError("The initialisation pool is empty")
    manifold.check_shape(x, pool)
    weights = lse_weights(manifold, x, pool, np.asarray(model.value(pool), dtype=float), gamma)
    return weighted_mean_point(manifold, weights, pool)


def _objective(model, x: np.ndarray, y: np.ndarray, perturb_scale: float):
    """ F(x, y), its Riemannian y-gradient -log_y(x) - grad psi(y), the residual and the base points used. """
    manifold = model.manifold
    logs, used, counts, failed = manifold.log_map_safe(y, x, perturb_scale)
    psi, grad_psi, _ = model.value_and_grad(used)
    grad = -logs - grad_psi
    grad[failed] = 0.0
    value = 0.5 * manifold.dist(x, used) ** 2 - psi
    residual = np.linalg.norm(grad, axis=-1)
    residual[failed] = np.nan
    return value, grad, residual, used, counts, failed


def inner_solve(model, x: np.ndarray, pool: np.ndarray, cfg: InnerSolverConfig = InnerSolverConfig(),
                out_log: Optional[logging.Logger] = None) -> InnerSolveResult:
    """ Minimise F(x, .) for every row of ``x``.

    ``model`` is any potential with ``manifold``, ``value(y)`` and
    ``value_and_grad(y, perturb_scale)``. Each row runs its own Riemannian
    optimizer until its residual reaches ``cfg.residual_tol``, the iteration cap is
    hit, or log_y(x) stays undefined after the perturbation attempts (``failed``).
    The best iterate visited is returned, so the value never exceeds the value at
    the starting point.
    """
    manifold = model.manifold
    x = np.array(x, dtype=float, ndmin=2)
    manifold.check_shape(x)
    n = len(x)
    if cfg.lse_init:
        pool = np.array(pool, dtype=float, ndmin=2)
        if cfg.init_pool_size is not None:
            pool = pool[:int(cfg.init_pool_size)]
        current = lse_init(model, x, pool, cfg.init_temperature)
    else:
        current = x.copy()

    value, grad, residual, current, perturbations, failed = _objective(model, x, current, cfg.perturb_scale)
    init_value = value.copy()
    best, best_value = current.copy(), value.copy()
    iterations = np.zeros(n, dtype=int)
    active = ~(residual <= cfg.residual_tol) & ~failed
    optimizer = RiemannianDescent(manifold, n, cfg.optimizer, cfg.step_size, cfg.momentum,
                                  cfg.beta1, cfg.beta2, cfg.eps)
    trace = [] if cfg.record_trace else None

    for iteration in range(1, int(cfg.max_iters) + 1):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        stepped = optimizer.step(current[rows], grad[rows], rows)
        v, g, r, used, counts, f = _objective(model, x[rows], stepped, cfg.perturb_scale)
        current[rows] = used
        grad[rows] = g
        iterations[rows] = iteration
        perturbations[rows] += counts
        failed[rows] |= f
        improved = v < best_value[rows]
        best[rows[improved]] = used[improved]
        best_value[rows[improved]] = v[improved]
        if trace is not None:
            trace.extend(zip([iteration] * len(rows), rows.tolist(), v.tolist(), r.tolist()))
        active[rows] = ~(r <= cfg.residual_tol) & ~f

    value, _, residual, best, counts, unresolved = _objective(model, x, best, cfg.perturb_scale)
    perturbations += counts
    if out_log and np.any(failed):
        out_log.info("Inner solve: %d of %d points stayed on a cut locus" % (int(failed.sum()), n))
    return InnerSolveResult(y_star=best, value=value, residual=residual, iterations=iterations,
                            converged=residual <= cfg.residual_tol, failed=failed | unresolved,
                            perturbations=perturbations, init_value=init_value, trace=trace)


def c_transform_value(model, x: np.ndarray, pool: np.ndarray, cfg: InnerSolverConfig = InnerSolverConfig()):
    """ Upper estimate F(x, y*) of psi^c(x) together with the solve result. """
    result = inner_solve(model, x, pool, cfg)
    return result.value, result


def transport_point(model, x: np.ndarray, pool: np.ndarray, cfg: InnerSolverConfig = InnerSolverConfig()):
    """ T(x) = y*(x). """
    return inner_solve(model, x, pool, cfg).y_star


def stationarity_residual(model, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """ ||-log_y(x) - grad psi(y)||; raises CutLocusError at antipodal pairs. """
    x = np.array(x, dtype=float, ndmin=2)
    y = np.array(y, dtype=float, ndmin=2)
    _, grad_psi, _ = model.value_and_grad(y)
    return np.linalg.norm(-model.manifold.log_map(y, x) - grad_psi, axis=-1)


def pool_c_transform(manifold: Manifold, x: np.ndarray, pool: np.ndarray, pool_values: np.ndarray):
    """ Discrete c-transform min_k c(x, y_k) - psi(y_k) over a finite pool.

    Returns:
        tuple: (values (n,), argmin indices (n,)); ties go to the lowest index.
    """
    x = np.array(x, dtype=float, ndmin=2)
    scores = 0.5 * manifold.pairwise_dist(x, np.array(pool, dtype=float, ndmin=2)) ** 2 - np.asarray(pool_values)[None, :]
    index = np.argmin(scores, axis=1)
    return scores[np.arange(len(x)), index], index


def interpolate(manifold: Manifold, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
    """ Geodesic interpolant exp_x(t log_x(y)); t = 0 gives x, t = 1 gives y. """
    if t == 0:
        return np.array(x, dtype=float)
    if t == 1:
        return np.array(y, dtype=float)
    logs, _, _, _ = manifold.log_map_safe(x, y)
    return manifold.exp_map(x, t * logs)


NETWORK_KEYS = ('hidden', 'activation', 'slope', 'beta', 'init_seed')


def build_potential_model(landmarks: LandmarkSet, network: Optional[Mapping] = None) -> PotentialModel:
    """ Freshly initialised prepotential on the landmarks' manifold; ``network`` holds the
    MlpConfig settings other than ``input_dim``. """
    network = dict(network or {})
    check_keys(network, NETWORK_KEYS, 'network')
    try:
        config = MlpConfig.from_dict(dict(network, input_dim=landmarks.M))
    except (TypeError, ValueError) as err:
        raise ConfigError("Invalid section 'network': %s" % err) from err
    return PotentialModel(landmarks.manifold, landmarks, init(config))
