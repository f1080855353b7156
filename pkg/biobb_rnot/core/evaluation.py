""" Quantitative evaluation of learned transport maps.

The density of the pushforward T#mu follows from the change of variables
log nu_theta(T(x)) = log mu(x) - log|det dT(x)|. For RNOT maps dT comes from the
implicit function theorem applied to the stationarity condition
F(x, y) = -log_y(x) - grad psi(y) = 0, i.e. dT = -[D_y F]^-1 D_x F, with both
blocks obtained by central differences along orthonormal tangent bases. RCPM
maps are explicit and are differentiated directly.
"""
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple
import numpy as np
from scipy.special import logsumexp
from biobb_common.tools import file_utils as fu
from biobb_rnot.core.config import dataclass_from_dict
from biobb_rnot.core.ctransform import InnerSolverConfig, PotentialModel, build_potential_model, inner_solve
from biobb_rnot.core.embedding import LandmarkConfig
from biobb_rnot.core.errors import SingularJacobianError
from biobb_rnot.core.geometry import Manifold, WrappedNormalSpec, manifold_from_dict, resolve_center
from biobb_rnot.core.measures import Measure, UniformMeasure, WrappedNormalMeasure, require_density
from biobb_rnot.core.rcpm import RcpmModel, rcpm_train
from biobb_rnot.core.semidual import TrainConfig, train

CI_Z = 1.96
SINGULAR_DET = 1e-12
UNRELIABLE_FRACTION = 0.2
SWEEP_COLUMNS = ('p', 'method', 'gamma', 'kl', 'kl_ci', 'ess', 'ess_ci', 'seconds')
RCPM_GAMMAS = (1.0, 0.1, 0.05, 0.01, 0.005, 0.001)


@dataclass(frozen=True)
class EvalConfig:
    """ Evaluation settings.

    Args:
        n_samples (int): (1024) Source samples per batch.
        n_batches (int): (5) Independent batches behind the confidence intervals.
        fd_step (float): (1e-5) Central difference step of the Jacobians.
        residual_gate (float): (1e-2) Points whose inner residual exceeds this value are excluded.
        pool_size (int): (1024) Target samples used as the softmin pool of the inner solves.
        seed (int): (0) Root seed of the batches.
    """
    n_samples: int = 1024
    n_batches: int = 5
    fd_step: float = 1e-5
    residual_gate: float = 1e-2
    pool_size: int = 1024
    seed: int = 0

    def __post_init__(self):
        if int(self.n_samples) < 2:
            raise ValueError("n_samples must be >= 2")
        if int(self.n_batches) < 1:
            raise ValueError("n_batches must be >= 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")

    @classmethod
    def from_dict(cls, section: Optional[Mapping], **overrides) -> 'EvalConfig':
        return dataclass_from_dict(cls, section, 'eval', **overrides)


@dataclass
class EvalReport:
    """ KL and ESS with 95% half-widths, normalising constant, mean transport cost,
    relative Monge gap and the fraction of excluded points. KL/ESS are NaN in
    cost-only mode (a measure without density). """
    kl_mean: float
    kl_ci: float
    ess_mean: float
    ess_ci: float
    z_hat: float
    mean_cost: float
    monge_gap_rel: float
    gated_fraction: float
    n_samples: int
    n_batches: int
    unreliable: bool = False

    def to_dict(self) -> dict:
        return {key: (None if isinstance(value, float) and math.isnan(value) else value)
                for key, value in asdict(self).items()}


class JacobianBatch(NamedTuple):
    jacobians: np.ndarray
    logdet: np.ndarray
    y: np.ndarray
    gated: np.ndarray
    residual: np.ndarray


class RmseResult(NamedTuple):
    rmse: float
    excluded: int


class BatchStats(NamedTuple):
    kl: float
    ess: float
    z_hat: float
    cost: float
    gap: float
    gated: int
    total: int


def _stationarity(model: PotentialModel, x: np.ndarray, y: np.ndarray):
    logs, _, _, failed = model.manifold.log_map_safe(y, x)
    _, grad_psi, _ = model.value_and_grad(y)
    return -logs - grad_psi, failed


def _directional_points(manifold: Manifold, points: np.ndarray, basis: np.ndarray, h: float):
    """ exp_x(+h e_k) and exp_x(-h e_k) for every basis column, shape (p, n, D) each. """
    steps = h * np.moveaxis(basis, -1, 0)
    base = np.broadcast_to(points, steps.shape)
    return manifold.exp_map(base, steps), manifold.exp_map(base, -steps)


def _solve_ift(manifold: Manifold, model: PotentialModel, x: np.ndarray, y: np.ndarray, h: float):
    """ Jacobians of T at ``x`` (n, p, p) in tangent_basis coordinates, and a singular mask. """
    n, p, D = len(x), manifold.dim, x.shape[1]
    basis_x, basis_y = manifold.tangent_basis(x), manifold.tangent_basis(y)
    x_plus, x_minus = _directional_points(manifold, x, basis_x, h)
    y_plus, y_minus = _directional_points(manifold, y, basis_y, h)
    tiled_y = np.broadcast_to(y, (p, n, D)).reshape(-1, D)
    tiled_x = np.broadcast_to(x, (p, n, D)).reshape(-1, D)
    f_xp, fail_xp = _stationarity(model, x_plus.reshape(-1, D), tiled_y)
    f_xm, fail_xm = _stationarity(model, x_minus.reshape(-1, D), tiled_y)
    f_yp, fail_yp = _stationarity(model, tiled_x, y_plus.reshape(-1, D))
    f_ym, fail_ym = _stationarity(model, tiled_x, y_minus.reshape(-1, D))
    failed = np.any((fail_xp | fail_xm | fail_yp | fail_ym).reshape(p, n), axis=0)
    # Columns k of D_x F and D_y F, in ambient coordinates at y: (n, D, p).
    d_x = np.moveaxis(((f_xp - f_xm) / (2 * h)).reshape(p, n, D), 0, -1)
    d_y = np.moveaxis(((f_yp - f_ym) / (2 * h)).reshape(p, n, D), 0, -1)
    a = np.einsum('ndq,ndk->nqk', basis_y, d_x)
    b = np.einsum('ndq,ndk->nqk', basis_y, d_y)
    det_b = np.linalg.det(b)
    singular = failed | ~(np.abs(det_b) >= SINGULAR_DET)
    safe_b = np.where(singular[:, None, None], np.eye(p), b)
    return -np.linalg.solve(safe_b, a), singular


def direct_fd_jacobian(manifold: Manifold, transport: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float):
    """ Central-difference Jacobian of an explicit map in tangent_basis coordinates. """
    n, p, D = len(x), manifold.dim, x.shape[1]
    y = transport(x)
    basis_x, basis_y = manifold.tangent_basis(x), manifold.tangent_basis(y)
    x_plus, x_minus = _directional_points(manifold, x, basis_x, h)
    tiled_y = np.broadcast_to(y, (p, n, D)).reshape(-1, D)
    log_plus, _, _, fail_p = manifold.log_map_safe(tiled_y, transport(x_plus.reshape(-1, D)))
    log_minus, _, _, fail_m = manifold.log_map_safe(tiled_y, transport(x_minus.reshape(-1, D)))
    columns = np.moveaxis(((log_plus - log_minus) / (2 * h)).reshape(p, n, D), 0, -1)
    failed = np.any((fail_p | fail_m).reshape(p, n), axis=0)
    return y, np.einsum('ndq,ndk->nqk', basis_y, columns), failed


def transport_jacobians(model, x: np.ndarray, pool: np.ndarray, cfg: EvalConfig = EvalConfig(),
                        inner: InnerSolverConfig = InnerSolverConfig()) -> JacobianBatch:
    """ Transported points, Jacobians and log|det| for a batch of source points.

    Points are gated (excluded) when the inner residual exceeds ``cfg.residual_gate``,
    when a cut locus blocks the differences, or when the relevant determinant is
    below 1e-12 in absolute value. Gated rows carry NaN log-determinants.
    """
    manifold = model.manifold
    x = np.array(x, dtype=float, ndmin=2)
    if isinstance(model, RcpmModel):
        y, jacobians, singular = direct_fd_jacobian(manifold, model.transport, x, cfg.fd_step)
        residual = np.zeros(len(x))
    else:
        result = inner_solve(model, x, pool, inner)
        y, residual = result.y_star, result.residual
        jacobians, singular = _solve_ift(manifold, model, x, y, cfg.fd_step)
        singular |= ~(residual <= cfg.residual_gate) | result.failed
    sign, logdet = np.linalg.slogdet(jacobians)
    gated = singular | (sign == 0) | ~np.isfinite(logdet) | (logdet < math.log(SINGULAR_DET))
    return JacobianBatch(jacobians, np.where(gated, np.nan, logdet), y, gated, residual)


def transport_jacobian(model, x: np.ndarray, pool: np.ndarray, cfg: EvalConfig = EvalConfig(),
                       inner: InnerSolverConfig = InnerSolverConfig()) -> Tuple[np.ndarray, float]:
    """ (J, log|det J|) at a single point.

    Raises:
        SingularJacobianError: If the point is gated.
    """
    batch = transport_jacobians(model, np.array(x, dtype=float, ndmin=2), pool, cfg, inner)
    if batch.gated[0]:
        raise SingularJacobianError("Transport Jacobian unavailable at %s (residual %.3g)"
                                    % (np.asarray(x).tolist(), batch.residual[0]))
    return batch.jacobians[0], float(batch.logdet[0])


def _semidual_loss(model, x: np.ndarray, y: np.ndarray, pool: np.ndarray, inner: InnerSolverConfig):
    """ Semi-dual loss of either model family on the batch (x, y). """
    if isinstance(model, RcpmModel):
        result = inner_solve(model, y, x, inner)
        valid = np.isfinite(result.value)
        return float(-np.mean(model.value(x)) - np.mean(result.value[valid]))
    result = inner_solve(model, x, pool, inner)
    valid = np.isfinite(result.value)
    return float(-np.mean(result.value[valid]) - np.mean(model.value(y)))


def _batch_stats(model, source: Measure, target: Measure, cfg: EvalConfig, inner: InnerSolverConfig,
                 seed: np.random.SeedSequence, with_density: bool) -> BatchStats:
    rng = np.random.default_rng(seed)
    x = source.sample(rng, int(cfg.n_samples))
    pool = target.sample(rng, int(cfg.pool_size))
    batch = transport_jacobians(model, x, pool, cfg, inner)
    keep = ~batch.gated
    total = len(x)
    if not np.any(keep):
        return BatchStats(*([float('nan')] * 5), total, total)
    cost = float(np.mean(model.manifold.sqdist_half(x[keep], batch.y[keep])))
    gap = cost + _semidual_loss(model, x[keep], pool, pool, inner)
    kl = ess = z_hat = float('nan')
    if with_density:
        log_mu = source.log_density(x[keep])
        log_nu = target.log_density(batch.y[keep])
        log_nu_theta = log_mu - batch.logdet[keep]
        kl = float(np.mean(log_nu_theta - log_nu))
        log_w = log_nu - log_nu_theta
        count = int(np.count_nonzero(keep))
        ess = float(np.exp(2 * logsumexp(log_w) - logsumexp(2 * log_w)) / count)
        z_hat = float(np.exp(logsumexp(log_w) - math.log(count)))
    return BatchStats(kl, ess, z_hat, cost, gap, int(total - np.count_nonzero(keep)), total)


def _mean_ci(values: Sequence[float]) -> Tuple[float, float]:
    values = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    if values.size == 0:
        return float('nan'), float('nan')
    if values.size == 1:
        return float(values[0]), 0.0
    return float(values.mean()), float(CI_Z * values.std(ddof=1) / math.sqrt(values.size))


def evaluate(model, source: Measure, target: Measure, cfg: EvalConfig = EvalConfig(),
             inner: InnerSolverConfig = InnerSolverConfig(), threads: int = 1,
             out_log: Optional[logging.Logger] = None, global_log: Optional[logging.Logger] = None) -> EvalReport:
    """ Full evaluation over ``cfg.n_batches`` independent batches.

    KL and ESS need densities on both sides; with an empirical measure lacking a
    kernel bandwidth only the cost and Monge gap are reported. A report with more
    than 20% excluded points is flagged ``unreliable`` and a warning is issued.
    """
    with_density = source.has_density and target.has_density
    seeds = np.random.SeedSequence(cfg.seed).spawn(int(cfg.n_batches))
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as executor:
        stats = list(executor.map(lambda s: _batch_stats(model, source, target, cfg, inner, s, with_density), seeds))
    kl_mean, kl_ci = _mean_ci([s.kl for s in stats])
    ess_mean, ess_ci = _mean_ci([s.ess for s in stats])
    z_hat, _ = _mean_ci([s.z_hat for s in stats])
    cost, _ = _mean_ci([s.cost for s in stats])
    gap, _ = _mean_ci([s.gap for s in stats])
    gated_fraction = sum(s.gated for s in stats) / sum(s.total for s in stats)
    report = EvalReport(kl_mean, kl_ci, ess_mean, ess_ci, z_hat, cost,
                        abs(gap) / cost if cost >= 1e-12 else float('nan'), gated_fraction,
                        int(cfg.n_samples), int(cfg.n_batches), gated_fraction > UNRELIABLE_FRACTION)
    fu.log('KL %.4g +- %.2g, ESS %.4g +- %.2g, Z %.4g, cost %.4g, gated %.1f%%'
           % (kl_mean, kl_ci, ess_mean, ess_ci, z_hat, cost, 100 * gated_fraction), out_log, global_log)
    if report.unreliable:
        warnings.warn("Evaluation unreliable: %.1f%% of the points were excluded" % (100 * gated_fraction))
    return report


def kl_estimate(model, source: Measure, target: Measure, cfg: EvalConfig = EvalConfig(),
                inner: InnerSolverConfig = InnerSolverConfig()) -> Tuple[float, float]:
    require_density(source, target)
    report = evaluate(model, source, target, cfg, inner)
    return report.kl_mean, report.kl_ci


def ess_estimate(model, source: Measure, target: Measure, cfg: EvalConfig = EvalConfig(),
                 inner: InnerSolverConfig = InnerSolverConfig()) -> Tuple[float, float, float]:
    require_density(source, target)
    report = evaluate(model, source, target, cfg, inner)
    return report.ess_mean, report.ess_ci, report.z_hat


def rmse_between_maps(first: Callable[[np.ndarray], np.ndarray], second: Callable[[np.ndarray], np.ndarray],
                      source: Measure, n: int, rng: np.random.Generator) -> RmseResult:
    """ sqrt(E_mu d(T1(x), T2(x))^2) on ``n`` samples; rows where a map yields
    non-finite coordinates are excluded and counted. """
    x = source.sample(rng, int(n))
    y1, y2 = np.asarray(first(x), dtype=float), np.asarray(second(x), dtype=float)
    valid = np.all(np.isfinite(y1), axis=1) & np.all(np.isfinite(y2), axis=1)
    if not np.any(valid):
        return RmseResult(float('nan'), int(n))
    d = source.manifold.dist(y1[valid], y2[valid])
    return RmseResult(float(np.sqrt(np.mean(d ** 2))), int(n - np.count_nonzero(valid)))


@dataclass(frozen=True)
class SweepConfig:
    """ Dimension sweep of the uniform to wrapped-normal task.

    Args:
        kind (str): ('sphere') Manifold family.
        p_grid (tuple): ((2, 3, 4)) Dimensions.
        methods (tuple): (('rnot',)) Any of rnot, rcpm.
        gammas (tuple): ((1.0, 0.1, 0.05, 0.01, 0.005, 0.001)) RCPM smoothing values.
        sigma (float): (0.3) Target scale.
        center (str): ('south_pole') Target centre preset.
        rcpm_sites (int): (68) Number of RCPM sites.
        seed (int): (0) Root seed of the cells.
    """
    kind: str = 'sphere'
    p_grid: Tuple[int, ...] = (2, 3, 4)
    methods: Tuple[str, ...] = ('rnot',)
    gammas: Tuple[float, ...] = RCPM_GAMMAS
    sigma: float = 0.3
    center: str = 'south_pole'
    rcpm_sites: int = 68
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'p_grid', tuple(int(p) for p in self.p_grid))
        object.__setattr__(self, 'methods', tuple(self.methods))
        object.__setattr__(self, 'gammas', tuple(float(g) for g in self.gammas))
        if not self.p_grid:
            raise ValueError("p_grid must not be empty")
        unknown = set(self.methods) - {'rnot', 'rcpm'}
        if unknown:
            raise ValueError("Unknown sweep methods %s" % sorted(unknown))

    @classmethod
    def from_dict(cls, section: Optional[Mapping]) -> 'SweepConfig':
        return dataclass_from_dict(cls, section, 'sweep')

    def cells(self) -> List[Tuple[int, str, float]]:
        cells = []
        for p in self.p_grid:
            for method in self.methods:
                gammas = self.gammas if method == 'rcpm' else (float('nan'),)
                cells.extend((p, method, gamma) for gamma in gammas)
        return cells


def cell_key(p, method, gamma) -> Tuple[int, str, str]:
    return int(p), str(method), 'nan' if gamma is None or (isinstance(gamma, float) and math.isnan(gamma)) \
        else repr(float(gamma))


@dataclass
class SweepSettings:
    """ Per-cell training and evaluation settings shared by every cell of a sweep. """
    train: TrainConfig = field(default_factory=TrainConfig)
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    landmarks: LandmarkConfig = field(default_factory=LandmarkConfig)
    network: Dict = field(default_factory=dict)


def _run_cell(sweep: SweepConfig, settings: SweepSettings, cell: Tuple[int, str, float],
              seed: np.random.SeedSequence) -> dict:
    p, method, gamma = cell
    start = time.perf_counter()
    manifold = manifold_from_dict({'kind': sweep.kind, 'dim': p})
    source = UniformMeasure(manifold)
    target = WrappedNormalMeasure(manifold, WrappedNormalSpec(resolve_center(manifold, sweep.center), sweep.sigma))
    train_seed, eval_seed = (int(s.generate_state(1)[0]) for s in seed.spawn(2))
    train_cfg = TrainConfig(**dict(asdict(settings.train), seed=train_seed, log_every=0, checkpoint_every=0))
    if method == 'rnot':
        landmarks = LandmarkConfig(**dict(asdict(settings.landmarks), seed=train_seed)).select(manifold)
        model, _ = train(source, target, build_potential_model(landmarks, settings.network), train_cfg, settings.inner)
    else:
        model, _ = rcpm_train(source, target, sweep.rcpm_sites, gamma, train_cfg, settings.inner)
    eval_cfg = EvalConfig(**dict(asdict(settings.evaluation), seed=eval_seed))
    report = evaluate(model, source, target, eval_cfg, settings.inner)
    return {'p': p, 'method': method, 'gamma': gamma, 'kl': report.kl_mean, 'kl_ci': report.kl_ci,
            'ess': report.ess_mean, 'ess_ci': report.ess_ci, 'seconds': time.perf_counter() - start}


def dimension_sweep(sweep: SweepConfig, settings: SweepSettings = SweepSettings(), threads: int = 1,
                    completed: Optional[Mapping[Tuple[int, str, str], dict]] = None,
                    out_log: Optional[logging.Logger] = None,
                    global_log: Optional[logging.Logger] = None) -> Tuple[List[dict], int]:
    """ Train and evaluate every (p, method, gamma) cell with matched budgets.

    Cells found in ``completed`` (keyed by ``cell_key``) are reused as they are.
    A failing cell becomes a row of NaN metrics and the sweep continues.

    Returns:
        tuple: (rows in grid order, number of failed cells)
    """
    completed = dict(completed or {})
    cells = sweep.cells()
    seeds = np.random.SeedSequence(sweep.seed).spawn(len(cells))
    todo = [(cell, seed) for cell, seed in zip(cells, seeds) if cell_key(*cell) not in completed]
    failures = []

    def run(task):
        cell, seed = task
        try:
            row = _run_cell(sweep, settings, cell, seed)
        except Exception as err:
            failures.append(cell)
            fu.log('Sweep cell %s failed: %s' % (cell, err), out_log, global_log)
            row = {'p': cell[0], 'method': cell[1], 'gamma': cell[2], 'kl': float('nan'), 'kl_ci': float('nan'),
                   'ess': float('nan'), 'ess_ci': float('nan'), 'seconds': float('nan')}
        fu.log('Sweep cell p=%d %s gamma=%s: KL %.4g' % (cell[0], cell[1], cell[2], row['kl']), out_log, global_log)
        return cell_key(*cell), row

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as executor:
        completed.update(executor.map(run, todo))
    if failures:
        warnings.warn("%d sweep cell(s) failed and were recorded as NaN" % len(failures))
    return [completed[cell_key(*cell)] for cell in cells], len(failures)
