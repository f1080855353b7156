""" Source and target measures: uniform, wrapped normal and empirical point clouds. """
import math
from typing import Optional, Union
import numpy as np
from scipy.special import logsumexp
from biobb_rnot.core.geometry import Manifold, WrappedNormalSpec

KDE_CHUNK = 256


class Measure:
    """ Base class of the measures a transport task moves between. """
    kind = ''

    def __init__(self, manifold: Manifold) -> None:
        self.manifold = manifold

    @property
    def has_density(self) -> bool:
        return True

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def log_density(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {'kind': self.kind}

    def __repr__(self) -> str:
        return "%s(%r)" % (self.__class__.__name__, self.manifold)


class UniformMeasure(Measure):
    """ Normalised Riemannian volume. """
    kind = 'uniform'

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.manifold.sample_uniform(rng, n)

    def log_density(self, y: np.ndarray) -> np.ndarray:
        return self.manifold.log_density('uniform', np.array(y, dtype=float, ndmin=2))


class WrappedNormalMeasure(Measure):
    """ Tangent Gaussian of scale ``spec.sigma`` pushed forward by exp at ``spec.center``. """
    kind = 'wrapped_normal'

    def __init__(self, manifold: Manifold, spec: WrappedNormalSpec) -> None:
        super().__init__(manifold)
        manifold.check_points(spec.center)
        self.spec = spec

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.manifold.sample_wrapped_normal(self.spec, rng, n)

    def log_density(self, y: np.ndarray) -> np.ndarray:
        return self.manifold.log_density(self.spec, np.array(y, dtype=float, ndmin=2))

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'center': self.spec.center.tolist(), 'sigma': self.spec.sigma}


class EmpiricalMeasure(Measure):
    """ Uniform resampling (with replacement) of a point cloud.

    With ``kde_bandwidth`` set the measure also has a density: an equal-weight
    mixture of wrapped normals of scale ``kde_bandwidth`` centred at (at most
    ``kde_max_centers`` evenly strided) cloud points.

    Args:
        manifold (Manifold): Manifold of the cloud.
        points (np.ndarray): Cloud, shape (n, D), n >= 1.
        path (str): (None) File the cloud was read from, kept for reports.
        kde_bandwidth (float): (None) Kernel scale; None means no density.
        kde_max_centers (int): (2048) Largest number of kernel centres.
    """
    kind = 'empirical'

    def __init__(self, manifold: Manifold, points: np.ndarray, path: Optional[str] = None,
                 kde_bandwidth: Optional[float] = None, kde_max_centers: int = 2048) -> None:
        super().__init__(manifold)
        points = manifold.check_points(np.array(points, dtype=float, ndmin=2))
        if len(points) == 0:
            raise ValueError("Empirical measure %s has no points" % (path or ''))
        if kde_bandwidth is not None and not kde_bandwidth > 0:
            raise ValueError("kde_bandwidth must be positive, got %r" % kde_bandwidth)
        self.points = points
        self.path = path
        self.kde_bandwidth = kde_bandwidth
        self.kde_max_centers = int(kde_max_centers)

    @property
    def has_density(self) -> bool:
        return self.kde_bandwidth is not None

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.points[rng.integers(len(self.points), size=n)]

    def kde_centers(self) -> np.ndarray:
        if len(self.points) <= self.kde_max_centers:
            return self.points
        return self.points[np.linspace(0, len(self.points) - 1, self.kde_max_centers).astype(int)]

    def log_density(self, y: np.ndarray) -> np.ndarray:
        if not self.has_density:
            raise ValueError("Empirical measure %s has no density; set kde_bandwidth" % (self.path or ''))
        y = np.array(y, dtype=float, ndmin=2)
        centers = self.kde_centers()
        parts = [self.manifold.log_density(WrappedNormalSpec(chunk[:, None, :], self.kde_bandwidth), y)
                 for chunk in np.array_split(centers, max(1, math.ceil(len(centers) / KDE_CHUNK)))]
        return logsumexp(np.concatenate(parts, axis=0), axis=0) - math.log(len(centers))

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'path': self.path, 'n_points': len(self.points),
                'kde_bandwidth': self.kde_bandwidth, 'kde_max_centers': self.kde_max_centers}


MeasureSpec = Union[UniformMeasure, WrappedNormalMeasure, EmpiricalMeasure]


def require_density(*measures: Measure) -> None:
    for measure in measures:
        if not measure.has_density:
            raise ValueError("%r has no density; KL and ESS need analytic or kernel densities" % measure)
