""" Exact geometry of the unit hypersphere S^p and of the flat torus T^p.

Points are numpy arrays whose last axis holds the coordinates: ``p + 1`` ambient
coordinates on the sphere, ``p`` angles in ``[0, 2π)`` on the torus. Tangent
vectors are given in the same coordinates (ambient on the sphere, orthogonal to
their base point). Every operation broadcasts over leading axes, so a batch of
``n`` points is an ``(n, D)`` array.
"""
import abc
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union
import numpy as np
from scipy.special import gammaln, logsumexp
from biobb_rnot.core.errors import CutLocusError, DegenerateProjectionError, ManifoldMismatchError

TWO_PI = 2.0 * np.pi
EXP_TAYLOR_EPS = 1e-12
LOG_TAYLOR_EPS = 1e-8
CUT_LOCUS_EPS = 1e-12
POINT_TOL = 1e-9
TANGENT_TOL = 1e-8


def wrap_angle(delta: np.ndarray) -> np.ndarray:
    """ Representative of ``delta`` in the interval (-π, π]. """
    w = np.mod(delta, TWO_PI)
    return np.where(w > np.pi, w - TWO_PI, w)


def mod_two_pi(angles: np.ndarray) -> np.ndarray:
    """ Reduce angles into [0, 2π). """
    w = np.mod(angles, TWO_PI)
    return np.where(w >= TWO_PI, 0.0, w)


@dataclass(frozen=True)
class WrappedNormalSpec:
    """ Tangent-space Gaussian of scale ``sigma`` pushed through exp at ``center``. """
    center: np.ndarray
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("Wrapped normal sigma must be positive, got %r" % self.sigma)
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float))


LogDensityKind = Union[str, WrappedNormalSpec]


class Manifold(abc.ABC):
    """ A compact p-dimensional Riemannian manifold with closed-form geometry.

    Args:
        dim (int): Intrinsic dimension p (>= 1).
    """
    kind = ''

    def __init__(self, dim: int) -> None:
        if int(dim) != dim or int(dim) < 1:
            raise ValueError("Manifold dimension must be a positive integer, got %r" % dim)
        self.dim = int(dim)

    def __eq__(self, other) -> bool:
        return isinstance(other, Manifold) and (self.kind, self.dim) == (other.kind, other.dim)

    def __hash__(self) -> int:
        return hash((self.kind, self.dim))

    def __repr__(self) -> str:
        return "%s(%d)" % (self.__class__.__name__, self.dim)

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'dim': self.dim}

    @property
    @abc.abstractmethod
    def ambient_dim(self) -> int:
        """ Number of coordinates of a point. """

    @property
    def injectivity_radius(self) -> float:
        return math.pi

    @property
    @abc.abstractmethod
    def diameter(self) -> float:
        """ Largest geodesic distance between two points. """

    @abc.abstractmethod
    def log_volume(self) -> float:
        """ Logarithm of the Riemannian volume. """

    def check_shape(self, *arrays: np.ndarray) -> None:
        for array in arrays:
            if np.shape(array)[-1:] != (self.ambient_dim,):
                raise ManifoldMismatchError("Expected %d coordinates per point on %r, got shape %s"
                                            % (self.ambient_dim, self, np.shape(array)))

    def check_points(self, x) -> np.ndarray:
        """ Validate the point invariants and return ``x`` as a float array. """
        x = np.asarray(x, dtype=float)
        self.check_shape(x)
        if not np.all(np.isfinite(x)):
            raise ManifoldMismatchError("Non-finite coordinates on %r" % self)
        self._check_invariants(x)
        return x

    @abc.abstractmethod
    def _check_invariants(self, x: np.ndarray) -> None:
        pass

    @abc.abstractmethod
    def dist(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """ Geodesic distance. """

    @abc.abstractmethod
    def exp_map(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """ Riemannian exponential map.

        Raises:
            ManifoldMismatchError: on the sphere, if ``v`` has a normal component
                at ``x`` beyond rounding (relative tolerance ``TANGENT_TOL``).
        """

    @abc.abstractmethod
    def log_map(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """ Riemannian logarithm map, inverse of exp_map away from the cut locus. """

    @abc.abstractmethod
    def cut_locus_mask(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """ True where ``y`` lies on the cut locus of ``x`` (within tolerance). """

    @abc.abstractmethod
    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        """ Orthonormal basis of the tangent space, shape (..., D, p). """

    @abc.abstractmethod
    def to_tangent(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """ Orthogonal projection of an ambient vector onto the tangent space at ``x``. """

    @abc.abstractmethod
    def project(self, ambient: np.ndarray) -> np.ndarray:
        """ Projection of ambient coordinates onto the manifold. """

    @abc.abstractmethod
    def sample_uniform(self, rng: np.random.Generator, n: Optional[int] = None) -> np.ndarray:
        """ Draw from the normalised volume measure. """

    @abc.abstractmethod
    def _wrapped_normal_log_density(self, spec: WrappedNormalSpec, y: np.ndarray) -> np.ndarray:
        pass

    def to_coords(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """ Coordinates of the tangent vector ``v`` in ``tangent_basis(x)``. """
        return np.einsum('...dp,...d->...p', self.tangent_basis(x), v)

    def from_coords(self, x: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """ Ambient tangent vector at ``x`` with the given basis coordinates. """
        return np.einsum('...dp,...p->...d', self.tangent_basis(x), coords)

    def perturb(self, x: np.ndarray, scale: float) -> np.ndarray:
        """ Move ``x`` by ``scale`` along the first column of its tangent basis. """
        return self.exp_map(x, scale * self.tangent_basis(x)[..., :, 0])

    def log_map_safe(self, x: np.ndarray, y: np.ndarray, perturb_scale: float = 1e-7, max_tries: int = 3):
        """ Batched ``log_x(y)`` that perturbs base points lying on the cut locus of ``y``.

        Returns:
            tuple: (tangent vectors, base points actually used, perturbation counts, failed mask).
            Failed rows hold zero vectors.
        """
        x = np.array(np.broadcast_to(x, np.broadcast(np.asarray(x), np.asarray(y)).shape), dtype=float)
        y = np.broadcast_to(np.asarray(y, dtype=float), x.shape)
        counts = np.zeros(x.shape[:-1], dtype=int)
        cut = self.cut_locus_mask(x, y)
        tries = 0
        while np.any(cut) and tries < max_tries:
            x[cut] = self.perturb(x[cut], perturb_scale)
            counts[cut] += 1
            cut = self.cut_locus_mask(x, y)
            tries += 1
        safe_y = np.where(cut[..., None], x, y)
        logs = self.log_map(x, safe_y)
        return logs, x, counts, cut

    def distance_gradient(self, y: np.ndarray, points: np.ndarray):
        """ Riemannian gradients ``-log_y(l) / d(y, l)`` of ``y -> d(y, l)`` for every row of ``points``.

        Args:
            y (np.ndarray): Points, shape (n, D).
            points (np.ndarray): Reference points l, shape (M, D).

        Returns:
            tuple: (gradients of shape (n, M, D), singular mask of shape (n, M)). Singular
            entries (coincident or antipodal pairs) carry the zero subgradient.
        """
        delta, norms = self._distance_direction(y[:, None, :], points[None, :, :])
        singular = norms < LOG_TAYLOR_EPS
        grads = -delta / np.where(singular, 1.0, norms)[..., None]
        return np.where(singular[..., None], 0.0, grads), singular

    @abc.abstractmethod
    def _distance_direction(self, y: np.ndarray, points: np.ndarray):
        """ Unnormalised direction from ``y`` towards ``points`` and its norm. """

    def sqdist_half(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """ Transport cost c(x, y) = d(x, y)^2 / 2. """
        return 0.5 * self.dist(x, y) ** 2

    def pairwise_dist(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """ Distance matrix between two batches, shape (len(xs), len(ys)). """
        return self.dist(xs[:, None, :], ys[None, :, :])

    def sample_wrapped_normal(self, spec: WrappedNormalSpec, rng: np.random.Generator,
                              n: Optional[int] = None) -> np.ndarray:
        """ Draw ``v ~ N(0, sigma^2 I_p)`` in the tangent basis of the centre and
        return ``exp_map(center, v)``.
        """
        center = self.check_points(spec.center)
        shape = (self.dim,) if n is None else (n, self.dim)
        coords = spec.sigma * rng.standard_normal(shape)
        base = center if n is None else np.broadcast_to(center, (n, self.ambient_dim))
        return self.exp_map(base, self.from_coords(base, coords))

    def log_density(self, q: LogDensityKind, y: np.ndarray) -> np.ndarray:
        """ Log density with respect to the Riemannian volume of the uniform
        measure (``q == 'uniform'``) or of a wrapped normal.
        """
        y = np.asarray(y, dtype=float)
        self.check_shape(y)
        if isinstance(q, WrappedNormalSpec):
            self.check_points(q.center)
            return self._wrapped_normal_log_density(q, y)
        if q == 'uniform':
            return np.full(y.shape[:-1], -self.log_volume()) if y.ndim > 1 else -self.log_volume()
        raise ValueError("Unknown density %r" % (q,))

    @staticmethod
    def wrap_count(sigma: float) -> int:
        """ Number K of wraps per side so that the truncated tail is negligible. """
        return max(1, int(math.ceil(6.0 * sigma / TWO_PI)) + 1)


class Sphere(Manifold):
    """ Unit hypersphere S^p embedded in R^(p+1). """
    kind = 'sphere'

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1

    @property
    def diameter(self) -> float:
        return math.pi

    def log_volume(self) -> float:
        half = 0.5 * (self.dim + 1)
        return math.log(2.0) + half * math.log(math.pi) - float(gammaln(half))

    def _check_invariants(self, x: np.ndarray) -> None:
        norms = np.linalg.norm(x, axis=-1)
        if np.any(np.abs(norms - 1.0) > POINT_TOL):
            raise ManifoldMismatchError("Sphere points must have unit norm (max deviation %.3g)"
                                        % float(np.max(np.abs(norms - 1.0))))

    def _cos_sin(self, x: np.ndarray, y: np.ndarray):
        cos = np.sum(x * y, axis=-1)
        residual = y - cos[..., None] * x
        sin = np.linalg.norm(residual, axis=-1)
        return cos, sin, residual

    def dist(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        # atan2 of (sin, cos) equals arccos(clip(<x, y>, -1, 1)) without its loss of precision near 0 and pi.
        cos, sin, _ = self._cos_sin(x, y)
        return np.arctan2(sin, cos)

    def to_tangent(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return v - np.sum(x * v, axis=-1, keepdims=True) * x

    def exp_map(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        self.check_shape(x, v)
        normal = np.abs(np.sum(x * v, axis=-1))
        if np.any(normal > TANGENT_TOL * np.maximum(1.0, np.linalg.norm(v, axis=-1))):
            raise ManifoldMismatchError("Sphere tangent vectors must be orthogonal to their base point "
                                        "(max normal component %.3g)" % float(np.max(normal)))
        # Only rounding-level normal components reach this projection.
        v = self.to_tangent(x, v)
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        small = norm < EXP_TAYLOR_EPS
        safe = np.where(small, 1.0, norm)
        out = np.cos(norm) * x + np.sin(norm) * v / safe
        out = np.where(small, x, out)
        return out / np.linalg.norm(out, axis=-1, keepdims=True)

    def cut_locus_mask(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        cos, sin, _ = self._cos_sin(x, y)
        return (sin < CUT_LOCUS_EPS) & (cos < 0)

    def _distance_direction(self, y: np.ndarray, points: np.ndarray):
        # ||l - <y, l> y|| = sin d(y, l), so the quotient is the unit vector of log_y(l).
        _, sin, residual = self._cos_sin(y, points)
        return residual, sin

    def log_map(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self.check_shape(x, y)
        cos, sin, residual = self._cos_sin(x, y)
        cut = (sin < CUT_LOCUS_EPS) & (cos < 0)
        if np.any(cut):
            indices = np.flatnonzero(cut)
            raise CutLocusError("log_map undefined for antipodal points (%d pair(s))" % len(indices), indices)
        theta = np.arctan2(sin, cos)
        small = theta < LOG_TAYLOR_EPS
        scale = np.where(small, 1.0, theta / np.where(small, 1.0, sin))
        return scale[..., None] * residual

    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        # Columns 2..p+1 of the Householder reflection H with H e1 = x.
        x = np.asarray(x, dtype=float)
        self.check_shape(x)
        eye = np.eye(self.ambient_dim)[:, 1:]
        u = -x.copy()
        u[..., 0] += 1.0
        norm2 = np.sum(u * u, axis=-1)[..., None, None]
        identity = norm2 < 1e-24
        basis = eye - 2.0 * u[..., :, None] * u[..., None, 1:] / np.where(identity, 1.0, norm2)
        return np.where(identity, eye, basis)

    def project(self, ambient: np.ndarray) -> np.ndarray:
        ambient = np.asarray(ambient, dtype=float)
        self.check_shape(ambient)
        norm = np.linalg.norm(ambient, axis=-1, keepdims=True)
        if np.any(norm <= 1e-12):
            raise DegenerateProjectionError("Cannot project a vector of norm <= 1e-12 onto %r" % self)
        return ambient / norm

    def sample_uniform(self, rng: np.random.Generator, n: Optional[int] = None) -> np.ndarray:
        shape = (self.ambient_dim,) if n is None else (n, self.ambient_dim)
        g = rng.standard_normal(shape)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def _wrapped_normal_log_density(self, spec: WrappedNormalSpec, y: np.ndarray) -> np.ndarray:
        p = self.dim
        sigma = spec.sigma
        # The antipode of the centre is evaluated by its limit from inside the injectivity ball.
        r = np.minimum(self.dist(spec.center, y), math.pi - LOG_TAYLOR_EPS)
        wraps = self.wrap_count(sigma)
        t = r[..., None] + TWO_PI * np.arange(-wraps, wraps + 1)
        abs_t = np.abs(t)
        with np.errstate(divide='ignore', invalid='ignore'):
            sinc = np.where(abs_t < LOG_TAYLOR_EPS, 1.0, np.abs(np.sin(t)) / np.where(abs_t == 0, 1.0, abs_t))
        sinc = np.maximum(sinc, 1e-300)
        terms = -0.5 * p * math.log(TWO_PI * sigma ** 2) - 0.5 * (t / sigma) ** 2 - (p - 1) * np.log(sinc)
        return logsumexp(terms, axis=-1)


class Torus(Manifold):
    """ Flat torus T^p = (S^1)^p in angle coordinates. """
    kind = 'torus'

    @property
    def ambient_dim(self) -> int:
        return self.dim

    @property
    def diameter(self) -> float:
        return math.pi * math.sqrt(self.dim)

    def log_volume(self) -> float:
        return self.dim * math.log(TWO_PI)

    def _check_invariants(self, x: np.ndarray) -> None:
        if np.any(x < 0) or np.any(x >= TWO_PI):
            raise ManifoldMismatchError("Torus angles must lie in [0, 2pi)")

    def dist(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.linalg.norm(wrap_angle(np.asarray(y) - np.asarray(x)), axis=-1)

    def to_tangent(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float)

    def exp_map(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        self.check_shape(x, v)
        return mod_two_pi(x + v)

    def cut_locus_mask(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        # wrap(pi) resolves to +pi, so the logarithm is always defined.
        return np.zeros(np.broadcast(np.asarray(x)[..., 0], np.asarray(y)[..., 0]).shape, dtype=bool)

    def log_map(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self.check_shape(x, y)
        return wrap_angle(y - x)

    def _distance_direction(self, y: np.ndarray, points: np.ndarray):
        delta = wrap_angle(points - y)
        return delta, np.linalg.norm(delta, axis=-1)

    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self.check_shape(x)
        return np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim)).copy()

    def to_coords(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(v, dtype=float), np.broadcast(np.asarray(x), np.asarray(v)).shape).copy()

    def from_coords(self, x: np.ndarray, coords: np.ndarray) -> np.ndarray:
        return self.to_coords(x, coords)

    def project(self, ambient: np.ndarray) -> np.ndarray:
        ambient = np.asarray(ambient, dtype=float)
        self.check_shape(ambient)
        return mod_two_pi(ambient)

    def sample_uniform(self, rng: np.random.Generator, n: Optional[int] = None) -> np.ndarray:
        shape = (self.dim,) if n is None else (n, self.dim)
        return mod_two_pi(rng.uniform(0.0, TWO_PI, size=shape))

    def _wrapped_normal_log_density(self, spec: WrappedNormalSpec, y: np.ndarray) -> np.ndarray:
        sigma = spec.sigma
        wraps = self.wrap_count(sigma)
        delta = wrap_angle(y - spec.center)[..., None] + TWO_PI * np.arange(-wraps, wraps + 1)
        terms = -0.5 * math.log(TWO_PI * sigma ** 2) - 0.5 * (delta / sigma) ** 2
        return np.sum(logsumexp(terms, axis=-1), axis=-1)


def manifold_from_dict(section: Mapping) -> Manifold:
    """ Build a manifold from ``{'kind': 'sphere' | 'torus', 'dim': p}``. """
    kinds = {'sphere': Sphere, 'torus': Torus}
    kind = str(section.get('kind', 'sphere')).lower()
    if kind not in kinds:
        raise ValueError("Unknown manifold kind %r, expected one of %s" % (kind, sorted(kinds)))
    return kinds[kind](int(section.get('dim', 2)))


def south_pole(manifold: Manifold) -> np.ndarray:
    """ (-1, 0, ..., 0) on the sphere, (pi, ..., pi) on the torus. """
    if isinstance(manifold, Sphere):
        point = np.zeros(manifold.ambient_dim)
        point[0] = -1.0
        return point
    return np.full(manifold.dim, math.pi)


def resolve_center(manifold: Manifold, center: Union[str, Sequence[float], np.ndarray]) -> np.ndarray:
    """ Centre given as the ``'south_pole'`` preset or as explicit coordinates. """
    if isinstance(center, str):
        if center != 'south_pole':
            raise ValueError("Unknown centre preset %r" % center)
        return south_pole(manifold)
    return manifold.check_points(np.asarray(center, dtype=float))
