""" Fully connected scalar network f_theta: R^M -> R with hand-written reverse passes
in the parameters and in the input features, and the chain rule through the
landmark embedding that gives the Riemannian gradient of psi = f_theta o phi. """
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Tuple
import numpy as np
from scipy.special import expit
from biobb_rnot.core.embedding import featurize

ACTIVATIONS = ('relu', 'leaky_relu', 'softplus')


@dataclass(frozen=True)
class MlpConfig:
    """ Architecture of the prepotential network.

    Args:
        input_dim (int): Number M of input features (landmarks).
        hidden (tuple): ((128, 128)) Hidden layer widths, possibly empty.
        activation (str): ('leaky_relu') One of relu, leaky_relu, softplus.
        slope (float): (0.01) Negative slope of leaky_relu.
        beta (float): (1.0) Sharpness of softplus.
        init_seed (int): (0) Seed of the Glorot initialisation.
    """
    input_dim: int
    hidden: Tuple[int, ...] = (128, 128)
    activation: str = 'leaky_relu'
    slope: float = 0.01
    beta: float = 1.0
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'hidden', tuple(int(w) for w in self.hidden))
        if int(self.input_dim) < 1:
            raise ValueError("Network input_dim must be >= 1, got %r" % self.input_dim)
        if any(w < 1 for w in self.hidden):
            raise ValueError("Hidden widths must be >= 1, got %s" % (self.hidden,))
        if self.activation not in ACTIVATIONS:
            raise ValueError("Unknown activation %r, expected one of %s" % (self.activation, ACTIVATIONS))
        if self.activation == 'softplus' and not self.beta > 0:
            raise ValueError("softplus beta must be positive")

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (int(self.input_dim),) + self.hidden + (1,)

    @property
    def n_params(self) -> int:
        sizes = self.sizes
        return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))

    def to_dict(self) -> dict:
        return {'input_dim': int(self.input_dim), 'hidden': list(self.hidden), 'activation': self.activation,
                'slope': self.slope, 'beta': self.beta, 'init_seed': self.init_seed}

    @classmethod
    def from_dict(cls, section: Mapping) -> 'MlpConfig':
        return cls(input_dim=int(section['input_dim']), hidden=tuple(section.get('hidden', (128, 128))),
                   activation=section.get('activation', 'leaky_relu'), slope=float(section.get('slope', 0.01)),
                   beta=float(section.get('beta', 1.0)), init_seed=int(section.get('init_seed', 0)))


@dataclass(frozen=True)
class MlpParams:
    """ Layer weights of shape (fan_in, fan_out) and biases of shape (fan_out,). """
    config: MlpConfig
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    def __post_init__(self):
        sizes = self.config.sizes
        shapes = [w.shape for w in self.weights]
        if shapes != list(zip(sizes[:-1], sizes[1:])) or [b.shape for b in self.biases] != [(s,) for s in sizes[1:]]:
            raise ValueError("Parameter shapes %s do not match the network sizes %s" % (shapes, sizes))

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    @classmethod
    def unflatten(cls, config: MlpConfig, flat: np.ndarray) -> 'MlpParams':
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (config.n_params,):
            raise ValueError("Expected %d flat parameters, got shape %s" % (config.n_params, flat.shape))
        weights, biases, offset = [], [], 0
        sizes = config.sizes
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(flat[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out).copy())
            offset += fan_in * fan_out
            biases.append(flat[offset:offset + fan_out].copy())
            offset += fan_out
        return cls(config, tuple(weights), tuple(biases))

    def to_dict(self) -> dict:
        return {'config': self.config.to_dict(), 'flat_params': self.flatten().tolist()}

    @classmethod
    def from_dict(cls, data: Mapping) -> 'MlpParams':
        return cls.unflatten(MlpConfig.from_dict(data['config']), np.asarray(data['flat_params'], dtype=float))


class MlpGradient(MlpParams):
    """ Gradient with the layout of :class:`MlpParams`. """


def init(config: MlpConfig) -> MlpParams:
    """ Glorot-uniform weights, zero biases. """
    rng = np.random.default_rng(config.init_seed)
    sizes = config.sizes
    weights = tuple(rng.uniform(-math.sqrt(6.0 / (a + b)), math.sqrt(6.0 / (a + b)), size=(a, b))
                    for a, b in zip(sizes[:-1], sizes[1:]))
    return MlpParams(config, weights, tuple(np.zeros(b) for b in sizes[1:]))


def zeros(config: MlpConfig, cls=MlpParams) -> MlpParams:
    sizes = config.sizes
    return cls(config, tuple(np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])),
               tuple(np.zeros(b) for b in sizes[1:]))


def _activate(config: MlpConfig, z: np.ndarray) -> np.ndarray:
    if config.activation == 'relu':
        return np.maximum(z, 0.0)
    if config.activation == 'leaky_relu':
        return np.where(z > 0, z, config.slope * z)
    return np.logaddexp(0.0, config.beta * z) / config.beta


def _activate_derivative(config: MlpConfig, z: np.ndarray) -> np.ndarray:
    # Subgradient 0 (relu) or slope (leaky_relu) at an exact kink.
    if config.activation == 'relu':
        return np.where(z > 0, 1.0, 0.0)
    if config.activation == 'leaky_relu':
        return np.where(z > 0, 1.0, config.slope)
    return expit(config.beta * z)


def _as_batch(params: MlpParams, features: np.ndarray):
    features = np.asarray(features, dtype=float)
    single = features.ndim == 1
    batch = features[None, :] if single else features
    if batch.ndim != 2 or batch.shape[1] != params.config.input_dim:
        raise ValueError("Expected %d input features, got shape %s" % (params.config.input_dim, features.shape))
    return batch, single


def _forward_cache(params: MlpParams, batch: np.ndarray):
    activations, pre_activations = [batch], []
    a = batch
    last = len(params.weights) - 1
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        if layer < last:
            pre_activations.append(z)
            a = _activate(params.config, z)
            activations.append(a)
        else:
            a = z[:, 0]
    return a, activations, pre_activations


def _backward(params: MlpParams, activations, pre_activations, delta: np.ndarray, with_params: bool):
    """ Propagate output sensitivities ``delta`` (n, 1) to the parameters and to the inputs. """
    grad_w, grad_b = [], []
    for layer in range(len(params.weights) - 1, -1, -1):
        if with_params:
            grad_w.append(activations[layer].T @ delta)
            grad_b.append(delta.sum(axis=0))
        delta = delta @ params.weights[layer].T
        if layer > 0:
            delta = delta * _activate_derivative(params.config, pre_activations[layer - 1])
    return grad_w[::-1], grad_b[::-1], delta


def forward(params: MlpParams, features: np.ndarray):
    """ Network output for one feature vector (float) or a batch (n,). """
    batch, single = _as_batch(params, features)
    out = _forward_cache(params, batch)[0]
    return float(out[0]) if single else out


def grad_params(params: MlpParams, features: np.ndarray, weights: Optional[np.ndarray] = None):
    """ Output values and the parameter gradient of ``sum_i weights_i f(features_i)``.

    For a single feature vector this is the plain gradient of f. The sum over the
    batch is reduced in batch-index order.

    Returns:
        tuple: (values, MlpGradient)
    """
    batch, single = _as_batch(params, features)
    values, activations, pre_activations = _forward_cache(params, batch)
    w = np.ones(len(batch)) if weights is None else np.asarray(weights, dtype=float).reshape(len(batch))
    grad_w, grad_b, _ = _backward(params, activations, pre_activations, w[:, None], with_params=True)
    gradient = MlpGradient(params.config, tuple(grad_w), tuple(g.astype(float) for g in grad_b))
    return (float(values[0]) if single else values), gradient


def grad_input(params: MlpParams, features: np.ndarray):
    """ Output values and per-sample gradients with respect to the input features. """
    batch, single = _as_batch(params, features)
    values, activations, pre_activations = _forward_cache(params, batch)
    _, _, grads = _backward(params, activations, pre_activations, np.ones((len(batch), 1)), with_params=False)
    if single:
        return float(values[0]), grads[0]
    return values, grads


def psi_and_grad(model, y: np.ndarray, perturb_scale: float = 1e-7):
    """ Values psi(y) = f(phi(y)) and Riemannian gradients
    grad psi(y) = sum_j (df/dphi_j) grad_y d(y, l_j).

    ``model`` needs ``manifold``, ``landmarks`` (a LandmarkSet) and ``params``.
    A landmark coinciding with ``y`` contributes the zero subgradient. A landmark
    antipodal to ``y`` with a nonzero feature derivative makes the distance
    non-differentiable; the gradient of that row is taken at ``y`` moved by
    ``perturb_scale`` along its first tangent basis vector and the row is flagged.

    Returns:
        tuple: (values (n,), gradients (n, D), flagged mask (n,)).
    """
    manifold = model.manifold
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y = y[None, :] if single else y
    values, grads, flagged = _psi_and_grad_batch(model, y)
    if np.any(flagged):
        _, moved_grads, _ = _psi_and_grad_batch(model, manifold.perturb(y[flagged], perturb_scale))
        grads[flagged] = manifold.to_tangent(y[flagged], moved_grads)
    if single:
        return float(values[0]), grads[0], bool(flagged[0])
    return values, grads, flagged


def _psi_and_grad_batch(model, y: np.ndarray):
    landmarks = model.landmarks.landmarks
    features = featurize(model.landmarks, y)
    values, feature_grads = grad_input(model.params, features)
    distance_grads, singular = model.manifold.distance_gradient(y, landmarks)
    grads = np.einsum('nm,nmd->nd', feature_grads, distance_grads)
    flagged = np.any(singular & (features > 0.5 * math.pi) & (feature_grads != 0), axis=-1)
    return values, grads, flagged


def riemannian_grad_psi(model, y: np.ndarray) -> np.ndarray:
    """ Riemannian gradient of psi at ``y`` (tangent vector(s) at ``y``). """
    return psi_and_grad(model, y)[1]

