""" First-order optimizers: Adam on flat parameter vectors and per-point
Riemannian descent (GD, heavy ball, Adam) on batches of manifold points. """
from typing import Optional
import numpy as np
from biobb_rnot.core.geometry import Manifold

OPTIMIZERS = ('gd', 'momentum', 'adam')


class Adam:
    """ Adam on a flat parameter vector.

    Args:
        size (int): Number of parameters.
        learning_rate (float): Step size.
        beta1 (float): (0.9) First moment decay.
        beta2 (float): (0.999) Second moment decay.
        eps (float): (1e-8) Denominator offset.
    """

    def __init__(self, size: int, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8) -> None:
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """ Return the parameters after one descent step along ``grad``. """
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


class RiemannianDescent:
    """ Independent descent on each row of a batch of manifold points.

    Moments are stored in the coordinates of ``manifold.tangent_basis`` at the
    current point. After every exp retraction they are re-expressed in the new
    basis by projection, ``m' = E_new^T E_old m``; second moments use the squared
    projection so they stay nonnegative.

    Args:
        manifold (Manifold): Manifold of the points.
        n_points (int): Batch size.
        method (str): ('adam') One of gd, momentum, adam.
        learning_rate (float): Step size.
        momentum (float): (0.9) Heavy-ball coefficient.
        beta1 (float): (0.9) Adam first moment decay.
        beta2 (float): (0.999) Adam second moment decay.
        eps (float): (1e-8) Adam denominator offset.
    """

    def __init__(self, manifold: Manifold, n_points: int, method: str = 'adam', learning_rate: float = 5e-2,
                 momentum: float = 0.9, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        if method not in OPTIMIZERS:
            raise ValueError("Unknown optimizer %r, expected one of %s" % (method, OPTIMIZERS))
        self.manifold = manifold
        self.method = method
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros((n_points, manifold.dim))
        self.v = np.zeros((n_points, manifold.dim))
        self.t = np.zeros(n_points, dtype=int)

    def step(self, points: np.ndarray, grad: np.ndarray, rows: Optional[np.ndarray] = None) -> np.ndarray:
        """ Move ``points`` (the rows ``rows`` of the batch) against the tangent
        gradient ``grad`` and return the retracted points. """
        if rows is None:
            rows = np.arange(len(points))
        manifold = self.manifold
        old_basis = manifold.tangent_basis(points)
        g = np.einsum('ndp,nd->np', old_basis, grad)
        self.t[rows] += 1
        if self.method == 'gd':
            direction = g
        elif self.method == 'momentum':
            self.m[rows] = self.momentum * self.m[rows] + g
            direction = self.m[rows]
        else:
            self.m[rows] = self.beta1 * self.m[rows] + (1.0 - self.beta1) * g
            self.v[rows] = self.beta2 * self.v[rows] + (1.0 - self.beta2) * g * g
            t = self.t[rows][:, None]
            m_hat = self.m[rows] / (1.0 - self.beta1 ** t)
            v_hat = self.v[rows] / (1.0 - self.beta2 ** t)
            direction = m_hat / (np.sqrt(v_hat) + self.eps)
        step = np.einsum('ndp,np->nd', old_basis, -self.learning_rate * direction)
        new_points = manifold.exp_map(points, step)
        if self.method != 'gd':
            rotation = np.einsum('ndq,ndp->nqp', manifold.tangent_basis(new_points), old_basis)
            self.m[rows] = np.einsum('nqp,np->nq', rotation, self.m[rows])
            if self.method == 'adam':
                self.v[rows] = np.einsum('nqp,np->nq', rotation ** 2, self.v[rows])
        return new_points
