""" Distance-to-landmarks feature maps phi(x) = (d(x, l_j))_j with random (RND) or
farthest-point (FPS) landmark selection, and the diagnostics used to pick the
number of landmarks M. """
import warnings
from dataclasses import dataclass
from typing import List, Mapping, NamedTuple, Optional, Sequence, Tuple
import numpy as np
from biobb_rnot.core.config import dataclass_from_dict
from biobb_rnot.core.errors import ManifoldMismatchError
from biobb_rnot.core.geometry import Manifold

SELECTIONS = ('rnd', 'fps')
FPS_POOL_FACTOR = 16
DEFAULT_EPSILON = 1e-3
DEFAULT_N_PAIRS = 20000


@dataclass(frozen=True)
class LandmarkSet:
    """ Ordered, immutable set of M landmarks on a manifold. """
    manifold: Manifold
    landmarks: np.ndarray
    selection: str = 'fps'
    seed: int = 0

    def __post_init__(self):
        landmarks = self.manifold.check_points(np.array(self.landmarks, dtype=float, ndmin=2))
        if len(landmarks) < 1:
            raise ValueError("A landmark set needs at least one landmark")
        if self.selection not in SELECTIONS:
            raise ValueError("Unknown landmark selection %r, expected one of %s" % (self.selection, SELECTIONS))
        landmarks.setflags(write=False)
        object.__setattr__(self, 'landmarks', landmarks)

    @property
    def M(self) -> int:
        return len(self.landmarks)

    def prefix(self, count: int) -> 'LandmarkSet':
        """ The first ``count`` landmarks (a valid FPS set of that size for FPS runs). """
        return LandmarkSet(self.manifold, self.landmarks[:count], self.selection, self.seed)

    def header(self) -> dict:
        return {'manifold': self.manifold.kind, 'dim': self.manifold.dim, 'M': self.M,
                'selection': self.selection, 'seed': self.seed}

    def featurize(self, x: np.ndarray) -> np.ndarray:
        return featurize(self, x)


@dataclass(frozen=True)
class EmbeddingDiagnostics:
    """ Non-collapse statistics of the embedded validation set. """
    min_separation: float
    near_collision_fraction: float
    coverage_radius: float
    epsilon: float
    n_pairs: int


@dataclass(frozen=True)
class LandmarkConfig:
    """ Landmark selection settings.

    Args:
        M (int): (128) Number of landmarks.
        selection (str): ('fps') rnd or fps.
        candidates (int): (None) FPS candidate pool size; None uses 16 M uniform samples.
        seed (int): (0) Seed of the selection.
    """
    M: int = 128
    selection: str = 'fps'
    candidates: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if int(self.M) < 1:
            raise ValueError("The number of landmarks must be >= 1, got %r" % self.M)
        if self.selection not in SELECTIONS:
            raise ValueError("Unknown landmark selection %r, expected one of %s" % (self.selection, SELECTIONS))

    @classmethod
    def from_dict(cls, section: Optional[Mapping]) -> 'LandmarkConfig':
        return dataclass_from_dict(cls, section, 'landmarks')

    def select(self, manifold: Manifold) -> LandmarkSet:
        rng = np.random.default_rng(self.seed)
        candidates = None
        if self.selection == 'fps' and self.candidates is not None:
            candidates = manifold.sample_uniform(rng, int(self.candidates))
        return select_landmarks(manifold, int(self.M), self.selection, rng, candidates, self.seed)


class MChoice(NamedTuple):
    M: int
    injective: bool
    diagnostics: List[EmbeddingDiagnostics]


def select_landmarks_rnd(manifold: Manifold, M: int, rng: np.random.Generator, seed: int = 0) -> LandmarkSet:
    """ M i.i.d. uniform landmarks. """
    if M < 1:
        raise ValueError("The number of landmarks must be >= 1, got %d" % M)
    return LandmarkSet(manifold, manifold.sample_uniform(rng, M), 'rnd', seed)


def farthest_point_order(manifold: Manifold, candidates: np.ndarray, count: int, start: int) -> np.ndarray:
    """ Indices of a greedy farthest-first traversal of ``candidates`` started at ``start``.

    Ties go to the lowest candidate index (``np.argmax`` returns the first maximum).
    """
    selected = [int(start)]
    min_dist = manifold.dist(candidates, candidates[start])
    for _ in range(count - 1):
        farthest = int(np.argmax(min_dist))
        selected.append(farthest)
        min_dist = np.minimum(min_dist, manifold.dist(candidates, candidates[farthest]))
    return np.asarray(selected, dtype=int)


def select_landmarks_fps(manifold: Manifold, M: int, candidates: Optional[np.ndarray],
                         rng: np.random.Generator, seed: int = 0) -> LandmarkSet:
    """ Greedy k-centre selection over a candidate pool, seeded by one uniformly
    chosen candidate. Without candidates the pool is 16 M uniform samples. """
    if M < 1:
        raise ValueError("The number of landmarks must be >= 1, got %d" % M)
    if candidates is None:
        candidates = manifold.sample_uniform(rng, FPS_POOL_FACTOR * M)
    candidates = manifold.check_points(np.array(candidates, dtype=float, ndmin=2))
    if len(candidates) < M:
        raise ValueError("FPS needs at least M=%d candidates, got %d" % (M, len(candidates)))
    start = int(rng.integers(len(candidates)))
    order = farthest_point_order(manifold, candidates, M, start)
    return LandmarkSet(manifold, candidates[order], 'fps', seed)


def select_landmarks(manifold: Manifold, M: int, selection: str, rng: np.random.Generator,
                     candidates: Optional[np.ndarray] = None, seed: int = 0) -> LandmarkSet:
    if selection == 'rnd':
        return select_landmarks_rnd(manifold, M, rng, seed)
    if selection == 'fps':
        return select_landmarks_fps(manifold, M, candidates, rng, seed)
    raise ValueError("Unknown landmark selection %r, expected one of %s" % (selection, SELECTIONS))


def featurize(landmarks: LandmarkSet, x: np.ndarray) -> np.ndarray:
    """ Feature vector(s) (d(x, l_1), ..., d(x, l_M)); shape (..., M). """
    x = np.asarray(x, dtype=float)
    try:
        landmarks.manifold.check_shape(x)
    except ManifoldMismatchError:
        raise ManifoldMismatchError("Point shape %s does not match landmark manifold %r"
                                    % (x.shape, landmarks.manifold))
    return landmarks.manifold.dist(x[..., None, :], landmarks.landmarks)


def coverage_radius(landmarks: LandmarkSet, points: np.ndarray) -> float:
    """ max_x min_j d(x, l_j) over ``points``. """
    return float(np.max(np.min(featurize(landmarks, points), axis=-1)))


def sample_pairs(n: int, n_pairs: int, rng: np.random.Generator):
    """ Distinct index pairs (i < j) drawn without replacement, or all pairs when
    ``n_pairs`` reaches C(n, 2). """
    total = n * (n - 1) // 2
    if n_pairs >= total:
        return np.triu_indices(n, 1)
    k = np.sort(rng.choice(total, size=n_pairs, replace=False))
    # Inverse of the row-major enumeration of the strict upper triangle.
    i = n - 2 - np.floor(np.sqrt(-8.0 * k + 4.0 * n * (n - 1) - 7.0) / 2.0 - 0.5).astype(int)
    j = k + i + 1 - total + (n - i) * (n - i - 1) // 2
    return i, j


def diagnose(landmarks: LandmarkSet, validation: np.ndarray, epsilon: float = DEFAULT_EPSILON,
             n_pairs: int = DEFAULT_N_PAIRS, rng: Optional[np.random.Generator] = None) -> EmbeddingDiagnostics:
    """ Minimum embedded separation s_M, near-collision fraction rho_M(epsilon) and
    coverage radius R_M of a landmark set on a validation sample. """
    validation = np.array(validation, dtype=float, ndmin=2)
    if len(validation) < 2:
        raise ValueError("Embedding diagnostics need at least two validation points")
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    features = featurize(landmarks, validation)
    i, j = sample_pairs(len(validation), n_pairs, rng)
    embedded = np.linalg.norm(features[i] - features[j], axis=-1)
    return EmbeddingDiagnostics(min_separation=float(np.min(embedded)),
                                near_collision_fraction=float(np.mean(embedded < epsilon)),
                                coverage_radius=float(np.max(np.min(features, axis=-1))),
                                epsilon=epsilon, n_pairs=int(len(embedded)))


def diagnose_schedule(manifold: Manifold, schedule: Sequence[int], rng: np.random.Generator,
                      selection: str = 'fps', epsilon: float = DEFAULT_EPSILON, n_validation: int = 1024,
                      n_pairs: int = DEFAULT_N_PAIRS,
                      validation: Optional[np.ndarray] = None) -> Tuple[LandmarkSet, List[EmbeddingDiagnostics]]:
    """ Diagnostics of every M of an increasing schedule.

    Landmark sets are nested prefixes of a single run at the largest M, and every M
    is checked on the same validation points and pair sample.

    Returns:
        tuple: (landmark set at the largest M, one EmbeddingDiagnostics per M)
    """
    schedule = [int(m) for m in schedule]
    if not schedule or schedule[0] < 1 or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("The M schedule must be a nonempty increasing sequence of positive counts")
    landmark_rng, validation_rng, pair_rng = [np.random.default_rng(s) for s in rng.integers(2 ** 63, size=3)]
    full = select_landmarks(manifold, schedule[-1], selection, landmark_rng)
    if validation is None:
        validation = manifold.sample_uniform(validation_rng, n_validation)
    pair_state = pair_rng.bit_generator.state
    reports = []
    for m in schedule:
        pair_rng.bit_generator.state = pair_state
        reports.append(diagnose(full.prefix(m), validation, epsilon, n_pairs, pair_rng))
    return full, reports


def choose_M(manifold: Manifold, schedule: Sequence[int], tolerance: float, rng: np.random.Generator,
             selection: str = 'fps', epsilon: float = DEFAULT_EPSILON, n_validation: int = 1024,
             n_pairs: int = DEFAULT_N_PAIRS, validation: Optional[np.ndarray] = None) -> MChoice:
    """ Smallest M of an increasing schedule whose landmark set is empirically
    non-collapsing (s_M > tolerance and rho_M(epsilon) = 0) on held-out samples.

    A tolerance of 0 is a vacuous threshold and selects the first schedule entry.
    If no M qualifies the largest one is returned with ``injective=False``.
    """
    _, reports = diagnose_schedule(manifold, schedule, rng, selection, epsilon, n_validation, n_pairs, validation)
    if tolerance <= 0:
        return MChoice(int(schedule[0]), True, reports)
    for m, report in zip(schedule, reports):
        if report.min_separation > tolerance and report.near_collision_fraction == 0:
            return MChoice(int(m), True, reports)
    warnings.warn("No M in %s gives a non-collapsing embedding; using M=%d" % (list(schedule), schedule[-1]))
    return MChoice(int(schedule[-1]), False, reports)
