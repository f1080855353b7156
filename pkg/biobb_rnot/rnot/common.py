""" Common functions for package biobb_rnot.rnot """
import csv
import hashlib
import io
import json
import os
import platform
import time
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union
import numpy as np
import scipy
from biobb_rnot import __version__
from biobb_rnot.core.config import check_keys, closest_key
from biobb_rnot.core.ctransform import PotentialModel
from biobb_rnot.core.embedding import LandmarkSet
from biobb_rnot.core.errors import ConfigError
from biobb_rnot.core.geometry import Manifold, WrappedNormalSpec, manifold_from_dict, resolve_center
from biobb_rnot.core.measures import EmpiricalMeasure, Measure, UniformMeasure, WrappedNormalMeasure
from biobb_rnot.core.network import MlpConfig, MlpParams
from biobb_rnot.core.rcpm import RcpmModel

SCHEMA_VERSION = 1
THREADS_ENV = 'RNOT_THREADS'
RESERVED_PROPERTIES = {'system', 'working_dir_path', 'path', 'step', 'prefix', 'global_log', 'can_write_console_log',
                       'disable_logs', 'remove_tmp', 'restart', 'sandbox_path', 'disable_sandbox', 'chdir_sandbox',
                       'dev', 'check_var_typing', 'global_properties_list', 'tool'}
DEFAULT_MANIFOLD = {'kind': 'sphere', 'dim': 2}
DEFAULT_SOURCE = {'kind': 'uniform'}
DEFAULT_TARGET = {'kind': 'wrapped_normal', 'center': 'south_pole', 'sigma': 0.3}
MEASURE_KEYS = {
    'uniform': ('kind',),
    'wrapped_normal': ('kind', 'center', 'sigma'),
    'empirical': ('kind', 'kde_bandwidth', 'kde_max_centers'),
}

Model = Union[PotentialModel, RcpmModel]


def check_strict_properties(block, properties: Optional[Mapping]) -> None:
    """ Raise ConfigError for properties the block does not declare and for an
    unsupported ``schema_version``. Declared properties are listed in the block's
    ``PROPERTIES`` class attribute; instance attributes such as ``io_dict`` are not
    properties. """
    properties = properties or {}
    known = set(block.PROPERTIES) | RESERVED_PROPERTIES
    for key in properties:
        if key not in known:
            suggestion = closest_key(key, known)
            hint = " Did you mean %r?" % suggestion if suggestion else ""
            raise ConfigError("Unknown property %r for %s.%s" % (key, block.__class__.__name__, hint))
    version = properties.get('schema_version', SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("Unsupported schema_version %r, this release reads version %d" % (version, SCHEMA_VERSION))


def check_input_path(path: Optional[str], argument: str, required: bool = True) -> None:
    if path is None:
        if required:
            raise FileNotFoundError("Missing required input %s" % argument)
        return
    if not Path(path).is_file():
        raise FileNotFoundError("Input %s not found: %s" % (argument, path))


def child_seeds(seed: int, count: int) -> List[int]:
    """ ``count`` independent integer seeds derived from a root seed. """
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(int(seed)).spawn(count)]


def resolve_threads(threads: Optional[int]) -> int:
    """ Thread count from the property, then the RNOT_THREADS variable, then 1. """
    if threads is None:
        threads = os.environ.get(THREADS_ENV, 1)
    try:
        threads = int(threads)
    except (TypeError, ValueError) as err:
        raise ConfigError("Invalid thread count %r" % threads) from err
    if threads < 1:
        raise ConfigError("Thread count must be >= 1, got %d" % threads)
    return threads


def manifold_section(section: Optional[Mapping]) -> Manifold:
    section = dict(DEFAULT_MANIFOLD, **(section or {}))
    check_keys(section, ('kind', 'dim'), 'manifold')
    try:
        return manifold_from_dict(section)
    except (TypeError, ValueError) as err:
        raise ConfigError("Invalid section 'manifold': %s" % err) from err


def check_measure_section(section: Mapping, name: str) -> dict:
    section = dict(section)
    kind = section.get('kind')
    if kind not in MEASURE_KEYS:
        raise ConfigError("Section %r has kind %r, expected one of %s" % (name, kind, sorted(MEASURE_KEYS)))
    check_keys(section, MEASURE_KEYS[kind], name)
    return section


def measure_from_dict(manifold: Manifold, section: Mapping, points_path: Optional[str] = None,
                      name: str = 'measure') -> Measure:
    """ Build the measure described by ``section``; empirical measures read ``points_path``. """
    section = check_measure_section(section, name)
    kind = section['kind']
    points = None
    if kind == 'empirical':
        if points_path is None:
            raise ConfigError("Section %r is empirical but no point file was given" % name)
        points, _ = read_points(points_path)
    try:
        if kind == 'uniform':
            return UniformMeasure(manifold)
        if kind == 'wrapped_normal':
            center = resolve_center(manifold, section.get('center', 'south_pole'))
            return WrappedNormalMeasure(manifold, WrappedNormalSpec(center, float(section.get('sigma', 0.3))))
        return EmpiricalMeasure(manifold, points, path=str(points_path),
                                kde_bandwidth=section.get('kde_bandwidth'),
                                kde_max_centers=int(section.get('kde_max_centers', 2048)))
    except (TypeError, ValueError) as err:
        raise ConfigError("Invalid section %r: %s" % (name, err)) from err


def atomic_write(path: Union[str, Path], text: str) -> str:
    """ Write ``text`` to ``<path>.partial`` and rename it to ``path`` once complete. """
    path = Path(path)
    partial = path.with_name(path.name + '.partial')
    with open(partial, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(text)
    os.replace(partial, path)
    return str(path)


def format_points(points: np.ndarray, header: Optional[Mapping] = None) -> str:
    lines = ['# ' + json.dumps(dict(header), sort_keys=True)] if header else []
    lines.extend(','.join('%.17g' % value for value in row) for row in np.array(points, dtype=float, ndmin=2))
    return '\n'.join(lines) + '\n'


def parse_points(text: str, source: str = '<string>') -> Tuple[np.ndarray, Optional[dict]]:
    """ Parse a point CSV. Returns (points (n, D), header or None).

    Raises:
        ValueError: Naming the first malformed line.
    """
    header = None
    rows = []
    width = None
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith('#'):
            if rows or header is not None:
                raise ValueError("%s line %d: header must be the first line" % (source, number))
            try:
                header = json.loads(line[1:])
            except json.JSONDecodeError as err:
                raise ValueError("%s line %d: malformed header: %s" % (source, number, err)) from err
            continue
        try:
            row = [float(value) for value in line.split(',')]
        except ValueError as err:
            raise ValueError("%s line %d: %s" % (source, number, err)) from err
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ValueError("%s line %d: expected %d values, found %d" % (source, number, width, len(row)))
        if not all(np.isfinite(row)):
            raise ValueError("%s line %d: non-finite coordinate" % (source, number))
        rows.append(row)
    if not rows:
        raise ValueError("%s contains no points" % source)
    return np.asarray(rows, dtype=float), header


def read_points(path: Union[str, Path]) -> Tuple[np.ndarray, Optional[dict]]:
    with open(path, encoding='utf-8') as handle:
        return parse_points(handle.read(), str(path))


def write_points(path: Union[str, Path], points: np.ndarray, header: Optional[Mapping] = None) -> str:
    return atomic_write(path, format_points(points, header))


def write_landmarks(path: Union[str, Path], landmarks: LandmarkSet) -> str:
    return write_points(path, landmarks.landmarks, landmarks.header())


def read_landmarks(path: Union[str, Path], manifold: Optional[Manifold] = None) -> LandmarkSet:
    """ Landmark CSV with its header; the header manifold must match ``manifold`` when given. """
    points, header = read_points(path)
    header = header or {}
    found = manifold_from_dict({'kind': header.get('manifold', manifold.kind if manifold else 'sphere'),
                                'dim': header.get('dim', manifold.dim if manifold else points.shape[1] - 1)})
    if manifold is not None and found != manifold:
        raise ConfigError("Landmarks in %s live on %r, expected %r" % (path, found, manifold))
    return LandmarkSet(found, points, header.get('selection', 'fps'), int(header.get('seed', 0)))


def format_table(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow(['%.17g' % value if isinstance(value, (float, np.floating)) else value for value in row])
    return buffer.getvalue()


def write_table(path: Union[str, Path], columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    return atomic_write(path, format_table(columns, rows))


def read_table(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, encoding='utf-8', newline='') as handle:
        return list(csv.DictReader(handle))


def write_json(path: Union[str, Path], data: Any) -> str:
    return atomic_write(path, json.dumps(data, indent=2, sort_keys=True, default=str) + '\n')


def read_json(path: Union[str, Path]) -> Any:
    with open(path, encoding='utf-8') as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as err:
            raise ValueError("%s is not valid JSON: %s" % (path, err)) from err


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def default_landmarks_path(checkpoint_path: str) -> str:
    path = Path(checkpoint_path)
    return str(path.with_name(path.stem + '_landmarks.csv'))


def save_checkpoint(path: Union[str, Path], model: Model, landmarks_path: Optional[str] = None) -> str:
    """ Write a checkpoint. RNOT checkpoints reference their landmark CSV, written
    first, by base name and SHA-256; the CSV must stay beside the checkpoint. """
    if isinstance(model, RcpmModel):
        data = {'schema_version': SCHEMA_VERSION, 'kind': 'rcpm', 'manifold': model.manifold.to_dict(),
                'gamma': model.gamma, 'alphas': model.alphas.tolist(), 'sites': format_points(model.sites)}
        return write_json(path, data)
    landmarks_path = landmarks_path or default_landmarks_path(str(path))
    if Path(landmarks_path).resolve().parent != Path(path).resolve().parent:
        raise ValueError("The landmark file %s must sit in the checkpoint directory" % landmarks_path)
    write_landmarks(landmarks_path, model.landmarks)
    data = {'schema_version': SCHEMA_VERSION, 'kind': 'rnot', 'manifold': model.manifold.to_dict(),
            'network': model.params.config.to_dict(), 'flat_params': model.params.flatten().tolist(),
            'landmarks_file': Path(landmarks_path).name, 'landmarks_sha256': file_sha256(landmarks_path)}
    return write_json(path, data)


def load_checkpoint(path: Union[str, Path]) -> Model:
    """ Read an RNOT or RCPM checkpoint.

    Raises:
        ConfigError: Unknown kind or schema version.
        ValueError: Landmark file missing or not matching its recorded hash.
    """
    data = read_json(path)
    if data.get('schema_version') != SCHEMA_VERSION:
        raise ConfigError("Checkpoint %s has schema_version %r, expected %d"
                          % (path, data.get('schema_version'), SCHEMA_VERSION))
    manifold = manifold_from_dict(data['manifold'])
    if data.get('kind') == 'rcpm':
        sites, _ = parse_points(data['sites'], "%s sites" % path)
        return RcpmModel(manifold, sites, np.asarray(data['alphas'], dtype=float), float(data.get('gamma', 0.0)))
    if data.get('kind') != 'rnot':
        raise ConfigError("Checkpoint %s has unknown kind %r" % (path, data.get('kind')))
    landmarks_path = Path(path).with_name(data['landmarks_file'])
    if not landmarks_path.is_file():
        raise FileNotFoundError("Landmark file %s of checkpoint %s not found" % (landmarks_path, path))
    if file_sha256(landmarks_path) != data['landmarks_sha256']:
        raise ValueError("Landmark file %s does not match the hash recorded in %s" % (landmarks_path, path))
    landmarks = read_landmarks(landmarks_path, manifold)
    params = MlpParams.unflatten(MlpConfig.from_dict(data['network']), np.asarray(data['flat_params'], dtype=float))
    return PotentialModel(manifold, landmarks, params)


def config_snapshot(properties: Optional[Mapping]) -> dict:
    return {key: value for key, value in (properties or {}).items() if key not in RESERVED_PROPERTIES}


def write_manifest(path: Union[str, Path], block: str, properties: Optional[Mapping], seed: Optional[int],
                   inputs: Mapping[str, Optional[str]], outputs: Mapping[str, Optional[str]],
                   timings: Mapping[str, float]) -> str:
    """ Experiment manifest: configuration, seed, versions, file hashes and timings.

    The ``properties`` entry holds the configuration snapshot, so the manifest can be
    passed back as ``--config`` to rerun the block.
    """
    def files(mapping):
        return {key: {'path': str(value), 'sha256': file_sha256(value)}
                for key, value in mapping.items() if value and Path(value).is_file()}

    data = {'schema_version': SCHEMA_VERSION, 'block': block, 'biobb_rnot': __version__,
            'numpy': np.__version__, 'scipy': scipy.__version__, 'python': platform.python_version(),
            'seed': seed, 'properties': config_snapshot(properties), 'inputs': files(inputs),
            'outputs': files(outputs), 'timings': dict(timings),
            'created': time.strftime('%Y-%m-%dT%H:%M:%S%z')}
    return write_json(path, data)
