import json
import numpy as np
import pytest
from biobb_rnot.core.ctransform import build_potential_model
from biobb_rnot.core.embedding import select_landmarks
from biobb_rnot.core.errors import ConfigError
from biobb_rnot.core.geometry import Sphere, Torus
from biobb_rnot.core.measures import EmpiricalMeasure, WrappedNormalMeasure
from biobb_rnot.core.rcpm import RcpmModel
from biobb_rnot.rnot.common import (check_strict_properties, child_seeds, config_snapshot, load_checkpoint,
                                    measure_from_dict, parse_points, read_points, read_table, resolve_threads,
                                    save_checkpoint, write_manifest, write_points, write_table)
from biobb_rnot.rnot.evaluate import Evaluate
from biobb_rnot.rnot.train import Train
from biobb_rnot.rnot.transport import Transport
from biobb_rnot.rnot_extra.diagnose_embedding import DiagnoseEmbedding
from biobb_rnot.rnot_extra.quantize import Quantize
from biobb_rnot.rnot_extra.sweep import Sweep

BLOCKS = (Train, Evaluate, Transport, DiagnoseEmbedding, Quantize, Sweep)


class TestCommon():
    def test_parse_points(self):
        points, header = parse_points('# {"M": 2}\n0,0,1\n\n1,0,0\n')
        assert header == {'M': 2}
        np.testing.assert_array_equal(points, [[0, 0, 1], [1, 0, 0]])

    @pytest.mark.parametrize('text, line', [
        ('0,0,1\n0,0\n', 2),
        ('0,0,1\n1,x,0\n', 2),
        ('0,0,1\nnan,0,0\n', 2),
        ('0,0,1\n# {"M": 2}\n', 2),
        ('# {M}\n', 1),
    ])
    def test_malformed_points(self, text, line):
        with pytest.raises(ValueError, match="line %d" % line):
            parse_points(text, 'cloud.csv')

    def test_empty_points(self):
        with pytest.raises(ValueError, match="no points"):
            parse_points('\n\n')

    def test_points_are_written_atomically(self, tmp_path):
        path = tmp_path / 'points.csv'
        x = Sphere(2).sample_uniform(np.random.default_rng(0), 3)
        write_points(path, x, {'note': 'test'})
        assert not list(tmp_path.glob('*.partial'))
        again, header = read_points(path)
        np.testing.assert_array_equal(again, x)
        assert header == {'note': 'test'}

    def test_table(self, tmp_path):
        path = tmp_path / 'table.csv'
        write_table(path, ('m', 'V'), [(2, 0.5), (4, float('nan'))])
        rows = read_table(path)
        assert rows[0] == {'m': '2', 'V': '0.5'}
        assert np.isnan(float(rows[1]['V']))

    def test_rnot_checkpoint(self, tmp_path):
        manifold = Sphere(2)
        landmarks = select_landmarks(manifold, 5, 'fps', np.random.default_rng(0))
        model = build_potential_model(landmarks, {'hidden': [3]})
        checkpoint = tmp_path / 'model.json'
        save_checkpoint(checkpoint, model)
        assert (tmp_path / 'model_landmarks.csv').is_file()
        loaded = load_checkpoint(checkpoint)
        np.testing.assert_array_equal(loaded.params.flatten(), model.params.flatten())
        np.testing.assert_array_equal(loaded.landmarks.landmarks, landmarks.landmarks)
        y = manifold.sample_uniform(np.random.default_rng(1), 4)
        np.testing.assert_array_equal(loaded.value(y), model.value(y))

        with open(tmp_path / 'model_landmarks.csv', 'a') as handle:
            handle.write('0,0,1\n')
        with pytest.raises(ValueError, match="hash"):
            load_checkpoint(checkpoint)

    def test_landmarks_beside_checkpoint(self, tmp_path):
        landmarks = select_landmarks(Torus(2), 3, 'rnd', np.random.default_rng(0))
        model = build_potential_model(landmarks, {'hidden': [2]})
        (tmp_path / 'sub').mkdir()
        with pytest.raises(ValueError):
            save_checkpoint(tmp_path / 'model.json', model, str(tmp_path / 'sub' / 'landmarks.csv'))

    def test_rcpm_checkpoint(self, tmp_path):
        model = RcpmModel(Torus(1), np.array([[0.5], [2.0]]), np.array([0.1, -0.1]), 0.01)
        save_checkpoint(tmp_path / 'rcpm.json', model)
        loaded = load_checkpoint(tmp_path / 'rcpm.json')
        np.testing.assert_array_equal(loaded.sites, model.sites)
        np.testing.assert_array_equal(loaded.alphas, model.alphas)
        assert loaded.gamma == 0.01

    def test_checkpoint_version(self, tmp_path):
        path = tmp_path / 'future.json'
        path.write_text(json.dumps({'schema_version': 2, 'kind': 'rnot', 'manifold': {'kind': 'sphere', 'dim': 2}}))
        with pytest.raises(ConfigError):
            load_checkpoint(path)

    def test_measure_from_dict(self, tmp_path):
        manifold = Sphere(2)
        target = measure_from_dict(manifold, {'kind': 'wrapped_normal', 'sigma': 0.2}, name='target')
        assert isinstance(target, WrappedNormalMeasure)
        np.testing.assert_array_equal(target.spec.center, [-1.0, 0.0, 0.0])
        with pytest.raises(ConfigError, match="sigma"):
            measure_from_dict(manifold, {'kind': 'wrapped_normal', 'sigm': 0.2})
        with pytest.raises(ConfigError):
            measure_from_dict(manifold, {'kind': 'gaussian'})
        with pytest.raises(ConfigError):
            measure_from_dict(manifold, {'kind': 'empirical'})
        cloud = tmp_path / 'cloud.csv'
        cloud.write_text('0,0,1\n1,0,0\n')
        empirical = measure_from_dict(manifold, {'kind': 'empirical', 'kde_bandwidth': 0.1}, str(cloud))
        assert isinstance(empirical, EmpiricalMeasure)
        assert empirical.has_density
        cloud.write_text('0,0,2\n')
        with pytest.raises(ConfigError):
            measure_from_dict(manifold, {'kind': 'empirical'}, str(cloud))

    def test_seeds_and_threads(self, monkeypatch):
        assert child_seeds(3, 4) == child_seeds(3, 4)
        assert len(set(child_seeds(3, 4))) == 4
        monkeypatch.setenv('RNOT_THREADS', '3')
        assert resolve_threads(None) == 3
        assert resolve_threads(2) == 2
        monkeypatch.delenv('RNOT_THREADS')
        assert resolve_threads(None) == 1
        with pytest.raises(ConfigError):
            resolve_threads(0)

    def test_manifest(self, tmp_path):
        output = tmp_path / 'out.csv'
        write_table(output, ('a',), [(1,)])
        path = tmp_path / 'manifest.json'
        properties = {'seed': 4, 'path': str(tmp_path), 'train': {'steps': 2}}
        write_manifest(path, 'train', properties, 4, {'input_source_path': None}, {'output_table_path': str(output)}, {})
        manifest = json.loads(path.read_text())
        assert manifest['properties'] == config_snapshot(properties) == {'seed': 4, 'train': {'steps': 2}}
        assert set(manifest['outputs']) == {'output_table_path'}
        assert manifest['inputs'] == {}
        assert len(manifest['outputs']['output_table_path']['sha256']) == 64

    @pytest.mark.parametrize('key', ['io_dict', 'properties', 'manifold_obj', 'inner_config'])
    def test_internal_attributes_are_not_properties(self, key):
        block = Train(output_checkpoint_path='checkpoint.json', properties={})
        assert hasattr(block, key)
        with pytest.raises(ConfigError, match="Unknown property"):
            check_strict_properties(block, {key: None})

    @pytest.mark.parametrize('block', BLOCKS)
    def test_declared_properties_are_accepted(self, block):
        class Declared():
            PROPERTIES = block.PROPERTIES
        check_strict_properties(Declared(), {key: None for key in block.PROPERTIES if key != 'schema_version'})
        check_strict_properties(Declared(), {'path': '.', 'remove_tmp': False, 'schema_version': 1})
        with pytest.raises(ConfigError, match="Did you mean 'seed'"):
            check_strict_properties(Declared(), {'sed': 1})
