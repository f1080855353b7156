import json
from pathlib import Path
import pytest
from biobb_common.tools import test_fixtures as fx
from biobb_rnot.core.errors import ConfigError
from biobb_rnot.rnot.common import file_sha256, load_checkpoint, read_table
from biobb_rnot.rnot.train import train


class TestTrain():
    def setup_class(self):
        fx.test_setup(self, 'train')

    def teardown_class(self):
        fx.test_teardown(self)

    def test_train(self):
        returncode = train(properties=self.properties, **self.paths)
        assert fx.not_empty(self.paths['output_checkpoint_path'])
        assert fx.not_empty(self.paths['output_landmarks_path'])
        assert fx.not_empty(self.paths['output_report_path'])
        assert fx.exe_success(returncode)
        model = load_checkpoint(self.paths['output_checkpoint_path'])
        assert model.landmarks.M == 16
        assert len(read_table(self.paths['output_report_path'])) == 4
        checkpoint = Path(self.paths['output_checkpoint_path'])
        assert checkpoint.with_name('checkpoint_step2.json').is_file()
        assert not list(checkpoint.parent.glob('*.partial'))
        manifest = json.loads(Path(self.paths['output_manifest_path']).read_text())
        assert manifest['outputs']['output_checkpoint_path']['sha256'] == file_sha256(checkpoint)

    def test_train_is_reproducible(self):
        first = file_sha256(self.paths['output_checkpoint_path'])
        paths = dict(self.paths, output_checkpoint_path=str(Path(self.properties['path']).joinpath('again.json')),
                     output_landmarks_path=str(Path(self.properties['path']).joinpath('again_landmarks.csv')),
                     output_report_path=None, output_manifest_path=None)
        assert fx.exe_success(train(properties=self.properties, **paths))
        second = json.loads(Path(paths['output_checkpoint_path']).read_text())
        reference = json.loads(Path(self.paths['output_checkpoint_path']).read_text())
        assert second['flat_params'] == reference['flat_params']
        assert second['landmarks_sha256'] == reference['landmarks_sha256']
        assert first == file_sha256(self.paths['output_checkpoint_path'])

    def test_unknown_property(self):
        properties = dict(self.properties, landmark={'M': 4})
        with pytest.raises(ConfigError, match="landmarks"):
            train(properties=properties, **self.paths)

    def test_unknown_section_key(self):
        properties = dict(self.properties, train={'step': 4})
        with pytest.raises(ConfigError, match="steps"):
            train(properties=properties, **self.paths)

    def test_schema_version(self):
        with pytest.raises(ConfigError):
            train(properties=dict(self.properties, schema_version=2), **self.paths)


class TestTrainEmpirical():
    def setup_class(self):
        fx.test_setup(self, 'train_empirical')

    def teardown_class(self):
        fx.test_teardown(self)

    def test_train_empirical(self):
        returncode = train(properties=self.properties, **self.paths)
        assert fx.not_empty(self.paths['output_checkpoint_path'])
        assert fx.not_empty(self.paths['output_report_path'])
        assert fx.exe_success(returncode)


class TestTrainRcpm():
    def setup_class(self):
        fx.test_setup(self, 'train_rcpm')

    def teardown_class(self):
        fx.test_teardown(self)

    def test_train_rcpm(self):
        returncode = train(properties=self.properties, **self.paths)
        assert fx.not_empty(self.paths['output_checkpoint_path'])
        assert fx.exe_success(returncode)
        model = load_checkpoint(self.paths['output_checkpoint_path'])
        assert model.m == 8
        assert model.gamma == pytest.approx(0.1)
