import math
from pathlib import Path
import pytest
from biobb_common.tools import test_fixtures as fx
from biobb_rnot.core.errors import ConfigError
from biobb_rnot.rnot.common import read_table
from biobb_rnot.rnot_extra.sweep import sweep


class TestSweep():
    def setup_class(self):
        fx.test_setup(self, 'sweep')

    def teardown_class(self):
        fx.test_teardown(self)

    def test_sweep(self):
        returncode = sweep(properties=self.properties, **self.paths)
        assert fx.not_empty(self.paths['output_table_path'])
        assert fx.not_empty(self.paths['output_manifest_path'])
        assert fx.exe_success(returncode)

        rows = read_table(self.paths['output_table_path'])
        assert len(rows) == 2
        assert sorted(row['method'] for row in rows) == ['rcpm', 'rnot']
        for row in rows:
            assert int(row['p']) == 2
            if row['method'] == 'rcpm':
                assert float(row['gamma']) == pytest.approx(0.1)
            else:
                assert math.isnan(float(row['gamma']))

    def test_resume(self):
        resumed = str(Path(self.properties['path']).joinpath('resumed.csv'))
        returncode = sweep(output_table_path=resumed, input_manifest_path=self.paths['output_manifest_path'],
                           properties=self.properties)
        assert fx.exe_success(returncode)
        assert len(read_table(resumed)) == 2

    def test_resume_with_other_settings(self):
        properties = dict(self.properties, train={'steps': 3, 'batch_size': 16})
        with pytest.raises(ConfigError):
            sweep(output_table_path=str(Path(self.properties['path']).joinpath('other.csv')),
                  input_manifest_path=self.paths['output_manifest_path'], properties=properties)
