import json
import math
from pathlib import Path
import pytest
from biobb_common.tools import test_fixtures as fx
from biobb_rnot.core.errors import ConfigError
from biobb_rnot.rnot.common import read_table
from biobb_rnot.rnot_extra.quantize import quantize


class TestQuantize():
    def setup_class(self):
        fx.test_setup(self, 'quantize')

    def teardown_class(self):
        fx.test_teardown(self)

    def test_quantize(self):
        returncode = quantize(properties=self.properties, **self.paths)
        assert fx.not_empty(self.paths['output_table_path'])
        assert fx.not_empty(self.paths['output_fit_path'])
        assert fx.exe_success(returncode)

        rows = read_table(self.paths['output_table_path'])
        assert [int(row['m']) for row in rows] == [2, 4, 8]
        for row in rows:
            m = int(row['m'])
            assert float(row['closed_form']) == pytest.approx(math.pi ** 2 / (3 * m ** 2))
            assert float(row['V']) == pytest.approx(float(row['closed_form']), rel=0.05)
        fit = json.loads(Path(self.paths['output_fit_path']).read_text())
        assert fit['expected'] == -2.0
        assert fit['slope'] == pytest.approx(-2.0, abs=0.2)

    def test_decreasing_grid(self):
        with pytest.raises(ConfigError):
            quantize(properties=dict(self.properties, m_grid=[8, 4]), **self.paths)
