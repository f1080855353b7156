import json
from pathlib import Path
import pytest
from biobb_common.tools import test_fixtures as fx
from biobb_rnot.rnot.evaluate import evaluate


class TestEvaluate():
    def setup_class(self):
        fx.test_setup(self, 'evaluate')

    def teardown_class(self):
        fx.test_teardown(self)

    def test_evaluate(self):
        returncode = evaluate(properties=self.properties, **self.paths)
        assert fx.not_empty(self.paths['output_report_path'])
        assert fx.not_empty(self.paths['output_table_path'])
        assert fx.exe_success(returncode)
        report = json.loads(Path(self.paths['output_report_path']).read_text())
        assert report['kl_mean'] == pytest.approx(0.0, abs=1e-3)
        assert report['ess_mean'] == pytest.approx(1.0, abs=1e-3)
        assert report['gated_fraction'] == 0.0
        assert not report['unreliable']

    def test_missing_checkpoint(self):
        paths = dict(self.paths, input_checkpoint_path=str(Path(self.data_dir).joinpath('rnot', 'missing.json')))
        with pytest.raises(FileNotFoundError):
            evaluate(properties=self.properties, **paths)
