from pathlib import Path
import numpy as np
import pytest
from biobb_common.tools import test_fixtures as fx
from biobb_rnot.core.errors import ConfigError
from biobb_rnot.rnot.common import read_points, read_table
from biobb_rnot.rnot.transport import trajectory_path, transport


class TestTransport():
    def setup_class(self):
        fx.test_setup(self, 'transport')

    def teardown_class(self):
        fx.test_teardown(self)

    def test_transport(self):
        returncode = transport(properties=self.properties, **self.paths)
        assert fx.not_empty(self.paths['output_points_path'])
        assert fx.not_empty(self.paths['output_residuals_path'])
        assert fx.exe_success(returncode)
        x, _ = read_points(self.paths['input_points_path'])
        start, _ = read_points(trajectory_path(self.paths['output_points_path'], 0))
        np.testing.assert_array_equal(start, x)
        end, _ = read_points(self.paths['output_points_path'])
        np.testing.assert_allclose(end, x, atol=1e-3)
        for index in range(3):
            assert Path(trajectory_path(self.paths['output_points_path'], index)).is_file()
        assert len(read_table(self.paths['output_residuals_path'])) == len(x)

    def test_t_out_of_range(self):
        with pytest.raises(ConfigError):
            transport(properties=dict(self.properties, t=1.5), **self.paths)

    def test_malformed_points(self):
        bad = Path(self.properties['path']).joinpath('bad.csv')
        bad.write_text("0,0,1\n0,zero,1\n")
        with pytest.raises(ValueError, match="line 2"):
            transport(properties=self.properties, **dict(self.paths, input_points_path=str(bad)))


class TestTransportRcpm():
    def setup_class(self):
        fx.test_setup(self, 'transport_rcpm')

    def teardown_class(self):
        fx.test_teardown(self)

    def test_transport_rcpm(self):
        returncode = transport(properties=self.properties, **self.paths)
        assert fx.not_empty(self.paths['output_points_path'])
        assert fx.exe_success(returncode)
        y, _ = read_points(self.paths['output_points_path'])
        sites = {(0.0, 0.0, 1.0), (-1.0, 0.0, 0.0)}
        assert {tuple(row) for row in y} <= sites
