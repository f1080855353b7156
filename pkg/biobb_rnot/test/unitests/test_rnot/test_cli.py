from pathlib import Path
from biobb_rnot.cli import main
from biobb_rnot.rnot.common import read_points

DATA_DIR = Path(__file__).resolve().parent.parent.parent.joinpath('data', 'rnot')


class TestCli():
    def test_transport(self, tmp_path):
        returncode = main(['transport', '--checkpoint', str(DATA_DIR.joinpath('rcpm_checkpoint.json')),
                           '--input', str(DATA_DIR.joinpath('points.csv')), '--out', str(tmp_path)])
        assert returncode == 0
        y, _ = read_points(tmp_path.joinpath('transported.csv'))
        assert y.shape == (4, 3)

    def test_missing_checkpoint(self, tmp_path, capsys):
        returncode = main(['eval', '--checkpoint', str(tmp_path.joinpath('missing.json')), '--out', str(tmp_path)])
        assert returncode == 1
        assert 'input_checkpoint_path' in capsys.readouterr().err

    def test_malformed_config(self, tmp_path, capsys):
        config = tmp_path.joinpath('bad.yml')
        config.write_text("properties:\n  pool_sise: 8\n")
        returncode = main(['transport', '-c', str(config), '--checkpoint', str(DATA_DIR.joinpath('rcpm_checkpoint.json')),
                           '--input', str(DATA_DIR.joinpath('points.csv')), '--out', str(tmp_path)])
        assert returncode == 1
        assert 'pool_size' in capsys.readouterr().err
