from biobb_common.tools import test_fixtures as fx
from biobb_rnot.rnot.common import read_landmarks, read_table
from biobb_rnot.rnot_extra.diagnose_embedding import DIAGNOSTIC_COLUMNS, diagnose_embedding


class TestDiagnoseEmbedding():
    def setup_class(self):
        fx.test_setup(self, 'diagnose_embedding')

    def teardown_class(self):
        fx.test_teardown(self)

    def test_diagnose_embedding(self):
        returncode = diagnose_embedding(properties=self.properties, **self.paths)
        assert fx.not_empty(self.paths['output_diagnostics_path'])
        assert fx.not_empty(self.paths['output_landmarks_path'])
        assert fx.exe_success(returncode)

        rows = read_table(self.paths['output_diagnostics_path'])
        assert len(rows) == 8
        assert tuple(rows[0]) == DIAGNOSTIC_COLUMNS
        by_selection = {}
        for row in rows:
            by_selection.setdefault(row['selection'], []).append(float(row['coverage_radius']))
        for radii in by_selection.values():
            assert all(b <= a for a, b in zip(radii, radii[1:]))
        assert by_selection['fps'][-1] < by_selection['rnd'][-1]

        landmarks = read_landmarks(self.paths['output_landmarks_path'])
        assert landmarks.selection == 'fps'
        assert 1 <= landmarks.M <= 64
