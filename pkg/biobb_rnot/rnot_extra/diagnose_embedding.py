#!/usr/bin/env python3

"""Module containing the DiagnoseEmbedding class and the command line interface."""
import argparse
import time
import numpy as np
from biobb_common.generic.biobb_object import BiobbObject
from biobb_common.configuration import settings
from biobb_common.tools import file_utils as fu
from biobb_common.tools.file_utils import launchlogger
from biobb_rnot.core.embedding import DEFAULT_EPSILON, DEFAULT_N_PAIRS, SELECTIONS, diagnose_schedule
from biobb_rnot.core.errors import ConfigError
from biobb_rnot.rnot.common import (SCHEMA_VERSION, check_strict_properties, child_seeds, manifold_section,
                                    write_landmarks, write_manifest, write_table)

DIAGNOSTIC_COLUMNS = ('selection', 'M', 'min_separation', 'near_collision_fraction', 'coverage_radius',
                      'non_collapsing')
DEFAULT_SCHEDULE = (1, 2, 4, 8, 16, 32, 64, 128, 256)


class DiagnoseEmbedding(BiobbObject):
    """
    | biobb_rnot DiagnoseEmbedding
    | Diagnoses distance-to-landmark embeddings for a schedule of landmark counts.
    | For every selection rule and every M it reports the minimum embedded separation s_M, the near-collision fraction rho_M(epsilon) and the coverage radius R_M on held-out uniform samples, and names the smallest non-collapsing M.

    Args:
        output_diagnostics_path (str): One row per (selection, M). File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot_extra/ref_diagnostics.csv>`_. Accepted formats: csv (edam:format_3752).
        output_landmarks_path (str) (Optional): Landmarks of the last selection rule at its smallest non-collapsing M, ready for the train block. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot_extra/ref_landmarks.csv>`_. Accepted formats: csv (edam:format_3752).
        output_manifest_path (str) (Optional): Experiment manifest. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot_extra/ref_diagnose_manifest.json>`_. Accepted formats: json (edam:format_3464).
        properties (dic - Python dictionary object containing the tool parameters, not input/output files):
            * **schema_version** (*int*) - (1) Version of the configuration layout.
            * **manifold** (*dict*) - ({"kind": "sphere", "dim": 2}) Manifold kind and intrinsic dimension.
            * **schedule** (*list*) - ([1, 2, 4, 8, 16, 32, 64, 128, 256]) Increasing landmark counts.
            * **selections** (*list*) - (["rnd", "fps"]) Selection rules to compare.
            * **epsilon** (*float*) - (1e-3) Near-collision threshold.
            * **tolerance** (*float*) - (1e-3) Minimum separation a non-collapsing embedding must exceed.
            * **n_validation** (*int*) - (1024) Held-out uniform samples.
            * **n_pairs** (*int*) - (20000) Validation pairs checked.
            * **seed** (*int*) - (0) Root seed.
            * **remove_tmp** (*bool*) - (True) [WF property] Remove temporal files.
            * **restart** (*bool*) - (False) [WF property] Do not execute if output files exist.

    Examples:
        This is a use example of how to use the building block from Python::

            from biobb_rnot.rnot_extra.diagnose_embedding import diagnose_embedding
            prop = { 'manifold': {'kind': 'sphere', 'dim': 2},
                     'schedule': [8, 16, 32, 64, 128] }
            diagnose_embedding(output_diagnostics_path='/path/to/diagnostics.csv',
                               properties=prop)

    Info:
        * wrapped_software:
            * name: In house
            * license: Apache-2.0
        * ontology:
            * name: EDAM
            * schema: http://edamontology.org/EDAM.owl
    """

    PROPERTIES = ('schema_version', 'manifold', 'schedule', 'selections', 'epsilon', 'tolerance', 'n_validation',
                  'n_pairs', 'seed')

    def __init__(self, output_diagnostics_path: str, output_landmarks_path: str = None,
                 output_manifest_path: str = None, properties: dict = None, **kwargs) -> None:
        properties = properties or {}

        # Call parent class constructor
        super().__init__(properties)

        # Input/Output files
        self.io_dict = {
            "in": {},
            "out": {"output_diagnostics_path": output_diagnostics_path, "output_landmarks_path": output_landmarks_path,
                    "output_manifest_path": output_manifest_path}
        }

        # Properties specific for BB
        self.schema_version = properties.get('schema_version', SCHEMA_VERSION)
        self.manifold = properties.get('manifold', {})
        self.schedule = properties.get('schedule', list(DEFAULT_SCHEDULE))
        self.selections = properties.get('selections', list(SELECTIONS))
        self.epsilon = properties.get('epsilon', DEFAULT_EPSILON)
        self.tolerance = properties.get('tolerance', DEFAULT_EPSILON)
        self.n_validation = properties.get('n_validation', 1024)
        self.n_pairs = properties.get('n_pairs', DEFAULT_N_PAIRS)
        self.seed = properties.get('seed', 0)
        self.properties = properties

        # Check the properties
        self.check_properties(properties)
        check_strict_properties(self, properties)
        self.manifold_obj = manifold_section(self.manifold)
        schedule = [int(m) for m in self.schedule]
        if not schedule or schedule[0] < 1 or any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise ConfigError("schedule must be an increasing list of positive counts, got %r" % self.schedule)
        self.schedule = schedule
        unknown = [s for s in self.selections if s not in SELECTIONS]
        if unknown or not self.selections:
            raise ConfigError("selections must be a nonempty subset of %s, got %r" % (SELECTIONS, self.selections))

    @launchlogger
    def launch(self) -> int:
        """Execute the :class:`DiagnoseEmbedding <rnot_extra.diagnose_embedding.DiagnoseEmbedding>` object."""

        # Setup Biobb
        if self.check_restart():
            return 0
        start = time.perf_counter()
        outputs = self.io_dict["out"]
        manifold = self.manifold_obj
        validation_seed, *selection_seeds = child_seeds(self.seed, len(self.selections) + 1)
        validation = manifold.sample_uniform(np.random.default_rng(validation_seed), int(self.n_validation))

        rows = []
        chosen = None
        for selection, seed in zip(self.selections, selection_seeds):
            full, reports = diagnose_schedule(manifold, self.schedule, np.random.default_rng(seed), selection,
                                              float(self.epsilon), int(self.n_validation), int(self.n_pairs),
                                              validation)
            first = None
            for m, report in zip(self.schedule, reports):
                ok = report.min_separation > float(self.tolerance) and report.near_collision_fraction == 0
                if ok and first is None:
                    first = int(m)
                rows.append((selection, int(m), report.min_separation, report.near_collision_fraction,
                             report.coverage_radius, int(ok)))
            fu.log("%s: smallest non-collapsing M = %s, coverage radius at M=%d: %.4g"
                   % (selection, first, self.schedule[-1], reports[-1].coverage_radius), self.out_log, self.global_log)
            chosen = full.prefix(first if first is not None else int(self.schedule[-1]))

        write_table(outputs["output_diagnostics_path"], DIAGNOSTIC_COLUMNS, rows)
        if outputs["output_landmarks_path"]:
            write_landmarks(outputs["output_landmarks_path"], chosen)
            fu.log("Wrote %d %s landmarks" % (chosen.M, chosen.selection), self.out_log, self.global_log)
        if outputs["output_manifest_path"]:
            write_manifest(outputs["output_manifest_path"], 'diagnose-embedding', self.properties, int(self.seed),
                           {}, outputs, {'total_seconds': time.perf_counter() - start})

        # Remove temporal files
        self.remove_tmp_files()

        return 0


def diagnose_embedding(output_diagnostics_path: str, output_landmarks_path: str = None,
                       output_manifest_path: str = None, properties: dict = None, **kwargs) -> int:
    """Create :class:`DiagnoseEmbedding <rnot_extra.diagnose_embedding.DiagnoseEmbedding>` class and
    execute the :meth:`launch() <rnot_extra.diagnose_embedding.DiagnoseEmbedding.launch>` method."""

    return DiagnoseEmbedding(output_diagnostics_path=output_diagnostics_path,
                             output_landmarks_path=output_landmarks_path, output_manifest_path=output_manifest_path,
                             properties=properties, **kwargs).launch()


def main():
    """Command line execution of this building block. Please check the command line documentation."""
    parser = argparse.ArgumentParser(description="Diagnose distance-to-landmark embeddings.",
                                     formatter_class=lambda prog: argparse.RawTextHelpFormatter(prog, width=99999))
    parser.add_argument('-c', '--config', required=False, help="This file can be a YAML file, JSON file or JSON string")
    parser.add_argument('--output_landmarks_path', required=False)
    parser.add_argument('--output_manifest_path', required=False)

    # Specific args of each building block
    required_args = parser.add_argument_group('required arguments')
    required_args.add_argument('--output_diagnostics_path', required=True)

    args = parser.parse_args()
    config = args.config if args.config else None
    properties = settings.ConfReader(config=config).get_prop_dic()

    # Specific call of each building block
    diagnose_embedding(output_diagnostics_path=args.output_diagnostics_path,
                       output_landmarks_path=args.output_landmarks_path,
                       output_manifest_path=args.output_manifest_path, properties=properties)


if __name__ == '__main__':
    main()
