#!/usr/bin/env python3

"""Module containing the Sweep class and the command line interface."""
import argparse
import math
import time
from biobb_common.generic.biobb_object import BiobbObject
from biobb_common.configuration import settings
from biobb_common.tools import file_utils as fu
from biobb_common.tools.file_utils import launchlogger
from biobb_rnot.core.ctransform import NETWORK_KEYS, InnerSolverConfig
from biobb_rnot.core.config import check_keys
from biobb_rnot.core.embedding import LandmarkConfig
from biobb_rnot.core.errors import ConfigError
from biobb_rnot.core.evaluation import SWEEP_COLUMNS, EvalConfig, SweepConfig, SweepSettings, cell_key, dimension_sweep
from biobb_rnot.core.semidual import TrainConfig
from biobb_rnot.rnot.common import (SCHEMA_VERSION, check_input_path, check_strict_properties, file_sha256,
                                    read_json, read_table, resolve_threads, write_manifest, write_table)

SETTING_SECTIONS = ('sweep', 'train', 'inner', 'eval', 'landmarks', 'network')


def _number(text: str) -> float:
    return float(text) if text not in ('', None) else float('nan')


def completed_cells(manifest_path: str, properties: dict) -> dict:
    """ Finished cells of an earlier sweep, read through its manifest.

    Rows whose KL is NaN are left out so that they run again.

    Raises:
        ConfigError: If the earlier sweep used different settings.
        ValueError: If its table no longer matches the recorded hash.
    """
    manifest = read_json(manifest_path)
    previous = manifest.get('properties', {})
    for section in SETTING_SECTIONS:
        if previous.get(section, {}) != properties.get(section, {}):
            raise ConfigError("Section %r differs from the sweep recorded in %s" % (section, manifest_path))
    if previous.get('seed') != properties.get('seed'):
        raise ConfigError("Root seed differs from the sweep recorded in %s" % manifest_path)
    table = manifest.get('outputs', {}).get('output_table_path')
    if not table:
        return {}
    if file_sha256(table['path']) != table['sha256']:
        raise ValueError("Sweep table %s changed since %s was written" % (table['path'], manifest_path))
    done = {}
    for row in read_table(table['path']):
        parsed = {'p': int(row['p']), 'method': row['method'], 'gamma': _number(row['gamma'])}
        parsed.update({name: _number(row[name]) for name in SWEEP_COLUMNS[3:]})
        if not math.isnan(parsed['kl']):
            done[cell_key(parsed['p'], parsed['method'], parsed['gamma'])] = parsed
    return done


class Sweep(BiobbObject):
    """
    | biobb_rnot Sweep
    | Dimension sweep of the uniform to wrapped-normal transport task.
    | Trains and evaluates RNOT and RCPM (for each smoothing gamma) on spheres or tori of every dimension of the grid with matched budgets, and tabulates KL and ESS with confidence intervals. Failed cells are recorded as NaN and the sweep goes on. A manifest of an earlier run resumes it, skipping the finished cells.

    Args:
        input_manifest_path (str) (Optional): Manifest of an earlier sweep with the same settings. File type: input. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot_extra/ref_sweep_manifest.json>`_. Accepted formats: json (edam:format_3464).
        output_table_path (str): One row per (p, method, gamma) cell. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot_extra/ref_sweep.csv>`_. Accepted formats: csv (edam:format_3752).
        output_manifest_path (str) (Optional): Experiment manifest, usable to resume the sweep. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot_extra/ref_sweep_manifest.json>`_. Accepted formats: json (edam:format_3464).
        properties (dic - Python dictionary object containing the tool parameters, not input/output files):
            * **schema_version** (*int*) - (1) Version of the configuration layout.
            * **sweep** (*dict*) - ({}) kind (sphere), p_grid ([2, 3, 4]), methods (["rnot"]), gammas ([1.0, 0.1, 0.05, 0.01, 0.005, 0.001]), sigma (0.3), center (south_pole), rcpm_sites (68), seed (0).
            * **train** (*dict*) - ({}) Outer loop settings of every cell.
            * **inner** (*dict*) - ({}) Inner solver settings of every cell.
            * **eval** (*dict*) - ({}) Evaluation settings of every cell.
            * **landmarks** (*dict*) - ({}) Landmark selection of the RNOT cells.
            * **network** (*dict*) - ({}) Network of the RNOT cells.
            * **seed** (*int*) - (None) Root seed; replaces sweep.seed when set.
            * **threads** (*int*) - (None) Cells run in parallel. Defaults to the RNOT_THREADS environment variable, then 1.
            * **remove_tmp** (*bool*) - (True) [WF property] Remove temporal files.
            * **restart** (*bool*) - (False) [WF property] Do not execute if output files exist.

    Examples:
        This is a use example of how to use the building block from Python::

            from biobb_rnot.rnot_extra.sweep import sweep
            prop = { 'sweep': {'p_grid': [2, 3, 4], 'methods': ['rnot', 'rcpm']},
                     'train': {'steps': 500} }
            sweep(output_table_path='/path/to/sweep.csv',
                  output_manifest_path='/path/to/sweep_manifest.json',
                  properties=prop)

    Info:
        * wrapped_software:
            * name: In house
            * license: Apache-2.0
        * ontology:
            * name: EDAM
            * schema: http://edamontology.org/EDAM.owl
    """

    PROPERTIES = ('schema_version', 'sweep', 'train', 'inner', 'eval', 'landmarks', 'network', 'seed', 'threads')

    def __init__(self, output_table_path: str, input_manifest_path: str = None, output_manifest_path: str = None,
                 properties: dict = None, **kwargs) -> None:
        properties = properties or {}

        # Call parent class constructor
        super().__init__(properties)

        # Input/Output files
        self.io_dict = {
            "in": {"input_manifest_path": input_manifest_path},
            "out": {"output_table_path": output_table_path, "output_manifest_path": output_manifest_path}
        }

        # Properties specific for BB
        self.schema_version = properties.get('schema_version', SCHEMA_VERSION)
        self.sweep = properties.get('sweep', {})
        self.train = properties.get('train', {})
        self.inner = properties.get('inner', {})
        self.eval = properties.get('eval', {})
        self.landmarks = properties.get('landmarks', {})
        self.network = properties.get('network', {})
        self.seed = properties.get('seed', None)
        self.threads = properties.get('threads', None)
        self.properties = properties

        # Check the properties
        self.check_properties(properties)
        check_strict_properties(self, properties)
        sweep_section = dict(self.sweep)
        if self.seed is not None:
            sweep_section['seed'] = int(self.seed)
        self.sweep_config = SweepConfig.from_dict(sweep_section)
        check_keys(self.network, NETWORK_KEYS, 'network')
        self.settings = SweepSettings(TrainConfig.from_dict(self.train), InnerSolverConfig.from_dict(self.inner),
                                      EvalConfig.from_dict(self.eval), LandmarkConfig.from_dict(self.landmarks),
                                      dict(self.network))
        self.n_threads = resolve_threads(self.threads)

    @launchlogger
    def launch(self) -> int:
        """Execute the :class:`Sweep <rnot_extra.sweep.Sweep>` object."""

        # Setup Biobb
        if self.check_restart():
            return 0
        start = time.perf_counter()
        inputs = self.io_dict["in"]
        outputs = self.io_dict["out"]
        check_input_path(inputs["input_manifest_path"], "input_manifest_path", required=False)

        completed = {}
        if inputs["input_manifest_path"]:
            completed = completed_cells(inputs["input_manifest_path"], self.properties)
            fu.log("Resuming: %d cells already finished" % len(completed), self.out_log, self.global_log)
        cells = self.sweep_config.cells()
        fu.log("Sweeping %d cells on %d threads" % (len(cells), self.n_threads), self.out_log, self.global_log)

        rows, n_failed = dimension_sweep(self.sweep_config, self.settings, self.n_threads, completed,
                                         self.out_log, self.global_log)
        write_table(outputs["output_table_path"], SWEEP_COLUMNS, [[row[name] for name in SWEEP_COLUMNS] for row in rows])
        if n_failed:
            fu.log("%d cells failed and were written as NaN" % n_failed, self.out_log, self.global_log)
        if outputs["output_manifest_path"]:
            write_manifest(outputs["output_manifest_path"], 'sweep', self.properties, self.sweep_config.seed,
                           inputs, outputs, {'total_seconds': time.perf_counter() - start})

        # Remove temporal files
        self.remove_tmp_files()

        return 0


def sweep(output_table_path: str, input_manifest_path: str = None, output_manifest_path: str = None,
          properties: dict = None, **kwargs) -> int:
    """Create :class:`Sweep <rnot_extra.sweep.Sweep>` class and
    execute the :meth:`launch() <rnot_extra.sweep.Sweep.launch>` method."""

    return Sweep(output_table_path=output_table_path, input_manifest_path=input_manifest_path,
                 output_manifest_path=output_manifest_path, properties=properties, **kwargs).launch()


def main():
    """Command line execution of this building block. Please check the command line documentation."""
    parser = argparse.ArgumentParser(description="Dimension sweep of RNOT and RCPM.",
                                     formatter_class=lambda prog: argparse.RawTextHelpFormatter(prog, width=99999))
    parser.add_argument('-c', '--config', required=False, help="This file can be a YAML file, JSON file or JSON string")
    parser.add_argument('--input_manifest_path', required=False)
    parser.add_argument('--output_manifest_path', required=False)

    # Specific args of each building block
    required_args = parser.add_argument_group('required arguments')
    required_args.add_argument('--output_table_path', required=True)

    args = parser.parse_args()
    config = args.config if args.config else None
    properties = settings.ConfReader(config=config).get_prop_dic()

    # Specific call of each building block
    sweep(output_table_path=args.output_table_path, input_manifest_path=args.input_manifest_path,
          output_manifest_path=args.output_manifest_path, properties=properties)


if __name__ == '__main__':
    main()
