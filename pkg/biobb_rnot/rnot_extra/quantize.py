#!/usr/bin/env python3

"""Module containing the Quantize class and the command line interface."""
import argparse
import time
import numpy as np
from biobb_common.generic.biobb_object import BiobbObject
from biobb_common.configuration import settings
from biobb_common.tools import file_utils as fu
from biobb_common.tools.file_utils import launchlogger
from biobb_rnot.core.errors import ConfigError
from biobb_rnot.core.geometry import Torus
from biobb_rnot.core.measures import UniformMeasure
from biobb_rnot.core.rcpm import circle_quantization_error, quantization_table
from biobb_rnot.rnot.common import (DEFAULT_SOURCE, SCHEMA_VERSION, check_input_path, check_measure_section,
                                    check_strict_properties, manifold_section, measure_from_dict, resolve_threads,
                                    write_json, write_manifest, write_table)

QUANTIZATION_COLUMNS = ('m', 'V', 'closed_form')
DEFAULT_M_GRID = (2, 4, 8, 16, 32, 64)


class Quantize(BiobbObject):
    """
    | biobb_rnot Quantize
    | Quantization error of a measure for growing codebook sizes.
    | Estimates V_m, the smallest mean squared geodesic distance from the measure to an m-point codebook, with restarted geodesic Lloyd iterations, and fits the log-log slope of V_m against m. Any transport map with m outputs, the hard-min RCPM among them, has an error bounded below by V_m; for a p-dimensional measure the slope tends to -2/p. On the circle with the uniform measure the exact value pi^2 / (3 m^2) is written alongside.

    Args:
        input_points_path (str) (Optional): Point cloud of an empirical measure. File type: input. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/data/rnot/target_cloud.csv>`_. Accepted formats: csv (edam:format_3752).
        output_table_path (str): Rows (m, V, closed_form). File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot_extra/ref_quantization.csv>`_. Accepted formats: csv (edam:format_3752).
        output_fit_path (str) (Optional): Log-log slope, its standard error and 95% half-width. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot_extra/ref_quantization_fit.json>`_. Accepted formats: json (edam:format_3464).
        output_manifest_path (str) (Optional): Experiment manifest. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot_extra/ref_quantize_manifest.json>`_. Accepted formats: json (edam:format_3464).
        properties (dic - Python dictionary object containing the tool parameters, not input/output files):
            * **schema_version** (*int*) - (1) Version of the configuration layout.
            * **manifold** (*dict*) - ({"kind": "sphere", "dim": 2}) Manifold kind and intrinsic dimension; a torus of dim 1 is the circle.
            * **measure** (*dict*) - ({"kind": "uniform"}) Measure to quantize.
            * **m_grid** (*list*) - ([2, 4, 8, 16, 32, 64]) Increasing codebook sizes.
            * **n_samples** (*int*) - (10000) Samples shared by every Lloyd run.
            * **restarts** (*int*) - (5) Lloyd restarts per m; the best distortion is kept.
            * **max_iters** (*int*) - (50) Lloyd iterations per restart.
            * **tol** (*float*) - (1e-6) Relative distortion change that stops Lloyd.
            * **seed** (*int*) - (0) Root seed.
            * **threads** (*int*) - (None) Lloyd runs in parallel. Defaults to the RNOT_THREADS environment variable, then 1.
            * **remove_tmp** (*bool*) - (True) [WF property] Remove temporal files.
            * **restart** (*bool*) - (False) [WF property] Do not execute if output files exist.

    Examples:
        This is a use example of how to use the building block from Python::

            from biobb_rnot.rnot_extra.quantize import quantize
            prop = { 'manifold': {'kind': 'torus', 'dim': 1},
                     'm_grid': [2, 4, 8, 16] }
            quantize(output_table_path='/path/to/quantization.csv',
                     output_fit_path='/path/to/fit.json',
                     properties=prop)

    Info:
        * wrapped_software:
            * name: In house
            * license: Apache-2.0
        * ontology:
            * name: EDAM
            * schema: http://edamontology.org/EDAM.owl
    """

    PROPERTIES = ('schema_version', 'manifold', 'measure', 'm_grid', 'n_samples', 'restarts', 'max_iters', 'tol',
                  'seed', 'threads')

    def __init__(self, output_table_path: str, input_points_path: str = None, output_fit_path: str = None,
                 output_manifest_path: str = None, properties: dict = None, **kwargs) -> None:
        properties = properties or {}

        # Call parent class constructor
        super().__init__(properties)

        # Input/Output files
        self.io_dict = {
            "in": {"input_points_path": input_points_path},
            "out": {"output_table_path": output_table_path, "output_fit_path": output_fit_path,
                    "output_manifest_path": output_manifest_path}
        }

        # Properties specific for BB
        self.schema_version = properties.get('schema_version', SCHEMA_VERSION)
        self.manifold = properties.get('manifold', {})
        self.measure = properties.get('measure', DEFAULT_SOURCE)
        self.m_grid = properties.get('m_grid', list(DEFAULT_M_GRID))
        self.n_samples = properties.get('n_samples', 10000)
        self.restarts = properties.get('restarts', 5)
        self.max_iters = properties.get('max_iters', 50)
        self.tol = properties.get('tol', 1e-6)
        self.seed = properties.get('seed', 0)
        self.threads = properties.get('threads', None)
        self.properties = properties

        # Check the properties
        self.check_properties(properties)
        check_strict_properties(self, properties)
        self.manifold_obj = manifold_section(self.manifold)
        check_measure_section(self.measure, 'measure')
        m_grid = [int(m) for m in self.m_grid]
        if not m_grid or m_grid[0] < 1 or any(b <= a for a, b in zip(m_grid, m_grid[1:])):
            raise ConfigError("m_grid must be an increasing list of positive sizes, got %r" % self.m_grid)
        if int(self.restarts) < 1 or int(self.n_samples) < m_grid[-1]:
            raise ConfigError("Need restarts >= 1 and at least %d samples" % m_grid[-1])
        self.m_grid = m_grid
        self.n_threads = resolve_threads(self.threads)

    @launchlogger
    def launch(self) -> int:
        """Execute the :class:`Quantize <rnot_extra.quantize.Quantize>` object."""

        # Setup Biobb
        if self.check_restart():
            return 0
        start = time.perf_counter()
        inputs = self.io_dict["in"]
        outputs = self.io_dict["out"]
        check_input_path(inputs["input_points_path"], "input_points_path", required=False)

        manifold = self.manifold_obj
        measure = measure_from_dict(manifold, self.measure, inputs["input_points_path"], 'measure')
        fu.log("Quantizing %r on %r for m in %s" % (measure, manifold, self.m_grid), self.out_log, self.global_log)
        table = quantization_table(measure, self.m_grid, np.random.default_rng(int(self.seed)), int(self.n_samples),
                                   int(self.restarts), int(self.max_iters), float(self.tol), self.n_threads,
                                   self.out_log, self.global_log)

        circle = isinstance(manifold, Torus) and manifold.dim == 1 and isinstance(measure, UniformMeasure)
        rows = [(m, value, circle_quantization_error(m) if circle else float('nan')) for m, value in table.rows]
        write_table(outputs["output_table_path"], QUANTIZATION_COLUMNS, rows)
        fu.log("Log-log slope %.4f +- %.4f (stderr %.4f)" % (table.fit.slope, table.fit.ci, table.fit.stderr),
               self.out_log, self.global_log)
        if outputs["output_fit_path"]:
            write_json(outputs["output_fit_path"], {'slope': table.fit.slope, 'stderr': table.fit.stderr,
                                                    'ci': table.fit.ci, 'expected': -2.0 / manifold.dim})
        if outputs["output_manifest_path"]:
            write_manifest(outputs["output_manifest_path"], 'quantize', self.properties, int(self.seed),
                           inputs, outputs, {'total_seconds': time.perf_counter() - start})

        # Remove temporal files
        self.remove_tmp_files()

        return 0


def quantize(output_table_path: str, input_points_path: str = None, output_fit_path: str = None,
             output_manifest_path: str = None, properties: dict = None, **kwargs) -> int:
    """Create :class:`Quantize <rnot_extra.quantize.Quantize>` class and
    execute the :meth:`launch() <rnot_extra.quantize.Quantize.launch>` method."""

    return Quantize(output_table_path=output_table_path, input_points_path=input_points_path,
                    output_fit_path=output_fit_path, output_manifest_path=output_manifest_path,
                    properties=properties, **kwargs).launch()


def main():
    """Command line execution of this building block. Please check the command line documentation."""
    parser = argparse.ArgumentParser(description="Quantization error of a measure on a sphere or a torus.",
                                     formatter_class=lambda prog: argparse.RawTextHelpFormatter(prog, width=99999))
    parser.add_argument('-c', '--config', required=False, help="This file can be a YAML file, JSON file or JSON string")
    parser.add_argument('--input_points_path', required=False)
    parser.add_argument('--output_fit_path', required=False)
    parser.add_argument('--output_manifest_path', required=False)

    # Specific args of each building block
    required_args = parser.add_argument_group('required arguments')
    required_args.add_argument('--output_table_path', required=True)

    args = parser.parse_args()
    config = args.config if args.config else None
    properties = settings.ConfReader(config=config).get_prop_dic()

    # Specific call of each building block
    quantize(output_table_path=args.output_table_path, input_points_path=args.input_points_path,
             output_fit_path=args.output_fit_path, output_manifest_path=args.output_manifest_path,
             properties=properties)


if __name__ == '__main__':
    main()
