#!/usr/bin/env python3

"""Module containing the Transport class and the command line interface."""
import argparse
import time
from pathlib import Path
import numpy as np
from biobb_common.generic.biobb_object import BiobbObject
from biobb_common.configuration import settings
from biobb_common.tools import file_utils as fu
from biobb_common.tools.file_utils import launchlogger
from biobb_rnot.core.ctransform import InnerSolverConfig, inner_solve, interpolate
from biobb_rnot.core.errors import ConfigError
from biobb_rnot.core.rcpm import RcpmModel
from biobb_rnot.rnot.common import (DEFAULT_TARGET, SCHEMA_VERSION, check_input_path, check_measure_section,
                                    check_strict_properties, load_checkpoint, measure_from_dict, read_points,
                                    write_manifest, write_points, write_table)

RESIDUAL_COLUMNS = ('residual', 'iterations', 'converged', 'failed')


def trajectory_path(output_points_path: str, index: int) -> str:
    """ <stem>_t<index><suffix> beside ``output_points_path``. """
    path = Path(output_points_path)
    return str(path.with_name("%s_t%d%s" % (path.stem, index, path.suffix)))


class Transport(BiobbObject):
    """
    | biobb_rnot Transport
    | Pushes points through a trained transport map.
    | Writes T_t(x) = exp_x(t log_x T(x)) for t in [0, 1]: t = 0 is the identity and t = 1 the learned map. A list of t values exports the whole geodesic trajectory, one file per value.

    Args:
        input_checkpoint_path (str): Checkpoint written by the train block. File type: input. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/data/rnot/identity_checkpoint.json>`_. Accepted formats: json (edam:format_3464).
        input_points_path (str): Points to transport, one per row. File type: input. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/data/rnot/points.csv>`_. Accepted formats: csv (edam:format_3752).
        input_target_path (str) (Optional): Point cloud of an empirical target, used as the softmin pool. File type: input. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/data/rnot/target_cloud.csv>`_. Accepted formats: csv (edam:format_3752).
        output_points_path (str): Transported points at t. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot/ref_transported.csv>`_. Accepted formats: csv (edam:format_3752).
        output_residuals_path (str) (Optional): Inner residual, iterations, convergence and failure flags per point. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot/ref_residuals.csv>`_. Accepted formats: csv (edam:format_3752).
        output_manifest_path (str) (Optional): Experiment manifest. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot/ref_transport_manifest.json>`_. Accepted formats: json (edam:format_3464).
        properties (dic - Python dictionary object containing the tool parameters, not input/output files):
            * **schema_version** (*int*) - (1) Version of the configuration layout.
            * **t** (*float*) - (1.0) [0~1|0.05] Interpolation time of output_points_path.
            * **t_values** (*list*) - (None) Extra interpolation times; value i is written to <output stem>_t<i>.csv.
            * **target** (*dict*) - ({"kind": "wrapped_normal", "center": "south_pole", "sigma": 0.3}) Target measure sampled for the softmin pool of RNOT models.
            * **pool_size** (*int*) - (1024) Number of target samples in the pool.
            * **inner** (*dict*) - ({}) Inner solver settings.
            * **seed** (*int*) - (0) Seed of the pool draw.
            * **remove_tmp** (*bool*) - (True) [WF property] Remove temporal files.
            * **restart** (*bool*) - (False) [WF property] Do not execute if output files exist.

    Examples:
        This is a use example of how to use the building block from Python::

            from biobb_rnot.rnot.transport import transport
            prop = { 't': 1.0, 't_values': [0.0, 0.25, 0.5, 0.75, 1.0] }
            transport(input_checkpoint_path='/path/to/checkpoint.json',
                      input_points_path='/path/to/points.csv',
                      output_points_path='/path/to/transported.csv',
                      properties=prop)

    Info:
        * wrapped_software:
            * name: In house
            * license: Apache-2.0
        * ontology:
            * name: EDAM
            * schema: http://edamontology.org/EDAM.owl
    """

    PROPERTIES = ('schema_version', 't', 't_values', 'target', 'pool_size', 'inner', 'seed')

    def __init__(self, input_checkpoint_path: str, input_points_path: str, output_points_path: str,
                 input_target_path: str = None, output_residuals_path: str = None, output_manifest_path: str = None,
                 properties: dict = None, **kwargs) -> None:
        properties = properties or {}

        # Call parent class constructor
        super().__init__(properties)

        # Input/Output files
        self.io_dict = {
            "in": {"input_checkpoint_path": input_checkpoint_path, "input_points_path": input_points_path,
                   "input_target_path": input_target_path},
            "out": {"output_points_path": output_points_path, "output_residuals_path": output_residuals_path,
                    "output_manifest_path": output_manifest_path}
        }

        # Properties specific for BB
        self.schema_version = properties.get('schema_version', SCHEMA_VERSION)
        self.t = properties.get('t', 1.0)
        self.t_values = properties.get('t_values', None)
        self.target = properties.get('target', DEFAULT_TARGET)
        self.pool_size = properties.get('pool_size', 1024)
        self.inner = properties.get('inner', {})
        self.seed = properties.get('seed', 0)
        self.properties = properties

        # Check the properties
        self.check_properties(properties)
        check_strict_properties(self, properties)
        check_measure_section(self.target, 'target')
        for value in [self.t] + list(self.t_values or []):
            if not 0.0 <= float(value) <= 1.0:
                raise ConfigError("Interpolation times must lie in [0, 1], got %r" % value)
        if int(self.pool_size) < 1:
            raise ConfigError("pool_size must be >= 1, got %r" % self.pool_size)
        self.inner_config = InnerSolverConfig.from_dict(self.inner)

    @launchlogger
    def launch(self) -> int:
        """Execute the :class:`Transport <rnot.transport.Transport>` object."""

        # Setup Biobb
        if self.check_restart():
            return 0
        start = time.perf_counter()
        inputs = self.io_dict["in"]
        outputs = self.io_dict["out"]
        check_input_path(inputs["input_checkpoint_path"], "input_checkpoint_path")
        check_input_path(inputs["input_points_path"], "input_points_path")
        check_input_path(inputs["input_target_path"], "input_target_path", required=False)

        model = load_checkpoint(inputs["input_checkpoint_path"])
        manifold = model.manifold
        x, _ = read_points(inputs["input_points_path"])
        x = manifold.check_points(x)
        fu.log("Transporting %d points on %r" % (len(x), manifold), self.out_log, self.global_log)

        if isinstance(model, RcpmModel):
            y = model.transport(x)
            residual = np.zeros(len(x))
            iterations = np.zeros(len(x), dtype=int)
            converged = np.ones(len(x), dtype=bool)
            failed = np.zeros(len(x), dtype=bool)
        else:
            target = measure_from_dict(manifold, self.target, inputs["input_target_path"], 'target')
            pool = target.sample(np.random.default_rng(int(self.seed)), int(self.pool_size))
            result = inner_solve(model, x, pool, self.inner_config, self.out_log)
            y, residual, iterations = result.y_star, result.residual, result.iterations
            converged, failed = result.converged, result.failed
            fu.log("Inner solves: %d converged, %d failed" % (np.count_nonzero(converged), np.count_nonzero(failed)),
                   self.out_log, self.global_log)

        written = {"output_points_path": write_points(outputs["output_points_path"],
                                                      interpolate(manifold, x, y, float(self.t)))}
        for index, value in enumerate(self.t_values or []):
            written["output_points_t%d" % index] = write_points(trajectory_path(outputs["output_points_path"], index),
                                                               interpolate(manifold, x, y, float(value)))
        fu.log("Wrote %d trajectory files" % len(self.t_values or []), self.out_log, self.global_log)
        if outputs["output_residuals_path"]:
            written["output_residuals_path"] = write_table(
                outputs["output_residuals_path"], RESIDUAL_COLUMNS,
                [(float(r), int(i), int(c), int(f)) for r, i, c, f in zip(residual, iterations, converged, failed)])
        if outputs["output_manifest_path"]:
            write_manifest(outputs["output_manifest_path"], 'transport', self.properties, int(self.seed),
                           inputs, written, {'total_seconds': time.perf_counter() - start})

        # Remove temporal files
        self.remove_tmp_files()

        return 0


def transport(input_checkpoint_path: str, input_points_path: str, output_points_path: str,
              input_target_path: str = None, output_residuals_path: str = None, output_manifest_path: str = None,
              properties: dict = None, **kwargs) -> int:
    """Create :class:`Transport <rnot.transport.Transport>` class and
    execute the :meth:`launch() <rnot.transport.Transport.launch>` method."""

    return Transport(input_checkpoint_path=input_checkpoint_path, input_points_path=input_points_path,
                     output_points_path=output_points_path, input_target_path=input_target_path,
                     output_residuals_path=output_residuals_path, output_manifest_path=output_manifest_path,
                     properties=properties, **kwargs).launch()


def main():
    """Command line execution of this building block. Please check the command line documentation."""
    parser = argparse.ArgumentParser(description="Push points through a trained transport map.",
                                     formatter_class=lambda prog: argparse.RawTextHelpFormatter(prog, width=99999))
    parser.add_argument('-c', '--config', required=False, help="This file can be a YAML file, JSON file or JSON string")
    parser.add_argument('--input_target_path', required=False)
    parser.add_argument('--output_residuals_path', required=False)
    parser.add_argument('--output_manifest_path', required=False)

    # Specific args of each building block
    required_args = parser.add_argument_group('required arguments')
    required_args.add_argument('--input_checkpoint_path', required=True)
    required_args.add_argument('--input_points_path', required=True)
    required_args.add_argument('--output_points_path', required=True)

    args = parser.parse_args()
    config = args.config if args.config else None
    properties = settings.ConfReader(config=config).get_prop_dic()

    # Specific call of each building block
    transport(input_checkpoint_path=args.input_checkpoint_path, input_points_path=args.input_points_path,
              output_points_path=args.output_points_path, input_target_path=args.input_target_path,
              output_residuals_path=args.output_residuals_path, output_manifest_path=args.output_manifest_path,
              properties=properties)


if __name__ == '__main__':
    main()
