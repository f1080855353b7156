#!/usr/bin/env python3

"""Module containing the Train class and the command line interface."""
import argparse
import time
from pathlib import Path
from biobb_common.generic.biobb_object import BiobbObject
from biobb_common.configuration import settings
from biobb_common.tools import file_utils as fu
from biobb_common.tools.file_utils import launchlogger
from biobb_rnot.core.config import check_keys
from biobb_rnot.core.ctransform import InnerSolverConfig, build_potential_model
from biobb_rnot.core.embedding import LandmarkConfig
from biobb_rnot.core.errors import ConfigError, TrainingAbortedError
from biobb_rnot.core.rcpm import rcpm_train
from biobb_rnot.core.semidual import REPORT_COLUMNS, TrainConfig, train as train_semidual
from biobb_rnot.rnot.common import (DEFAULT_SOURCE, DEFAULT_TARGET, SCHEMA_VERSION, check_input_path,
                                    check_measure_section, check_strict_properties, child_seeds,
                                    default_landmarks_path, manifold_section, measure_from_dict, read_landmarks,
                                    save_checkpoint, write_manifest, write_table)


class Train(BiobbObject):
    """
    | biobb_rnot Train
    | Trains a transport map between two measures on a sphere or a torus.
    | The default model is a neural prepotential on distance-to-landmark features fitted with the semi-dual objective (RNOT). With model rcpm the block fits the discrete c-concave baseline instead.

    Args:
        input_source_path (str) (Optional): Point cloud of the source measure, required when the source kind is empirical. File type: input. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/data/rnot/source_cloud.csv>`_. Accepted formats: csv (edam:format_3752).
        input_target_path (str) (Optional): Point cloud of the target measure, required when the target kind is empirical. File type: input. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/data/rnot/target_cloud.csv>`_. Accepted formats: csv (edam:format_3752).
        input_landmarks_path (str) (Optional): Landmarks to use instead of selecting new ones. File type: input. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/data/rnot/identity_landmarks.csv>`_. Accepted formats: csv (edam:format_3752).
        output_checkpoint_path (str): Trained model. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot/ref_checkpoint.json>`_. Accepted formats: json (edam:format_3464).
        output_landmarks_path (str) (Optional): Landmarks of an RNOT model, written beside the checkpoint. Defaults to <checkpoint stem>_landmarks.csv. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot/ref_checkpoint_landmarks.csv>`_. Accepted formats: csv (edam:format_3752).
        output_report_path (str) (Optional): Per-step training report. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot/ref_train_report.csv>`_. Accepted formats: csv (edam:format_3752).
        output_manifest_path (str) (Optional): Experiment manifest. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot/ref_train_manifest.json>`_. Accepted formats: json (edam:format_3464).
        properties (dic - Python dictionary object containing the tool parameters, not input/output files):
            * **schema_version** (*int*) - (1) Version of the configuration layout.
            * **model** (*str*) - ("rnot") Model family. Values: rnot (neural prepotential), rcpm (discrete c-concave potential).
            * **manifold** (*dict*) - ({"kind": "sphere", "dim": 2}) Manifold kind (sphere, torus) and intrinsic dimension.
            * **source** (*dict*) - ({"kind": "uniform"}) Source measure. Kinds: uniform, wrapped_normal (center, sigma), empirical (kde_bandwidth, kde_max_centers).
            * **target** (*dict*) - ({"kind": "wrapped_normal", "center": "south_pole", "sigma": 0.3}) Target measure, same kinds as the source.
            * **landmarks** (*dict*) - ({}) Landmark selection: M (128), selection (fps), candidates (None), seed (0).
            * **network** (*dict*) - ({}) Network: hidden ([128, 128]), activation (leaky_relu), slope (0.01), beta (1.0), init_seed (0).
            * **inner** (*dict*) - ({}) Inner solver: max_iters, step_size, optimizer (gd, momentum, adam), init_temperature, residual_tol, lse_init...
            * **train** (*dict*) - ({}) Outer loop: batch_size (256), steps (1000), learning_rate (1e-3), seed, checkpoint_every, log_every, max_failure_fraction, max_failure_streak.
            * **rcpm** (*dict*) - ({"m": 68, "gamma": 0.0}) Number of sites and smoothing of the rcpm model.
            * **seed** (*int*) - (None) Root seed. When set it replaces the landmark, network and training seeds with seeds derived from it.
            * **remove_tmp** (*bool*) - (True) [WF property] Remove temporal files.
            * **restart** (*bool*) - (False) [WF property] Do not execute if output files exist.

    Examples:
        This is a use example of how to use the building block from Python::

            from biobb_rnot.rnot.train import train
            prop = { 'manifold': {'kind': 'sphere', 'dim': 2},
                     'landmarks': {'M': 128},
                     'train': {'steps': 1000, 'batch_size': 256} }
            train(output_checkpoint_path='/path/to/checkpoint.json',
                  output_report_path='/path/to/report.csv',
                  properties=prop)

    Info:
        * wrapped_software:
            * name: In house
            * license: Apache-2.0
        * ontology:
            * name: EDAM
            * schema: http://edamontology.org/EDAM.owl
    """

    PROPERTIES = ('schema_version', 'model', 'manifold', 'source', 'target', 'landmarks', 'network', 'inner', 'train',
                  'rcpm', 'seed')

    def __init__(self, output_checkpoint_path: str, input_source_path: str = None, input_target_path: str = None,
                 input_landmarks_path: str = None, output_landmarks_path: str = None,
                 output_report_path: str = None, output_manifest_path: str = None,
                 properties: dict = None, **kwargs) -> None:
        properties = properties or {}

        # Call parent class constructor
        super().__init__(properties)

        # Input/Output files
        self.io_dict = {
            "in": {"input_source_path": input_source_path, "input_target_path": input_target_path,
                   "input_landmarks_path": input_landmarks_path},
            "out": {"output_checkpoint_path": output_checkpoint_path,
                    "output_landmarks_path": output_landmarks_path or default_landmarks_path(output_checkpoint_path),
                    "output_report_path": output_report_path, "output_manifest_path": output_manifest_path}
        }

        # Properties specific for BB
        self.schema_version = properties.get('schema_version', SCHEMA_VERSION)
        self.model = properties.get('model', 'rnot')
        self.manifold = properties.get('manifold', {})
        self.source = properties.get('source', DEFAULT_SOURCE)
        self.target = properties.get('target', DEFAULT_TARGET)
        self.landmarks = properties.get('landmarks', {})
        self.network = properties.get('network', {})
        self.inner = properties.get('inner', {})
        self.train = properties.get('train', {})
        self.rcpm = properties.get('rcpm', {})
        self.seed = properties.get('seed', None)
        self.properties = properties

        # Check the properties
        self.check_properties(properties)
        check_strict_properties(self, properties)
        self._parse_sections()

    def _parse_sections(self) -> None:
        if self.model not in ('rnot', 'rcpm'):
            raise ConfigError("Unknown model %r, expected rnot or rcpm" % self.model)
        if self.model == 'rcpm':
            self.io_dict["out"]["output_landmarks_path"] = None
        self.manifold_obj = manifold_section(self.manifold)
        check_measure_section(self.source, 'source')
        check_measure_section(self.target, 'target')
        check_keys(self.rcpm, ('m', 'gamma'), 'rcpm')
        landmark_seed, init_seed, train_seed = child_seeds(self.seed, 3) if self.seed is not None else (None,) * 3
        landmarks = dict(self.landmarks)
        network = dict(self.network)
        if self.seed is not None:
            landmarks['seed'] = landmark_seed
            network['init_seed'] = init_seed
        self.landmark_config = LandmarkConfig.from_dict(landmarks)
        self.network_config = network
        self.inner_config = InnerSolverConfig.from_dict(self.inner)
        overrides = {'seed': train_seed} if self.seed is not None else {}
        self.train_config = TrainConfig.from_dict(self.train, **overrides)

    @launchlogger
    def launch(self) -> int:
        """Execute the :class:`Train <rnot.train.Train>` object."""

        # Setup Biobb
        if self.check_restart():
            return 0
        start = time.perf_counter()
        inputs = self.io_dict["in"]
        outputs = self.io_dict["out"]
        for name in inputs:
            check_input_path(inputs[name], name, required=False)

        manifold = self.manifold_obj
        source = measure_from_dict(manifold, self.source, inputs["input_source_path"], 'source')
        target = measure_from_dict(manifold, self.target, inputs["input_target_path"], 'target')
        fu.log("Training %s on %r: %r -> %r" % (self.model, manifold, source, target), self.out_log, self.global_log)

        checkpoint = outputs["output_checkpoint_path"]
        landmarks_path = outputs["output_landmarks_path"]
        try:
            if self.model == 'rnot':
                if inputs["input_landmarks_path"]:
                    landmarks = read_landmarks(inputs["input_landmarks_path"], manifold)
                    fu.log("Read %d landmarks from %s" % (landmarks.M, inputs["input_landmarks_path"]),
                           self.out_log, self.global_log)
                else:
                    landmarks = self.landmark_config.select(manifold)
                    fu.log("Selected %d %s landmarks" % (landmarks.M, landmarks.selection), self.out_log, self.global_log)
                model_init = build_potential_model(landmarks, self.network_config)
                stem = Path(checkpoint)

                def checkpoint_fn(model, step):
                    path = stem.with_name("%s_step%d%s" % (stem.stem, step, stem.suffix))
                    fu.log("Checkpoint at step %d: %s" % (step, path), self.out_log, self.global_log)
                    return save_checkpoint(path, model, landmarks_path)

                model, report = train_semidual(source, target, model_init, self.train_config, self.inner_config,
                                               checkpoint_fn, self.out_log, self.global_log)
            else:
                model, report = rcpm_train(source, target, int(self.rcpm.get('m', 68)),
                                           float(self.rcpm.get('gamma', 0.0)), self.train_config, self.inner_config,
                                           self.out_log, self.global_log)
        except TrainingAbortedError as err:
            fu.log("Training aborted at step %d: %s. Last good checkpoint: %s"
                   % (err.step, err, err.last_good_checkpoint), self.out_log, self.global_log)
            return 2

        save_checkpoint(checkpoint, model, landmarks_path)
        fu.log("Checkpoint written: %s" % checkpoint, self.out_log, self.global_log)
        if outputs["output_report_path"]:
            write_table(outputs["output_report_path"], REPORT_COLUMNS, report.rows())
        if outputs["output_manifest_path"]:
            written = dict(outputs)
            written.update({"checkpoint_%d" % i: path for i, path in enumerate(report.checkpoints)})
            write_manifest(outputs["output_manifest_path"], 'train', self.properties, self.train_config.seed,
                           inputs, written, {'total_seconds': time.perf_counter() - start})

        # Remove temporal files
        self.remove_tmp_files()

        return 0


def train(output_checkpoint_path: str, input_source_path: str = None, input_target_path: str = None,
          input_landmarks_path: str = None, output_landmarks_path: str = None, output_report_path: str = None,
          output_manifest_path: str = None, properties: dict = None, **kwargs) -> int:
    """Create :class:`Train <rnot.train.Train>` class and
    execute the :meth:`launch() <rnot.train.Train.launch>` method."""

    return Train(output_checkpoint_path=output_checkpoint_path, input_source_path=input_source_path,
                 input_target_path=input_target_path, input_landmarks_path=input_landmarks_path,
                 output_landmarks_path=output_landmarks_path, output_report_path=output_report_path,
                 output_manifest_path=output_manifest_path, properties=properties, **kwargs).launch()


def main():
    """Command line execution of this building block. Please check the command line documentation."""
    parser = argparse.ArgumentParser(description="Train an RNOT or RCPM transport map.",
                                     formatter_class=lambda prog: argparse.RawTextHelpFormatter(prog, width=99999))
    parser.add_argument('-c', '--config', required=False, help="This file can be a YAML file, JSON file or JSON string")
    parser.add_argument('--input_source_path', required=False)
    parser.add_argument('--input_target_path', required=False)
    parser.add_argument('--input_landmarks_path', required=False)
    parser.add_argument('--output_landmarks_path', required=False)
    parser.add_argument('--output_report_path', required=False)
    parser.add_argument('--output_manifest_path', required=False)

    # Specific args of each building block
    required_args = parser.add_argument_group('required arguments')
    required_args.add_argument('--output_checkpoint_path', required=True)

    args = parser.parse_args()
    config = args.config if args.config else None
    properties = settings.ConfReader(config=config).get_prop_dic()

    # Specific call of each building block
    train(output_checkpoint_path=args.output_checkpoint_path, input_source_path=args.input_source_path,
          input_target_path=args.input_target_path, input_landmarks_path=args.input_landmarks_path,
          output_landmarks_path=args.output_landmarks_path, output_report_path=args.output_report_path,
          output_manifest_path=args.output_manifest_path, properties=properties)


if __name__ == '__main__':
    main()
