#!/usr/bin/env python3

"""Module containing the Evaluate class and the command line interface."""
import argparse
import time
from biobb_common.generic.biobb_object import BiobbObject
from biobb_common.configuration import settings
from biobb_common.tools import file_utils as fu
from biobb_common.tools.file_utils import launchlogger
from biobb_rnot.core.ctransform import InnerSolverConfig
from biobb_rnot.core.evaluation import EvalConfig, evaluate as evaluate_model
from biobb_rnot.core.errors import ManifoldMismatchError
from biobb_rnot.rnot.common import (DEFAULT_SOURCE, DEFAULT_TARGET, SCHEMA_VERSION, check_input_path,
                                    check_measure_section, check_strict_properties, load_checkpoint,
                                    manifold_section, measure_from_dict, resolve_threads, write_json,
                                    write_manifest, write_table)

REPORT_FIELDS = ('kl_mean', 'kl_ci', 'ess_mean', 'ess_ci', 'z_hat', 'mean_cost', 'monge_gap_rel', 'gated_fraction',
                 'n_samples', 'n_batches', 'unreliable')


class Evaluate(BiobbObject):
    """
    | biobb_rnot Evaluate
    | Evaluates a trained transport map.
    | Estimates the KL divergence and the effective sample size of the pushforward against the target density, with confidence intervals over independent batches, together with the mean transport cost and the relative Monge gap. Without densities (empirical measures without kernel bandwidth) only the cost and the gap are reported.

    Args:
        input_checkpoint_path (str): Checkpoint written by the train block. File type: input. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/data/rnot/identity_checkpoint.json>`_. Accepted formats: json (edam:format_3464).
        input_source_path (str) (Optional): Point cloud of an empirical source. File type: input. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/data/rnot/source_cloud.csv>`_. Accepted formats: csv (edam:format_3752).
        input_target_path (str) (Optional): Point cloud of an empirical target. File type: input. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/data/rnot/target_cloud.csv>`_. Accepted formats: csv (edam:format_3752).
        output_report_path (str): Evaluation report. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot/ref_eval_report.json>`_. Accepted formats: json (edam:format_3464).
        output_table_path (str) (Optional): The same report as a one-row table. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot/ref_eval_report.csv>`_. Accepted formats: csv (edam:format_3752).
        output_manifest_path (str) (Optional): Experiment manifest. File type: output. `Sample file <https://github.com/bioexcel/biobb_rnot/raw/master/biobb_rnot/test/reference/rnot/ref_eval_manifest.json>`_. Accepted formats: json (edam:format_3464).
        properties (dic - Python dictionary object containing the tool parameters, not input/output files):
            * **schema_version** (*int*) - (1) Version of the configuration layout.
            * **manifold** (*dict*) - (None) Expected manifold; it must match the checkpoint when given.
            * **source** (*dict*) - ({"kind": "uniform"}) Source measure.
            * **target** (*dict*) - ({"kind": "wrapped_normal", "center": "south_pole", "sigma": 0.3}) Target measure.
            * **inner** (*dict*) - ({}) Inner solver settings used for the transports.
            * **eval** (*dict*) - ({}) n_samples (1024), n_batches (5), fd_step (1e-5), residual_gate (1e-2), pool_size (1024), seed (0).
            * **seed** (*int*) - (None) Root seed of the batches; replaces eval.seed when set.
            * **threads** (*int*) - (None) Batches evaluated in parallel. Defaults to the RNOT_THREADS environment variable, then 1.
            * **remove_tmp** (*bool*) - (True) [WF property] Remove temporal files.
            * **restart** (*bool*) - (False) [WF property] Do not execute if output files exist.

    Examples:
        This is a use example of how to use the building block from Python::

            from biobb_rnot.rnot.evaluate import evaluate
            prop = { 'eval': {'n_samples': 1024, 'n_batches': 5} }
            evaluate(input_checkpoint_path='/path/to/checkpoint.json',
                     output_report_path='/path/to/report.json',
                     properties=prop)

    Info:
        * wrapped_software:
            * name: In house
            * license: Apache-2.0
        * ontology:
            * name: EDAM
            * schema: http://edamontology.org/EDAM.owl
    """

    PROPERTIES = ('schema_version', 'manifold', 'source', 'target', 'inner', 'eval', 'seed', 'threads')

    def __init__(self, input_checkpoint_path: str, output_report_path: str, input_source_path: str = None,
                 input_target_path: str = None, output_table_path: str = None, output_manifest_path: str = None,
                 properties: dict = None, **kwargs) -> None:
        properties = properties or {}

        # Call parent class constructor
        super().__init__(properties)

        # Input/Output files
        self.io_dict = {
            "in": {"input_checkpoint_path": input_checkpoint_path, "input_source_path": input_source_path,
                   "input_target_path": input_target_path},
            "out": {"output_report_path": output_report_path, "output_table_path": output_table_path,
                    "output_manifest_path": output_manifest_path}
        }

        # Properties specific for BB
        self.schema_version = properties.get('schema_version', SCHEMA_VERSION)
        self.manifold = properties.get('manifold', None)
        self.source = properties.get('source', DEFAULT_SOURCE)
        self.target = properties.get('target', DEFAULT_TARGET)
        self.inner = properties.get('inner', {})
        self.eval = properties.get('eval', {})
        self.seed = properties.get('seed', None)
        self.threads = properties.get('threads', None)
        self.properties = properties

        # Check the properties
        self.check_properties(properties)
        check_strict_properties(self, properties)
        check_measure_section(self.source, 'source')
        check_measure_section(self.target, 'target')
        self.inner_config = InnerSolverConfig.from_dict(self.inner)
        overrides = {'seed': int(self.seed)} if self.seed is not None else {}
        self.eval_config = EvalConfig.from_dict(self.eval, **overrides)
        self.n_threads = resolve_threads(self.threads)

    @launchlogger
    def launch(self) -> int:
        """Execute the :class:`Evaluate <rnot.evaluate.Evaluate>` object."""

        # Setup Biobb
        if self.check_restart():
            return 0
        start = time.perf_counter()
        inputs = self.io_dict["in"]
        outputs = self.io_dict["out"]
        check_input_path(inputs["input_checkpoint_path"], "input_checkpoint_path")
        check_input_path(inputs["input_source_path"], "input_source_path", required=False)
        check_input_path(inputs["input_target_path"], "input_target_path", required=False)

        model = load_checkpoint(inputs["input_checkpoint_path"])
        manifold = model.manifold
        if self.manifold is not None and manifold_section(self.manifold) != manifold:
            raise ManifoldMismatchError("Checkpoint model lives on %r, configuration expects %r"
                                        % (manifold, manifold_section(self.manifold)))
        source = measure_from_dict(manifold, self.source, inputs["input_source_path"], 'source')
        target = measure_from_dict(manifold, self.target, inputs["input_target_path"], 'target')
        fu.log("Evaluating %s on %r with %d threads" % (inputs["input_checkpoint_path"], manifold, self.n_threads),
               self.out_log, self.global_log)
        if not (source.has_density and target.has_density):
            fu.log("A measure has no density: reporting cost and Monge gap only", self.out_log, self.global_log)

        report = evaluate_model(model, source, target, self.eval_config, self.inner_config, self.n_threads,
                                self.out_log, self.global_log)
        data = report.to_dict()
        write_json(outputs["output_report_path"], data)
        if outputs["output_table_path"]:
            write_table(outputs["output_table_path"], REPORT_FIELDS, [[data[name] for name in REPORT_FIELDS]])
        if outputs["output_manifest_path"]:
            write_manifest(outputs["output_manifest_path"], 'eval', self.properties, self.eval_config.seed,
                           inputs, outputs, {'total_seconds': time.perf_counter() - start})

        # Remove temporal files
        self.remove_tmp_files()

        if report.unreliable:
            fu.log("Report flagged unreliable: %.1f%% of the points were excluded" % (100 * report.gated_fraction),
                   self.out_log, self.global_log)
            return 3
        return 0


def evaluate(input_checkpoint_path: str, output_report_path: str, input_source_path: str = None,
             input_target_path: str = None, output_table_path: str = None, output_manifest_path: str = None,
             properties: dict = None, **kwargs) -> int:
    """Create :class:`Evaluate <rnot.evaluate.Evaluate>` class and
    execute the :meth:`launch() <rnot.evaluate.Evaluate.launch>` method."""

    return Evaluate(input_checkpoint_path=input_checkpoint_path, output_report_path=output_report_path,
                    input_source_path=input_source_path, input_target_path=input_target_path,
                    output_table_path=output_table_path, output_manifest_path=output_manifest_path,
                    properties=properties, **kwargs).launch()


def main():
    """Command line execution of this building block. Please check the command line documentation."""
    parser = argparse.ArgumentParser(description="Evaluate a trained transport map.",
                                     formatter_class=lambda prog: argparse.RawTextHelpFormatter(prog, width=99999))
    parser.add_argument('-c', '--config', required=False, help="This file can be a YAML file, JSON file or JSON string")
    parser.add_argument('--input_source_path', required=False)
    parser.add_argument('--input_target_path', required=False)
    parser.add_argument('--output_table_path', required=False)
    parser.add_argument('--output_manifest_path', required=False)

    # Specific args of each building block
    required_args = parser.add_argument_group('required arguments')
    required_args.add_argument('--input_checkpoint_path', required=True)
    required_args.add_argument('--output_report_path', required=True)

    args = parser.parse_args()
    config = args.config if args.config else None
    properties = settings.ConfReader(config=config).get_prop_dic()

    # Specific call of each building block
    evaluate(input_checkpoint_path=args.input_checkpoint_path, output_report_path=args.output_report_path,
             input_source_path=args.input_source_path, input_target_path=args.input_target_path,
             output_table_path=args.output_table_path, output_manifest_path=args.output_manifest_path,
             properties=properties)


if __name__ == '__main__':
    main()
