#!/usr/bin/env python3

"""Umbrella command line ``rnot`` over the biobb_rnot building blocks.

Exit codes: 0 success, 1 malformed configuration or missing input, 2 training
aborted, 3 unreliable evaluation report (the report is still written).
"""
import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence
from biobb_common.configuration import settings
from biobb_rnot.rnot.evaluate import evaluate
from biobb_rnot.rnot.train import train
from biobb_rnot.rnot.transport import transport
from biobb_rnot.rnot_extra.diagnose_embedding import diagnose_embedding
from biobb_rnot.rnot_extra.quantize import quantize
from biobb_rnot.rnot_extra.sweep import sweep

THREADED_COMMANDS = ('eval', 'sweep', 'quantize')


def _train(args: argparse.Namespace, properties: dict, out: Path) -> int:
    return train(output_checkpoint_path=str(out / 'checkpoint.json'), input_source_path=args.source,
                 input_target_path=args.target, input_landmarks_path=args.landmarks,
                 output_landmarks_path=str(out / 'checkpoint_landmarks.csv'),
                 output_report_path=str(out / 'train_report.csv'),
                 output_manifest_path=str(out / 'train_manifest.json'), properties=properties)


def _eval(args: argparse.Namespace, properties: dict, out: Path) -> int:
    return evaluate(input_checkpoint_path=args.checkpoint, output_report_path=str(out / 'eval_report.json'),
                    input_source_path=args.source, input_target_path=args.target,
                    output_table_path=str(out / 'eval_report.csv'),
                    output_manifest_path=str(out / 'eval_manifest.json'), properties=properties)


def _transport(args: argparse.Namespace, properties: dict, out: Path) -> int:
    if args.t is not None:
        properties['t'] = args.t
    return transport(input_checkpoint_path=args.checkpoint, input_points_path=args.input,
                     output_points_path=args.output or str(out / 'transported.csv'), input_target_path=args.target,
                     output_residuals_path=str(out / 'residuals.csv'),
                     output_manifest_path=str(out / 'transport_manifest.json'), properties=properties)


def _diagnose_embedding(args: argparse.Namespace, properties: dict, out: Path) -> int:
    return diagnose_embedding(output_diagnostics_path=str(out / 'diagnostics.csv'),
                              output_landmarks_path=str(out / 'landmarks.csv'),
                              output_manifest_path=str(out / 'diagnose_manifest.json'), properties=properties)


def _sweep(args: argparse.Namespace, properties: dict, out: Path) -> int:
    return sweep(output_table_path=str(out / 'sweep.csv'), input_manifest_path=args.resume,
                 output_manifest_path=str(out / 'sweep_manifest.json'), properties=properties)


def _quantize(args: argparse.Namespace, properties: dict, out: Path) -> int:
    return quantize(output_table_path=str(out / 'quantization.csv'), input_points_path=args.input,
                    output_fit_path=str(out / 'quantization_fit.json'),
                    output_manifest_path=str(out / 'quantize_manifest.json'), properties=properties)


COMMANDS: Dict[str, Callable[[argparse.Namespace, dict, Path], int]] = {
    'train': _train,
    'eval': _eval,
    'transport': _transport,
    'diagnose-embedding': _diagnose_embedding,
    'sweep': _sweep,
    'quantize': _quantize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='rnot', description="Riemannian neural optimal transport on spheres and tori.",
                                     formatter_class=lambda prog: argparse.RawTextHelpFormatter(prog, width=99999))
    subparsers = parser.add_subparsers(dest='command', required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-c', '--config', required=False, help="This file can be a YAML file, JSON file or JSON string")
    common.add_argument('--seed', type=int, required=False, help="Root seed, overrides the configuration")
    common.add_argument('--out', default='.', help="Output directory")
    common.add_argument('--threads', type=int, required=False,
                        help="Worker threads; defaults to the RNOT_THREADS environment variable, then 1")

    train_parser = subparsers.add_parser('train', parents=[common], help="Train a transport map")
    train_parser.add_argument('--source', help="Point CSV of an empirical source")
    train_parser.add_argument('--target', help="Point CSV of an empirical target")
    train_parser.add_argument('--landmarks', help="Landmark CSV to use instead of a new selection")

    eval_parser = subparsers.add_parser('eval', parents=[common], help="Evaluate a checkpoint")
    eval_parser.add_argument('--checkpoint', required=True)
    eval_parser.add_argument('--source', help="Point CSV of an empirical source")
    eval_parser.add_argument('--target', help="Point CSV of an empirical target")

    transport_parser = subparsers.add_parser('transport', parents=[common], help="Transport points")
    transport_parser.add_argument('--checkpoint', required=True)
    transport_parser.add_argument('--input', required=True, help="Point CSV to transport")
    transport_parser.add_argument('--output', help="Output point CSV, defaults to <out>/transported.csv")
    transport_parser.add_argument('--t', type=float, help="Interpolation time in [0, 1]")
    transport_parser.add_argument('--target', help="Point CSV of an empirical target")

    subparsers.add_parser('diagnose-embedding', parents=[common], help="Landmark embedding diagnostics")

    sweep_parser = subparsers.add_parser('sweep', parents=[common], help="Dimension sweep")
    sweep_parser.add_argument('--resume', help="Manifest of an earlier sweep with the same settings")

    quantize_parser = subparsers.add_parser('quantize', parents=[common], help="Quantization error table")
    quantize_parser.add_argument('--input', help="Point CSV of an empirical measure")
    return parser


def run(args: argparse.Namespace) -> int:
    properties = settings.ConfReader(config=args.config).get_prop_dic() if args.config else {}
    properties = dict(properties or {})
    if args.seed is not None:
        properties['seed'] = args.seed
    if args.threads is not None and args.command in THREADED_COMMANDS:
        properties['threads'] = args.threads
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    properties.setdefault('path', str(out))
    return COMMANDS[args.command](args, properties, out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Command line execution of the ``rnot`` command. Returns the exit code."""
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (ValueError, OSError) as err:
        print("rnot %s: %s" % (args.command, err), file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
