"""
Command-line front end.

    leak synth    --out corpus/ [--seed 7]
    leak features --manifest corpus/train_manifest.csv --out train.csv
    leak select   --manifest corpus/train_manifest.csv --out selection/
    leak train    --features train.csv --out model.txt [--holdout SESSION ...]
    leak detect   --model model.txt --features train.csv --input corpus/detect_manifest.csv --out detect/
    leak report   --model model.txt --manifest corpus/test_manifest.csv --out report/

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from .config import ConfigError, load_corpus_config, load_pipeline_config
from . import pipeline

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class UsageError(Exception):
    """Bad command line."""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(',') if v.strip()]


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument('--config', help='key = value configuration file')
    parser.add_argument('--seed', type=int, help='Master random seed')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='Warnings and errors only')


def _add_window(parser: argparse.ArgumentParser):
    parser.add_argument('--duration', type=float, help='Window length (s)')
    parser.add_argument('--overlap', type=float, help='Window overlap (s)')
    parser.add_argument('--feature-kind', dest='feature_kind', choices=['periodogram', 'welch'])
    parser.add_argument('--band-lo', dest='band_lo', type=float, help='Lower band edge (Hz)')
    parser.add_argument('--band-hi', dest='band_hi', type=float, help='Upper band edge (Hz)')


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='leak', description='Acoustic gas-leak detection pipeline')
    commands = parser.add_subparsers(dest='command', required=True)

    synth = commands.add_parser('synth', help='Write a synthetic corpus')
    _add_common(synth)
    synth.add_argument('--out', required=True, help='Output directory')
    synth.add_argument('--sample-rate', dest='sample_rate', type=int)
    synth.add_argument('--noise-level', dest='noise_level', type=float)
    synth.add_argument('--recording-seconds', dest='recording_seconds', type=float)

    features = commands.add_parser('features', help='Extract window features from a manifest')
    _add_common(features)
    _add_window(features)
    features.add_argument('--manifest', required=True)
    features.add_argument('--out', required=True, help='Feature CSV')

    select = commands.add_parser('select', help='Grid-searched CV over windows, algorithms and features')
    _add_common(select)
    _add_window(select)
    select.add_argument('--features', nargs='+', default=[], help='Precomputed feature CSVs')
    select.add_argument('--manifest', help='Manifest to extract the window grid from')
    select.add_argument('--out', required=True, help='Output directory')
    select.add_argument('--folds', type=int)
    select.add_argument('--algorithms', type=_str_list)
    select.add_argument('--durations', type=_float_list)
    select.add_argument('--overlaps', type=_float_list)
    select.add_argument('--respect-sessions', dest='respect_sessions', action='store_true', default=None,
                        help='Keep each session on one side of every fold')

    train = commands.add_parser('train', help='Train a classifier on a feature CSV')
    _add_common(train)
    train.add_argument('--features', required=True)
    train.add_argument('--out', required=True, help='Model file')
    train.add_argument('--algorithm', choices=['rf', 'gbt'])
    train.add_argument('--holdout', nargs='+', help='Session ids excluded from training')
    train.add_argument('--n-jobs', dest='n_jobs', type=int)

    detect = commands.add_parser('detect', help='Score and smooth recordings')
    _add_common(detect)
    _add_window(detect)
    detect.add_argument('--model', required=True)
    detect.add_argument('--features', required=True, help='Training feature CSV (emission estimates)')
    detect.add_argument('--input', nargs='+', required=True, help='WAV files or manifests')
    detect.add_argument('--out', required=True, help='Output directory')
    detect.add_argument('--thresholds', type=_float_list)
    detect.add_argument('--epsilon', type=float)
    detect.add_argument('--delta', type=float)
    detect.add_argument('--no-plots', dest='plots', action='store_false')

    report = commands.add_parser('report', help='Precision per leak flow')
    _add_common(report)
    report.add_argument('--model', required=True)
    report.add_argument('--manifest', required=True)
    report.add_argument('--out', required=True, help='Output directory')
    report.add_argument('--threshold', dest='report_threshold', type=float)
    return parser


_PIPELINE_KEYS = ('seed', 'duration', 'overlap', 'feature_kind', 'band_lo', 'band_hi', 'folds',
                  'algorithms', 'durations', 'overlaps', 'respect_sessions', 'algorithm', 'holdout',
                  'n_jobs', 'thresholds', 'epsilon', 'delta', 'report_threshold')
_CORPUS_KEYS = ('seed', 'sample_rate', 'noise_level', 'recording_seconds')


def _overrides(args: argparse.Namespace, keys: Sequence[str]) -> Dict[str, Any]:
    return {key: getattr(args, key) for key in keys if getattr(args, key, None) is not None}


def configure_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def run(args: argparse.Namespace):
    if args.command == 'synth':
        corpus = load_corpus_config(args.config, _overrides(args, _CORPUS_KEYS))
        pipeline.run_synth(corpus, args.out)
        return

    config = load_pipeline_config(args.config, _overrides(args, _PIPELINE_KEYS))
    if args.command == 'features':
        pipeline.run_features(args.manifest, config, args.out)
    elif args.command == 'select':
        pipeline.run_select(config, args.out, features=args.features, manifest=args.manifest)
    elif args.command == 'train':
        pipeline.run_train(args.features, config, args.out)
    elif args.command == 'detect':
        pipeline.run_detect(args.model, args.input, args.features, config, args.out, plots=args.plots)
    elif args.command == 'report':
        pipeline.run_report(args.model, args.manifest, config, args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"leak: error: {exc}\n")
        return EXIT_USAGE

    configure_logging(args.verbose, args.quiet)
    try:
        run(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
