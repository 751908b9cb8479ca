#!/usr/bin/env python3
"""
SPDRF - Self-Paced Deep Regression Forests
Main entry point for the command-line interface

Trains deep regression forests under a self-paced curriculum that admits
easy samples first and caps the likelihood of samples it judges to be noise.

Usage:
    python spdrf.py <command> [options]

    Commands:
        synth          Generate a synthetic noisy-regression train/test split
        train          Train a model and write checkpoint + pace report
        eval           Evaluate a checkpoint on a dataset CSV
        pace-report    Pretty-print a pace report CSV
        benchmark      Compare all training modes over several seeds

Examples:
    python spdrf.py synth --seed 3
    python spdrf.py train --mode drf-baseline --seed 3
    python spdrf.py train --mode spdrf-capped --preset morph --seed 3
    python spdrf.py eval --checkpoint runs/checkpoint.json --data data/test.csv
    python spdrf.py pace-report runs/pace_report.csv
"""

import argparse
import copy
import json
import os
import sys
from typing import List, Optional

from config import MODES, PRESETS, TARGET_FUNCTIONS, RunConfig, config
from src import __description__, __version__
from src.core.benchmark import BenchmarkRunner, exclusion_diagnostics
from src.core.checkpoint import load_checkpoint, save_checkpoint
from src.core.dataset import load_csv, synth_generate, write_csv
from src.core.trainer import SPDRFTrainer, evaluate
from src.utils.report import PaceReport


def print_banner():
    print(f"🚀 SPDRF v{__version__} - {__description__}")
    print("=" * 50)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdrf",
        description="SPDRF - Self-Paced Deep Regression Forests",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s synth --seed 3                          Write data/train.csv and data/test.csv
  %(prog)s train --mode spdrf-capped --seed 3      Self-paced training with capped likelihood
  %(prog)s eval --data data/test.csv               Evaluate the saved checkpoint
  %(prog)s pace-report runs/pace_report.csv        Show per-pace MAE as a table
        """
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, help='Path to a JSON configuration file')
    common.add_argument('--seed', type=int, help='Seed for every random stream of the run')
    common.add_argument('--debug', action='store_true', help='Per-step output and tracebacks')
    common.add_argument('--quiet', action='store_true', help='No progress bars or status lines')

    commands = parser.add_subparsers(dest='command', metavar='command', required=True)

    synth = commands.add_parser('synth', parents=[common], help='Generate synthetic train/test CSVs')
    synth.add_argument('--train-csv', type=str, help=f'Train split output (default: {config.paths.train_csv})')
    synth.add_argument('--test-csv', type=str, help=f'Test split output (default: {config.paths.test_csv})')
    synth.add_argument('--n-samples', type=int, help='Training samples')
    synth.add_argument('--n-test', type=int, help='Test samples')
    synth.add_argument('--feature-dim', type=int, help='Input dimension')
    synth.add_argument('--target-function', choices=TARGET_FUNCTIONS, help='Clean regression function')
    synth.add_argument('--outlier-fraction', type=float, help='Fraction of train targets to corrupt')

    train = commands.add_parser('train', parents=[common], help='Train and write checkpoint + pace report')
    train.add_argument('--mode', choices=MODES, help='Training mode (default: spdrf-capped)')
    train.add_argument('--preset', choices=sorted(PRESETS), help='Curriculum preset')
    train.add_argument('--train-csv', type=str, help=f'Training CSV (default: {config.paths.train_csv})')
    train.add_argument('--test-csv', type=str, help=f'Test CSV, if present (default: {config.paths.test_csv})')
    train.add_argument('--checkpoint', type=str, help=f'Checkpoint output (default: {config.paths.checkpoint})')
    train.add_argument('--pace-report', type=str, help=f'Pace report output (default: {config.paths.pace_report})')
    train.add_argument('--worst-cases', type=str, help=f'Worst cases output (default: {config.paths.worst_cases})')
    train.add_argument('--checkpoint-dir', type=str, help='Also save a checkpoint after every pace here')
    train.add_argument('--steps-per-pace', type=int, help='Optimizer steps per pace')
    train.add_argument('--pretrain-steps', type=int, help='Optimizer steps of plain forest pretraining')

    evaluate_cmd = commands.add_parser('eval', parents=[common], help='Evaluate a checkpoint on a CSV')
    evaluate_cmd.add_argument('--checkpoint', type=str, help=f'Checkpoint (default: {config.paths.checkpoint})')
    evaluate_cmd.add_argument('--data', type=str, help=f'Dataset CSV (default: {config.paths.test_csv})')

    report = commands.add_parser('pace-report', parents=[common], help='Pretty-print a pace report CSV')
    report.add_argument('path', nargs='?', help=f'Pace report CSV (default: {config.paths.pace_report})')

    bench = commands.add_parser('benchmark', parents=[common], help='Compare all modes over several seeds')
    bench.add_argument('--seeds', type=int, default=5, help='Number of seeds, starting at --seed (default: 5)')
    bench.add_argument('--output', type=str, default='runs/benchmark.csv',
                       help='Per-seed results CSV (default: runs/benchmark.csv)')
    bench.add_argument('--steps-per-pace', type=int, help='Optimizer steps per pace')
    bench.add_argument('--pretrain-steps', type=int, help='Optimizer steps of plain forest pretraining')

    return parser


def load_run_config(args) -> RunConfig:
    """Config file (or built-in defaults) with command-line flags applied on top"""
    if args.config:
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"Configuration file not found: {args.config}")
        run_config = RunConfig.load_from_file(args.config)
    else:
        run_config = copy.deepcopy(config)

    if args.seed is not None:
        run_config.train.seed = args.seed
        run_config.train.backbone.seed = args.seed
        run_config.synthetic.seed = args.seed

    overrides = {
        'mode': (run_config, 'mode'),
        'train_csv': (run_config.paths, 'train_csv'),
        'test_csv': (run_config.paths, 'test_csv'),
        'checkpoint': (run_config.paths, 'checkpoint'),
        'pace_report': (run_config.paths, 'pace_report'),
        'worst_cases': (run_config.paths, 'worst_cases'),
        'steps_per_pace': (run_config.train, 'steps_per_pace'),
        'pretrain_steps': (run_config.train, 'pretrain_steps'),
        'n_samples': (run_config.synthetic, 'n_samples'),
        'n_test': (run_config.synthetic, 'n_test'),
        'feature_dim': (run_config.synthetic, 'feature_dim'),
        'target_function': (run_config.synthetic, 'target_function'),
        'outlier_fraction': (run_config.synthetic, 'outlier_fraction'),
    }
    for flag, (target, attribute) in overrides.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(target, attribute, value)

    if getattr(args, 'preset', None):
        run_config.train = run_config.train.with_preset(args.preset)

    run_config.validate()
    return run_config


def cmd_synth(args, run_config: RunConfig) -> int:
    train_set, test_set = synth_generate(run_config.synthetic)
    write_csv(train_set, run_config.paths.train_csv, run_config.paths.target_column)
    write_csv(test_set, run_config.paths.test_csv, run_config.paths.target_column)
    if not args.quiet:
        print(f"✅ Wrote {len(train_set)} training samples to {run_config.paths.train_csv}")
        print(f"✅ Wrote {len(test_set)} test samples to {run_config.paths.test_csv}")
    return 0


def cmd_train(args, run_config: RunConfig) -> int:
    paths = run_config.paths
    verbose = not args.quiet
    if verbose:
        print_banner()

    train_set = load_csv(paths.train_csv, paths.target_column)
    test_set = load_csv(paths.test_csv, paths.target_column) if os.path.exists(paths.test_csv) else None
    if test_set is None and verbose:
        print(f"⚠️ No test split at {paths.test_csv}; reporting training metrics only")

    train_config = run_config.train.for_mode(run_config.mode)
    train_config.backbone.input_dim = train_set.feature_dim
    if verbose:
        print(f"📄 Mode {run_config.mode}: {len(train_config.pace)} paces, "
              f"exclude {train_config.pace.exclude_fraction:g}, seed {train_config.seed}")

    trainer = SPDRFTrainer(train_config, verbose=verbose, debug=args.debug,
                           checkpoint_dir=args.checkpoint_dir)
    checkpoint, report = trainer.train(train_set, test_set)

    save_checkpoint(checkpoint, paths.checkpoint)
    report.write_csv(paths.pace_report)
    report.write_worst_cases(paths.worst_cases)
    if verbose:
        print(f"💾 Checkpoint: {paths.checkpoint}")
        print(f"💾 Pace report: {paths.pace_report}")

    final = report[-1]
    print(f"Final train MAE: {final.train_mae:.4f}")
    if test_set is not None:
        cs_text = ", ".join(f"CS({level})={value:.2f}%" for level, value in sorted(final.test_cs.items()))
        print(f"Final test MAE: {final.test_mae:.4f}")
        print(f"Final test CS: {cs_text}")

    if train_set.is_outlier is not None and verbose:
        diagnostics = exclusion_diagnostics(checkpoint.selection, train_set.is_outlier)
        print(f"🎯 Excluded {diagnostics.excluded_count} samples; "
              f"outlier precision {diagnostics.precision:.3f}, recall {diagnostics.recall:.3f}")
    return 0


def cmd_eval(args, run_config: RunConfig) -> int:
    checkpoint = load_checkpoint(run_config.paths.checkpoint)
    data_path = args.data or run_config.paths.test_csv
    dataset = load_csv(data_path, run_config.paths.target_column)
    metrics = evaluate(dataset, checkpoint)
    print(json.dumps(metrics.to_dict(), indent=2))
    return 0


def cmd_pace_report(args, run_config: RunConfig) -> int:
    report = PaceReport.read_csv(args.path or run_config.paths.pace_report)
    print(report.format_table())
    return 0


def cmd_benchmark(args, run_config: RunConfig) -> int:
    verbose = not args.quiet
    if verbose:
        print_banner()
    first_seed = run_config.synthetic.seed
    runner = BenchmarkRunner(run_config.train, run_config.synthetic,
                             seeds=range(first_seed, first_seed + args.seeds), verbose=verbose)
    summary = runner.run()
    runner.write_csv(args.output)
    print(summary.describe())
    return 0


COMMANDS = {
    'synth': cmd_synth,
    'train': cmd_train,
    'eval': cmd_eval,
    'pace-report': cmd_pace_report,
    'benchmark': cmd_benchmark,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        run_config = load_run_config(args)
        return COMMANDS[args.command](args, run_config)

    except KeyboardInterrupt:
        print("\n⏹️ Interrupted by user", file=sys.stderr)
        return 1

    except Exception as e:
        print(f"❌ {e}", file=sys.stderr)
        if args.debug:
            import traceback
            traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
