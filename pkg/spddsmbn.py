#!/usr/bin/env python3
"""
SPDDSMBN - SPD domain-specific momentum batch normalization toolkit

Unified CLI for generating synthetic multi-domain data, training and
evaluating TSMNet variants, running ablations, convergence experiments and
the gradient check suite.

Usage:
    python spddsmbn.py gen --config configs/default.json --out runs/dataset
    python spddsmbn.py train --config configs/default.json --out runs/train
    python spddsmbn.py eval --config configs/default.json --out runs/eval
    python spddsmbn.py ablate --config configs/default.json --out runs/ablation
    python spddsmbn.py converge --config configs/default.json --out runs/convergence
    python spddsmbn.py gradcheck --config configs/tiny.json

Exit codes are listed in docs/FORMATS.md.
"""

import argparse
import os
import sys

from common import console
from common.config import config
from common.exceptions import ExitCode, SpdDsmbnException


COMMANDS = ("gen", "train", "eval", "ablate", "converge", "gradcheck")
THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def parse_arguments(argv=None):
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        description="SPDDSMBN - SPD domain-specific momentum batch normalization toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Commands:
  gen        - Generate the synthetic multi-domain dataset
  train      - Train one model arm and write a checkpoint and training log
  eval       - Adapt a checkpoint to the target domains and score it
  ablate     - Compare the ablation arms with the proposed model
  converge   - Run the running-mean convergence experiments
  gradcheck  - Compare every backward pass with finite differences

Examples:
  python spddsmbn.py gen --config configs/default.json --out runs/dataset
  python spddsmbn.py train --config configs/default.json --seed-override 3
  python spddsmbn.py gradcheck --config configs/tiny.json --threads 2

Environment:
  SPDDSMBN_LOG_LEVEL    debug, info, warning or error
  SPDDSMBN_OUTPUT_DIR   default root of output directories
  SPDDSMBN_EIG_SOLVER   lapack or jacobi
  SPDDSMBN_THREADS      default BLAS thread count
        """
    )
    parser.add_argument("command", choices=COMMANDS, help="Command to run")
    parser.add_argument("--config", help="Run configuration (JSON); defaults are used when omitted")
    parser.add_argument("--out", help="Output directory (default: $SPDDSMBN_OUTPUT_DIR/<command>)")
    parser.add_argument("--seed-override", type=int, help="Replace the configuration's seed")
    parser.add_argument("--threads", type=int, help="BLAS threads (overrides SPDDSMBN_THREADS)")
    return parser.parse_args(argv)


def configure_threads(threads):
    """Pin BLAS threads; must run before numpy is imported"""
    count = config.threads if threads is None else max(1, threads)
    for name in THREAD_VARIABLES:
        os.environ[name] = str(count)
    return count


def execute(args) -> bool:
    # heavy imports happen after the thread variables are set
    from src.run_config import load_run_config
    from utils.output_dir import locked_output_dir, prepare_output_dir
    from workflows import WorkflowContext, WorkflowFactory

    run_config = load_run_config(args.config, args.seed_override)
    workflow = WorkflowFactory.create_workflow(args.command)
    out_dir = prepare_output_dir(args.out, workflow.default_dir)
    console.info(f"{args.command}: seed {run_config.seed}, config {run_config.hash}, output {out_dir}")

    with locked_output_dir(out_dir):
        return workflow.run(WorkflowContext(run_config, out_dir, args.config))


def main(argv=None) -> int:
    """Main entry point; returns the process exit code"""
    args = parse_arguments(argv)
    configure_threads(args.threads)
    try:
        success = execute(args)
        return int(ExitCode.SUCCESS if success else ExitCode.FAILURE)
    except SpdDsmbnException as e:
        console.error(e.get_user_friendly_message())
        return int(e.exit_code)
    except KeyboardInterrupt:
        console.error("Execution interrupted by user")
        return int(ExitCode.INTERRUPTED)
    except Exception as e:
        console.error(f"Unexpected failure: {type(e).__name__}: {e}")
        return int(ExitCode.FAILURE)


if __name__ == "__main__":
    sys.exit(main())
