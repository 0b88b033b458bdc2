#!/usr/bin/env python3
"""
Main entry point for cyclic causal discovery under missing-not-at-random data.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

# Add current directory to path for imports
sys.path.insert(0, str(Path(__file__).parent))

# Set UTF-8 encoding for subprocess calls (fixes Windows encoding issues)
os.environ["PYTHONIOENCODING"] = "utf-8"

from shared.constants import EXIT_CODES, LOGGING_CONFIG, OUTPUT_ENV_VAR, THREADS_ENV_VAR  # noqa: E402
from shared.exceptions import CausalEMError  # noqa: E402


def _setup_logging(verbose: bool) -> None:
    level = LOGGING_CONFIG["verbose_level"] if verbose else LOGGING_CONFIG["level"]
    logging.basicConfig(level=getattr(logging, level), format=LOGGING_CONFIG["format"])
    logging.captureWarnings(True)


def _add_common(parser: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        parser.add_argument("--config", default=None, help="Experiment JSON file (default: built-in defaults)")
    parser.add_argument("--out", default=None, help=f"Output directory (default: ${OUTPUT_ENV_VAR} or ./output)")
    parser.add_argument("--seed", type=int, default=None, help="Override the master seed of the instance and training")
    parser.add_argument("--threads", type=int, default=None, help=f"Worker threads (default: ${THREADS_ENV_VAR} or 1)")
    parser.add_argument("--verbose", action="store_true", help="Log progress messages (INFO level)")
    parser.add_argument("--no-progress", action="store_true", help="Hide progress bars")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Cyclic causal discovery from interventional data with MNAR missing values")
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", help="Generate a synthetic instance and its coarsened dataset")
    _add_common(simulate)

    fit = subparsers.add_parser("fit", help="Run penalized EM on a dataset")
    fit.add_argument("dataset", help="Dataset CSV (x_1..x_K, r_1..r_K, s_1..s_K)")
    _add_common(fit)
    fit.add_argument("--pre-imputed", action="store_true", help="Values were imputed externally; skip the E-step")
    fit.add_argument("--diagnostics", action="store_true", help="Write log-determinant estimator diagnostics")

    evaluate = subparsers.add_parser("evaluate", help="Score a checkpoint against a truth sidecar")
    evaluate.add_argument("checkpoint", help="Checkpoint JSON written by 'fit' (or a truth sidecar)")
    evaluate.add_argument("--truth", required=True, help="Truth sidecar written by 'simulate'")
    evaluate.add_argument("--test", default=None, help="Held-out dataset for the predictive log-likelihood")
    _add_common(evaluate, config=False)

    benchmark = subparsers.add_parser("benchmark", help="Run the missing-rate sweep and write the results table")
    _add_common(benchmark)
    benchmark.add_argument("--resume", action="store_true", help="Resume from the sweep checkpoint without prompting")
    benchmark.add_argument("--no-checkpoint", action="store_true", help="Disable checkpointing and resume (default: enabled)")
    benchmark.add_argument(
        "--checkpoint-ttl-hours",
        type=int,
        default=None,
        help="Checkpoint expiry in hours (default: from config, 48). Use 0 to never expire.",
    )
    return parser


def main(argv=None):
    """Main function."""
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    progress = not args.no_progress

    try:
        from cli_runner import cmd_benchmark, cmd_evaluate, cmd_fit, cmd_simulate

        if args.command == "simulate":
            cmd_simulate(args.config, out=args.out, seed=args.seed, threads=args.threads, progress=progress)
        elif args.command == "fit":
            cmd_fit(
                args.dataset,
                args.config,
                out=args.out,
                pre_imputed=args.pre_imputed,
                diagnostics=args.diagnostics,
                seed=args.seed,
                threads=args.threads,
                progress=progress,
            )
        elif args.command == "evaluate":
            cmd_evaluate(args.checkpoint, args.truth, out=args.out, test_path=args.test)
        elif args.command == "benchmark":
            cmd_benchmark(
                args.config,
                out=args.out,
                seed=args.seed,
                threads=args.threads,
                resume=args.resume,
                checkpoint=not args.no_checkpoint,
                checkpoint_ttl_hours=args.checkpoint_ttl_hours,
                progress=progress,
            )
    except CausalEMError as e:
        print(f"Error running {args.command}: {e}", file=sys.stderr)
        return EXIT_CODES[e.exit_key]
    except ImportError as e:
        print(f"Error importing modules: {e}", file=sys.stderr)
        print("Please ensure you have installed the required dependencies:", file=sys.stderr)
        print("  pip install -r requirements.txt", file=sys.stderr)
        return EXIT_CODES["unexpected"]
    except Exception as e:
        logging.getLogger("main").exception("Unexpected failure")
        print(f"Error running {args.command}: {e}", file=sys.stderr)
        return EXIT_CODES["unexpected"]
    return EXIT_CODES["success"]


if __name__ == "__main__":
    sys.exit(main())
