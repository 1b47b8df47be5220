"""
Command Line Interface for jumpfbsde.

This module provides a command-line interface for running experiments
(simulate, solve-bsde, optimal-strategy, verify, report) and managing
configurations.

Exit codes: 0 success, 1 unexpected error, 2 configuration error,
3 numerical or domain error, 4 verification failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from jumpfbsde import __version__, get_info
from jumpfbsde.config import (ExperimentConfig, apply_overrides, create_default_config,
                              get_environment_config, load_config, save_config)
from jumpfbsde.config.settings import load_config_data
from jumpfbsde.core.data_structures import RunManifest
from jumpfbsde.core.exceptions import JumpFbsdeError
from jumpfbsde.core.pipeline import ExperimentRunner, build_report

OUTPUT_ENV = "JUMPFBSDE_OUTPUT_DIR"
EXIT_VERIFICATION_FAILED = 4


def collect_overrides(args: argparse.Namespace) -> List[str]:
    """Command-line overrides in application order: --seed, --threads, --log-level, --set."""
    overrides = []
    if getattr(args, "seed", None) is not None:
        overrides.append(f"mc.seed={args.seed}")
    if getattr(args, "threads", None) is not None:
        overrides.append(f"mc.threads={args.threads}")
    if getattr(args, "log_level", None):
        overrides.append(f"logging.level={args.log_level}")
    overrides.extend(getattr(args, "set", None) or [])
    return overrides


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Build the effective configuration: file (or environment defaults), then overrides.

    Raises:
        ConfigurationError: If the file or an override is invalid
    """
    if args.config:
        data = load_config_data(args.config)
    else:
        data = get_environment_config().to_dict()
    data = apply_overrides(data, collect_overrides(args))
    return ExperimentConfig.from_dict(data)


def resolve_output_dir(args: argparse.Namespace, config: Optional[ExperimentConfig] = None) -> Path:
    """--out, then JUMPFBSDE_OUTPUT_DIR, then the config's output_dir."""
    if args.out:
        return Path(args.out)
    if os.getenv(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    return Path(config.output_dir if config is not None else "output")


def _run(args: argparse.Namespace, mode: Callable[[ExperimentRunner, Path], RunManifest]) -> int:
    config = resolve_config(args)
    runner = ExperimentRunner.from_config(config, collect_overrides(args))
    out_dir = resolve_output_dir(args, config)
    manifest = mode(runner, out_dir)
    print(f"{manifest.subcommand} completed in {runner.metrics.total_time:.2f}s; "
          f"outputs in {out_dir}")
    for name, filename in manifest.outputs.items():
        print(f"  {name}: {out_dir / filename}")
    if not manifest.passed:
        print("Verification FAILED")
        return EXIT_VERIFICATION_FAILED
    return 0


def simulate_command(args: argparse.Namespace) -> int:
    """Handle the simulate command."""
    return _run(args, lambda runner, out: runner.run_simulate(out))


def solve_bsde_command(args: argparse.Namespace) -> int:
    """Handle the solve-bsde command."""
    return _run(args, lambda runner, out: runner.run_solve_bsde(out))


def optimal_strategy_command(args: argparse.Namespace) -> int:
    """Handle the optimal-strategy command."""
    return _run(args, lambda runner, out: runner.run_optimal_strategy(out))


def verify_command(args: argparse.Namespace) -> int:
    """Handle the verify command."""
    checks = args.checks.split(",") if args.checks else None
    return _run(args, lambda runner, out: runner.run_verify(out, checks))


def report_command(args: argparse.Namespace) -> int:
    """Handle the report command."""
    config = None
    if args.config:
        config = load_config(args.config, collect_overrides(args))
    text, ok = build_report(resolve_output_dir(args, config))
    print(text)
    return 0 if ok else EXIT_VERIFICATION_FAILED


def config_command(args: argparse.Namespace) -> int:
    """Handle configuration commands."""
    if args.config_action == "create":
        config = create_default_config(args.output_dir)
        config_path = Path(args.config_file)
        save_config(config, config_path)
        print(f"Configuration saved to: {config_path}")

    elif args.config_action == "show":
        config = load_config(args.config_file)
        print(json.dumps(config.to_dict(), indent=2))

    elif args.config_action == "validate":
        load_config(args.config_file)
        print("Configuration is valid!")

    else:
        print("Error: choose one of create, show, validate", file=sys.stderr)
        return 2
    return 0


def info_command(args: argparse.Namespace) -> int:
    """Handle info command."""
    info = get_info()

    print(f"jumpfbsde v{info['version']}")
    print(f"Author: {info['author']}")
    print(f"Description: {info['description']}")
    print("\nSubcommands:")
    for name in info["subcommands"]:
        print(f"  - {name}")
    print("\nSolver tiers:")
    for name in info["tiers"]:
        print(f"  - {name}")

    return 0


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Experiment configuration file (JSON)")
    parser.add_argument("--out", help=f"Output directory (default: ${OUTPUT_ENV} or config)")
    parser.add_argument("--seed", type=int, help="Override mc.seed")
    parser.add_argument("--threads", type=int, help="Override mc.threads")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="Override a config entry, e.g. --set market.nu=2 (repeatable)")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Override logging.level")
    parser.add_argument("--verbose", "-v", action="store_true",
                        help="Print tracebacks of unexpected errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpfbsde",
        description="jumpfbsde: optimal portfolios in a jump-diffusion market via FBSDEs",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Closed-form reference experiment, verified on 10^5 paths
  jumpfbsde config create --config-file reference.json
  jumpfbsde verify --config reference.json --out runs/reference

  # Lattice solution for a liability paid per jump
  jumpfbsde solve-bsde --config reference.json --set solver.tier=lattice \\
    --set liability.kind=table --set 'liability.table=[0, 0.1, 0.2]'

  # Coupled solver with four threads and another seed
  jumpfbsde optimal-strategy --config reference.json --set solver.tier=picard \\
    --seed 11 --threads 4

  # Summarize every run in a directory
  jumpfbsde report --out runs/reference
        """
    )

    parser.add_argument("--version", action="version", version=f"jumpfbsde {__version__}")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    handlers: Dict[str, Callable[[argparse.Namespace], int]] = {
        "simulate": simulate_command,
        "solve-bsde": solve_bsde_command,
        "optimal-strategy": optimal_strategy_command,
        "verify": verify_command,
        "report": report_command,
    }
    helps = {
        "simulate": "Simulate driver paths and dump them as CSV",
        "solve-bsde": "Solve the backward equation with the configured tier",
        "optimal-strategy": "Tabulate the optimal strategy with residual certificates",
        "verify": "Run the Monte Carlo optimality checks",
        "report": "Summarize the manifests in an output directory",
    }
    for name, handler in handlers.items():
        sub = subparsers.add_parser(name, help=helps[name])
        _add_run_arguments(sub)
        if name == "verify":
            sub.add_argument("--checks", help="Comma-separated subset of verify.checks")
        sub.set_defaults(func=handler)

    # Config command
    config_parser = subparsers.add_parser("config", help="Manage configuration")
    config_subparsers = config_parser.add_subparsers(dest="config_action",
                                                     help="Configuration actions")

    create_parser = config_subparsers.add_parser("create",
                                                 help="Create the reference configuration")
    create_parser.add_argument("--output-dir", default="output", help="Output directory")
    create_parser.add_argument("--config-file", default="jumpfbsde_config.json",
                               help="Configuration file path")

    show_parser = config_subparsers.add_parser("show", help="Show configuration")
    show_parser.add_argument("--config-file", default="jumpfbsde_config.json",
                             help="Configuration file path")

    validate_parser = config_subparsers.add_parser("validate", help="Validate configuration")
    validate_parser.add_argument("--config-file", default="jumpfbsde_config.json",
                                 help="Configuration file path")

    config_parser.set_defaults(func=config_command, verbose=False)

    # Info command
    info_parser = subparsers.add_parser("info", help="Show package information")
    info_parser.set_defaults(func=info_command, verbose=False)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return 1

    try:
        return int(args.func(args))
    except JumpFbsdeError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        print(f"Unexpected error: {e}", file=sys.stderr)
        if args.verbose:
            import traceback
            traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
