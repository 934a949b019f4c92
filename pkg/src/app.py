"""
Main Application Module

Command-line front end: parses flags, loads the configuration, runs the
experiment and writes artifacts plus a human-readable summary.
"""

from typing import Dict, List, Optional, Tuple
import argparse
import logging
import sys

from src.modules.artifact_manager import ArtifactManager
from src.modules.config_manager import ConfigManager, RunConfig
from src.modules.experiment_runner import ExperimentOutcome, ExperimentRunner
from src.modules.state_manager import RunStateManager
from src.utils.constants import (
    EXIT_CHECK_FAILED,
    EXIT_INVALID,
    EXIT_OK,
    EXPERIMENT_KIND_LABELS,
    RECORDS_FILE,
)

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='fractional-orlicz',
        description='Numerical experiments on fractional Sobolev–Orlicz spaces.',
    )
    parser.add_argument('--config', required=True, help='TOML experiment configuration')
    parser.add_argument('--out', help='output directory (overrides experiment.output_dir)')
    parser.add_argument('--seed', type=int, help='suite seed (overrides experiment.seed)')
    parser.add_argument('--capture-baselines', action='store_true',
                        help='run without baseline assertions and write the observed constants')
    parser.add_argument('--grid-n', type=int, help='points per axis (overrides grid.n)')
    parser.add_argument('--quiet', action='store_true', help='warnings only, no summary')
    return parser


def configure_logging(quiet: bool = False) -> None:
    """Install one stream handler on the root logger."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    root.addHandler(handler)
    root.setLevel(logging.WARNING if quiet else logging.INFO)


def format_summary(config: RunConfig, outcome: ExperimentOutcome, artifacts: Dict[str, str]) -> str:
    """
    Format the human-readable run summary.

    Returns:
        Multi-line status text
    """
    label = EXPERIMENT_KIND_LABELS.get(config.kind, config.kind)
    lines = []
    if outcome.passed:
        lines.append(f"✅ {label}: all {len(outcome.records)} checks passed")
    elif not outcome.complete:
        lines.append(f"❌ {label}: run aborted")
    else:
        lines.append(f"❌ {label}: {len(outcome.failures)} failing records")
    lines.append(f"📊 Grid: d={config.grid.d}, N={config.grid.n}, L={config.grid.length:g}; seed {config.seed}")
    for failure in outcome.failures:
        lines.append(f"   ❌ {failure}")
    for name, path in sorted(artifacts.items()):
        lines.append(f"   💾 {name}: {path}")
    return '\n'.join(lines)


def write_artifacts(
    config: RunConfig,
    outcome: ExperimentOutcome,
    state: RunStateManager,
    artifacts: ArtifactManager,
    config_manager: ConfigManager,
) -> None:
    """Write records, summary, extra tables and fields; failures go to `state`."""
    out = config.output_dir
    path, error = artifacts.save_table(outcome.records, out, RECORDS_FILE, outcome.columns)
    if error:
        state.add_failure(error)
    else:
        state.add_artifact(RECORDS_FILE, path)

    for filename, rows in sorted(outcome.tables.items()):
        path, error = artifacts.save_table(rows, out, filename)
        if error:
            state.add_failure(error)
        else:
            state.add_artifact(filename, path)

    for filename, field in sorted(outcome.fields.items()):
        path, error = artifacts.save_field(field, out, filename)
        if error:
            state.add_failure(error)
        else:
            state.add_artifact(filename, path)

    summary = artifacts.generate_summary(config.kind, config_manager.get_run_summary(config),
                                         outcome.summary, outcome.passed, outcome.failures)
    path, error = artifacts.save_summary(summary, out)
    if error:
        state.add_failure(error)
    else:
        state.add_artifact('summary.json', path)


def run(config: RunConfig, state: Optional[RunStateManager] = None, quiet: bool = False) -> int:
    """
    Run one configured experiment and write its artifacts.

    Args:
        config: Validated run configuration
        state: Run state (a fresh one by default)
        quiet: Suppress the summary

    Returns:
        Exit status: 0 all checks pass, 1 a check failed, 2 invalid input
    """
    state = state or RunStateManager()
    artifacts = ArtifactManager()

    baselines, error = artifacts.load_baselines(config.baselines_path)
    if error:
        print(f"❌ Baseline Error: {error}", file=sys.stderr)
        return EXIT_INVALID

    outcome, error = ExperimentRunner().run(config, baselines)
    if error:
        print(f"❌ Configuration Error: {error}", file=sys.stderr)
        return EXIT_INVALID
    state.set_outcome(outcome)
    write_artifacts(config, outcome, state, artifacts, ConfigManager())

    if not quiet:
        print(format_summary(config, outcome, state.get_artifacts()))
    return EXIT_OK if state.passed else EXIT_CHECK_FAILED


def capture_baselines(config: RunConfig, quiet: bool = False) -> Tuple[Optional[str], Optional[str]]:
    """
    Run without baseline assertions and write the observed constants.

    Nothing is written when the run is partial or another check fails.

    Returns:
        Tuple of (baseline_file_path, error_message)
    """
    outcome, error = ExperimentRunner().run(config, enforce_baselines=False)
    if error:
        return None, error
    if not outcome.passed:
        return None, "run did not complete cleanly; baselines not written: " + '; '.join(outcome.failures)
    if not outcome.observed:
        return None, f"{config.kind} records no baseline constants"
    path, error = ArtifactManager().save_baselines(outcome.observed, config.baselines_path)
    if not error and not quiet:
        print(f"✅ Baselines captured for {', '.join(sorted(outcome.observed))}: {path}")
    return path, error


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of the `fractional-orlicz` command."""
    args = build_parser().parse_args(argv)
    configure_logging(args.quiet)

    overrides = {'seed': args.seed, 'grid_n': args.grid_n, 'out': args.out}
    config, error = ConfigManager().load_config(args.config, overrides)
    if error:
        print(f"❌ Configuration Error: {error}", file=sys.stderr)
        return EXIT_INVALID

    if args.capture_baselines:
        path, error = capture_baselines(config, args.quiet)
        if error:
            print(f"❌ Baseline Error: {error}", file=sys.stderr)
            return EXIT_CHECK_FAILED
        return EXIT_OK
    return run(config, quiet=args.quiet)
