"""
Command-line entry point.

    ratgreedy approx --config configs/example1.yaml [--out DIR] [--seed N] [--n N]
    ratgreedy compare --config configs/example2.yaml
    ratgreedy precond-demo --config configs/precond.yaml

Exit codes: 0 ok, 1 usage or config error, 2 numerical failure. Failures
print a JSON envelope {"error", "code", "details"} on stderr.
"""

from __future__ import annotations

import json
import logging
import logging.config
from pathlib import Path
from typing import Any, List, Optional

import click

from ratgreedy.config import LogLevel
from ratgreedy.errors import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    ConfigError,
    RatGreedyError,
    error_envelope,
)
from ratgreedy.experiment import Command, apply_overrides, load_config, run_and_report
from ratgreedy.settings import get_settings

logger = logging.getLogger(__name__)


def _emit_error(code: int, details: Any, error: Optional[str] = None) -> None:
    click.echo(json.dumps(error_envelope(code, details, error=error)), err=True)


def _details(exc: RatGreedyError) -> Any:
    if isinstance(exc, ConfigError):
        return {"key": exc.key, "message": str(exc), "errors": exc.details}
    return str(exc)


def _execute(
    ctx: click.Context,
    command: Command,
    config: Path,
    out: Optional[Path],
    seed: Optional[int],
    n: Optional[int],
) -> None:
    try:
        cfg = apply_overrides(load_config(config), command=command, output_dir=out, seed=seed, n=n)
        report = run_and_report(cfg)
    except RatGreedyError as exc:
        logger.error("%s failed: %s", command.value, exc)
        _emit_error(exc.exit_code, _details(exc), error=type(exc).__name__)
        ctx.exit(exc.exit_code)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        logger.exception("%s failed with an unexpected numerical error", command.value)
        _emit_error(EXIT_NUMERICAL, str(exc), error=type(exc).__name__)
        ctx.exit(EXIT_NUMERICAL)

    for path in report.files:
        click.echo(str(path))
    ctx.exit(EXIT_OK)


def _command_options(fn: Any) -> Any:
    fn = click.option("--n", "n", type=int, default=None, help="Number of terms (overrides n).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Random seed (overrides seed).")(fn)
    fn = click.option(
        "--out",
        type=click.Path(file_okay=False, path_type=Path),
        default=None,
        help="Output directory (overrides output_dir).",
    )(fn)
    fn = click.option(
        "--config",
        "config",
        type=click.Path(dir_okay=False, path_type=Path),
        required=True,
        help="YAML experiment config.",
    )(fn)
    return fn


@click.group()
@click.option(
    "--log-level",
    type=click.Choice([level.value for level in LogLevel], case_sensitive=False),
    default=None,
    help="Override LOG_LEVEL.",
)
def main(log_level: Optional[str]) -> None:
    """Greedy rational approximation with negative poles."""
    settings = get_settings()
    if log_level is not None:
        settings = settings.model_copy(update={"LOG_LEVEL": LogLevel(log_level.upper())})
    logging.config.dictConfig(settings.get_log_config())


@main.command()
@_command_options
@click.pass_context
def approx(ctx: click.Context, config: Path, out: Optional[Path], seed: Optional[int], n: Optional[int]) -> None:
    """Run one greedy algorithm and write trace, plot and result files."""
    _execute(ctx, Command.APPROX, config, out, seed, n)


@main.command()
@_command_options
@click.pass_context
def compare(ctx: click.Context, config: Path, out: Optional[Path], seed: Optional[int], n: Optional[int]) -> None:
    """Run OGA, improved OGA and WCGA on one config."""
    _execute(ctx, Command.COMPARE, config, out, seed, n)


@main.command("precond-demo")
@_command_options
@click.pass_context
def precond_demo(
    ctx: click.Context, config: Path, out: Optional[Path], seed: Optional[int], n: Optional[int]
) -> None:
    """Sweep mu, K and grid size for the surrogate preconditioner."""
    _execute(ctx, Command.PRECOND_DEMO, config, out, seed, n)


def run(argv: Optional[List[str]] = None) -> int:
    """Invoke the CLI and return its exit code; click usage errors map to 1."""
    try:
        rv = main.main(args=argv, prog_name="ratgreedy", standalone_mode=False)
    except click.ClickException as exc:
        _emit_error(EXIT_USAGE, exc.format_message())
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    return rv if isinstance(rv, int) else EXIT_OK
