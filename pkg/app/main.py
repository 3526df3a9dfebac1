"""
Policy Engine CLI - Main Application
------------------------------------
Command-line entry point for authorization, validation, formatting and the
fuzz harness.

Run with: python -m app.main <command> [options]

Exit codes:
    authorize   0 Allow, 3 Deny, 2 input error
    validate    0 valid, 3 invalid, 2 input error
    format      0 formatted, 2 input error
    fuzz        0 no failures, 1 failures found, 2 harness error

Data goes to stdout, diagnostics to stderr.
"""

import logging
import sys
from pathlib import Path
from typing import Optional

import click

from app import config, corpus
from app.authorizer import is_authorized
from app.conformance import request_conforms, store_conforms
from app.formatter import format_text
from app.harness import TARGETS, compute_stats, get_target, minimize_case, replay_corpus, run_target
from app.lexer import ParseError
from app.parser import parse_policy_set
from app.schemas import (
    DecisionDoc,
    RunReport,
    ValidationReportDoc,
    parse_entities,
    parse_request,
    parse_schema,
)
from app.validator import validate_policy_set

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_INPUT_ERROR = 2
EXIT_DENY = 3


def _read(path: str) -> bytes:
    """Read an input file; ``-`` means stdin."""
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _input_error(exc: Exception) -> None:
    """Report an input error on stderr and exit with status 2."""
    click.echo(f"error: {exc}", err=True)
    click.get_current_context().exit(EXIT_INPUT_ERROR)


def _emit(report: RunReport) -> None:
    click.echo(report.model_dump_json())


# ============================================================================
# COMMAND GROUP
# ============================================================================

@click.group()
@click.option("--log-level", default=None, help="Logging level (default from LOG_LEVEL).")
def cli(log_level: Optional[str]) -> None:
    """Authorize requests, validate and format policies, and fuzz the engine."""
    config.configure_logging(log_level.upper() if log_level else None)


# ============================================================================
# AUTHORIZE / VALIDATE / FORMAT
# ============================================================================

@cli.command()
@click.option("--policies", "policies_path", required=True, help="Policy text file.")
@click.option("--entities", "entities_path", required=True, help="Entities JSON file.")
@click.option("--request", "request_path", required=True, help="Request JSON file.")
@click.option("--schema", "schema_path", default=None, help="Schema JSON file; checks conformance first.")
def authorize(policies_path: str, entities_path: str, request_path: str, schema_path: Optional[str]) -> None:
    """
    Decide a request and print the decision document.

    Example output:
    {"decision":"Allow","determining":["policy0","policy1"],"errors":[]}
    """
    try:
        policies = parse_policy_set(_read(policies_path))
        store = parse_entities(_read(entities_path))
        request = parse_request(_read(request_path))
        if schema_path is not None:
            schema = parse_schema(_read(schema_path))
            violations = store_conforms(store, schema) + request_conforms(request, schema, store)
            if violations:
                raise ParseError("; ".join(str(v) for v in violations))
    except (ParseError, OSError) as exc:
        _input_error(exc)
        return

    response = is_authorized(request, store, policies)
    click.echo(DecisionDoc.from_response(response).model_dump_json())
    logger.info(f"authorize: {response.decision.value} with {len(policies)} policies")
    click.get_current_context().exit(EXIT_OK if response.decision.value == "Allow" else EXIT_DENY)


@cli.command()
@click.option("--policies", "policies_path", required=True, help="Policy text file.")
@click.option("--schema", "schema_path", required=True, help="Schema JSON file.")
def validate(policies_path: str, schema_path: str) -> None:
    """Typecheck every policy against the schema and print the report."""
    try:
        policies = parse_policy_set(_read(policies_path))
        schema = parse_schema(_read(schema_path))
    except (ParseError, OSError) as exc:
        _input_error(exc)
        return

    errors = {
        policy_id: [str(error) for error in found]
        for policy_id, found in sorted(validate_policy_set(policies, schema).items())
        if found
    }
    report = ValidationReportDoc(valid=not errors, errors=errors)
    click.echo(report.model_dump_json())
    logger.info(f"validate: {len(errors)} of {len(policies)} policies rejected")
    click.get_current_context().exit(EXIT_OK if report.valid else EXIT_DENY)


@cli.command(name="format")
@click.option("--in", "input_path", required=True, help="Policy text file ('-' for stdin).")
@click.option("--width", default=config.FORMAT_WIDTH, show_default=True, type=click.IntRange(min=1),
              help="Target line width.")
def format_command(input_path: str, width: int) -> None:
    """Reformat policy text, keeping every comment."""
    try:
        formatted = format_text(_read(input_path), width)
    except (ParseError, OSError) as exc:
        _input_error(exc)
        return
    click.echo(formatted, nl=False)


# ============================================================================
# FUZZ HARNESS
# ============================================================================

TARGET_CHOICE = click.Choice(sorted(TARGETS))


@cli.group()
def fuzz() -> None:
    """Differential and property fuzzing."""


@fuzz.command()
@click.option("--target", "target_name", required=True, type=TARGET_CHOICE)
@click.option("--iterations", type=click.IntRange(min=0), default=None, help="Fresh inputs to check.")
@click.option("--seconds", type=click.FloatRange(min=0), default=None, help="Time budget for fresh inputs.")
@click.option("--corpus", "corpus_dir", default=config.CORPUS_DIR, show_default=True)
@click.option("--seed", type=int, default=None, help="Seed for the random source.")
@click.option("--workers", type=click.IntRange(min=1), default=config.FUZZ_WORKERS, show_default=True)
def run(target_name: str, iterations: Optional[int], seconds: Optional[float], corpus_dir: str,
        seed: Optional[int], workers: int) -> None:
    """Replay the target's corpus, then check fresh random inputs."""
    if iterations is None and seconds is None:
        iterations = 1000
    try:
        report = run_target(get_target(target_name), iterations, seconds, corpus_dir, seed, workers)
    except OSError as exc:
        logger.error(f"Harness I/O failure: {exc}")
        _input_error(exc)
        return
    _emit(report)
    click.get_current_context().exit(EXIT_FAILURES if report.failures else EXIT_OK)


@fuzz.command()
@click.option("--target", "target_name", required=True, type=TARGET_CHOICE)
@click.option("--corpus", "corpus_dir", default=config.CORPUS_DIR, show_default=True)
def replay(target_name: str, corpus_dir: str) -> None:
    """Replay the stored entries of one target."""
    try:
        reports = replay_corpus(corpus_dir, [target_name])
    except OSError as exc:
        _input_error(exc)
        return
    for report in reports:
        _emit(report)
    click.get_current_context().exit(EXIT_FAILURES if any(r.failures for r in reports) else EXIT_OK)


@fuzz.command(name="replay-all")
@click.option("--corpus", "corpus_dir", default=config.CORPUS_DIR, show_default=True)
def replay_all(corpus_dir: str) -> None:
    """Replay the stored entries of every target."""
    try:
        reports = replay_corpus(corpus_dir)
    except OSError as exc:
        _input_error(exc)
        return
    for report in reports:
        _emit(report)
    click.get_current_context().exit(EXIT_FAILURES if any(r.failures for r in reports) else EXIT_OK)


@fuzz.command()
@click.option("--target", "target_name", required=True, type=TARGET_CHOICE)
@click.option("--input", "input_path", required=True, help="Failing input file.")
@click.option("--output", "output_path", default=None, help="Write here instead of the corpus.")
@click.option("--corpus", "corpus_dir", default=config.CORPUS_DIR, show_default=True)
def minimize(target_name: str, input_path: str, output_path: Optional[str], corpus_dir: str) -> None:
    """Shrink a failing input and store it."""
    target = get_target(target_name)
    try:
        data = _read(input_path)
    except OSError as exc:
        _input_error(exc)
        return
    if target.run(data).passed:
        click.echo(f"error: input does not fail {target_name}", err=True)
        click.get_current_context().exit(EXIT_FAILURES)
        return

    reduced = minimize_case(target, data)
    try:
        if output_path is not None:
            Path(output_path).write_bytes(reduced)
            location = output_path
        else:
            location = f"{corpus_dir}/{target_name}/{corpus.create_entry(corpus_dir, target_name, reduced)}"
    except OSError as exc:
        _input_error(exc)
        return
    click.echo(f"{len(data)} -> {len(reduced)} bytes: {location}")


@fuzz.command()
@click.option("--target", "target_name", required=True, type=TARGET_CHOICE)
@click.option("--samples", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def stats(target_name: str, samples: int, seed: int) -> None:
    """Print generator statistics for a target as one JSON line."""
    record = compute_stats(get_target(target_name), samples, seed)
    _emit(RunReport(target=target_name, iterations=samples, stats=record))


if __name__ == "__main__":
    cli()
