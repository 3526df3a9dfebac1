"""
Differential Testing Harness
----------------------------
Registers the fuzz targets, runs them on random bytes, replays and minimises
corpus entries, and reports generator statistics.

Every target turns one byte string into one test case and checks it:

    authorizer-parity-abac-typed  production vs reference authorizer, typed ABAC policy
    authorizer-parity-abac        production vs reference authorizer, arbitrary condition
    authorizer-parity-rbac        production vs reference authorizer, condition-free policies
    validator-parity              production vs reference validator verdicts
    parser-roundtrip              parse(pretty(p)) == p
    formatter-roundtrip           parse(format(pretty(p))) == p, comments kept, idempotent
    parser-safety                 parsing arbitrary bytes yields policies or a ParseError
    validation-soundness          validated policies never hit type or missing-attribute errors
    slicing-soundness             the sliced policy set decides like the full one

A check returns a ``Verdict``; an unexpected exception anywhere in
generation or checking is a failure whose report is the traceback.
"""

from __future__ import annotations

import logging
import random
import statistics
import time
import traceback
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

from app import config, corpus
from app.authorizer import is_authorized, slice_policy_set
from app.conformance import request_conforms, store_conforms
from app.evaluator import satisfied
from app.formatter import comment_texts, format_text
from app.generators import (
    ByteCursor,
    GeneratorLimits,
    GeneratorMode,
    World,
    entity_literals,
    gen_expr,
    gen_policies,
    gen_world,
)
from app.lexer import ParseError
from app.models import (
    BOOL,
    And,
    BinOp,
    Bool,
    Expr,
    GetAttr,
    HasAttr,
    If,
    Like,
    Lit,
    Neg,
    Not,
    Or,
    PolicySet,
    RecordLit,
    SatisfactionStatus,
    SetLit,
    expr_size,
    walk,
)
from app.parser import parse_policy_set
from app.printer import pretty_print
from app.reference import ref_is_authorized, ref_validate_policy
from app.schemas import RunReport
from app.validator import validate_policy, validate_policy_set

logger = logging.getLogger(__name__)

# Error kinds a validated policy set must never produce.
UNSOUND_KINDS = frozenset({"TypeError", "MissingAttr"})

FORMAT_WIDTHS = (20, 40, 60, 80, 120)
BATCH_SIZE = 64


# ============================================================================
# CASES AND VERDICTS
# ============================================================================

@dataclass(frozen=True)
class Verdict:
    passed: bool
    report: str = ""


PASS = Verdict(True)


def fail(report: str) -> Verdict:
    return Verdict(False, report)


@dataclass
class Case:
    """
    One generated test case.

    ``cursor`` is left where generation stopped, so checks can draw further
    decisions (comment placement, format width) from the same bytes.
    """
    data: bytes
    cursor: ByteCursor
    world: Optional[World] = None
    policies: Optional[PolicySet] = None
    after_world: Optional[ByteCursor] = None
    full_depth: list = field(default_factory=list)
    mode: Optional[GeneratorMode] = None

    def describe(self) -> str:
        if self.world is None:
            return f"input: {self.data!r}"
        request = self.world.request
        header = f"mode: {self.mode.value}\n" if self.mode else ""
        return header + (
            f"request: {request.principal} {request.action} {request.resource} {request.context}\n"
            f"policies:\n{pretty_print(self.policies)}"
        )


ModeChoice = Union[GeneratorMode, tuple[GeneratorMode, ...], None]

ALL_MODES: tuple[GeneratorMode, ...] = tuple(GeneratorMode)


def build_case(mode: ModeChoice, data: bytes,
               limits: Optional[GeneratorLimits] = None) -> Case:
    """
    Decode a byte string into a world and policy set.

    ``mode`` None keeps the raw bytes only; a tuple of modes lets the first
    decision pick one of them.
    """
    cursor = ByteCursor(data)
    if mode is None:
        return Case(data, cursor)
    if isinstance(mode, tuple):
        mode = mode[cursor.choose(len(mode))]
    limits = limits or GeneratorLimits.from_config()
    world = gen_world(cursor, limits)
    after_world = cursor.clone()
    full_depth: list = []
    policies = gen_policies(mode, cursor, world, limits, full_depth=full_depth)
    return Case(data, cursor, world, policies, after_world, full_depth, mode)


# ============================================================================
# CHECKS
# ============================================================================

def check_authorizer_parity(case: Case) -> Verdict:
    world = case.world
    ours = is_authorized(world.request, world.store, case.policies)
    theirs = ref_is_authorized(world.request, world.store, case.policies)
    mismatches = []
    if ours.decision is not theirs.decision:
        mismatches.append(f"decision {ours.decision.value} != {theirs.decision.value}")
    if ours.determining != theirs.determining:
        mismatches.append(f"determining {sorted(ours.determining)} != {sorted(theirs.determining)}")
    if ours.error_policy_ids() != theirs.error_policy_ids():
        mismatches.append(f"errors {ours.error_kinds()} != {theirs.error_kinds()}")
    if mismatches:
        return fail("; ".join(mismatches) + "\n" + case.describe())
    return PASS


def check_validator_parity(case: Case) -> Verdict:
    schema = case.world.schema
    for policy in case.policies:
        ours = validate_policy(policy, schema)
        theirs = ref_validate_policy(policy, schema)
        if (not ours) != (not theirs):
            return fail(
                f"validator verdicts differ for {policy.id}: "
                f"production={[str(e) for e in ours]} reference={theirs}\n{case.describe()}"
            )
    return PASS


def check_parser_roundtrip(case: Case) -> Verdict:
    text = pretty_print(case.policies)
    parsed = parse_policy_set(text)
    if parsed != case.policies:
        return fail(f"parse(pretty(p)) != p\ntext:\n{text}")
    return PASS


def inject_comments(text: str, cursor: ByteCursor) -> str:
    """Insert ``// note N`` lines into policy text at cursor-chosen positions."""
    lines = text.split("\n")
    output = []
    for number, line in enumerate(lines):
        if line and cursor.choose(4) == 3:
            output.append(f"// note {number}")
        output.append(line)
    if cursor.choose(4) == 3:
        output.append("// end")
    return "\n".join(output)


def check_formatter_roundtrip(case: Case) -> Verdict:
    text = inject_comments(pretty_print(case.policies), case.cursor)
    width = case.cursor.pick(FORMAT_WIDTHS)
    formatted = format_text(text, width)
    if parse_policy_set(formatted) != case.policies:
        return fail(f"parse(format(text)) != p at width {width}\ntext:\n{text}\nformatted:\n{formatted}")
    if comment_texts(formatted) != comment_texts(text):
        return fail(f"comments changed at width {width}\ntext:\n{text}\nformatted:\n{formatted}")
    again = format_text(formatted, width)
    if again != formatted:
        return fail(f"formatting is not idempotent at width {width}\nfirst:\n{formatted}\nsecond:\n{again}")
    return PASS


def check_parser_safety(case: Case) -> Verdict:
    try:
        parse_policy_set(case.data)
    except ParseError as exc:
        logger.debug(f"Rejected input: {exc}")
    return PASS


def check_validation_soundness(case: Case) -> Verdict:
    world = case.world
    # Vacuous unless every precondition holds.
    if any(validate_policy_set(case.policies, world.schema).values()):
        return PASS
    if store_conforms(world.store, world.schema):
        return PASS
    if request_conforms(world.request, world.schema, world.store):
        return PASS
    if any(uid not in world.store for policy in case.policies for uid in entity_literals(policy)):
        return PASS

    response = is_authorized(world.request, world.store, case.policies)
    unsound = {pid: kind for pid, kind in response.error_kinds().items() if kind in UNSOUND_KINDS}
    if unsound:
        return fail(f"validated policies raised {unsound}\n{case.describe()}")
    return PASS


def check_slicing_soundness(case: Case) -> Verdict:
    world = case.world
    full = is_authorized(world.request, world.store, case.policies)
    sliced = slice_policy_set(case.policies, world.request, world.store)
    partial = is_authorized(world.request, world.store, sliced)
    if full.decision is not partial.decision or full.determining != partial.determining:
        return fail(
            f"slice decided {partial.decision.value} {sorted(partial.determining)}, "
            f"full set decided {full.decision.value} {sorted(full.determining)}\n{case.describe()}"
        )
    return PASS


# ============================================================================
# TARGET REGISTRY
# ============================================================================

@dataclass(frozen=True)
class Target:
    name: str
    mode: ModeChoice
    check: Callable[[Case], Verdict]
    description: str = ""

    def run(self, data: bytes, limits: Optional[GeneratorLimits] = None) -> Verdict:
        """Generate the case for ``data`` and check it; never raises."""
        try:
            return self.check(build_case(self.mode, data, limits))
        except Exception:
            return fail(traceback.format_exc())


TARGETS: dict[str, Target] = {
    target.name: target
    for target in (
        Target("authorizer-parity-abac-typed", GeneratorMode.TYPE_DIRECTED_ABAC, check_authorizer_parity,
               "production vs reference authorizer on a mostly well-typed ABAC policy"),
        Target("authorizer-parity-abac", GeneratorMode.ARBITRARY_ABAC, check_authorizer_parity,
               "production vs reference authorizer on an arbitrary-condition policy"),
        Target("authorizer-parity-rbac", GeneratorMode.RBAC, check_authorizer_parity,
               "production vs reference authorizer on condition-free policies"),
        Target("validator-parity", GeneratorMode.TYPE_DIRECTED_ABAC, check_validator_parity,
               "production vs reference validator verdicts"),
        Target("parser-roundtrip", ALL_MODES, check_parser_roundtrip,
               "parse(pretty(p)) == p"),
        Target("formatter-roundtrip", ALL_MODES, check_formatter_roundtrip,
               "parse(format(pretty(p))) == p with comments preserved"),
        Target("parser-safety", None, check_parser_safety,
               "the parser accepts or rejects arbitrary bytes without crashing"),
        Target("validation-soundness", GeneratorMode.TYPE_DIRECTED_ABAC, check_validation_soundness,
               "validated policies never raise type or missing-attribute errors"),
        Target("slicing-soundness", ALL_MODES, check_slicing_soundness,
               "the sliced policy set decides like the full policy set"),
    )
}


def get_target(name: str) -> Target:
    """
    Raises:
        KeyError: If no target has this name
    """
    if name not in TARGETS:
        raise KeyError(f"unknown target {name!r}; choose from {', '.join(TARGETS)}")
    return TARGETS[name]


def _run_named(name: str, data: bytes) -> Verdict:
    return TARGETS[name].run(data)


# ============================================================================
# MINIMISATION
# ============================================================================

def minimize_case(target: Target, data: bytes) -> bytes:
    """
    Shrink a failing input with ddmin over byte chunks.

    Each round splits the input into ``granularity`` chunks and tries every
    chunk on its own, then every complement; the first that still fails is
    kept. Without progress the granularity doubles, until chunks are single
    bytes. The result still fails and no single byte can be removed from it.

    Raises:
        ValueError: If ``data`` does not fail
    """
    def fails(candidate: bytes) -> bool:
        return not target.run(candidate).passed

    if not fails(data):
        raise ValueError(f"input does not fail target {target.name}")

    current = data
    granularity = 2
    while len(current) >= 2:
        size = -(-len(current) // granularity)
        chunks = [(start, min(start + size, len(current))) for start in range(0, len(current), size)]
        reduced = False
        for start, end in chunks:
            if len(chunks) > 1 and fails(current[start:end]):
                current, granularity, reduced = current[start:end], 2, True
                break
        if not reduced:
            for start, end in chunks:
                complement = current[:start] + current[end:]
                if fails(complement):
                    current, granularity, reduced = complement, max(granularity - 1, 2), True
                    break
        if not reduced:
            if granularity >= len(current):
                break
            granularity = min(granularity * 2, len(current))

    if len(current) == 1 and fails(b""):
        current = b""
    logger.info(f"Minimised {target.name} input from {len(data)} to {len(current)} bytes")
    return current


# ============================================================================
# RUNNING
# ============================================================================

def _fresh_inputs(rng: random.Random, count: int) -> list[bytes]:
    return [rng.randbytes(rng.randint(0, config.FUZZ_MAX_INPUT_LEN)) for _ in range(count)]


def run_target(target: Target, iterations: Optional[int] = None, seconds: Optional[float] = None,
               corpus_dir: Union[str, Path] = config.CORPUS_DIR, seed: Optional[int] = None,
               workers: int = config.FUZZ_WORKERS, replay: bool = True) -> RunReport:
    """
    Fuzz one target.

    Stored corpus entries are replayed first. Then fresh random byte strings
    are checked until the budget is used; each failure is minimised and
    stored in the corpus.

    Args:
        target: Target to run
        iterations: Number of fresh inputs
        seconds: Time budget for fresh inputs (used when iterations is None)
        corpus_dir: Corpus root directory
        seed: Seed for the random source (OS entropy when None)
        workers: Worker processes; 1 checks inputs in this process
        replay: Replay stored entries before fresh inputs

    Returns:
        RunReport listing the hashes of failing entries

    Raises:
        ValueError: If neither iterations nor seconds is given
        OSError: If the corpus cannot be written
    """
    if iterations is None and seconds is None:
        raise ValueError("either iterations or seconds is required")
    logger.info(f"Running {target.name}: iterations={iterations} seconds={seconds} workers={workers}")
    started = time.perf_counter()
    failures: list[str] = []
    executed = 0

    replayed = 0
    if replay:
        for digest, data in corpus.get_all_entries(corpus_dir, target.name):
            replayed += 1
            if not target.run(data).passed:
                logger.warning(f"{target.name}: stored entry {digest} fails")
                failures.append(digest)

    rng = random.Random(seed)
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while True:
            if iterations is not None:
                remaining = iterations - executed
            else:
                remaining = BATCH_SIZE if time.perf_counter() - started < seconds else 0
            if remaining <= 0:
                break
            batch = _fresh_inputs(rng, min(remaining, BATCH_SIZE))
            if executor is not None:
                verdicts = list(executor.map(_run_named, [target.name] * len(batch), batch))
            else:
                verdicts = [target.run(data) for data in batch]
            executed += len(batch)
            for data, verdict in zip(batch, verdicts):
                if verdict.passed:
                    continue
                logger.warning(f"{target.name}: failure found\n{verdict.report}")
                digest = corpus.create_entry(corpus_dir, target.name, minimize_case(target, data))
                if digest not in failures:
                    failures.append(digest)
    finally:
        if executor is not None:
            executor.shutdown()

    elapsed = time.perf_counter() - started
    logger.info(f"Finished {target.name}: {executed} fresh, {replayed} replayed, {len(failures)} failures")
    return RunReport(
        target=target.name,
        iterations=executed + replayed,
        failures=failures,
        stats={"fresh": executed, "replayed": replayed, "wall_time_s": round(elapsed, 3)},
    )


def replay_corpus(corpus_dir: Union[str, Path], targets: Optional[Iterable[str]] = None) -> list[RunReport]:
    """
    Replay stored entries, one report per target.

    Raises:
        KeyError: If a target name is unknown
    """
    reports = []
    for name in (list(targets) if targets is not None else list(TARGETS)):
        target = get_target(name)
        failures = []
        entries = corpus.get_all_entries(corpus_dir, name)
        for digest, data in entries:
            verdict = target.run(data)
            logger.debug(f"{name}/{digest}: {'pass' if verdict.passed else 'FAIL'}")
            if not verdict.passed:
                logger.warning(f"{name}: stored entry {digest} fails\n{verdict.report}")
                failures.append(digest)
        reports.append(RunReport(target=name, iterations=len(entries), failures=failures))
    return reports


# ============================================================================
# STATISTICS
# ============================================================================

def is_bool_literal(expr: Expr) -> bool:
    return isinstance(expr, Lit) and isinstance(expr.value, Bool)


def operator_name(expr: Expr) -> Optional[str]:
    """Histogram key of an operator node; None for leaves."""
    if isinstance(expr, BinOp):
        return expr.op.value
    names = {
        Not: "!", Neg: "neg", And: "&&", Or: "||", If: "if", Like: "like",
        HasAttr: "has", GetAttr: ".", SetLit: "set", RecordLit: "record",
    }
    return names.get(type(expr))


def _fraction(part: int, whole: int) -> float:
    return round(part / whole, 4) if whole else 0.0


def _size_summary(sizes: list[int]) -> dict:
    if not sizes:
        return {"max": 0, "mean": 0.0, "p50": 0, "p90": 0}
    ordered = sorted(sizes)
    return {
        "max": ordered[-1],
        "mean": round(statistics.fmean(ordered), 3),
        "p50": ordered[len(ordered) // 2],
        "p90": ordered[min(len(ordered) - 1, (len(ordered) * 9) // 10)],
    }


def compute_stats(target: Target, samples: int, seed: int = 0,
                  limits: Optional[GeneratorLimits] = None) -> dict:
    """
    Generator statistics for a target.

    Returns a dict with:
        samples:                  number of generated inputs
        condition_literal_fraction: share of condition bodies that are boolean literals
        expr_literal_fraction:    share of typed expression-generator outputs
                                  (target Bool) that are boolean literals
        operators:                operator histogram over condition bodies
        ast_size:                 max / mean / p50 / p90 condition body size
        outcomes:                 share of policy evaluations ending in success
                                  or in each error kind (sums to 1)
        latency_us:               median production and reference authorisation
                                  time (authorizer-parity targets only)

    Raises:
        ValueError: If samples < 1
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    limits = limits or GeneratorLimits.from_config()
    rng = random.Random(seed)
    inputs = _fresh_inputs(rng, samples)

    if target.mode is None:
        parsed = 0
        for data in inputs:
            try:
                parse_policy_set(data)
                parsed += 1
            except ParseError:
                pass
        return {"samples": samples, "parsed_fraction": _fraction(parsed, samples),
                "outcomes": {"success": 1.0}}

    bodies: list[Expr] = []
    drawn: list[Expr] = []
    operators: Counter = Counter()
    outcomes: Counter = Counter()
    ours_ns: list[int] = []
    theirs_ns: list[int] = []
    timed = target.name.startswith("authorizer-parity")

    for data in inputs:
        case = build_case(target.mode, data, limits)
        world = case.world
        if case.full_depth:
            drawn.extend(case.full_depth)
        else:
            drawn.append(gen_expr(case.after_world, world.env(), BOOL, world, limits.max_expr_depth))
        for policy in case.policies:
            for condition in policy.conditions:
                bodies.append(condition.body)
                operators.update(name for name in map(operator_name, walk(condition.body)) if name)
            outcome = satisfied(policy, world.request, world.store)
            if outcome.status is SatisfactionStatus.ERRORED:
                outcomes[outcome.error.kind] += 1
            else:
                outcomes["success"] += 1
        if timed:
            begin = time.perf_counter_ns()
            is_authorized(world.request, world.store, case.policies)
            middle = time.perf_counter_ns()
            ref_is_authorized(world.request, world.store, case.policies)
            ours_ns.append(middle - begin)
            theirs_ns.append(time.perf_counter_ns() - middle)

    evaluations = sum(outcomes.values())
    stats = {
        "samples": samples,
        "condition_literal_fraction": _fraction(sum(map(is_bool_literal, bodies)), len(bodies)),
        "expr_literal_fraction": _fraction(sum(map(is_bool_literal, drawn)), len(drawn)),
        "operators": dict(sorted(operators.items())),
        "ast_size": _size_summary([expr_size(body) for body in bodies]),
        "outcomes": (
            {kind: round(count / evaluations, 4) for kind, count in sorted(outcomes.items())}
            if evaluations else {"success": 1.0}
        ),
    }
    if timed:
        stats["latency_us"] = {
            "production_median": round(statistics.median(ours_ns) / 1000, 3),
            "reference_median": round(statistics.median(theirs_ns) / 1000, 3),
        }
    return stats
