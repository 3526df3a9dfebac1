"""
Test Fuzz Harness
-----------------
Checks on hand-built cases, the target registry, minimisation, seeded runs
against a temporary corpus, corpus replay and generator statistics.

Run: pytest test_harness.py
"""

from pathlib import Path

import pytest

from app.corpus import compute_sha256_hash, count_entries, entry_exists
from app.generators import ByteCursor, GeneratorMode, World
from app.harness import (
    ALL_MODES,
    PASS,
    TARGETS,
    Case,
    Target,
    build_case,
    check_authorizer_parity,
    check_formatter_roundtrip,
    check_parser_roundtrip,
    check_slicing_soundness,
    check_validation_soundness,
    check_validator_parity,
    compute_stats,
    fail,
    get_target,
    inject_comments,
    minimize_case,
    replay_corpus,
    run_target,
)
from app.parser import parse_policy_set
from app.printer import pretty_print

EMPTY_HASH = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
REPO_CORPUS = Path(__file__).parent / "corpus"


def raw_target(check) -> Target:
    return Target("custom", None, check)


SEVEN = raw_target(lambda case: fail("contains 7") if 7 in case.data else PASS)
ALWAYS = raw_target(lambda case: fail("always"))


# ============================================================================
# CHECKS ON A KNOWN CASE
# ============================================================================

@pytest.fixture
def tinytodo_case(tinytodo_schema, tinytodo_store, tinytodo_request, tinytodo_policies):
    world = World(tinytodo_schema, tinytodo_store, tinytodo_request("alice-getlist-l1"))
    return Case(b"", ByteCursor(b""), world, tinytodo_policies)


@pytest.mark.parametrize("check", [
    check_authorizer_parity,
    check_validator_parity,
    check_parser_roundtrip,
    check_formatter_roundtrip,
    check_validation_soundness,
    check_slicing_soundness,
])
def test_checks_pass_on_tinytodo(check, tinytodo_case):
    assert check(tinytodo_case) == PASS


def test_case_description_lists_the_request(tinytodo_case):
    text = tinytodo_case.describe()
    assert 'User::"alice"' in text
    assert "policies:" in text
    assert Case(b"\x01", ByteCursor(b"\x01")).describe() == "input: b'\\x01'"


def test_build_case_keeps_generation_state():
    raw = build_case(None, b"permit")
    assert raw.world is None and raw.policies is None

    typed = build_case(get_target("validation-soundness").mode, bytes(range(64)))
    assert typed.world is not None
    assert len(typed.full_depth) == 1
    assert typed.after_world.position <= typed.cursor.position


def test_quoted_attribute_names_roundtrip(tinytodo_case):
    policies = parse_policy_set(
        'permit(principal, action, resource) when '
        '{ principal["if"] == {"in": 1, "display name": "x"} && resource has "display name" };'
    )
    case = Case(b"", ByteCursor(b"\x03"), tinytodo_case.world, policies)
    assert '["if"]' in pretty_print(policies)
    assert check_parser_roundtrip(case) == PASS
    assert check_formatter_roundtrip(case) == PASS


def test_all_mode_targets_reach_every_mode():
    for name in ("parser-roundtrip", "formatter-roundtrip", "slicing-soundness"):
        assert get_target(name).mode == ALL_MODES
    modes = {build_case(ALL_MODES, bytes([choice]) + bytes(range(64))).mode for choice in range(3)}
    assert modes == set(GeneratorMode)


def test_inject_comments():
    # 3 % 4 == 3 places a comment; empty lines draw nothing
    assert inject_comments("a\n\nb", ByteCursor(b"\x03\x00\x03")) == "// note 0\na\n\nb\n// end"
    assert inject_comments("a\nb", ByteCursor(b"")) == "a\nb"


# ============================================================================
# TARGETS
# ============================================================================

def test_target_registry():
    assert len(TARGETS) == 9
    assert get_target("parser-safety").mode is None
    with pytest.raises(KeyError):
        get_target("no-such-target")


def test_target_run_reports_exceptions():
    def explode(case):
        raise RuntimeError("boom")

    verdict = raw_target(explode).run(b"")
    assert not verdict.passed
    assert "RuntimeError: boom" in verdict.report


def test_parser_safety_accepts_garbage():
    target = get_target("parser-safety")
    for data in (b"", b"\xff\xfe", b"permit(", b"permit(principal,action,resource);" * 3):
        assert target.run(data).passed


# ============================================================================
# MINIMISATION
# ============================================================================

def test_minimize_finds_the_failing_byte():
    assert minimize_case(SEVEN, b"\x01\x02\x07\x03\x04\x05") == b"\x07"
    assert minimize_case(SEVEN, b"\x07") == b"\x07"


def test_minimize_reaches_empty_input():
    assert minimize_case(ALWAYS, b"abcdefgh") == b""


def test_minimize_rejects_passing_input():
    with pytest.raises(ValueError):
        minimize_case(SEVEN, b"\x01\x02")


# ============================================================================
# RUNS AND REPLAY
# ============================================================================

def test_run_target_needs_a_budget(tmp_path):
    with pytest.raises(ValueError):
        run_target(get_target("parser-safety"), corpus_dir=tmp_path)


@pytest.mark.parametrize("name", ["parser-safety", "slicing-soundness", "authorizer-parity-rbac"])
def test_seeded_run_finds_nothing(name, tmp_path):
    report = run_target(get_target(name), iterations=20, corpus_dir=tmp_path, seed=1)
    assert report.target == name
    assert report.failures == []
    assert report.iterations == 20
    assert report.stats["fresh"] == 20 and report.stats["replayed"] == 0
    assert report.stats["wall_time_s"] >= 0


def test_time_budget_runs_at_least_one_batch(tmp_path):
    report = run_target(get_target("parser-safety"), seconds=0.2, corpus_dir=tmp_path, seed=2)
    assert report.stats["fresh"] >= 1


def test_failures_are_minimised_into_the_corpus(tmp_path):
    # Test 1: every input fails and shrinks to the empty entry
    report = run_target(ALWAYS, iterations=5, corpus_dir=tmp_path, seed=0)
    assert report.failures == [EMPTY_HASH]
    assert entry_exists(tmp_path, "custom", EMPTY_HASH)
    assert count_entries(tmp_path, "custom") == 1

    # Test 2: the stored entry is replayed on the next run
    report = run_target(ALWAYS, iterations=0, corpus_dir=tmp_path)
    assert report.stats == {"fresh": 0, "replayed": 1, "wall_time_s": report.stats["wall_time_s"]}
    assert report.failures == [EMPTY_HASH]


def test_replay_repository_corpus():
    reports = replay_corpus(REPO_CORPUS)
    assert [report.target for report in reports] == list(TARGETS)
    for report in reports:
        assert report.iterations >= 1, report.target
        assert report.failures == [], report.target


def test_replay_selected_targets(tmp_path):
    assert replay_corpus(tmp_path, ["parser-safety"])[0].iterations == 0
    with pytest.raises(KeyError):
        replay_corpus(tmp_path, ["nope"])


def test_empty_hash_constant():
    assert compute_sha256_hash(b"") == EMPTY_HASH


# ============================================================================
# STATISTICS
# ============================================================================

def test_typed_generation_prefers_compound_conditions():
    stats = compute_stats(get_target("authorizer-parity-abac-typed"), samples=200, seed=1)
    assert stats["samples"] == 200
    assert stats["expr_literal_fraction"] < stats["condition_literal_fraction"]
    assert sum(stats["outcomes"].values()) == pytest.approx(1.0, abs=1e-3)
    assert set(stats["ast_size"]) == {"max", "mean", "p50", "p90"}
    assert set(stats["latency_us"]) == {"production_median", "reference_median"}


@pytest.mark.parametrize("name", ["authorizer-parity-abac", "authorizer-parity-rbac", "slicing-soundness"])
def test_stats_shape(name):
    stats = compute_stats(get_target(name), samples=30, seed=4)
    assert 0.0 <= stats["condition_literal_fraction"] <= 1.0
    assert 0.0 <= stats["expr_literal_fraction"] <= 1.0
    assert sum(stats["outcomes"].values()) == pytest.approx(1.0, abs=1e-3)
    assert ("latency_us" in stats) == name.startswith("authorizer-parity")


def test_rbac_stats_have_no_conditions():
    stats = compute_stats(get_target("authorizer-parity-rbac"), samples=20, seed=0)
    assert stats["operators"] == {}
    assert stats["outcomes"] == {"success": 1.0}


def test_parser_safety_stats():
    stats = compute_stats(get_target("parser-safety"), samples=10)
    assert set(stats) == {"samples", "parsed_fraction", "outcomes"}
    with pytest.raises(ValueError):
        compute_stats(get_target("parser-safety"), samples=0)
