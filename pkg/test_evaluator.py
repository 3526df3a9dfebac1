"""
Test Expression Evaluator
-------------------------
Values, error kinds, short circuiting, wildcard matching and per-policy
satisfaction.

Run: pytest test_evaluator.py
"""

import sys

import pytest

from app.config import EVAL_DEPTH_LIMIT, clamp_depth_limit
from app.evaluator import evaluate, satisfied, scope_matches, wildcard_match
from app.models import (
    LONG_MAX,
    WILDCARD,
    Bool,
    ConditionKind,
    Condition,
    Effect,
    EntityData,
    EntityRef,
    EntityUID,
    Entities,
    EqScope,
    EvalError,
    InScope,
    InSetScope,
    Lit,
    Long,
    Not,
    Pattern,
    Policy,
    Record,
    Request,
    SatisfactionStatus,
    SetValue,
    Str,
)
from app.parser import parse_expr

ALICE = EntityUID.of("User", "alice")
TEAM = EntityUID.of("Team", "t")
ROOT = EntityUID.of("Team", "root")
VIEW = EntityUID.of("Action", "view")
READ = EntityUID.of("Action", "read")
DOC = EntityUID.of("Doc", "d1")

STORE = Entities({
    ALICE: EntityData({"name": Str("alice"), "age": Long(30)}, {TEAM}),
    TEAM: EntityData({"tags": SetValue.of(Str("x"), Str("y"))}, {ROOT}),
    ROOT: EntityData(),
    DOC: EntityData({"owner": EntityRef(ALICE)}),
    VIEW: EntityData(parents={READ}),
    READ: EntityData(),
})
REQUEST = Request(ALICE, VIEW, DOC, Record.of(n=Long(5), flag=Bool(True)))


def run(source: str):
    return evaluate(parse_expr(source), REQUEST, STORE)


def error_kind(source: str) -> str:
    with pytest.raises(EvalError) as caught:
        run(source)
    return caught.value.kind


# ============================================================================
# VALUES
# ============================================================================

VALUE_CASES = [
    ("1 + 2", Long(3)),
    ("10 - 20", Long(-10)),
    ("-(3)", Long(-3)),
    ("!false", Bool(True)),
    ("1 < 2 && 2 <= 2", Bool(True)),
    ("3 > 4 || 4 >= 4", Bool(True)),
    ('"a" == "a"', Bool(True)),
    ('1 == "1"', Bool(False)),
    ('1 != "1"', Bool(True)),
    ("if true then 1 else 2", Long(1)),
    ("principal", EntityRef(ALICE)),
    ("principal.name", Str("alice")),
    ('principal["age"]', Long(30)),
    ("resource.owner == principal", Bool(True)),
    ("principal has name", Bool(True)),
    ("principal has missing", Bool(False)),
    ("context.n", Long(5)),
    ("context has flag", Bool(True)),
    ("{a: 1, b: 2}.b", Long(2)),
    ('{"a b": 1} has "a b"', Bool(True)),
    ("[1, 2, 2]", SetValue.of(Long(1), Long(2))),
    ("[1, 2].contains(2)", Bool(True)),
    ("[1, 2].contains(3)", Bool(False)),
    ("principal in Team::\"root\"", Bool(True)),
    ("principal in principal", Bool(True)),
    ("Team::\"root\" in principal", Bool(False)),
    ("principal in [Doc::\"d1\", Team::\"t\"]", Bool(True)),
    ("principal in []", Bool(False)),
    ("action in Action::\"read\"", Bool(True)),
    ("Team::\"t\".tags.contains(\"y\")", Bool(True)),
    ('"abc" like "a*c"', Bool(True)),
    ('"abc" like "a*d"', Bool(False)),
    ("User::\"ghost\" has name", Bool(False)),
]


@pytest.mark.parametrize("source,expected", VALUE_CASES)
def test_evaluate_values(source, expected):
    assert run(source) == expected


# ============================================================================
# ERRORS
# ============================================================================

ERROR_CASES = [
    ('1 + "a"', "TypeError"),
    ("!1", "TypeError"),
    ("if 1 then true else false", "TypeError"),
    ('"a" < "b"', "TypeError"),
    ("1 in Team::\"t\"", "TypeError"),
    ("principal in [1]", "TypeError"),
    ("1.contains(1)", "TypeError"),
    ("(1).name", "TypeError"),
    ("true && 1", "TypeError"),
    ("principal.missing", "MissingAttr"),
    ("User::\"ghost\".name", "MissingAttr"),
    ("context.nope", "MissingAttr"),
    (f"{LONG_MAX} + 1", "Overflow"),
    ("-9223372036854775808 - 1", "Overflow"),
    ("-(-9223372036854775808)", "Overflow"),
]


@pytest.mark.parametrize("source,kind", ERROR_CASES)
def test_evaluate_errors(source, kind):
    assert error_kind(source) == kind


def test_short_circuit_skips_errors():
    # Test 1: && stops at false
    assert run("false && principal.missing") == Bool(False)
    # Test 2: || stops at true
    assert run("true || principal.missing") == Bool(True)
    # Test 3: if only evaluates the chosen branch
    assert run("if false then principal.missing else 7") == Long(7)


def test_other_operators_evaluate_both_sides():
    assert error_kind("principal.missing == 1") == "MissingAttr"
    assert error_kind("1 == principal.missing") == "MissingAttr"


def test_operand_errors_come_before_kind_errors():
    # left operand evaluates fine but has the wrong kind; the right one fails first
    assert error_kind('"a" + principal.missing') == "MissingAttr"


def test_depth_guard_stops_hand_built_trees():
    expr = Lit(Bool(True))
    for _ in range(EVAL_DEPTH_LIMIT + 5):
        expr = Not(expr)
    with pytest.raises(EvalError) as caught:
        evaluate(expr, REQUEST, STORE)
    assert caught.value.kind == "ArityOrDomain"


@pytest.mark.parametrize("value,recursion_limit,expected", [
    (200, 1000, 200),
    (5000, 1000, 250),
    (0, 1000, 1),
    (300, 4000, 300),
])
def test_clamp_depth_limit(value, recursion_limit, expected):
    assert clamp_depth_limit(value, recursion_limit) == expected


def test_configured_depth_limit_is_under_the_stack_limit():
    assert EVAL_DEPTH_LIMIT <= sys.getrecursionlimit() // 4


# ============================================================================
# WILDCARDS
# ============================================================================

WILDCARD_CASES = [
    ("", (), True),
    ("", (WILDCARD,), True),
    ("abc", (WILDCARD,), True),
    ("abc", ("a", WILDCARD, "c"), True),
    ("ac", ("a", WILDCARD, "c"), True),
    ("abcbc", ("a", WILDCARD, "b", "c"), True),
    ("abcbd", ("a", WILDCARD, "b", "c"), False),
    ("a*", ("a", "*"), True),
    ("ab", ("a", "*"), False),
    ("abc", ("a", "b"), False),
]


@pytest.mark.parametrize("text,elements,expected", WILDCARD_CASES)
def test_wildcard_match(text, elements, expected):
    assert wildcard_match(text, Pattern(elements)) is expected


def test_wildcard_match_is_not_exponential():
    text = "a" * 2000
    pattern = Pattern((WILDCARD, "a") * 20 + ("b",))
    assert wildcard_match(text, pattern) is False


# ============================================================================
# POLICY SATISFACTION
# ============================================================================

def policy(*conditions, **scopes) -> Policy:
    return Policy("p", Effect.PERMIT, conditions=conditions, **scopes)


def when(source: str) -> Condition:
    return Condition(ConditionKind.WHEN, parse_expr(source))


def unless(source: str) -> Condition:
    return Condition(ConditionKind.UNLESS, parse_expr(source))


def test_scope_matching():
    assert scope_matches(policy(principal_scope=InScope(ROOT)), REQUEST, STORE)
    assert scope_matches(policy(principal_scope=EqScope(ALICE)), REQUEST, STORE)
    assert not scope_matches(policy(principal_scope=EqScope(TEAM)), REQUEST, STORE)
    assert scope_matches(policy(action_scope=InSetScope((READ,))), REQUEST, STORE)
    assert not scope_matches(policy(resource_scope=InScope(ROOT)), REQUEST, STORE)


def test_satisfaction_statuses():
    # Test 1: no conditions
    assert satisfied(policy(), REQUEST, STORE).status is SatisfactionStatus.SATISFIED
    # Test 2: when and unless
    assert satisfied(policy(when("true"), unless("false")), REQUEST, STORE).status \
        is SatisfactionStatus.SATISFIED
    assert satisfied(policy(when("true"), unless("true")), REQUEST, STORE).status \
        is SatisfactionStatus.NOT_SATISFIED
    # Test 3: non-boolean body is a type error
    outcome = satisfied(policy(when("1")), REQUEST, STORE)
    assert outcome.status is SatisfactionStatus.ERRORED
    assert outcome.error.kind == "TypeError"
    # Test 4: scope mismatch wins over erroring conditions
    outcome = satisfied(policy(when("principal.missing"), principal_scope=EqScope(TEAM)), REQUEST, STORE)
    assert outcome.status is SatisfactionStatus.NOT_SATISFIED


def test_first_condition_error_is_reported():
    outcome = satisfied(policy(when("false"), when("principal.missing"), when("1 + true")), REQUEST, STORE)
    assert outcome.status is SatisfactionStatus.ERRORED
    assert outcome.error.kind == "MissingAttr"
