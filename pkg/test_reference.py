"""
Test Reference Model
--------------------
Exhaustive agreement between the production engine and the reference model
on every small expression over a fixed world, plus typing soundness on the
same set.

Run: pytest test_reference.py
"""

import os

from app.evaluator import evaluate
from app.generators import ORACLE_GROUP, enumerate_exprs, oracle_world
from app.harness import UNSOUND_KINDS
from app.hierarchy import ancestors
from app.models import (
    Condition,
    ConditionKind,
    Effect,
    EvalError,
    Policy,
    expr_size,
)
from app.reference import ref_ancestors, ref_evaluate, ref_validate_policy
from app.validator import validate_policy

# Size 4 is about twenty thousand expressions; the acceptance profile goes to
# size 5, close to half a million.
MAX_SIZE = 5 if os.getenv("HYPOTHESIS_PROFILE") == "acceptance" else 4

WORLD = oracle_world()
EXPRESSIONS = list(enumerate_exprs(MAX_SIZE))


def outcome(evaluate_fn, expr):
    try:
        return "value", evaluate_fn(expr, WORLD.request, WORLD.store)
    except EvalError as exc:
        return "error", exc.kind


def as_policy(expr) -> Policy:
    return Policy("candidate", Effect.PERMIT, conditions=(Condition(ConditionKind.WHEN, expr),))


def test_enumeration_shape():
    # Test 1: nine leaves, then everything up to the bound
    sizes = [expr_size(expr) for expr in EXPRESSIONS]
    assert sizes.count(1) == 9
    assert sizes.count(2) == 9 * 5
    assert max(sizes) == MAX_SIZE
    # Test 2: ordered by size, no repeats
    assert sizes == sorted(sizes)
    assert len(set(EXPRESSIONS)) == len(EXPRESSIONS)


def test_oracle_world_hierarchy():
    for uid in WORLD.store:
        assert ancestors(WORLD.store, uid) == ref_ancestors(WORLD.store, uid)
    assert ORACLE_GROUP in ancestors(WORLD.store, WORLD.request.principal)


def test_evaluator_agrees_with_reference():
    mismatches = [
        (expr, outcome(evaluate, expr), outcome(ref_evaluate, expr))
        for expr in EXPRESSIONS
        if outcome(evaluate, expr) != outcome(ref_evaluate, expr)
    ]
    assert mismatches == []


def test_validator_agrees_with_reference():
    mismatches = [
        expr for expr in EXPRESSIONS
        if (validate_policy(as_policy(expr), WORLD.schema) == [])
        != (ref_validate_policy(as_policy(expr), WORLD.schema) == [])
    ]
    assert mismatches == []


def test_validated_expressions_never_hit_type_errors():
    validated = [expr for expr in EXPRESSIONS if validate_policy(as_policy(expr), WORLD.schema) == []]
    # the alphabet is rich enough that a fair share typechecks
    assert len(validated) > 100
    unsound = [
        (expr, kind) for expr in validated
        for status, kind in [outcome(evaluate, expr)]
        if status == "error" and kind in UNSOUND_KINDS
    ]
    assert unsound == []

