"""
Expression Evaluator
--------------------
Big-step evaluation of policy expressions against a request and an entity
store, plus the per-policy satisfaction check used by the authorizer.

Evaluation order is fixed: operands are evaluated left to right, then
their kinds are checked left to right. ``&&``, ``||`` and ``if`` short
circuit; every other operator evaluates all of its operands.
"""

from __future__ import annotations

import logging

from app.config import EVAL_DEPTH_LIMIT
from app.hierarchy import in_relation
from app.models import (
    ARITHMETIC_OPS,
    COMPARISON_OPS,
    LONG_MAX,
    LONG_MIN,
    NOT_SATISFIED,
    SATISFIED,
    And,
    AnyScope,
    ArityOrDomainError,
    BinaryOp,
    BinOp,
    Bool,
    ConditionKind,
    Entities,
    EntityLit,
    EntityRef,
    EqScope,
    EvalError,
    EvalTypeError,
    Expr,
    GetAttr,
    HasAttr,
    If,
    InScope,
    InSetScope,
    IntegerOverflowError,
    Like,
    Lit,
    Long,
    MissingAttrError,
    Neg,
    Not,
    Or,
    Pattern,
    Policy,
    Record,
    RecordLit,
    Request,
    Satisfaction,
    SatisfactionStatus,
    SetLit,
    SetValue,
    Str,
    Value,
    Var,
    VarName,
    Wildcard,
)

logger = logging.getLogger(__name__)


# ============================================================================
# EXPRESSIONS
# ============================================================================

def evaluate(expr: Expr, request: Request, store: Entities) -> Value:
    """
    Evaluate an expression.

    Args:
        expr: Expression to evaluate
        request: Supplies principal, action, resource and context
        store: Entity store for attribute lookups and ``in``

    Returns:
        The resulting value

    Raises:
        EvalError: EvalTypeError, MissingAttrError, IntegerOverflowError or
            ArityOrDomainError

    Example:
        evaluate(parse_expr("1 + 2"), request, store) -> Long(3)
    """
    return _eval(expr, request, store, 0)


def _expect(value: Value, *kinds: str) -> Value:
    if value.kind not in kinds:
        raise EvalTypeError(kinds, value.kind)
    return value


def _eval(expr: Expr, request: Request, store: Entities, depth: int) -> Value:
    if depth > EVAL_DEPTH_LIMIT:
        logger.warning(f"Evaluation depth guard fired at depth {depth}")
        raise ArityOrDomainError("expression nesting exceeds limit")
    depth += 1

    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, EntityLit):
        return EntityRef(expr.uid)
    if isinstance(expr, Var):
        return _variable(expr.name, request)

    if isinstance(expr, Not):
        value = _expect(_eval(expr.arg, request, store, depth), "Bool")
        return Bool(not value.value)
    if isinstance(expr, Neg):
        value = _expect(_eval(expr.arg, request, store, depth), "Long")
        if value.value == LONG_MIN:
            raise IntegerOverflowError("negation")
        return Long(-value.value)

    if isinstance(expr, And):
        left = _expect(_eval(expr.left, request, store, depth), "Bool")
        if not left.value:
            return left
        return _expect(_eval(expr.right, request, store, depth), "Bool")
    if isinstance(expr, Or):
        left = _expect(_eval(expr.left, request, store, depth), "Bool")
        if left.value:
            return left
        return _expect(_eval(expr.right, request, store, depth), "Bool")
    if isinstance(expr, If):
        guard = _expect(_eval(expr.cond, request, store, depth), "Bool")
        branch = expr.then if guard.value else expr.otherwise
        return _eval(branch, request, store, depth)

    if isinstance(expr, BinOp):
        left = _eval(expr.left, request, store, depth)
        right = _eval(expr.right, request, store, depth)
        return _binary(expr.op, left, right, store)

    if isinstance(expr, Like):
        value = _expect(_eval(expr.arg, request, store, depth), "String")
        return Bool(wildcard_match(value.value, expr.pattern))

    if isinstance(expr, HasAttr):
        target = _expect(_eval(expr.arg, request, store, depth), "Entity", "Record")
        return Bool(_lookup(target, store, expr.attr) is not None)
    if isinstance(expr, GetAttr):
        target = _expect(_eval(expr.arg, request, store, depth), "Entity", "Record")
        found = _lookup(target, store, expr.attr)
        if found is None:
            raise MissingAttrError(expr.attr)
        return found

    if isinstance(expr, SetLit):
        return SetValue(frozenset(_eval(e, request, store, depth) for e in expr.elements))
    if isinstance(expr, RecordLit):
        fields: dict[str, Value] = {}
        for name, element in expr.fields:
            fields[name] = _eval(element, request, store, depth)
        return Record.of(fields)

    raise ArityOrDomainError(f"unknown expression node {type(expr).__name__}")


def _variable(name: VarName, request: Request) -> Value:
    if name is VarName.PRINCIPAL:
        return EntityRef(request.principal)
    if name is VarName.ACTION:
        return EntityRef(request.action)
    if name is VarName.RESOURCE:
        return EntityRef(request.resource)
    return request.context


def _lookup(target: Value, store: Entities, attr: str):
    if isinstance(target, Record):
        return target.get(attr)
    data = store.get(target.uid)
    return data.attrs.get(attr) if data is not None else None


def _binary(op: BinaryOp, left: Value, right: Value, store: Entities) -> Value:
    if op is BinaryOp.EQ:
        return Bool(left == right)
    if op is BinaryOp.NEQ:
        return Bool(left != right)

    if op in COMPARISON_OPS or op in ARITHMETIC_OPS:
        a = _expect(left, "Long").value
        b = _expect(right, "Long").value
        if op is BinaryOp.LT:
            return Bool(a < b)
        if op is BinaryOp.LE:
            return Bool(a <= b)
        if op is BinaryOp.GT:
            return Bool(a > b)
        if op is BinaryOp.GE:
            return Bool(a >= b)
        result = a + b if op is BinaryOp.ADD else a - b
        if not LONG_MIN <= result <= LONG_MAX:
            raise IntegerOverflowError("addition" if op is BinaryOp.ADD else "subtraction")
        return Long(result)

    if op is BinaryOp.IN:
        member = _expect(left, "Entity").uid
        container = _expect(right, "Entity", "Set")
        if isinstance(container, EntityRef):
            return Bool(in_relation(store, member, container.uid))
        groups = [_expect(element, "Entity").uid for element in container]
        return Bool(any(in_relation(store, member, group) for group in groups))

    if op is BinaryOp.CONTAINS:
        collection = _expect(left, "Set")
        return Bool(right in collection.elements)

    raise ArityOrDomainError(f"unknown operator {op.value}")


def wildcard_match(text: str, pattern: Pattern) -> bool:
    """
    Match ``text`` against a ``like`` pattern, ``*`` matching any run of
    characters (including none).

    Greedy scan with backtracking to the most recent wildcard, linear in
    practice and never exponential.
    """
    elements = pattern.elements
    t = p = 0
    star = -1
    resume = 0
    while t < len(text):
        if p < len(elements) and isinstance(elements[p], Wildcard):
            star, resume = p, t
            p += 1
        elif p < len(elements) and elements[p] == text[t]:
            t += 1
            p += 1
        elif star != -1:
            resume += 1
            t = resume
            p = star + 1
        else:
            return False
    while p < len(elements) and isinstance(elements[p], Wildcard):
        p += 1
    return p == len(elements)


# ============================================================================
# POLICIES
# ============================================================================

def _scope_holds(scope, uid, store: Entities) -> bool:
    if isinstance(scope, AnyScope):
        return True
    if isinstance(scope, EqScope):
        return uid == scope.uid
    if isinstance(scope, InScope):
        return in_relation(store, uid, scope.uid)
    if isinstance(scope, InSetScope):
        return any(in_relation(store, uid, group) for group in scope.uids)
    return False


def scope_matches(policy: Policy, request: Request, store: Entities) -> bool:
    """True iff the request falls within the policy's principal, action and resource scope."""
    return (
        _scope_holds(policy.principal_scope, request.principal, store)
        and _scope_holds(policy.action_scope, request.action, store)
        and _scope_holds(policy.resource_scope, request.resource, store)
    )


def satisfied(policy: Policy, request: Request, store: Entities) -> Satisfaction:
    """
    Decide whether a policy is satisfied by a request.

    Every condition is evaluated; when one or more raise, the error from the
    first erroring condition (textual order) is reported and the policy
    counts as Errored.
    """
    if not scope_matches(policy, request, store):
        return NOT_SATISFIED

    holds = True
    first_error: EvalError | None = None
    for condition in policy.conditions:
        try:
            value = evaluate(condition.body, request, store)
            if not isinstance(value, Bool):
                raise EvalTypeError(("Bool",), value.kind)
        except EvalError as exc:
            if first_error is None:
                first_error = exc
            continue
        expected = condition.kind is ConditionKind.WHEN
        if value.value is not expected:
            holds = False

    if first_error is not None:
        return Satisfaction(SatisfactionStatus.ERRORED, first_error)
    return SATISFIED if holds else NOT_SATISFIED
