"""
Policy Validator
----------------
Schema-based typechecking of policies.

A policy validates when every condition typechecks to Bool in every request
environment compatible with its scope. Optional attributes may only be read
under a capability established by a ``has`` test on the same receiver
expression; capabilities flow into the right operand of ``&&`` and the
then-branch of ``if`` and nowhere else.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

from app.config import EVAL_DEPTH_LIMIT
from app.models import (
    ARITHMETIC_OPS,
    BOOL,
    COMPARISON_OPS,
    LONG,
    STRING,
    And,
    AnyScope,
    AttrType,
    BinaryOp,
    BinOp,
    Bool,
    EntityLit,
    EntityT,
    EntityUID,
    EqScope,
    Expr,
    GetAttr,
    HasAttr,
    If,
    InScope,
    InSetScope,
    Like,
    Lit,
    Long,
    Neg,
    Not,
    Or,
    Policy,
    PolicySet,
    RecordLit,
    RecordT,
    Schema,
    SetLit,
    SetT,
    Type,
    Var,
    VarName,
)

logger = logging.getLogger(__name__)

CapabilitySet = frozenset  # of (receiver expression, attribute name)

NO_CAPS: frozenset = frozenset()


@dataclass(frozen=True)
class RequestEnv:
    principal_type: str
    action: EntityUID
    resource_type: str
    context_type: RecordT

    def __str__(self) -> str:
        return f"({self.principal_type}, {self.action}, {self.resource_type})"


class TypeCheckError(Exception):
    """
    A subexpression failed to typecheck.

    Args:
        expr: Offending subexpression
        message: Description of the problem
        expected: Expected type description, if one applies
        actual: Synthesised type of the subexpression, if known
        env: Request environment the check ran in
    """

    def __init__(self, expr: Optional[Expr], message: str, expected: Optional[str] = None,
                 actual: Optional[Type] = None, env: Optional[RequestEnv] = None):
        self.expr = expr
        self.message = message
        self.expected = expected
        self.actual = actual
        self.env = env
        super().__init__(message)

    def in_env(self, env: RequestEnv) -> "TypeCheckError":
        self.env = env
        return self

    def __str__(self) -> str:
        where = f" in env {self.env}" if self.env is not None else ""
        return f"{self.message}{where}"


# ============================================================================
# REQUEST ENVIRONMENTS
# ============================================================================

def request_envs(schema: Schema) -> list[RequestEnv]:
    """One env per (action, principal type, resource type), ordered by action then type names."""
    envs = []
    for action in sorted(schema.actions):
        decl = schema.actions[action]
        for principal_type in sorted(decl.principal_types):
            for resource_type in sorted(decl.resource_types):
                envs.append(RequestEnv(principal_type, action, resource_type, decl.context))
    return envs


def _entity_scope_compatible(scope, type_name: str, schema: Schema) -> bool:
    if isinstance(scope, AnyScope):
        return True
    if isinstance(scope, EqScope):
        return scope.uid.type_name == type_name
    if isinstance(scope, InScope):
        target = scope.uid.type_name
        return target == type_name or target in schema.ancestor_types(type_name)
    return False


def _action_scope_compatible(scope, action: EntityUID, schema: Schema) -> bool:
    if isinstance(scope, AnyScope):
        return True
    if isinstance(scope, EqScope):
        return scope.uid == action
    if isinstance(scope, InSetScope):
        reachable = schema.action_ancestors(action) | {action}
        return any(uid in reachable for uid in scope.uids)
    return False


def env_compatible(policy: Policy, env: RequestEnv, schema: Schema) -> bool:
    """Whether a request in ``env`` could possibly match the policy's scope."""
    return (
        _entity_scope_compatible(policy.principal_scope, env.principal_type, schema)
        and _action_scope_compatible(policy.action_scope, env.action, schema)
        and _entity_scope_compatible(policy.resource_scope, env.resource_type, schema)
    )


# ============================================================================
# TYPECHECKING
# ============================================================================

def typecheck(expr: Expr, env: RequestEnv, caps: CapabilitySet,
              schema: Schema) -> tuple[Type, CapabilitySet]:
    """
    Synthesise the type of an expression.

    Args:
        expr: Expression to check
        env: Types of principal, action, resource and context
        caps: Capabilities already established
        schema: Declared entity and action shapes

    Returns:
        (type, capabilities that hold when the expression evaluates to true)

    Raises:
        TypeCheckError: On the first ill-typed subexpression
    """
    return _Checker(env, schema).check(expr, frozenset(caps), 0)


class _Checker:
    def __init__(self, env: RequestEnv, schema: Schema):
        self.env = env
        self.schema = schema

    def fail(self, expr: Expr, message: str, expected: Optional[str] = None,
             actual: Optional[Type] = None) -> TypeCheckError:
        return TypeCheckError(expr, message, expected, actual, self.env)

    def expect(self, expr: Expr, caps: CapabilitySet, depth: int,
               expected: Type) -> CapabilitySet:
        actual, caps_true = self.check(expr, caps, depth)
        if actual != expected:
            raise self.fail(expr, f"expected {expected}, got {actual}", str(expected), actual)
        return caps_true

    def check(self, expr: Expr, caps: CapabilitySet, depth: int) -> tuple[Type, CapabilitySet]:
        if depth > EVAL_DEPTH_LIMIT:
            logger.warning(f"Typecheck depth guard fired at depth {depth}")
            raise self.fail(expr, "expression nesting exceeds limit")
        depth += 1

        if isinstance(expr, Lit):
            if isinstance(expr.value, Bool):
                return BOOL, NO_CAPS
            if isinstance(expr.value, Long):
                return LONG, NO_CAPS
            return STRING, NO_CAPS
        if isinstance(expr, EntityLit):
            return self.entity_literal(expr), NO_CAPS
        if isinstance(expr, Var):
            return self.variable(expr.name), NO_CAPS

        if isinstance(expr, Not):
            self.expect(expr.arg, caps, depth, BOOL)
            return BOOL, NO_CAPS
        if isinstance(expr, Neg):
            self.expect(expr.arg, caps, depth, LONG)
            return LONG, NO_CAPS

        if isinstance(expr, And):
            left_caps = self.expect(expr.left, caps, depth, BOOL)
            right_caps = self.expect(expr.right, caps | left_caps, depth, BOOL)
            return BOOL, left_caps | right_caps
        if isinstance(expr, Or):
            self.expect(expr.left, caps, depth, BOOL)
            self.expect(expr.right, caps, depth, BOOL)
            return BOOL, NO_CAPS
        if isinstance(expr, If):
            guard_caps = self.expect(expr.cond, caps, depth, BOOL)
            then_type, _ = self.check(expr.then, caps | guard_caps, depth)
            else_type, _ = self.check(expr.otherwise, caps, depth)
            if then_type != else_type:
                raise self.fail(expr, f"if branches disagree: {then_type} vs {else_type}",
                                str(then_type), else_type)
            return then_type, NO_CAPS

        if isinstance(expr, BinOp):
            return self.binary(expr, caps, depth), NO_CAPS

        if isinstance(expr, Like):
            self.expect(expr.arg, caps, depth, STRING)
            return BOOL, NO_CAPS

        if isinstance(expr, HasAttr):
            receiver, _ = self.check(expr.arg, caps, depth)
            declared = self.attribute(expr, receiver)
            if declared is not None and not declared.required:
                return BOOL, frozenset({(expr.arg, expr.attr)})
            return BOOL, NO_CAPS
        if isinstance(expr, GetAttr):
            receiver, _ = self.check(expr.arg, caps, depth)
            declared = self.attribute(expr, receiver)
            if declared is None:
                raise self.fail(expr, f"attribute {expr.attr!r} is not declared on {receiver}")
            if not declared.required and (expr.arg, expr.attr) not in caps:
                raise self.fail(expr, f"optional attribute {expr.attr!r} read without a has guard")
            return declared.type, NO_CAPS

        if isinstance(expr, SetLit):
            if not expr.elements:
                raise self.fail(expr, "cannot infer the element type of an empty set")
            first, _ = self.check(expr.elements[0], caps, depth)
            for element in expr.elements[1:]:
                self.expect(element, caps, depth, first)
            return SetT(first), NO_CAPS
        if isinstance(expr, RecordLit):
            fields: dict[str, AttrType] = {}
            for name, element in expr.fields:
                element_type, _ = self.check(element, caps, depth)
                fields[name] = AttrType(element_type, True)
            return RecordT.of(fields), NO_CAPS

        raise self.fail(expr, f"unknown expression node {type(expr).__name__}")

    def entity_literal(self, expr: EntityLit) -> Type:
        uid = expr.uid
        if uid.is_action:
            if uid not in self.schema.actions:
                raise self.fail(expr, f"undeclared action {uid}")
        elif uid.type_name not in self.schema.entity_types:
            raise self.fail(expr, f"undeclared entity type {uid.type_name}")
        return EntityT(uid.type_name)

    def variable(self, name: VarName) -> Type:
        if name is VarName.PRINCIPAL:
            return EntityT(self.env.principal_type)
        if name is VarName.ACTION:
            return EntityT(self.env.action.type_name)
        if name is VarName.RESOURCE:
            return EntityT(self.env.resource_type)
        return self.env.context_type

    def attribute(self, expr: Expr, receiver: Type) -> Optional[AttrType]:
        """Declared attribute of an entity or record type; raises on any other type."""
        if isinstance(receiver, RecordT):
            return receiver.get(expr.attr)
        if isinstance(receiver, EntityT):
            decl = self.schema.entity_types.get(receiver.name)
            return decl.attributes.get(expr.attr) if decl is not None else None
        raise self.fail(expr, f"expected an entity or record, got {receiver}",
                        "Entity or Record", receiver)

    def binary(self, expr: BinOp, caps: CapabilitySet, depth: int) -> Type:
        op = expr.op
        if op in (BinaryOp.EQ, BinaryOp.NEQ):
            self.check(expr.left, caps, depth)
            self.check(expr.right, caps, depth)
            return BOOL
        if op in COMPARISON_OPS or op in ARITHMETIC_OPS:
            self.expect(expr.left, caps, depth, LONG)
            self.expect(expr.right, caps, depth, LONG)
            return BOOL if op in COMPARISON_OPS else LONG
        if op is BinaryOp.IN:
            left, _ = self.check(expr.left, caps, depth)
            if not isinstance(left, EntityT):
                raise self.fail(expr.left, f"left operand of in must be an entity, got {left}",
                                "Entity", left)
            right, _ = self.check(expr.right, caps, depth)
            if isinstance(right, EntityT) or (isinstance(right, SetT) and isinstance(right.element, EntityT)):
                return BOOL
            raise self.fail(expr.right, f"right operand of in must be an entity or entity set, got {right}",
                            "Entity or Set<Entity>", right)
        if op is BinaryOp.CONTAINS:
            left, _ = self.check(expr.left, caps, depth)
            if not isinstance(left, SetT):
                raise self.fail(expr.left, f"contains needs a set, got {left}", "Set", left)
            self.expect(expr.right, caps, depth, left.element)
            return BOOL
        raise self.fail(expr, f"unknown operator {op.value}")


# ============================================================================
# POLICIES
# ============================================================================

def validate_policy(policy: Policy, schema: Schema) -> list[TypeCheckError]:
    """
    Typecheck a policy in every scope-compatible request environment.

    Returns:
        All errors found (an empty list means the policy validates)
    """
    errors: list[TypeCheckError] = []
    for env in request_envs(schema):
        if not env_compatible(policy, env, schema):
            continue
        for condition in policy.conditions:
            try:
                body_type, _ = typecheck(condition.body, env, NO_CAPS, schema)
            except TypeCheckError as exc:
                errors.append(exc.in_env(env))
                continue
            if body_type != BOOL:
                errors.append(TypeCheckError(condition.body, f"condition has type {body_type}, expected Bool",
                                             "Bool", body_type, env))
    if errors:
        logger.debug(f"Policy {policy.id} failed validation with {len(errors)} error(s)")
    return errors


def validate_policy_set(policies: PolicySet, schema: Schema) -> dict[str, list[TypeCheckError]]:
    """Validate every policy; the result maps each failing policy id to its errors."""
    report = {}
    for policy in policies:
        errors = validate_policy(policy, schema)
        if errors:
            report[policy.id] = errors
    return report
