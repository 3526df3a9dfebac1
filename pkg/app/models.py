"""
Domain Models
-------------
The shared data model of the policy engine: entity identifiers, values,
entity stores, requests, policies and their expression AST, the validator's
type language, schemas, responses and the runtime error taxonomy.

Every model here is immutable after construction. Production code and the
reference model both build on these types and on nothing else in common.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, ClassVar, Iterable, Iterator, Mapping, Optional, Union

from app.lexer import escape_string

IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

LONG_MIN = -(2 ** 63)
LONG_MAX = 2 ** 63 - 1

ACTION_TYPE = "Action"


# ============================================================================
# ENTITY IDENTIFIERS
# ============================================================================

@dataclass(frozen=True, order=True)
class EntityUID:
    """
    Typed entity identifier, e.g. ``Team::"interns"``.

    ``entity_type`` holds the ``::``-separated segments; ordering is
    lexicographic on (segments, id).
    """
    entity_type: tuple[str, ...]
    entity_id: str

    def __post_init__(self):
        if isinstance(self.entity_type, str):
            object.__setattr__(self, "entity_type", tuple(self.entity_type.split("::")))
        else:
            object.__setattr__(self, "entity_type", tuple(self.entity_type))
        if not self.entity_type:
            raise ValueError("entity type must have at least one segment")
        for segment in self.entity_type:
            if not IDENTIFIER_RE.match(segment):
                raise ValueError(f"invalid entity type segment: {segment!r}")
        if not isinstance(self.entity_id, str):
            raise ValueError("entity id must be a string")

    @classmethod
    def of(cls, type_name: str, entity_id: str) -> "EntityUID":
        return cls(tuple(type_name.split("::")), entity_id)

    @property
    def type_name(self) -> str:
        return "::".join(self.entity_type)

    @property
    def is_action(self) -> bool:
        return self.entity_type[-1] == ACTION_TYPE

    def __str__(self) -> str:
        return f'{self.type_name}::"{escape_string(self.entity_id)}"'


# ============================================================================
# VALUES
# ============================================================================

class Value:
    """Base class of runtime values. ``kind`` names the variant."""
    kind: ClassVar[str] = "Value"


@dataclass(frozen=True)
class Bool(Value):
    value: bool
    kind: ClassVar[str] = "Bool"


@dataclass(frozen=True)
class Long(Value):
    value: int
    kind: ClassVar[str] = "Long"

    def __post_init__(self):
        if isinstance(self.value, bool) or not LONG_MIN <= self.value <= LONG_MAX:
            raise ValueError(f"Long out of signed 64-bit range: {self.value!r}")


@dataclass(frozen=True)
class Str(Value):
    value: str
    kind: ClassVar[str] = "String"


@dataclass(frozen=True)
class EntityRef(Value):
    uid: EntityUID
    kind: ClassVar[str] = "Entity"


@dataclass(frozen=True)
class SetValue(Value):
    """Duplicate-free, order-insensitive set of values."""
    elements: frozenset
    kind: ClassVar[str] = "Set"

    def __post_init__(self):
        object.__setattr__(self, "elements", frozenset(self.elements))

    @classmethod
    def of(cls, *values: Value) -> "SetValue":
        return cls(frozenset(values))

    def __iter__(self) -> Iterator[Value]:
        return iter(sorted(self.elements, key=value_sort_key))

    def __len__(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class Record(Value):
    """
    Finite map from attribute name to value.

    Stored as key-sorted pairs so that equality and hashing ignore the
    order the record was built in.
    """
    fields: tuple
    kind: ClassVar[str] = "Record"

    def __post_init__(self):
        items = self.fields.items() if isinstance(self.fields, Mapping) else self.fields
        normalized = dict(items)
        object.__setattr__(self, "fields", tuple(sorted(normalized.items())))

    @classmethod
    def of(cls, mapping: Optional[Mapping[str, Value]] = None, **kwargs: Value) -> "Record":
        merged = dict(mapping or {})
        merged.update(kwargs)
        return cls(tuple(merged.items()))

    def get(self, name: str) -> Optional[Value]:
        for key, value in self.fields:
            if key == name:
                return value
        return None

    def has(self, name: str) -> bool:
        return any(key == name for key, _ in self.fields)

    def keys(self) -> list[str]:
        return [key for key, _ in self.fields]

    def as_dict(self) -> dict[str, Value]:
        return dict(self.fields)


EMPTY_RECORD = Record(())

_KIND_RANK = {"Bool": 0, "Long": 1, "String": 2, "Entity": 3, "Set": 4, "Record": 5}


def value_sort_key(value: Value) -> tuple:
    """Total order over values, used wherever output must be deterministic."""
    rank = _KIND_RANK[value.kind]
    if isinstance(value, (Bool, Long, Str)):
        return (rank, value.value)
    if isinstance(value, EntityRef):
        return (rank, value.uid.entity_type, value.uid.entity_id)
    if isinstance(value, SetValue):
        return (rank, tuple(sorted(value_sort_key(v) for v in value.elements)))
    return (rank, tuple((key, value_sort_key(v)) for key, v in value.fields))


# ============================================================================
# ENTITY STORE
# ============================================================================

@dataclass(frozen=True)
class EntityData:
    attrs: Record = EMPTY_RECORD
    parents: frozenset = frozenset()

    def __post_init__(self):
        if isinstance(self.attrs, Mapping):
            object.__setattr__(self, "attrs", Record.of(self.attrs))
        object.__setattr__(self, "parents", frozenset(self.parents))


class Entities:
    """
    Entity store: EntityUID -> EntityData.

    The mapping never changes after construction. ``closure_cache`` is a
    memo of ancestor sets owned by ``app.hierarchy``; it is filled lazily
    and never needs invalidating.
    """

    def __init__(self, entities: Union[Mapping[EntityUID, EntityData], Iterable[tuple]] = ()):
        items = entities.items() if isinstance(entities, Mapping) else entities
        self._entities: dict[EntityUID, EntityData] = dict(items)
        self.closure_cache: dict[EntityUID, frozenset] = {}

    def get(self, uid: EntityUID) -> Optional[EntityData]:
        return self._entities.get(uid)

    def parents(self, uid: EntityUID) -> frozenset:
        data = self._entities.get(uid)
        return data.parents if data is not None else frozenset()

    def uids(self) -> list[EntityUID]:
        return sorted(self._entities)

    def items(self) -> list[tuple[EntityUID, EntityData]]:
        return [(uid, self._entities[uid]) for uid in self.uids()]

    def __contains__(self, uid: object) -> bool:
        return uid in self._entities

    def __iter__(self) -> Iterator[EntityUID]:
        return iter(self.uids())

    def __len__(self) -> int:
        return len(self._entities)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Entities):
            return NotImplemented
        return self._entities == other._entities

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Entities({len(self)} entities)"


# ============================================================================
# REQUESTS
# ============================================================================

@dataclass(frozen=True)
class Request:
    principal: EntityUID
    action: EntityUID
    resource: EntityUID
    context: Record = EMPTY_RECORD

    def __post_init__(self):
        if not self.action.is_action:
            raise ValueError(f"action must have an Action entity type, got {self.action}")
        if isinstance(self.context, Mapping):
            object.__setattr__(self, "context", Record.of(self.context))


# ============================================================================
# EXPRESSION AST
# ============================================================================

class VarName(Enum):
    PRINCIPAL = "principal"
    ACTION = "action"
    RESOURCE = "resource"
    CONTEXT = "context"


class BinaryOp(Enum):
    EQ = "=="
    NEQ = "!="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    ADD = "+"
    SUB = "-"
    IN = "in"
    CONTAINS = "contains"


COMPARISON_OPS = frozenset({BinaryOp.LT, BinaryOp.LE, BinaryOp.GT, BinaryOp.GE})
ARITHMETIC_OPS = frozenset({BinaryOp.ADD, BinaryOp.SUB})


@dataclass(frozen=True)
class Wildcard:
    """The ``*`` element of a ``like`` pattern."""


WILDCARD = Wildcard()


@dataclass(frozen=True)
class Pattern:
    """Sequence of literal characters (1-char strings) and wildcards."""
    elements: tuple

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))


class Expr:
    """Base class of expression nodes."""


def _check_attribute_name(name: str) -> None:
    # "" has no surface syntax: `has ""`, `[""]` and `{"": ...}` are parse errors
    if not name:
        raise ValueError("attribute names cannot be empty")


@dataclass(frozen=True)
class Lit(Expr):
    value: Value

    def __post_init__(self):
        if not isinstance(self.value, (Bool, Long, Str)):
            raise ValueError(f"literal must be Bool, Long or String, got {self.value.kind}")


@dataclass(frozen=True)
class EntityLit(Expr):
    uid: EntityUID


@dataclass(frozen=True)
class Var(Expr):
    name: VarName


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class And(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Or(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    otherwise: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: BinaryOp
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Like(Expr):
    arg: Expr
    pattern: Pattern


@dataclass(frozen=True)
class HasAttr(Expr):
    arg: Expr
    attr: str

    def __post_init__(self):
        _check_attribute_name(self.attr)


@dataclass(frozen=True)
class GetAttr(Expr):
    arg: Expr
    attr: str

    def __post_init__(self):
        _check_attribute_name(self.attr)


@dataclass(frozen=True)
class SetLit(Expr):
    elements: tuple

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))


@dataclass(frozen=True)
class RecordLit(Expr):
    """Record literal; ``fields`` keeps source order, repeated keys resolve last-wins."""
    fields: tuple

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple((name, expr) for name, expr in self.fields))
        for name, _ in self.fields:
            _check_attribute_name(name)


def children(expr: Expr) -> tuple[Expr, ...]:
    """Direct subexpressions in textual order."""
    if isinstance(expr, (Not, Neg, Like, HasAttr, GetAttr)):
        return (expr.arg,)
    if isinstance(expr, (And, Or, BinOp)):
        return (expr.left, expr.right)
    if isinstance(expr, If):
        return (expr.cond, expr.then, expr.otherwise)
    if isinstance(expr, SetLit):
        return expr.elements
    if isinstance(expr, RecordLit):
        return tuple(value for _, value in expr.fields)
    return ()


def walk(expr: Expr) -> Iterator[Expr]:
    """Preorder traversal."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def expr_size(expr: Expr) -> int:
    return sum(1 for _ in walk(expr))


def replace_subexpr(expr: Expr, index: int, make: Callable[[Expr], Expr]) -> Expr:
    """
    Rebuild ``expr`` with its ``index``-th preorder node replaced by
    ``make(node)``.
    """
    counter = [0]

    def rebuild(node: Expr) -> Expr:
        position = counter[0]
        counter[0] += 1
        if position == index:
            return make(node)
        if isinstance(node, Not):
            return Not(rebuild(node.arg))
        if isinstance(node, Neg):
            return Neg(rebuild(node.arg))
        if isinstance(node, Like):
            return Like(rebuild(node.arg), node.pattern)
        if isinstance(node, HasAttr):
            return HasAttr(rebuild(node.arg), node.attr)
        if isinstance(node, GetAttr):
            return GetAttr(rebuild(node.arg), node.attr)
        if isinstance(node, And):
            return And(rebuild(node.left), rebuild(node.right))
        if isinstance(node, Or):
            return Or(rebuild(node.left), rebuild(node.right))
        if isinstance(node, BinOp):
            return BinOp(node.op, rebuild(node.left), rebuild(node.right))
        if isinstance(node, If):
            return If(rebuild(node.cond), rebuild(node.then), rebuild(node.otherwise))
        if isinstance(node, SetLit):
            return SetLit(tuple(rebuild(e) for e in node.elements))
        if isinstance(node, RecordLit):
            return RecordLit(tuple((name, rebuild(e)) for name, e in node.fields))
        return node

    return rebuild(expr)


# ============================================================================
# POLICIES
# ============================================================================

class Effect(Enum):
    PERMIT = "permit"
    FORBID = "forbid"


class ConditionKind(Enum):
    WHEN = "when"
    UNLESS = "unless"


@dataclass(frozen=True)
class AnyScope:
    """Unconstrained scope element (bare ``principal``/``action``/``resource``)."""


@dataclass(frozen=True)
class EqScope:
    uid: EntityUID


@dataclass(frozen=True)
class InScope:
    uid: EntityUID


@dataclass(frozen=True)
class InSetScope:
    """``action in [...]``; only valid for the action scope."""
    uids: tuple

    def __post_init__(self):
        object.__setattr__(self, "uids", tuple(self.uids))
        if not self.uids:
            raise ValueError("action in [...] needs at least one action")
        for uid in self.uids:
            if not uid.is_action:
                raise ValueError(f"action scope entries must be actions, got {uid}")


ANY = AnyScope()

ScopeConstraint = Union[AnyScope, EqScope, InScope]
ActionScopeConstraint = Union[AnyScope, EqScope, InSetScope]


@dataclass(frozen=True)
class Condition:
    kind: ConditionKind
    body: Expr


@dataclass(frozen=True)
class Policy:
    id: str
    effect: Effect
    principal_scope: ScopeConstraint = ANY
    action_scope: ActionScopeConstraint = ANY
    resource_scope: ScopeConstraint = ANY
    conditions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "conditions", tuple(self.conditions))
        if isinstance(self.principal_scope, InSetScope) or isinstance(self.resource_scope, InSetScope):
            raise ValueError("only the action scope may use in [...]")
        if isinstance(self.action_scope, InScope):
            raise ValueError("action scope uses == or in [...]")
        if isinstance(self.action_scope, EqScope) and not self.action_scope.uid.is_action:
            raise ValueError(f"action scope must name an action, got {self.action_scope.uid}")

    def with_id(self, new_id: str) -> "Policy":
        return Policy(new_id, self.effect, self.principal_scope, self.action_scope,
                      self.resource_scope, self.conditions)


@dataclass(frozen=True)
class PolicySet:
    """Ordered policies with pairwise-distinct ids."""
    policies: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        seen: set[str] = set()
        for policy in self.policies:
            if policy.id in seen:
                raise ValueError(f"duplicate policy id: {policy.id}")
            seen.add(policy.id)

    def __iter__(self) -> Iterator[Policy]:
        return iter(self.policies)

    def __len__(self) -> int:
        return len(self.policies)

    def ids(self) -> list[str]:
        return [policy.id for policy in self.policies]

    def get(self, policy_id: str) -> Optional[Policy]:
        for policy in self.policies:
            if policy.id == policy_id:
                return policy
        return None


# ============================================================================
# VALIDATOR TYPE LANGUAGE
# ============================================================================

class Type:
    """Base class of validator types."""


@dataclass(frozen=True)
class BoolT(Type):
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class LongT(Type):
    def __str__(self) -> str:
        return "Long"


@dataclass(frozen=True)
class StringT(Type):
    def __str__(self) -> str:
        return "String"


@dataclass(frozen=True)
class EntityT(Type):
    name: str

    def __str__(self) -> str:
        return f"Entity<{self.name}>"


@dataclass(frozen=True)
class SetT(Type):
    element: Type

    def __str__(self) -> str:
        return f"Set<{self.element}>"


@dataclass(frozen=True)
class AttrType:
    type: Type
    required: bool = True


@dataclass(frozen=True)
class RecordT(Type):
    """Record shape; ``attrs`` is stored key-sorted."""
    attrs: tuple = ()

    def __post_init__(self):
        items = self.attrs.items() if isinstance(self.attrs, Mapping) else self.attrs
        object.__setattr__(self, "attrs", tuple(sorted(dict(items).items())))

    @classmethod
    def of(cls, mapping: Optional[Mapping[str, AttrType]] = None) -> "RecordT":
        return cls(tuple((mapping or {}).items()))

    def get(self, name: str) -> Optional[AttrType]:
        for key, attr in self.attrs:
            if key == name:
                return attr
        return None

    def as_dict(self) -> dict[str, AttrType]:
        return dict(self.attrs)

    def __str__(self) -> str:
        inner = ", ".join(f"{k}{'' if a.required else '?'}: {a.type}" for k, a in self.attrs)
        return "{" + inner + "}"


BOOL = BoolT()
LONG = LongT()
STRING = StringT()
EMPTY_RECORD_T = RecordT(())


# ============================================================================
# SCHEMA
# ============================================================================

@dataclass(frozen=True)
class EntityTypeDecl:
    attributes: RecordT = EMPTY_RECORD_T
    allowed_parent_types: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "allowed_parent_types", frozenset(self.allowed_parent_types))


@dataclass(frozen=True)
class ActionDecl:
    principal_types: frozenset = frozenset()
    resource_types: frozenset = frozenset()
    context: RecordT = EMPTY_RECORD_T
    parents: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "principal_types", frozenset(self.principal_types))
        object.__setattr__(self, "resource_types", frozenset(self.resource_types))
        object.__setattr__(self, "parents", frozenset(self.parents))


@dataclass(frozen=True)
class Schema:
    entity_types: Mapping[str, EntityTypeDecl] = field(default_factory=dict)
    actions: Mapping[EntityUID, ActionDecl] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entity_types", dict(self.entity_types))
        object.__setattr__(self, "actions", dict(self.actions))

    __hash__ = None  # type: ignore[assignment]

    def ancestor_types(self, type_name: str) -> frozenset:
        """Transitive closure of ``allowed_parent_types`` (excluding the type itself)."""
        seen: set[str] = set()
        pending = list(self._parent_types(type_name))
        while pending:
            name = pending.pop()
            if name in seen:
                continue
            seen.add(name)
            pending.extend(self._parent_types(name))
        return frozenset(seen)

    def _parent_types(self, type_name: str) -> frozenset:
        decl = self.entity_types.get(type_name)
        return decl.allowed_parent_types if decl is not None else frozenset()

    def action_ancestors(self, action: EntityUID) -> frozenset:
        """Transitive closure of declared action ``memberOf`` links."""
        seen: set[EntityUID] = set()
        pending = list(self._action_parents(action))
        while pending:
            uid = pending.pop()
            if uid in seen:
                continue
            seen.add(uid)
            pending.extend(self._action_parents(uid))
        return frozenset(seen)

    def _action_parents(self, action: EntityUID) -> frozenset:
        decl = self.actions.get(action)
        return decl.parents if decl is not None else frozenset()


# ============================================================================
# RUNTIME ERRORS
# ============================================================================

class EvalError(Exception):
    """Dynamic evaluation error. ``kind`` is the error class name used in reports."""
    kind: ClassVar[str] = "EvalError"

    def describe(self) -> str:
        return f"{self.kind}: {self}"


class EvalTypeError(EvalError):
    kind = "TypeError"

    def __init__(self, expected: Iterable[str], got: str):
        self.expected = tuple(expected)
        self.got = got
        super().__init__(f"expected {' or '.join(self.expected)}, got {got}")


class MissingAttrError(EvalError):
    kind = "MissingAttr"

    def __init__(self, attr: str):
        self.attr = attr
        super().__init__(f"missing attribute {attr!r}")


class IntegerOverflowError(EvalError):
    kind = "Overflow"

    def __init__(self, operation: str = "arithmetic"):
        self.operation = operation
        super().__init__(f"64-bit overflow in {operation}")


class ArityOrDomainError(EvalError):
    kind = "ArityOrDomain"

    def __init__(self, description: str):
        self.description = description
        super().__init__(description)


# ============================================================================
# AUTHORIZATION RESULTS
# ============================================================================

class Decision(Enum):
    ALLOW = "Allow"
    DENY = "Deny"


class SatisfactionStatus(Enum):
    SATISFIED = "Satisfied"
    NOT_SATISFIED = "NotSatisfied"
    ERRORED = "Errored"


@dataclass(frozen=True)
class Satisfaction:
    status: SatisfactionStatus
    error: Optional[EvalError] = None


SATISFIED = Satisfaction(SatisfactionStatus.SATISFIED)
NOT_SATISFIED = Satisfaction(SatisfactionStatus.NOT_SATISFIED)


@dataclass(frozen=True)
class Response:
    decision: Decision
    determining: frozenset = frozenset()
    errors: tuple = ()  # (policy id, EvalError) pairs in policy order

    def __post_init__(self):
        object.__setattr__(self, "determining", frozenset(self.determining))
        object.__setattr__(self, "errors", tuple(self.errors))

    def error_policy_ids(self) -> frozenset:
        return frozenset(policy_id for policy_id, _ in self.errors)

    def error_kinds(self) -> dict[str, str]:
        return {policy_id: error.kind for policy_id, error in self.errors}
