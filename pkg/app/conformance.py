"""
Schema Conformance
------------------
Checks that entity stores, requests and schemas fit together.

None of these functions raise. Each returns a list of ``Violation`` records
(an empty list means the input conforms), so callers can report every
problem at once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from app.models import (
    ACTION_TYPE,
    Bool,
    BoolT,
    Entities,
    EntityRef,
    EntityT,
    EntityUID,
    Long,
    LongT,
    Record,
    RecordT,
    Request,
    Schema,
    SetT,
    SetValue,
    Str,
    StringT,
    Type,
    Value,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


# ============================================================================
# VALUES AGAINST TYPES
# ============================================================================

def value_violations(value: Value, expected: Type, path: str,
                     store: Optional[Entities] = None) -> list[Violation]:
    """
    Check one value against a validator type.

    When a store is given, entity references must also resolve in it.

    Args:
        value: Runtime value to check
        expected: Declared type
        path: Location used in violation messages
        store: Optional store for dangling-reference checks

    Returns:
        List of violations (empty if the value conforms)
    """
    if isinstance(expected, BoolT):
        return [] if isinstance(value, Bool) else [_kind_mismatch(path, "Bool", value)]
    if isinstance(expected, LongT):
        return [] if isinstance(value, Long) else [_kind_mismatch(path, "Long", value)]
    if isinstance(expected, StringT):
        return [] if isinstance(value, Str) else [_kind_mismatch(path, "String", value)]
    if isinstance(expected, EntityT):
        if not isinstance(value, EntityRef):
            return [_kind_mismatch(path, f"Entity<{expected.name}>", value)]
        if value.uid.type_name != expected.name:
            return [Violation(path, f"expected entity of type {expected.name}, got {value.uid}")]
        if store is not None and value.uid not in store:
            return [Violation(path, f"reference to unknown entity {value.uid}")]
        return []
    if isinstance(expected, SetT):
        if not isinstance(value, SetValue):
            return [_kind_mismatch(path, str(expected), value)]
        problems: list[Violation] = []
        for index, element in enumerate(value):
            problems.extend(value_violations(element, expected.element, f"{path}[{index}]", store))
        return problems
    if isinstance(expected, RecordT):
        if not isinstance(value, Record):
            return [_kind_mismatch(path, "Record", value)]
        return record_violations(value, expected, path, store)
    return [Violation(path, f"unsupported type {expected!r}")]


def record_violations(record: Record, shape: RecordT, path: str,
                      store: Optional[Entities] = None) -> list[Violation]:
    problems: list[Violation] = []
    declared = shape.as_dict()
    for name, attr in declared.items():
        if attr.required and not record.has(name):
            problems.append(Violation(f"{path}.{name}", "required attribute is missing"))
    for name, value in record.fields:
        attr = declared.get(name)
        if attr is None:
            problems.append(Violation(f"{path}.{name}", f"undeclared attribute {name!r}"))
        else:
            problems.extend(value_violations(value, attr.type, f"{path}.{name}", store))
    return problems


def _kind_mismatch(path: str, expected: str, value: Value) -> Violation:
    return Violation(path, f"expected {expected}, got {value.kind}")


def _entity_refs(value: Value) -> Iterator[EntityUID]:
    if isinstance(value, EntityRef):
        yield value.uid
    elif isinstance(value, SetValue):
        for element in value.elements:
            yield from _entity_refs(element)
    elif isinstance(value, Record):
        for _, inner in value.fields:
            yield from _entity_refs(inner)


# ============================================================================
# STORE CONFORMANCE
# ============================================================================

def store_conforms(store: Entities, schema: Schema) -> list[Violation]:
    """
    Check an entity store against a schema.

    Covers declared entity types, attribute presence, shape and
    undeclared names, parent types, dangling references inside attribute
    values, Action entities and acyclicity of the parent relation.
    """
    problems: list[Violation] = []
    for uid, data in store.items():
        path = str(uid)
        if uid.is_action:
            problems.extend(_action_entity_violations(uid, data, schema, path))
            continue
        decl = schema.entity_types.get(uid.type_name)
        if decl is None:
            problems.append(Violation(path, f"undeclared entity type {uid.type_name}"))
            continue
        problems.extend(record_violations(data.attrs, decl.attributes, f"{path}.attrs", store))
        for parent in sorted(data.parents):
            if parent.type_name not in decl.allowed_parent_types:
                problems.append(Violation(
                    f"{path}.parents",
                    f"parent {parent} has type {parent.type_name}, not an allowed parent type",
                ))
    problems.extend(_cycle_violations(store))
    if problems:
        logger.debug(f"Store does not conform: {len(problems)} violation(s)")
    return problems


def _action_entity_violations(uid: EntityUID, data, schema: Schema, path: str) -> list[Violation]:
    decl = schema.actions.get(uid)
    if decl is None:
        return [Violation(path, "undeclared action")]
    problems = []
    if data.attrs.fields:
        problems.append(Violation(f"{path}.attrs", "action entities carry no attributes"))
    for parent in sorted(data.parents - decl.parents):
        problems.append(Violation(f"{path}.parents", f"{parent} is not a declared memberOf action"))
    return problems


def _cycle_violations(store: Entities) -> list[Violation]:
    """Report every entity that sits on a cycle of the parent relation."""
    on_cycle: set[EntityUID] = set()
    for start in store:
        seen: set[EntityUID] = set()
        pending = list(store.parents(start))
        while pending:
            current = pending.pop()
            if current == start:
                on_cycle.add(start)
                break
            if current in seen:
                continue
            seen.add(current)
            pending.extend(store.parents(current))
    return [Violation(f"{uid}.parents", "parent relation is cyclic") for uid in sorted(on_cycle)]


# ============================================================================
# REQUEST CONFORMANCE
# ============================================================================

def request_conforms(request: Request, schema: Schema,
                     store: Optional[Entities] = None) -> list[Violation]:
    """
    Check a request against a schema.

    The action must be declared, the principal and resource types must be
    applicable to it and the context must match its declared shape. With a
    store, principal and resource must exist and context references must
    resolve.
    """
    decl = schema.actions.get(request.action)
    if decl is None:
        return [Violation("$.action", f"undeclared action {request.action}")]
    problems: list[Violation] = []
    if request.principal.type_name not in decl.principal_types:
        problems.append(Violation(
            "$.principal", f"{request.principal.type_name} is not a principal type of {request.action}"))
    if request.resource.type_name not in decl.resource_types:
        problems.append(Violation(
            "$.resource", f"{request.resource.type_name} is not a resource type of {request.action}"))
    problems.extend(record_violations(request.context, decl.context, "$.context", store))
    if store is not None:
        for role, uid in (("principal", request.principal), ("resource", request.resource)):
            if uid not in store:
                problems.append(Violation(f"$.{role}", f"{uid} is not in the entity store"))
    return problems


# ============================================================================
# SCHEMA WELL-FORMEDNESS
# ============================================================================

def _type_names(declared: Type) -> Iterator[str]:
    if isinstance(declared, EntityT):
        yield declared.name
    elif isinstance(declared, SetT):
        yield from _type_names(declared.element)
    elif isinstance(declared, RecordT):
        for _, attr in declared.attrs:
            yield from _type_names(attr.type)


def _undeclared(names: Iterable[str], schema: Schema, path: str) -> list[Violation]:
    return [Violation(path, f"undeclared entity type {name}")
            for name in sorted(set(names)) if name not in schema.entity_types]


def schema_problems(schema: Schema) -> list[Violation]:
    """Well-formedness of a schema: declared references and an acyclic action hierarchy."""
    problems: list[Violation] = []
    for name, decl in sorted(schema.entity_types.items()):
        path = f"$.entityTypes.{name}"
        if name.split("::")[-1] == ACTION_TYPE:
            problems.append(Violation(path, "Action is reserved for actions"))
        problems.extend(_undeclared(_type_names(decl.attributes), schema, f"{path}.attributes"))
        problems.extend(_undeclared(decl.allowed_parent_types, schema, f"{path}.memberOfTypes"))

    for uid, decl in sorted(schema.actions.items()):
        path = f"$.actions.{uid.entity_id}"
        problems.extend(_undeclared(decl.principal_types, schema, f"{path}.appliesTo.principalTypes"))
        problems.extend(_undeclared(decl.resource_types, schema, f"{path}.appliesTo.resourceTypes"))
        problems.extend(_undeclared(_type_names(decl.context), schema, f"{path}.appliesTo.context"))
        for parent in sorted(decl.parents):
            if parent not in schema.actions:
                problems.append(Violation(f"{path}.memberOf", f"undeclared action {parent}"))
        if uid in schema.action_ancestors(uid):
            problems.append(Violation(f"{path}.memberOf", "action membership is cyclic"))
    return problems
