"""
Pydantic Schemas
----------------
Contracts for every JSON document that crosses the process boundary.

Input documents (entities, schema, request) are validated here and then
converted into domain models; unknown keys are rejected everywhere.
Output documents (authorization decision, validation report, harness run
report) are what the CLI prints.

Any validation problem surfaces as a ``ParseError`` whose message names the
JSON path of the offending element, e.g. ``$.action`` or ``$[0].uid.type``.
"""

from __future__ import annotations

import logging
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from app.conformance import schema_problems
from app.lexer import ParseError
from app.models import (
    ACTION_TYPE,
    BOOL,
    IDENTIFIER_RE,
    LONG,
    LONG_MAX,
    LONG_MIN,
    STRING,
    ActionDecl,
    AttrType,
    Bool,
    Entities,
    EntityData,
    EntityRef,
    EntityT,
    EntityTypeDecl,
    EntityUID,
    Long,
    Record,
    RecordT,
    Request,
    Response,
    Schema,
    SetT,
    SetValue,
    Str,
    Type,
    Value,
)

logger = logging.getLogger(__name__)

STRICT = ConfigDict(extra="forbid")


def _location(loc: tuple) -> str:
    path = "$"
    for part in loc:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def _parse_error(exc: ValidationError) -> ParseError:
    first = exc.errors()[0]
    if first["type"] == "json_invalid":
        return ParseError(f"invalid JSON: {first['msg']}")
    return ParseError(f"{_location(first['loc'])}: {first['msg']}")


# ============================================================================
# INPUT DOCUMENTS
# ============================================================================

class UidDoc(BaseModel):
    """
    Entity reference: ``{"type": "List", "id": "l1"}``.
    """
    model_config = STRICT

    type: str = Field(..., description="Entity type, '::'-separated identifier segments")
    id: str = Field(..., description="Entity id, any string")

    def to_uid(self, path: str) -> EntityUID:
        try:
            return EntityUID.of(self.type, self.id)
        except ValueError as exc:
            raise ParseError(f"{path}.type: {exc}") from None


class EntityDoc(BaseModel):
    """
    One entity of an entities document.

    Example:
    {
        "uid": {"type": "List", "id": "l1"},
        "attrs": {"owner": {"__entity": {"type": "User", "id": "alice"}}},
        "parents": []
    }
    """
    model_config = STRICT

    uid: UidDoc
    attrs: dict[str, Any] = Field(default_factory=dict)
    parents: list[UidDoc] = Field(default_factory=list)


class AttributeTypeDoc(BaseModel):
    """
    Attribute type: ``{"type": "Entity", "name": "User", "required": false}``.
    """
    model_config = STRICT

    type: Literal["Boolean", "Long", "String", "Entity", "Set", "Record"]
    name: Optional[str] = None
    element: Optional[AttributeTypeDoc] = None
    attributes: Optional[dict[str, AttributeTypeDoc]] = None
    required: bool = True

    @model_validator(mode="after")
    def check_shape(self):
        """Each type form carries exactly the fields it needs."""
        if (self.type == "Entity") != (self.name is not None):
            raise ValueError("'name' is required for Entity types and only allowed there")
        if (self.type == "Set") != (self.element is not None):
            raise ValueError("'element' is required for Set types and only allowed there")
        if self.type != "Record" and self.attributes is not None:
            raise ValueError("'attributes' is only allowed for Record types")
        return self

    def to_type(self) -> Type:
        if self.type == "Boolean":
            return BOOL
        if self.type == "Long":
            return LONG
        if self.type == "String":
            return STRING
        if self.type == "Entity":
            return EntityT(self.name)
        if self.type == "Set":
            return SetT(self.element.to_type())
        return record_type(self.attributes or {})


AttributeTypeDoc.model_rebuild()


def record_type(attributes: dict[str, AttributeTypeDoc]) -> RecordT:
    return RecordT.of({name: AttrType(doc.to_type(), doc.required) for name, doc in attributes.items()})


class EntityTypeDoc(BaseModel):
    model_config = STRICT

    attributes: dict[str, AttributeTypeDoc] = Field(default_factory=dict)
    member_of_types: list[str] = Field(default_factory=list, alias="memberOfTypes")


class AppliesToDoc(BaseModel):
    model_config = STRICT

    principal_types: list[str] = Field(default_factory=list, alias="principalTypes")
    resource_types: list[str] = Field(default_factory=list, alias="resourceTypes")
    context: Optional[AttributeTypeDoc] = None

    @model_validator(mode="after")
    def check_context(self):
        if self.context is not None and self.context.type != "Record":
            raise ValueError("context must be a Record type")
        return self


class ActionDoc(BaseModel):
    model_config = STRICT

    applies_to: AppliesToDoc = Field(default_factory=AppliesToDoc, alias="appliesTo")
    member_of: list[str] = Field(default_factory=list, alias="memberOf")


class SchemaDoc(BaseModel):
    """
    Schema document.

    Example:
    {
        "entityTypes": {"User": {"memberOfTypes": ["Team"]}, "Team": {}},
        "actions": {"GetList": {"appliesTo": {"principalTypes": ["User"], "resourceTypes": ["List"]}}}
    }
    """
    model_config = STRICT

    entity_types: dict[str, EntityTypeDoc] = Field(default_factory=dict, alias="entityTypes")
    actions: dict[str, ActionDoc] = Field(default_factory=dict)


class RequestDoc(BaseModel):
    model_config = STRICT

    principal: UidDoc
    action: UidDoc
    resource: UidDoc
    context: dict[str, Any] = Field(default_factory=dict)


_ENTITIES_ADAPTER = TypeAdapter(list[EntityDoc])


# ============================================================================
# VALUE CONVERSION
# ============================================================================

def value_from_json(raw: Any, path: str) -> Value:
    """
    Convert a JSON attribute value into a domain value.

    Booleans, integers and strings map to Bool/Long/Str, arrays to sets,
    ``{"__entity": {...}}`` to entity references and other objects to records.
    """
    if isinstance(raw, bool):
        return Bool(raw)
    if isinstance(raw, int):
        if not LONG_MIN <= raw <= LONG_MAX:
            raise ParseError(f"{path}: integer outside the signed 64-bit range")
        return Long(raw)
    if isinstance(raw, str):
        return Str(raw)
    if isinstance(raw, list):
        return SetValue(frozenset(value_from_json(item, f"{path}[{i}]") for i, item in enumerate(raw)))
    if isinstance(raw, dict):
        if "__entity" in raw:
            if len(raw) != 1:
                raise ParseError(f"{path}: entity reference has extra keys")
            try:
                uid = UidDoc.model_validate(raw["__entity"])
            except ValidationError as exc:
                first = exc.errors()[0]
                raise ParseError(f"{path}.__entity{_location(first['loc'])[1:]}: {first['msg']}") from None
            return EntityRef(uid.to_uid(f"{path}.__entity"))
        return Record.of({key: value_from_json(item, f"{path}.{key}") for key, item in raw.items()})
    raise ParseError(f"{path}: unsupported JSON value {raw!r}")


def value_to_json(value: Value) -> Any:
    """Inverse of ``value_from_json`` (sets come out sorted)."""
    if isinstance(value, (Bool, Long, Str)):
        return value.value
    if isinstance(value, EntityRef):
        return {"__entity": uid_to_json(value.uid)}
    if isinstance(value, SetValue):
        return [value_to_json(v) for v in value]
    return {key: value_to_json(v) for key, v in value.fields}


def uid_to_json(uid: EntityUID) -> dict:
    return {"type": uid.type_name, "id": uid.entity_id}


# ============================================================================
# DOCUMENT PARSERS
# ============================================================================

def parse_entities(text: Union[str, bytes]) -> Entities:
    """
    Parse an entities document into a store.

    Raises:
        ParseError: On malformed JSON, unknown keys, bad values or duplicate UIDs
    """
    try:
        docs = _ENTITIES_ADAPTER.validate_json(text)
    except ValidationError as exc:
        raise _parse_error(exc) from None
    entities: dict[EntityUID, EntityData] = {}
    for index, doc in enumerate(docs):
        path = f"$[{index}]"
        uid = doc.uid.to_uid(f"{path}.uid")
        if uid in entities:
            raise ParseError(f"{path}.uid: duplicate entity {uid}")
        attrs = Record.of({k: value_from_json(v, f"{path}.attrs.{k}") for k, v in doc.attrs.items()})
        parents = frozenset(p.to_uid(f"{path}.parents[{i}]") for i, p in enumerate(doc.parents))
        entities[uid] = EntityData(attrs, parents)
    logger.debug(f"Parsed {len(entities)} entities")
    return Entities(entities)


def parse_schema(text: Union[str, bytes]) -> Schema:
    """
    Parse a schema document.

    Raises:
        ParseError: On malformed JSON, unknown keys, invalid type names or a
            schema that is not well formed (undeclared references, cyclic
            action membership)
    """
    try:
        doc = SchemaDoc.model_validate_json(text)
    except ValidationError as exc:
        raise _parse_error(exc) from None

    entity_types = {}
    for name, decl in doc.entity_types.items():
        if not all(IDENTIFIER_RE.match(segment) for segment in name.split("::")):
            raise ParseError(f"$.entityTypes.{name}: invalid entity type name")
        entity_types[name] = EntityTypeDecl(record_type(decl.attributes), frozenset(decl.member_of_types))

    actions = {}
    for action_id, decl in doc.actions.items():
        context = decl.applies_to.context
        actions[EntityUID((ACTION_TYPE,), action_id)] = ActionDecl(
            principal_types=frozenset(decl.applies_to.principal_types),
            resource_types=frozenset(decl.applies_to.resource_types),
            context=context.to_type() if context is not None else RecordT(()),
            parents=frozenset(EntityUID((ACTION_TYPE,), parent) for parent in decl.member_of),
        )

    schema = Schema(entity_types, actions)
    problems = schema_problems(schema)
    if problems:
        raise ParseError(str(problems[0]))
    return schema


def parse_request(text: Union[str, bytes]) -> Request:
    """
    Parse a request document.

    Raises:
        ParseError: On malformed JSON, missing or unknown keys, or a non-Action action
    """
    try:
        doc = RequestDoc.model_validate_json(text)
    except ValidationError as exc:
        raise _parse_error(exc) from None
    principal = doc.principal.to_uid("$.principal")
    action = doc.action.to_uid("$.action")
    resource = doc.resource.to_uid("$.resource")
    context = Record.of({k: value_from_json(v, f"$.context.{k}") for k, v in doc.context.items()})
    try:
        return Request(principal, action, resource, context)
    except ValueError as exc:
        raise ParseError(f"$.action: {exc}") from None


DATA_PARSERS = {
    "entities": parse_entities,
    "schema": parse_schema,
    "request": parse_request,
}


def parse_data(kind: str, text: Union[str, bytes]):
    """Parse a JSON data document of the given kind: entities, schema or request."""
    try:
        parser = DATA_PARSERS[kind]
    except KeyError:
        raise ValueError(f"unknown data kind {kind!r}") from None
    return parser(text)


# ============================================================================
# OUTPUT DOCUMENTS
# ============================================================================

class ErrorDoc(BaseModel):
    policy_id: str
    kind: str
    message: str


class DecisionDoc(BaseModel):
    """
    Output of ``authorize``.

    Example:
    {"decision": "Allow", "determining": ["policy0", "policy1"], "errors": []}
    """
    decision: Literal["Allow", "Deny"]
    determining: list[str]
    errors: list[ErrorDoc]

    @classmethod
    def from_response(cls, response: Response) -> "DecisionDoc":
        return cls(
            decision=response.decision.value,
            determining=sorted(response.determining),
            errors=[ErrorDoc(policy_id=pid, kind=err.kind, message=str(err)) for pid, err in response.errors],
        )


class ValidationReportDoc(BaseModel):
    valid: bool
    errors: dict[str, list[str]] = Field(default_factory=dict)


class RunReport(BaseModel):
    """
    One line of harness output.

    ``stats`` holds the target's generator statistics and the run's wall time.
    """
    target: str
    iterations: int = Field(..., ge=0)
    failures: list[str] = Field(default_factory=list)
    stats: dict[str, Any] = Field(default_factory=dict)
