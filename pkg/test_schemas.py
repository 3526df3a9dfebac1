"""
Test Pydantic Schemas
---------------------
JSON documents in (entities, schema, request) and out (decision, validation
report, run report).

Run: pytest test_schemas.py
"""

import json

import pytest
from pydantic import ValidationError

from app.lexer import ParseError
from app.models import (
    LONG,
    STRING,
    AttrType,
    Bool,
    Decision,
    EntityRef,
    EntityT,
    EntityUID,
    Long,
    MissingAttrError,
    Record,
    Response,
    SetT,
    SetValue,
    Str,
)
from app.schemas import (
    DecisionDoc,
    RunReport,
    ValidationReportDoc,
    parse_data,
    parse_entities,
    parse_request,
    parse_schema,
    value_from_json,
    value_to_json,
)

ALICE = EntityUID.of("User", "alice")


def error_message(parse, document) -> str:
    with pytest.raises(ParseError) as caught:
        parse(json.dumps(document) if not isinstance(document, str) else document)
    return str(caught.value)


# ============================================================================
# VALUES
# ============================================================================

def test_value_from_json():
    # Test 1: scalars
    assert value_from_json(True, "$") == Bool(True)
    assert value_from_json(-4, "$") == Long(-4)
    assert value_from_json("x", "$") == Str("x")

    # Test 2: arrays become sets, objects become records
    assert value_from_json([1, 1, 2], "$") == SetValue.of(Long(1), Long(2))
    assert value_from_json({"a": {"b": "c"}}, "$") == Record.of(a=Record.of(b=Str("c")))

    # Test 3: entity references
    assert value_from_json({"__entity": {"type": "User", "id": "alice"}}, "$") == EntityRef(ALICE)


@pytest.mark.parametrize("raw,fragment", [
    (1.5, "unsupported"),
    (None, "unsupported"),
    (2 ** 63, "64-bit"),
    ({"__entity": {"type": "User", "id": "a"}, "x": 1}, "extra keys"),
    ({"__entity": {"type": "User"}}, "$.v.__entity.id"),
    ({"__entity": {"type": "9bad", "id": "a"}}, "$.v.__entity.type"),
])
def test_value_from_json_errors(raw, fragment):
    with pytest.raises(ParseError) as caught:
        value_from_json(raw, "$.v")
    assert fragment in str(caught.value)


def test_value_to_json_sorts_sets():
    value = Record.of(tags=SetValue.of(Str("b"), Str("a")), who=EntityRef(ALICE))
    assert value_to_json(value) == {
        "tags": ["a", "b"],
        "who": {"__entity": {"type": "User", "id": "alice"}},
    }


# ============================================================================
# ENTITIES
# ============================================================================

def test_parse_tinytodo_entities(tinytodo_store):
    assert len(tinytodo_store) == 10
    l1 = tinytodo_store.get(EntityUID.of("List", "l1"))
    assert l1.attrs.get("name") == Str("Groceries")
    assert tinytodo_store.parents(EntityUID.of("User", "bob")) == {
        EntityUID.of("Team", "l1-readers"), EntityUID.of("Team", "interns"),
    }


@pytest.mark.parametrize("document,fragment", [
    ("[", "invalid JSON"),
    ({"uid": {"type": "User", "id": "a"}}, "$"),
    ([{"uid": {"type": "User", "id": "a"}, "extra": 1}], "$[0].extra"),
    ([{"uid": {"type": "User"}}], "$[0].uid.id"),
    ([{"uid": {"type": "User", "id": "a"}}, {"uid": {"type": "User", "id": "a"}}], "duplicate"),
    ([{"uid": {"type": "User", "id": "a"}, "attrs": {"n": 1.5}}], "$[0].attrs.n"),
    ([{"uid": {"type": "User", "id": "a"}, "parents": [{"type": "a-b", "id": "x"}]}], "$[0].parents[0]"),
])
def test_parse_entities_errors(document, fragment):
    assert fragment in error_message(parse_entities, document)


# ============================================================================
# SCHEMA
# ============================================================================

def test_parse_tinytodo_schema(tinytodo_schema):
    assert sorted(tinytodo_schema.entity_types) == ["Application", "List", "Team", "User"]
    list_attrs = tinytodo_schema.entity_types["List"].attributes
    assert list_attrs.get("owner") == AttrType(EntityT("User"), required=False)
    assert list_attrs.get("name") == AttrType(STRING)
    assert tinytodo_schema.entity_types["User"].allowed_parent_types == {"Team"}
    assert tinytodo_schema.ancestor_types("User") == {"Team"}
    get_list = tinytodo_schema.actions[EntityUID.of("Action", "GetList")]
    assert get_list.principal_types == {"User"}
    assert get_list.resource_types == {"List"}


def test_parse_schema_nested_types_and_context():
    schema = parse_schema(json.dumps({
        "entityTypes": {"User": {"attributes": {
            "scores": {"type": "Set", "element": {"type": "Long"}},
            "profile": {"type": "Record", "attributes": {"nick": {"type": "String", "required": False}}},
        }}},
        "actions": {
            "view": {
                "appliesTo": {
                    "principalTypes": ["User"],
                    "resourceTypes": ["User"],
                    "context": {"type": "Record", "attributes": {"ip": {"type": "String"}}},
                },
                "memberOf": ["read"],
            },
            "read": {},
        },
    }))
    attrs = schema.entity_types["User"].attributes
    assert attrs.get("scores").type == SetT(LONG)
    assert attrs.get("profile").type.get("nick") == AttrType(STRING, required=False)
    view = EntityUID.of("Action", "view")
    assert schema.actions[view].context.get("ip") == AttrType(STRING)
    assert schema.action_ancestors(view) == {EntityUID.of("Action", "read")}


@pytest.mark.parametrize("document,fragment", [
    ({"entityTypes": {"User": {"memberOfTypes": ["Ghost"]}}}, "undeclared entity type Ghost"),
    ({"entityTypes": {"Action": {}}}, "reserved"),
    ({"entityTypes": {"a-b": {}}}, "invalid entity type name"),
    ({"entityTypes": {"User": {"attributes": {"x": {"type": "Entity"}}}}}, "name"),
    ({"entityTypes": {"User": {"attributes": {"x": {"type": "Set"}}}}}, "element"),
    ({"entityTypes": {"User": {"attributes": {"x": {"type": "Float"}}}}}, "$.entityTypes.User.attributes.x.type"),
    ({"actions": {"a": {"memberOf": ["b"]}, "b": {"memberOf": ["a"]}}}, "cyclic"),
    ({"actions": {"a": {"memberOf": ["zzz"]}}}, "undeclared action"),
    ({"actions": {"a": {"appliesTo": {"context": {"type": "Long"}}}}}, "context must be a Record"),
    ({"entities": {}}, "$.entities"),
])
def test_parse_schema_errors(document, fragment):
    assert fragment in error_message(parse_schema, document)


@pytest.mark.parametrize("document", [
    {"entity_types": {"User": {"member_of_types": []}}, "actions": {}},
    {"entityTypes": {"User": {"member_of_types": []}}},
    {"actions": {"a": {"member_of": []}}},
    {"actions": {"a": {"applies_to": {}}}},
    {"actions": {"a": {"appliesTo": {"principal_types": []}}}},
])
def test_parse_schema_rejects_snake_case_keys(document):
    assert "Extra inputs are not permitted" in error_message(parse_schema, document)


# ============================================================================
# REQUESTS
# ============================================================================

def test_parse_request(tinytodo_request):
    request = tinytodo_request("alice-getlist-l1")
    assert request.principal == ALICE
    assert request.action == EntityUID.of("Action", "GetList")
    assert request.context == Record.of()

    with_context = parse_request(json.dumps({
        "principal": {"type": "User", "id": "a"},
        "action": {"type": "Action", "id": "view"},
        "resource": {"type": "Doc", "id": "d"},
        "context": {"n": 3},
    }))
    assert with_context.context.get("n") == Long(3)


def test_parse_request_errors():
    uid = {"type": "User", "id": "a"}
    assert "$.action" in error_message(parse_request, {"principal": uid, "action": uid, "resource": uid})
    assert "$.resource" in error_message(parse_request, {"principal": uid, "action": uid})


def test_parse_data_dispatch(tinytodo_dir):
    store = parse_data("entities", (tinytodo_dir / "entities.json").read_text())
    assert ALICE in store
    with pytest.raises(ValueError):
        parse_data("policies", "")


# ============================================================================
# OUTPUT DOCUMENTS
# ============================================================================

def test_decision_doc_from_response():
    response = Response(Decision.DENY, {"b", "a"}, (("c", MissingAttrError("x")),))
    doc = DecisionDoc.from_response(response)
    assert json.loads(doc.model_dump_json()) == {
        "decision": "Deny",
        "determining": ["a", "b"],
        "errors": [{"policy_id": "c", "kind": "MissingAttr", "message": "missing attribute 'x'"}],
    }


def test_report_documents():
    assert ValidationReportDoc(valid=True).errors == {}
    report = RunReport(target="parser-safety", iterations=3)
    assert report.failures == [] and report.stats == {}
    with pytest.raises(ValidationError):
        RunReport(target="parser-safety", iterations=-1)
