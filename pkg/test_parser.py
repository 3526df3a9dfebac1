"""
Test Parser and Pretty Printer
------------------------------
Policy syntax, error reporting with byte spans, nesting limits and the
parse(print(p)) == p round trip.

Run: pytest test_parser.py
"""

import pytest

from app.lexer import ParseError, escape_string, tokenize, unescape_string
from app.models import (
    ANY,
    LONG_MIN,
    WILDCARD,
    And,
    BinaryOp,
    BinOp,
    Bool,
    ConditionKind,
    Effect,
    EntityLit,
    EntityUID,
    EqScope,
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
    Pattern,
    SetLit,
    Str,
    Var,
    VarName,
)
from app.parser import parse_expr, parse_policy_set
from app.printer import pretty_print, print_expr

PRINCIPAL = Var(VarName.PRINCIPAL)
RESOURCE = Var(VarName.RESOURCE)
TRUE, FALSE = Lit(Bool(True)), Lit(Bool(False))
ONE, TWO, THREE = Lit(Long(1)), Lit(Long(2)), Lit(Long(3))


# ============================================================================
# POLICIES
# ============================================================================

def test_parse_tinytodo(tinytodo_policies):
    assert tinytodo_policies.ids() == ["policy0", "policy1", "policy2"]
    owner, readers, interns = tinytodo_policies

    # Test 1: unconstrained scope with one condition
    assert owner.effect is Effect.PERMIT
    assert (owner.principal_scope, owner.action_scope, owner.resource_scope) == (ANY, ANY, ANY)
    assert owner.conditions[0].kind is ConditionKind.WHEN
    assert owner.conditions[0].body == And(
        HasAttr(RESOURCE, "owner"),
        BinOp(BinaryOp.EQ, GetAttr(RESOURCE, "owner"), PRINCIPAL),
    )

    # Test 2: action equality
    assert readers.action_scope == EqScope(EntityUID.of("Action", "GetList"))

    # Test 3: forbid without conditions
    assert interns.effect is Effect.FORBID
    assert interns.principal_scope == InScope(EntityUID.of("Team", "interns"))
    assert interns.resource_scope == EqScope(EntityUID.of("Application", "TinyTodo"))
    assert interns.conditions == ()


def test_action_in_forms_share_one_shape():
    single, listed = parse_policy_set(
        'permit(principal, action in Action::"a", resource);'
        'permit(principal, action in [Action::"a", Action::"b"], resource);'
    )
    assert single.action_scope == InSetScope((EntityUID.of("Action", "a"),))
    assert len(listed.action_scope.uids) == 2


def test_multiple_conditions_keep_order():
    policy = parse_policy_set(
        "forbid(principal, action, resource) when { true } unless { false } when { 1 < 2 };"
    ).get("policy0")
    kinds = [condition.kind for condition in policy.conditions]
    assert kinds == [ConditionKind.WHEN, ConditionKind.UNLESS, ConditionKind.WHEN]


def test_empty_and_comment_only_inputs():
    assert len(parse_policy_set("")) == 0
    assert len(parse_policy_set("// nothing here\n")) == 0


# ============================================================================
# EXPRESSIONS
# ============================================================================

EXPR_CASES = [
    ("1 + 2 - 3", BinOp(BinaryOp.SUB, BinOp(BinaryOp.ADD, ONE, TWO), THREE)),
    ("true || false && true", Or(TRUE, And(FALSE, TRUE))),
    ("(true || false) && true", And(Or(TRUE, FALSE), TRUE)),
    ("!!true", Not(Not(TRUE))),
    ("-1", Lit(Long(-1))),
    ("- 1", Lit(Long(-1))),
    ("-(1)", Neg(ONE)),
    ("--1", Neg(Lit(Long(-1)))),
    ("-9223372036854775808", Lit(Long(LONG_MIN))),
    ("1 - -1", BinOp(BinaryOp.SUB, ONE, Lit(Long(-1)))),
    ("if true then 1 else 2 + 3", If(TRUE, ONE, BinOp(BinaryOp.ADD, TWO, THREE))),
    ("principal.a.b", GetAttr(GetAttr(PRINCIPAL, "a"), "b")),
    ('principal["two words"]', GetAttr(PRINCIPAL, "two words")),
    ('principal has "two words"', HasAttr(PRINCIPAL, "two words")),
    ("[1, 2].contains(3)", BinOp(BinaryOp.CONTAINS, SetLit((ONE, TWO)), THREE)),
    ('"a*b*" like "a*b\\*"', Like(Lit(Str("a*b*")), Pattern(("a", WILDCARD, "b", "*")))),
    ('Todo::List::"l1"', EntityLit(EntityUID(("Todo", "List"), "l1"))),
    ('"caf\\u{e9}\\n"', Lit(Str("café\n"))),
]


@pytest.mark.parametrize("source,expected", EXPR_CASES)
def test_parse_expressions(source, expected):
    assert parse_expr(source) == expected


INVALID_CASES = [
    "permit(principal, action, resource)",          # missing ;
    "allow(principal, action, resource);",
    "permit(action, principal, resource);",
    "permit(principal, action in User::\"x\", resource);",
    "permit(principal in [User::\"x\"], action, resource);",
    "permit(principal, action, resource) when { 1 < 2 < 3 };",
    "permit(principal, action, resource) when { principal.foo() };",
    "permit(principal, action, resource) when { {a: 1, a: 2} };",
    "permit(principal, action, resource) when { \"unterminated };",
    "permit(principal, action, resource) when { 99999999999999999999 };",
    "permit(principal, action, resource) when { 9223372036854775808 };",
    "permit(principal, action, resource) when { principal has \"\" };",
    "permit(principal, action, resource) when { \"\\q\" };",
    "permit(principal, action, resource) when { 1 # 2 };",
    "permit(principal, action, resource) when {};",
]


@pytest.mark.parametrize("source", INVALID_CASES)
def test_invalid_policies_raise_parse_error(source):
    with pytest.raises(ParseError):
        parse_policy_set(source)


def test_parse_error_reports_byte_span():
    # Test 1: offsets count UTF-8 bytes, not characters
    source = 'permit(principal, action, resource) when { "é" # };'
    with pytest.raises(ParseError) as caught:
        parse_policy_set(source)
    position = source.encode("utf-8").index(b"#")
    assert (caught.value.span.start, caught.value.span.end) == (position, position + 1)

    # Test 2: invalid UTF-8 is an error with a span, never UnicodeDecodeError
    with pytest.raises(ParseError) as caught:
        parse_policy_set(b"permit(\xff")
    assert caught.value.span.start == 7


@pytest.mark.parametrize("source", [
    "(" * 40 + "1" + ")" * 40,
    "!" * 100 + "true",
    "[" * 5000,
    "-" * 5000 + "1",
])
def test_deep_nesting_is_a_parse_error(source):
    with pytest.raises(ParseError):
        parse_expr(source)


def test_moderate_nesting_parses():
    assert parse_expr("(" * 10 + "1" + ")" * 10) == ONE


@pytest.mark.parametrize("operator", [" + ", " - ", " && ", " || ", ".contains(1)"])
def test_long_operator_chains_are_a_parse_error(operator):
    if operator.startswith("."):
        source = "principal" + operator * 3000
    else:
        source = operator.join(["1"] * 3000)
    with pytest.raises(ParseError):
        parse_policy_set(f"permit(principal, action, resource) when {{ {source} }};")


def test_long_attribute_chain_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_expr("principal" + ".a" * 3000)


def test_short_chains_parse_and_print():
    source = " + ".join(["1"] * 30)
    policies = parse_policy_set(f"permit(principal, action, resource) when {{ {source} }};")
    text = pretty_print(policies)
    assert source in text
    assert parse_policy_set(text) == policies


def test_comments_attach_to_the_next_token():
    tokens = tokenize("// lead\npermit // tail   \n(")
    assert tokens[0].comments == ("// lead",)
    assert tokens[1].comments == ("// tail",)


@pytest.mark.parametrize("text", ["", "plain", 'quote " and \\ slash', "tab\t", "nul\0", "é ✓", "\x7f"])
def test_escape_then_unescape(text):
    assert unescape_string(escape_string(text)) == text


# ============================================================================
# PRETTY PRINTER
# ============================================================================

def test_pretty_print_layout():
    policies = parse_policy_set(
        'forbid(principal in Team::"interns", action in [Action::"a"], resource) when { true };'
    )
    assert pretty_print(policies) == (
        "forbid (\n"
        '  principal in Team::"interns",\n'
        '  action in [Action::"a"],\n'
        "  resource\n"
        ")\n"
        "when {\n"
        "  true\n"
        "};\n"
    )
    assert pretty_print(parse_policy_set("")) == ""


PRINT_CASES = [
    (BinOp(BinaryOp.SUB, ONE, BinOp(BinaryOp.SUB, TWO, THREE)), "1 - (2 - 3)"),
    (And(Or(TRUE, FALSE), TRUE), "(true || false) && true"),
    (Neg(Lit(Long(-1))), "-(-1)"),
    (Not(BinOp(BinaryOp.EQ, ONE, TWO)), "!(1 == 2)"),
    (GetAttr(Lit(Long(-1)), "a"), "-1.a"),
    (GetAttr(PRINCIPAL, "in"), 'principal["in"]'),
    (HasAttr(BinOp(BinaryOp.ADD, ONE, TWO), "x"), "1 + 2 has x"),
    (Like(Lit(Str("*")), Pattern(("*", WILDCARD))), '"*" like "\\**"'),
    (If(TRUE, If(FALSE, ONE, TWO), THREE), "if true then if false then 1 else 2 else 3"),
]


@pytest.mark.parametrize("expr,text", PRINT_CASES)
def test_print_expr(expr, text):
    assert print_expr(expr) == text
    assert parse_expr(text) == expr


@pytest.mark.parametrize("source", [
    "permit(principal, action, resource);",
    'permit(principal == User::"a\\"b", action == Action::"view", resource in Folder::"f");',
    "permit(principal, action, resource) when { -(1) + -2 < 3 };",
    "permit(principal, action, resource) when { if true then [1, 2] else [] == {a: {\"b c\": 1}} };",
    "forbid(principal, action, resource) unless { context.x.contains(principal) || !(principal has y) };",
    'permit(principal, action, resource) when { (if true then "a" else "b") like "*\\**" };',
    "permit(principal, action, resource) when { (1 < 2) == (2 < 1) };",
])
def test_print_then_parse_roundtrip(source):
    policies = parse_policy_set(source)
    assert parse_policy_set(pretty_print(policies)) == policies
