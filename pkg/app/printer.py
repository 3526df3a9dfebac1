"""
Pretty Printer
--------------
Renders policy ASTs as canonical policy text.

Output is deterministic, comment-free and never simplifies the AST: every
operand that binds looser than its position requires is parenthesised, and
negation always parenthesises its operand, so parsing the output gives back
the same AST.
"""

from app.lexer import KEYWORDS, escape_string
from app.models import (
    IDENTIFIER_RE,
    And,
    AnyScope,
    BinaryOp,
    BinOp,
    Bool,
    EntityLit,
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
    Pattern,
    Policy,
    PolicySet,
    RecordLit,
    SetLit,
    Var,
    Wildcard,
)

# Binding levels, loosest first.
IF_LEVEL = 0
OR_LEVEL = 1
AND_LEVEL = 2
RELATION_LEVEL = 3
ADD_LEVEL = 4
UNARY_LEVEL = 5
MEMBER_LEVEL = 6
PRIMARY_LEVEL = 7

INDENT = "  "


def pretty_print(policies: PolicySet) -> str:
    """Canonical text for a policy set: one clause per line, blank line between policies."""
    return "\n\n".join(print_policy(policy) for policy in policies) + ("\n" if len(policies) else "")


def print_policy(policy: Policy) -> str:
    lines = [
        f"{policy.effect.value} (",
        f"{INDENT}{print_scope('principal', policy.principal_scope)},",
        f"{INDENT}{print_scope('action', policy.action_scope)},",
        f"{INDENT}{print_scope('resource', policy.resource_scope)}",
        ")",
    ]
    for condition in policy.conditions:
        lines.append(f"{condition.kind.value} {{")
        lines.append(f"{INDENT}{print_expr(condition.body)}")
        lines.append("}")
    lines[-1] += ";"
    return "\n".join(lines)


def print_scope(variable: str, scope) -> str:
    if isinstance(scope, AnyScope):
        return variable
    if isinstance(scope, EqScope):
        return f"{variable} == {scope.uid}"
    if isinstance(scope, InScope):
        return f"{variable} in {scope.uid}"
    if isinstance(scope, InSetScope):
        return f"{variable} in [{', '.join(str(uid) for uid in scope.uids)}]"
    raise ValueError(f"unknown scope {scope!r}")


def quote(value: str) -> str:
    return f'"{escape_string(value)}"'


def is_plain_name(name: str) -> bool:
    """Attribute names that may be written bare (``.name``, ``has name``, ``{name: ...}``)."""
    return bool(IDENTIFIER_RE.match(name)) and name not in KEYWORDS


def print_pattern(pattern: Pattern) -> str:
    parts = []
    for element in pattern.elements:
        if isinstance(element, Wildcard):
            parts.append("*")
        elif element == "*":
            parts.append("\\*")
        else:
            parts.append(escape_string(element))
    return '"' + "".join(parts) + '"'


def print_expr(expr: Expr) -> str:
    return _render(expr)[0]


def _operand(expr: Expr, minimum: int) -> str:
    text, level = _render(expr)
    return text if level >= minimum else f"({text})"


def _render(expr: Expr) -> tuple[str, int]:
    if isinstance(expr, Lit):
        value = expr.value
        if isinstance(value, Bool):
            return ("true" if value.value else "false"), PRIMARY_LEVEL
        if isinstance(value, Long):
            return str(value.value), PRIMARY_LEVEL
        return quote(value.value), PRIMARY_LEVEL
    if isinstance(expr, EntityLit):
        return str(expr.uid), PRIMARY_LEVEL
    if isinstance(expr, Var):
        return expr.name.value, PRIMARY_LEVEL

    if isinstance(expr, Not):
        return "!" + _operand(expr.arg, MEMBER_LEVEL), UNARY_LEVEL
    if isinstance(expr, Neg):
        return f"-({print_expr(expr.arg)})", UNARY_LEVEL

    if isinstance(expr, Or):
        return f"{_operand(expr.left, OR_LEVEL)} || {_operand(expr.right, AND_LEVEL)}", OR_LEVEL
    if isinstance(expr, And):
        return f"{_operand(expr.left, AND_LEVEL)} && {_operand(expr.right, RELATION_LEVEL)}", AND_LEVEL
    if isinstance(expr, If):
        return (
            f"if {_operand(expr.cond, OR_LEVEL)} then {_operand(expr.then, IF_LEVEL)} "
            f"else {_operand(expr.otherwise, IF_LEVEL)}"
        ), IF_LEVEL

    if isinstance(expr, BinOp):
        if expr.op is BinaryOp.CONTAINS:
            return f"{_operand(expr.left, MEMBER_LEVEL)}.contains({print_expr(expr.right)})", MEMBER_LEVEL
        if expr.op in (BinaryOp.ADD, BinaryOp.SUB):
            return (f"{_operand(expr.left, ADD_LEVEL)} {expr.op.value} "
                    f"{_operand(expr.right, UNARY_LEVEL)}"), ADD_LEVEL
        return (f"{_operand(expr.left, ADD_LEVEL)} {expr.op.value} "
                f"{_operand(expr.right, ADD_LEVEL)}"), RELATION_LEVEL

    if isinstance(expr, Like):
        return f"{_operand(expr.arg, ADD_LEVEL)} like {print_pattern(expr.pattern)}", RELATION_LEVEL
    if isinstance(expr, HasAttr):
        name = expr.attr if is_plain_name(expr.attr) else quote(expr.attr)
        return f"{_operand(expr.arg, ADD_LEVEL)} has {name}", RELATION_LEVEL
    if isinstance(expr, GetAttr):
        access = f".{expr.attr}" if is_plain_name(expr.attr) else f"[{quote(expr.attr)}]"
        return _operand(expr.arg, MEMBER_LEVEL) + access, MEMBER_LEVEL

    if isinstance(expr, SetLit):
        return "[" + ", ".join(print_expr(e) for e in expr.elements) + "]", PRIMARY_LEVEL
    if isinstance(expr, RecordLit):
        fields = ", ".join(
            f"{name if is_plain_name(name) else quote(name)}: {print_expr(value)}"
            for name, value in expr.fields
        )
        return "{" + fields + "}", PRIMARY_LEVEL

    raise ValueError(f"unknown expression node {type(expr).__name__}")
