"""
Policy Parser
-------------
Recursive-descent parser from policy text to the policy AST.

Grammar (loosest to tightest binding):

    policy     := ('permit' | 'forbid') '(' scope ')' condition* ';'
    scope      := 'principal' [('==' | 'in') uid] ','
                  'action' ['==' uid | 'in' ('[' uid (',' uid)* ']' | uid)] ','
                  'resource' [('==' | 'in') uid]
    condition  := ('when' | 'unless') '{' expr '}'
    expr       := 'if' expr 'then' expr 'else' expr | or
    or         := and ('||' and)*
    and        := relation ('&&' relation)*
    relation   := add [('==' | '!=' | '<' | '<=' | '>' | '>=' | 'in') add
                       | 'like' STRING | 'has' (IDENT | STRING)]
    add        := unary (('+' | '-') unary)*
    unary      := '!' unary | '-' INT member-suffix* | '-' unary | member
    member     := primary ('.' IDENT | '.' 'contains' '(' expr ')' | '[' STRING ']')*
    primary    := INT | STRING | 'true' | 'false' | uid | variable
                  | '(' expr ')' | '[' [expr (',' expr)*] ']' | '{' [key ':' expr (',' ...)*] '}'

Policies get the ids ``policy0``, ``policy1``, ... in textual order.
"""

from __future__ import annotations

import logging
from typing import Optional, Union

from app.config import PARSE_NESTING_LIMIT
from app.lexer import (
    EOF,
    IDENT,
    INT,
    STRING,
    SYMBOL,
    ParseError,
    SourceSpan,
    Token,
    string_body,
    tokenize,
    unescape_pattern,
    unescape_string,
)
from app.models import (
    ANY,
    LONG_MAX,
    WILDCARD,
    And,
    BinaryOp,
    BinOp,
    Bool,
    Condition,
    ConditionKind,
    Effect,
    EntityLit,
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
    Pattern,
    Policy,
    PolicySet,
    RecordLit,
    SetLit,
    Str,
    Var,
    VarName,
)

logger = logging.getLogger(__name__)

RELATION_OPS = {
    "==": BinaryOp.EQ,
    "!=": BinaryOp.NEQ,
    "<": BinaryOp.LT,
    "<=": BinaryOp.LE,
    ">": BinaryOp.GT,
    ">=": BinaryOp.GE,
}

VARIABLES = {name.value: name for name in VarName}

MAX_INT_DIGITS = 20


def parse_policy_set(source: Union[str, bytes]) -> PolicySet:
    """
    Parse policy text into a PolicySet.

    Args:
        source: Policy text, or raw bytes decoded as strict UTF-8

    Returns:
        The parsed PolicySet with ids assigned in textual order

    Raises:
        ParseError: For any malformed input; nothing else escapes

    Example:
        parse_policy_set('permit(principal, action, resource);')
        -> PolicySet((Policy("policy0", Effect.PERMIT),))
    """
    try:
        parser = _Parser(tokenize(source))
        return parser.policy_set()
    except RecursionError:
        raise ParseError("input nests too deeply") from None


def parse_expr(source: Union[str, bytes]) -> Expr:
    """Parse a single expression (the body of a condition)."""
    try:
        parser = _Parser(tokenize(source))
        expr = parser.expr()
        parser.expect_end()
        return expr
    except RecursionError:
        raise ParseError("input nests too deeply") from None


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.depth = 0

    # ------------------------------------------------------------------
    # token helpers
    # ------------------------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        index = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[index]

    def advance(self) -> Token:
        token = self.peek()
        if token.kind != EOF:
            self.pos += 1
        return token

    def error(self, message: str, token: Optional[Token] = None) -> ParseError:
        token = token or self.peek()
        found = "end of input" if token.kind == EOF else repr(token.text)
        return ParseError(f"{message}, found {found}", token.span)

    def at_symbol(self, symbol: str) -> bool:
        return self.peek().is_symbol(symbol)

    def at_word(self, word: str) -> bool:
        return self.peek().is_word(word)

    def expect_symbol(self, symbol: str) -> Token:
        if not self.at_symbol(symbol):
            raise self.error(f"expected {symbol!r}")
        return self.advance()

    def expect_word(self, word: str) -> Token:
        if not self.at_word(word):
            raise self.error(f"expected {word!r}")
        return self.advance()

    def expect_end(self) -> None:
        if self.peek().kind != EOF:
            raise self.error("expected end of input")

    def enter(self) -> None:
        self.depth += 1
        if self.depth > PARSE_NESTING_LIMIT:
            raise ParseError("expression nesting exceeds limit", self.peek().span)

    def leave(self) -> None:
        self.depth -= 1

    # ------------------------------------------------------------------
    # policies
    # ------------------------------------------------------------------

    def policy_set(self) -> PolicySet:
        policies = []
        while self.peek().kind != EOF:
            policies.append(self.policy(f"policy{len(policies)}"))
        logger.debug(f"Parsed {len(policies)} policies")
        return PolicySet(tuple(policies))

    def policy(self, policy_id: str) -> Policy:
        start = self.peek()
        if start.is_word("permit"):
            effect = Effect.PERMIT
        elif start.is_word("forbid"):
            effect = Effect.FORBID
        else:
            raise self.error("expected 'permit' or 'forbid'")
        self.advance()

        self.expect_symbol("(")
        self.expect_word("principal")
        principal = self.entity_scope()
        self.expect_symbol(",")
        self.expect_word("action")
        action = self.action_scope()
        self.expect_symbol(",")
        self.expect_word("resource")
        resource = self.entity_scope()
        self.expect_symbol(")")

        conditions = []
        while self.at_word("when") or self.at_word("unless"):
            kind = ConditionKind.WHEN if self.advance().text == "when" else ConditionKind.UNLESS
            self.expect_symbol("{")
            body = self.expr()
            self.expect_symbol("}")
            conditions.append(Condition(kind, body))
        end = self.expect_symbol(";")

        try:
            return Policy(policy_id, effect, principal, action, resource, tuple(conditions))
        except ValueError as exc:
            raise ParseError(str(exc), SourceSpan(start.span.start, end.span.end)) from None

    def entity_scope(self):
        if self.at_symbol("=="):
            self.advance()
            return EqScope(self.uid())
        if self.at_word("in"):
            self.advance()
            return InScope(self.uid())
        return ANY

    def action_scope(self):
        if self.at_symbol("=="):
            self.advance()
            return EqScope(self.uid())
        if not self.at_word("in"):
            return ANY
        start = self.advance()
        if not self.at_symbol("["):
            uids = [self.uid()]
        else:
            self.advance()
            uids = [self.uid()]
            while self.at_symbol(","):
                self.advance()
                uids.append(self.uid())
            self.expect_symbol("]")
        try:
            return InSetScope(tuple(uids))
        except ValueError as exc:
            raise ParseError(str(exc), start.span) from None

    def uid(self) -> EntityUID:
        first = self.peek()
        if first.kind != IDENT:
            raise self.error("expected an entity type name")
        segments = [self.advance().text]
        while True:
            self.expect_symbol("::")
            token = self.peek()
            if token.kind == STRING:
                self.advance()
                return EntityUID(tuple(segments), unescape_string(string_body(token), token.span))
            if token.kind != IDENT:
                raise self.error("expected a type name segment or a quoted entity id")
            segments.append(self.advance().text)

    # ------------------------------------------------------------------
    # expressions
    # ------------------------------------------------------------------

    def expr(self) -> Expr:
        self.enter()
        try:
            if self.at_word("if") and not self.peek(1).is_symbol("::"):
                self.advance()
                cond = self.expr()
                self.expect_word("then")
                then = self.expr()
                self.expect_word("else")
                otherwise = self.expr()
                return If(cond, then, otherwise)
            return self.disjunction()
        finally:
            self.leave()

    def disjunction(self) -> Expr:
        left = self.conjunction()
        chained = 0
        try:
            while self.at_symbol("||"):
                self.advance()
                self.enter()
                chained += 1
                left = Or(left, self.conjunction())
            return left
        finally:
            self.depth -= chained

    def conjunction(self) -> Expr:
        left = self.relation()
        chained = 0
        try:
            while self.at_symbol("&&"):
                self.advance()
                self.enter()
                chained += 1
                left = And(left, self.relation())
            return left
        finally:
            self.depth -= chained

    def relation(self) -> Expr:
        left = self.additive()
        token = self.peek()
        if token.kind == SYMBOL and token.text in RELATION_OPS:
            self.advance()
            return BinOp(RELATION_OPS[token.text], left, self.additive())
        if token.is_word("in"):
            self.advance()
            return BinOp(BinaryOp.IN, left, self.additive())
        if token.is_word("like"):
            self.advance()
            pattern = self.peek()
            if pattern.kind != STRING:
                raise self.error("expected a pattern string after 'like'")
            self.advance()
            elements = unescape_pattern(string_body(pattern), pattern.span)
            return Like(left, Pattern(tuple(WILDCARD if e is None else e for e in elements)))
        if token.is_word("has"):
            self.advance()
            return HasAttr(left, self.attribute_name("has"))
        return left

    def attribute_name(self, after: str) -> str:
        token = self.peek()
        if token.kind == IDENT:
            return self.advance().text
        if token.kind == STRING:
            self.advance()
            name = unescape_string(string_body(token), token.span)
            if not name:
                raise ParseError("attribute names cannot be empty", token.span)
            return name
        raise self.error(f"expected an attribute name after {after!r}")

    def additive(self) -> Expr:
        # each operator in a left-leaning chain is one more level of tree depth
        left = self.unary()
        chained = 0
        try:
            while self.at_symbol("+") or self.at_symbol("-"):
                op = BinaryOp.ADD if self.advance().text == "+" else BinaryOp.SUB
                self.enter()
                chained += 1
                left = BinOp(op, left, self.unary())
            return left
        finally:
            self.depth -= chained

    def unary(self) -> Expr:
        self.enter()
        try:
            if self.at_symbol("!"):
                self.advance()
                return Not(self.unary())
            if self.at_symbol("-"):
                self.advance()
                if self.peek().kind == INT:
                    literal = self.integer(negative=True)
                    return self.member_suffixes(literal)
                return Neg(self.unary())
            return self.member_suffixes(self.primary())
        finally:
            self.leave()

    def member_suffixes(self, expr: Expr) -> Expr:
        chained = 0
        try:
            while self.at_symbol(".") or self.at_symbol("["):
                self.enter()
                chained += 1
                expr = self.member_suffix(expr)
            return expr
        finally:
            self.depth -= chained

    def member_suffix(self, expr: Expr) -> Expr:
        if self.advance().text == "[":
            name = self.attribute_name("[")
            self.expect_symbol("]")
            return GetAttr(expr, name)
        name_token = self.peek()
        if name_token.kind != IDENT:
            raise self.error("expected an attribute or method name after '.'")
        self.advance()
        if not self.at_symbol("("):
            return GetAttr(expr, name_token.text)
        if name_token.text != "contains":
            raise ParseError(f"unknown method {name_token.text!r}", name_token.span)
        self.advance()
        argument = self.expr()
        self.expect_symbol(")")
        return BinOp(BinaryOp.CONTAINS, expr, argument)

    def integer(self, negative: bool = False) -> Lit:
        token = self.advance()
        if len(token.text) > MAX_INT_DIGITS:
            raise ParseError("integer literal is too large", token.span)
        value = int(token.text)
        value = -value if negative else value
        if not -LONG_MAX - 1 <= value <= LONG_MAX:
            raise ParseError("integer literal does not fit in 64 bits", token.span)
        return Lit(Long(value))

    def primary(self) -> Expr:
        token = self.peek()
        if token.kind == INT:
            return self.integer()
        if token.kind == STRING:
            self.advance()
            return Lit(Str(unescape_string(string_body(token), token.span)))
        if token.kind == IDENT:
            if self.peek(1).is_symbol("::"):
                return EntityLit(self.uid())
            if token.text in ("true", "false"):
                self.advance()
                return Lit(Bool(token.text == "true"))
            if token.text in VARIABLES:
                self.advance()
                return Var(VARIABLES[token.text])
            raise self.error("expected an expression")
        if token.is_symbol("("):
            self.advance()
            inner = self.expr()
            self.expect_symbol(")")
            return inner
        if token.is_symbol("["):
            return self.set_literal()
        if token.is_symbol("{"):
            return self.record_literal()
        raise self.error("expected an expression")

    def set_literal(self) -> SetLit:
        self.advance()
        elements = []
        if not self.at_symbol("]"):
            elements.append(self.expr())
            while self.at_symbol(","):
                self.advance()
                elements.append(self.expr())
        self.expect_symbol("]")
        return SetLit(tuple(elements))

    def record_literal(self) -> RecordLit:
        self.advance()
        fields = []
        seen: set[str] = set()
        if not self.at_symbol("}"):
            while True:
                key_token = self.peek()
                key = self.attribute_name("{")
                if key in seen:
                    raise ParseError(f"duplicate record key {key!r}", key_token.span)
                seen.add(key)
                self.expect_symbol(":")
                fields.append((key, self.expr()))
                if not self.at_symbol(","):
                    break
                self.advance()
        self.expect_symbol("}")
        return RecordLit(tuple(fields))
