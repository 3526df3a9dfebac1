"""
Policy Formatter
----------------
Reflows policy text to a target width while keeping every comment.

The formatter works on the token stream rather than the AST, so comments
(stored by the lexer as trivia on the token that follows them) travel with
their token. Output depends only on the tokens, their comments and the
width, which makes formatting idempotent.

Layout per policy:
    - the scope head and each condition clause go on one line when they fit
      and contain no comments;
    - otherwise the head breaks after ``permit (`` / ``forbid (`` and a
      condition after ``when {`` / ``unless {``; the clause body is filled
      greedily at a two-space indent and the closing bracket gets its own line;
    - each comment sits on its own line directly above its token;
    - policies are separated by one blank line.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

from app.config import FORMAT_WIDTH
from app.lexer import EOF, IDENT, INT, STRING, SYMBOL, Token, decode_source, tokenize
from app.parser import parse_policy_set

logger = logging.getLogger(__name__)

INDENT = "  "

# Keywords after which an expression starts (so a following "-" is unary).
OPERATOR_WORDS = frozenset({"if", "then", "else", "in", "like", "has", "when", "unless", "permit", "forbid"})

NO_SPACE_AFTER = frozenset({"(", "[", ".", "::", "!"})
NO_SPACE_BEFORE = frozenset({")", "]", ",", ".", "::", ";", ":"})


@dataclass
class _Atom:
    """Tokens printed without spaces between them; comments belong to the first token."""
    text: str
    comments: tuple = ()


@dataclass
class _Clause:
    open: list = field(default_factory=list)
    body: list = field(default_factory=list)
    close: Optional[Token] = None


def comment_texts(source: Union[str, bytes]) -> list[str]:
    """Sorted comment bodies (text after ``//``, trailing whitespace stripped)."""
    texts = []
    for token in tokenize(source):
        for comment in token.comments:
            texts.append(comment[2:].rstrip())
    return sorted(texts)


def format_text(source: Union[str, bytes], width: int = FORMAT_WIDTH) -> str:
    """
    Reformat policy text.

    Args:
        source: Policy text (or UTF-8 bytes)
        width: Target line width, a positive integer

    Returns:
        Formatted text that parses to the same policies and keeps every comment

    Raises:
        ParseError: If the input does not parse
        ValueError: If width is not positive
    """
    if width <= 0:
        raise ValueError("width must be positive")
    text = decode_source(source)
    parse_policy_set(text)
    tokens = tokenize(text)
    glued = _glue_flags(tokens)

    blocks = []
    start = 0
    for index, token in enumerate(tokens):
        if token.is_symbol(";"):
            blocks.append(_format_policy(tokens, glued, start, index, width))
            start = index + 1

    output = "\n\n".join(blocks)
    trailing = tokens[-1].comments
    if trailing:
        output = (output + "\n" if output else "") + "\n".join(trailing)
    logger.debug(f"Formatted {len(blocks)} policies at width {width}")
    return output + "\n" if output else ""


# ============================================================================
# SPACING
# ============================================================================

def _ends_operand(token: Token) -> bool:
    if token.kind in (INT, STRING):
        return True
    if token.kind == IDENT:
        return token.text not in OPERATOR_WORDS
    return token.kind == SYMBOL and token.text in (")", "]", "}")


def _glue_flags(tokens: list[Token]) -> list[bool]:
    """``glued[i]`` is True when token i is written directly after token i-1."""
    glued = [False] * len(tokens)
    for i in range(1, len(tokens)):
        prev, cur = tokens[i - 1], tokens[i]
        if cur.kind == EOF:
            continue
        unary_minus_before = prev.is_symbol("-") and (i < 2 or not _ends_operand(tokens[i - 2]))
        if prev.kind == SYMBOL and prev.text in NO_SPACE_AFTER or unary_minus_before:
            glued[i] = True
        elif cur.kind == SYMBOL and cur.text in NO_SPACE_BEFORE:
            glued[i] = True
        elif cur.is_symbol("(") and prev.is_word("contains") and i >= 2 and tokens[i - 2].is_symbol("."):
            glued[i] = True
        elif cur.is_symbol("[") and _ends_operand(prev):
            glued[i] = True
    return glued


def _atoms(tokens: list[Token], glued: list[bool], start: int, end: int) -> list[_Atom]:
    """Group tokens[start:end] into atoms; the first token always opens a new atom."""
    atoms: list[_Atom] = []
    for i in range(start, end):
        token = tokens[i]
        if i == start or not glued[i] or token.comments:
            atoms.append(_Atom(token.text, token.comments))
        else:
            atoms[-1].text += token.text
    return atoms


# ============================================================================
# LAYOUT
# ============================================================================

def _split_clauses(tokens: list[Token], start: int, end: int) -> list[tuple[int, int, int]]:
    """
    Split a policy (tokens[start:end], ``;`` excluded) into clauses.

    Returns (clause start, body start, close index) triples.
    """
    clauses = []
    close = start
    while not tokens[close].is_symbol(")"):
        close += 1
    clauses.append((start, start + 2, close))
    i = close + 1
    while i < end:
        depth = 0
        j = i + 1
        while True:
            if tokens[j].is_symbol("{"):
                depth += 1
            elif tokens[j].is_symbol("}"):
                depth -= 1
                if depth == 0:
                    break
            j += 1
        clauses.append((i, i + 2, j))
        i = j + 1
    return clauses


def _fill(atoms: list[_Atom], indent: str, width: int) -> list[str]:
    lines: list[str] = []
    current = ""
    for atom in atoms:
        if atom.comments:
            if current:
                lines.append(indent + current)
                current = ""
            lines.extend(indent + comment for comment in atom.comments)
            current = atom.text
        elif not current:
            current = atom.text
        elif len(indent) + len(current) + 1 + len(atom.text) <= width:
            current += " " + atom.text
        else:
            lines.append(indent + current)
            current = atom.text
    if current:
        lines.append(indent + current)
    return lines


def _format_policy(tokens: list[Token], glued: list[bool], start: int, semicolon: int, width: int) -> str:
    lines: list[str] = []
    clauses = _split_clauses(tokens, start, semicolon)
    for position, (first, body, close) in enumerate(clauses):
        reserve = 1 if position == len(clauses) - 1 else 0
        whole = _atoms(tokens, glued, first, close + 1)
        inner_comments = any(atom.comments for atom in whole[1:])
        one_line = " ".join(atom.text for atom in whole)
        if not inner_comments and len(one_line) + reserve <= width:
            lines.extend(whole[0].comments)
            lines.append(one_line)
            continue
        lines.extend(_fill(_atoms(tokens, glued, first, body), "", width))
        lines.extend(_fill(_atoms(tokens, glued, body, close), INDENT, width))
        lines.extend(_fill(_atoms(tokens, glued, close, close + 1), "", width))

    end = tokens[semicolon]
    if end.comments:
        lines.extend(end.comments)
        lines.append(end.text)
    else:
        lines[-1] += end.text
    return "\n".join(lines)
