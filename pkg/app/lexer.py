"""
Policy Text Lexer
-----------------
Turns policy source text into tokens. Comments are not tokens: each
``// ...`` comment is kept as trivia on the token that follows it (the
end-of-input token collects trailing comments), which is what lets the
formatter reflow whitespace without losing a single comment.

Also home to the string-literal escape codec shared by the parser, the
printer and the formatter.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

logger = logging.getLogger(__name__)

IDENT = "IDENT"
INT = "INT"
STRING = "STRING"
SYMBOL = "SYMBOL"
EOF = "EOF"

KEYWORDS = frozenset({
    "permit", "forbid", "when", "unless",
    "principal", "action", "resource", "context",
    "true", "false", "if", "then", "else",
    "in", "like", "has",
})

# Longest first so that "==" wins over "=" and "::" over ":".
SYMBOLS = ("::", "==", "!=", "<=", ">=", "&&", "||",
           "<", ">", "!", "-", "+", "(", ")", "[", "]", "{", "}", ",", ";", ".", ":")

WHITESPACE = " \t\r\n"

SIMPLE_ESCAPES = {
    "n": "\n",
    "r": "\r",
    "t": "\t",
    "0": "\0",
    "\\": "\\",
    '"': '"',
    "'": "'",
}


# ============================================================================
# SPANS AND ERRORS
# ============================================================================

@dataclass(frozen=True)
class SourceSpan:
    """Byte offsets ``[start, end)`` into the UTF-8 encoded input."""
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"invalid span {self.start}..{self.end}")


class ParseError(ValueError):
    """
    Raised for any input that is not a well-formed policy set or data document.

    Args:
        message: Human readable description
        span: Offending byte range, when one is known
    """

    def __init__(self, message: str, span: Optional[SourceSpan] = None):
        self.message = message
        self.span = span
        where = f" at bytes {span.start}..{span.end}" if span is not None else ""
        super().__init__(f"{message}{where}")


# ============================================================================
# TOKENS
# ============================================================================

@dataclass(frozen=True)
class Token:
    kind: str
    text: str  # raw source text (string tokens keep their quotes and escapes)
    span: SourceSpan
    comments: tuple = ()  # full "// ..." lines attached to this token

    def is_symbol(self, symbol: str) -> bool:
        return self.kind == SYMBOL and self.text == symbol

    def is_word(self, word: str) -> bool:
        return self.kind == IDENT and self.text == word


def decode_source(source: Union[str, bytes]) -> str:
    """
    Decode raw input as strict UTF-8.

    Strings containing lone surrogates are rejected as well, so the rest of
    the pipeline only ever sees Unicode scalar values.
    """
    if isinstance(source, (bytes, bytearray)):
        try:
            return bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("invalid UTF-8", SourceSpan(exc.start, exc.end)) from None
    try:
        source.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise ParseError("text contains a lone surrogate",
                         SourceSpan(exc.start, exc.end)) from None
    return source


def _byte_offsets(text: str) -> list[int]:
    offsets = [0]
    total = 0
    for ch in text:
        total += len(ch.encode("utf-8", "surrogatepass"))
        offsets.append(total)
    return offsets


def tokenize(source: Union[str, bytes]) -> list[Token]:
    """
    Split source text into tokens, ending with an EOF token.

    Raises:
        ParseError: On an unexpected character or an unterminated string
    """
    text = decode_source(source)
    offsets = _byte_offsets(text)
    tokens: list[Token] = []
    pending_comments: list[str] = []
    i = 0
    n = len(text)

    def span(start: int, end: int) -> SourceSpan:
        return SourceSpan(offsets[start], offsets[end])

    def emit(kind: str, start: int, end: int) -> None:
        tokens.append(Token(kind, text[start:end], span(start, end), tuple(pending_comments)))
        pending_comments.clear()

    while i < n:
        ch = text[i]
        if ch in WHITESPACE:
            i += 1
            continue
        if text.startswith("//", i):
            end = text.find("\n", i)
            end = n if end == -1 else end
            pending_comments.append(text[i:end].rstrip())
            i = end
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 2 if text[j] == "\\" else 1
            if j >= n:
                raise ParseError("unterminated string literal", span(i, n))
            emit(STRING, i, j + 1)
            i = j + 1
            continue
        if ch.isascii() and ch.isdigit():
            j = i
            while j < n and text[j].isascii() and text[j].isdigit():
                j += 1
            emit(INT, i, j)
            i = j
            continue
        if ch == "_" or (ch.isascii() and ch.isalpha()):
            j = i
            while j < n and (text[j] == "_" or (text[j].isascii() and text[j].isalnum())):
                j += 1
            emit(IDENT, i, j)
            i = j
            continue
        for symbol in SYMBOLS:
            if text.startswith(symbol, i):
                emit(SYMBOL, i, i + len(symbol))
                i += len(symbol)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", span(i, i + 1))

    tokens.append(Token(EOF, "", span(n, n), tuple(pending_comments)))
    return tokens


# ============================================================================
# STRING ESCAPES
# ============================================================================

def escape_string(value: str) -> str:
    """
    Escape a string for use between double quotes.

    Quotes, backslashes and control characters are escaped; everything else
    (including non-ASCII letters) is written as is.
    """
    out = []
    for ch in value:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\0":
            out.append("\\0")
        elif ord(ch) < 0x20 or ord(ch) == 0x7F or not ch.isprintable():
            out.append(f"\\u{{{ord(ch):x}}}")
        else:
            out.append(ch)
    return "".join(out)


def _unescape(body: str, span: SourceSpan, allow_star: bool) -> list[Optional[str]]:
    """Decode an escaped literal body; ``None`` marks an unescaped ``*`` in pattern mode."""
    out: list[Optional[str]] = []
    i = 0
    n = len(body)
    while i < n:
        ch = body[i]
        if ch == "*" and allow_star:
            out.append(None)
            i += 1
            continue
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= n:
            raise ParseError("dangling backslash in string literal", span)
        code = body[i + 1]
        if code in SIMPLE_ESCAPES:
            out.append(SIMPLE_ESCAPES[code])
            i += 2
        elif code == "*" and allow_star:
            out.append("*")
            i += 2
        elif code == "u":
            close = body.find("}", i)
            digits = body[i + 3:close] if body.startswith("{", i + 2) and close != -1 else ""
            if not 1 <= len(digits) <= 6 or any(d not in "0123456789abcdefABCDEF" for d in digits):
                raise ParseError("malformed \\u{...} escape", span)
            scalar = int(digits, 16)
            if scalar > 0x10FFFF or 0xD800 <= scalar <= 0xDFFF:
                raise ParseError(f"\\u{{{digits}}} is not a Unicode scalar value", span)
            out.append(chr(scalar))
            i = close + 1
        else:
            raise ParseError(f"unknown escape \\{code}", span)
    return out


def unescape_string(body: str, span: Optional[SourceSpan] = None) -> str:
    """Inverse of ``escape_string``; ``body`` excludes the surrounding quotes."""
    return "".join(_unescape(body, span or SourceSpan(0, 0), allow_star=False))


def unescape_pattern(body: str, span: Optional[SourceSpan] = None) -> list[Optional[str]]:
    """Decode a ``like`` pattern body: characters, with ``None`` for each wildcard."""
    return _unescape(body, span or SourceSpan(0, 0), allow_star=True)


def string_body(token: Token) -> str:
    return token.text[1:-1]
