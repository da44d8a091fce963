"""Tokenizer for Java compilation units.

Tokens keep byte offsets into the original text so every structure built on
top of them can slice the exact source back out.  ``<`` and ``>`` are always
single-character tokens; shift operators are never formed, which keeps
generic type arguments easy to balance.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass


class JavaSyntaxError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.reason = message


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # ident, number, string, char, op
    text: str
    start: int
    end: int
    line: int

    def is_op(self, *ops: str) -> bool:
        return self.kind == "op" and self.text in ops

    def is_word(self, *words: str) -> bool:
        return self.kind == "ident" and self.text in words


_OPS = sorted(
    ["...", "->", "::", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=",
     "|=", "^="],
    key=len,
    reverse=True,
)
_SINGLE = set("{}()[];,.@=<>!~?:+-*/&|^%")
_IDENT_RE = re.compile(r"[A-Za-z_$\u0080-￿][\w$\u0080-￿]*")
_NUMBER_RE = re.compile(
    r"0[xX][0-9a-fA-F_]+[lL]?"
    r"|0[bB][01_]+[lL]?"
    r"|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlL]?"
)


class LineIndex:
    """Maps offsets to 1-based line numbers and back."""

    def __init__(self, text: str):
        self.starts = [0] + [m.end() for m in re.finditer(r"\n", text)]
        self.length = len(text)

    def line_of(self, offset: int) -> int:
        return bisect.bisect_right(self.starts, offset)

    def span_of(self, line: int) -> tuple[int, int]:
        if not 1 <= line <= len(self.starts):
            raise IndexError(line)
        start = self.starts[line - 1]
        end = self.starts[line] if line < len(self.starts) else self.length
        return start, end

    def __len__(self) -> int:
        return len(self.starts)


def tokenize(text: str) -> list[Token]:
    index = LineIndex(text)
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n\f":
            i += 1
            continue
        if text.startswith("//", i):
            nl = text.find("\n", i)
            i = n if nl < 0 else nl
            continue
        if text.startswith("/*", i):
            close = text.find("*/", i + 2)
            if close < 0:
                raise JavaSyntaxError("unterminated comment", index.line_of(i))
            i = close + 2
            continue
        start = i
        if text.startswith('"""', i):
            close = i + 3
            while True:
                close = text.find('"""', close)
                if close < 0:
                    raise JavaSyntaxError("unterminated text block", index.line_of(i))
                if text[close - 1] != "\\":
                    break
                close += 1
            i = close + 3
            tokens.append(Token("string", text[start:i], start, i, index.line_of(start)))
            continue
        if c in "\"'":
            j = i + 1
            while j < n and text[j] != c:
                if text[j] == "\\":
                    j += 1
                elif text[j] == "\n":
                    raise JavaSyntaxError("unterminated literal", index.line_of(i))
                j += 1
            if j >= n:
                raise JavaSyntaxError("unterminated literal", index.line_of(i))
            i = j + 1
            tokens.append(Token("string" if c == '"' else "char", text[start:i], start, i, index.line_of(start)))
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            m = _NUMBER_RE.match(text, i)
            i = m.end()
            tokens.append(Token("number", text[start:i], start, i, index.line_of(start)))
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            i = m.end()
            tokens.append(Token("ident", m.group(), start, i, index.line_of(start)))
            continue
        for op in _OPS:
            if text.startswith(op, i):
                i += len(op)
                break
        else:
            if c not in _SINGLE:
                raise JavaSyntaxError(f"unexpected character {c!r}", index.line_of(i))
            i += 1
        tokens.append(Token("op", text[start:i], start, i, index.line_of(start)))
    return tokens
