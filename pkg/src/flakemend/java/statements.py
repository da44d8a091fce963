"""Statement-level view of method bodies: splitting, line lookup, def/use sets."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .lexer import Token
from .structure import ClassModel, MethodModel

_CONTROL = frozenset({"if", "for", "while", "do", "try", "else", "switch", "synchronized", "catch", "finally"})
_ASSIGN_OPS = frozenset({"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^="})


class NoEnclosingMethod(LookupError):
    """The line does not fall inside any method of the class."""


@dataclass(frozen=True)
class Statement:
    tokens: tuple[Token, ...]
    block_path: tuple[int, ...]  # ids of enclosing blocks, outermost first
    start: int
    end: int
    start_line: int
    end_line: int
    text: str

    @property
    def is_header(self) -> bool:
        """Control-flow headers like ``for (...)`` that open a block."""
        return bool(self.tokens) and self.tokens[0].kind == "ident" and self.tokens[0].text in _CONTROL \
            and not self.text.rstrip().endswith(";")

    def covers(self, line: int) -> bool:
        return self.start_line <= line <= self.end_line


@dataclass(frozen=True)
class Located:
    method: MethodModel
    statement: Statement | None

    @property
    def text(self) -> str:
        return joined(self.statement.text) if self.statement else ""

    @property
    def is_empty(self) -> bool:
        return self.statement is None

    @property
    def line(self) -> int:
        return self.statement.start_line if self.statement else self.method.start_line


def joined(text: str) -> str:
    """Collapse line breaks (and the indentation around them) into single spaces."""
    return re.sub(r"[ \t]*\r?\n[ \t]*", " ", text.strip())


def split_statements(model: ClassModel, method: MethodModel) -> list[Statement]:
    """Statements of ``method`` in source order (block headers count as statements)."""
    if method.body_offset is None:
        return []
    body_open = method.start + method.body_offset
    toks = model.tokens_between(body_open, method.end)
    toks = toks[1:-1]  # drop the body braces
    text = model.source_text
    out: list[Statement] = []
    cur: list[Token] = []
    paren = 0
    expr_braces = 0
    block_stack: list[int] = []
    next_block = [1]

    def emit(tokens: list[Token]):
        if not tokens:
            return
        a, b = tokens[0].start, tokens[-1].end
        out.append(Statement(tuple(tokens), tuple(block_stack), a, b, tokens[0].line, tokens[-1].line, text[a:b]))

    for idx, t in enumerate(toks):
        if t.kind == "op":
            if t.text in ("(", "["):
                paren += 1
            elif t.text in (")", "]"):
                paren -= 1
            elif t.text == "{" and paren == 0:
                prev = cur[-1] if cur else None
                opens_expression = expr_braces > 0 or (
                    prev is not None
                    and (
                        prev.is_op("=", ",", "->", "(", "?", ":")
                        or prev.is_word("return")
                        or (prev.is_op("]") and any(c.is_word("new") for c in cur))
                        or (prev.is_op(")") and _is_anonymous_class(cur))
                    )
                )
                if opens_expression:
                    expr_braces += 1
                    cur.append(t)
                    continue
                emit(cur)
                cur = []
                block_stack.append(next_block[0])
                next_block[0] += 1
                continue
            elif t.text == "}" and paren == 0:
                if expr_braces > 0:
                    expr_braces -= 1
                    cur.append(t)
                    continue
                emit(cur)
                cur = []
                if block_stack:
                    block_stack.pop()
                continue
            elif t.text == ";" and paren == 0 and expr_braces == 0:
                cur.append(t)
                emit(cur)
                cur = []
                continue
            elif t.text == ":" and paren == 0 and expr_braces == 0 and cur and cur[0].is_word("case", "default"):
                cur.append(t)
                emit(cur)
                cur = []
                continue
            elif t.text == "->" and paren == 0 and expr_braces == 0 and cur and cur[0].is_word("case", "default"):
                cur.append(t)
                emit(cur)
                cur = []
                continue
        cur.append(t)
    emit(cur)
    return out


def _is_anonymous_class(cur: list[Token]) -> bool:
    """``new Foo(args) {`` -- find the ``new`` that owns the trailing call."""
    depth = 0
    for i in range(len(cur) - 1, -1, -1):
        t = cur[i]
        if t.is_op(")"):
            depth += 1
        elif t.is_op("("):
            depth -= 1
            if depth == 0:
                j = i - 1
                # skip type arguments and the qualified type name
                while j >= 0 and (cur[j].kind == "ident" or cur[j].is_op(".", "<", ">", ",", "?")):
                    if cur[j].is_word("new"):
                        return True
                    j -= 1
                return False
    return False


def enclosing_method(model: ClassModel, line: int) -> MethodModel:
    best = None
    for m in list(model.methods) + list(model.constructors):
        if m.contains_line(line) and (best is None or m.start >= best.start):
            best = m
    if best is None:
        raise NoEnclosingMethod(f"line {line} is outside every method of {model.fqn}")
    return best


def locate_statement(model: ClassModel, class_fqn: str, line: int) -> Located:
    """Innermost method and full statement covering ``line`` of ``class_fqn``."""
    outer = class_fqn.split("$", 1)[0]
    if outer != model.fqn and outer.rsplit(".", 1)[-1] != model.name:
        raise NoEnclosingMethod(f"{class_fqn} is not {model.fqn}")
    method = enclosing_method(model, line)
    candidates = [s for s in split_statements(model, method) if s.covers(line)]
    if not candidates:
        return Located(method, None)
    # innermost: the shortest statement covering the line
    best = min(candidates, key=lambda s: (s.end - s.start, -s.start))
    return Located(method, best)


def statement_at(statements: list[Statement], line: int) -> Statement | None:
    cands = [s for s in statements if s.covers(line)]
    return min(cands, key=lambda s: (s.end - s.start, -s.start)) if cands else None


# --- def/use ------------------------------------------------------------------


@dataclass(frozen=True)
class DefUse:
    defs: frozenset[str]
    kills: frozenset[str]  # full (re)definitions; mutations are defs but not kills
    uses: frozenset[str]


def variable_refs(tokens: tuple[Token, ...] | list[Token], names: set[str] | frozenset[str]) -> list[int]:
    """Indexes of tokens that reference one of ``names`` as a variable."""
    out = []
    for i, t in enumerate(tokens):
        if t.kind != "ident" or t.text not in names:
            continue
        prev = tokens[i - 1] if i > 0 else None
        if prev is not None and prev.is_op(".") and not (i >= 2 and tokens[i - 2].is_word("this")):
            continue
        if i + 1 < len(tokens) and tokens[i + 1].is_op("("):
            continue  # a method named like the variable
        out.append(i)
    return out


def local_declarations(stmt: Statement) -> list[str]:
    """Names declared by ``Type name = ...``, ``Type a, b;`` or ``for (Type v : ...)``."""
    toks = stmt.tokens
    names = []
    start = 0
    if toks and toks[0].is_word("for"):
        # enhanced for: for ( [final] Type name : expr )
        colon = next((i for i, t in enumerate(toks) if t.is_op(":")), None)
        if colon is not None and colon >= 2 and toks[colon - 1].kind == "ident":
            return [toks[colon - 1].text]
        start = 2
    depth = 0
    for i in range(start, len(toks) - 1):
        t = toks[i]
        if t.is_op("(", "[", "{"):
            depth += 1
        elif t.is_op(")", "]", "}"):
            depth -= 1
        if depth != 0 or t.kind != "ident":
            continue
        nxt = toks[i + 1]
        prev = toks[i - 1] if i > 0 else None
        if not nxt.is_op("=", ";", ",", ":") or prev is None:
            continue
        # a declaration has a type right before the name: ident, '>' or ']'
        if prev.kind == "ident" and prev.text not in ("return", "new", "throw", "case", "else", "assert") or \
                prev.is_op(">") or (prev.is_op("]") and i >= 2 and toks[i - 2].is_op("[")):
            if prev.kind == "ident" and i >= 2 and toks[i - 2].is_op("."):
                # ``a.b c`` is still a type (qualified); ``x.y = `` is not reached here
                pass
            names.append(t.text)
        elif prev.is_op(",") and names:
            names.append(t.text)
    return names


def def_use(stmt: Statement, variables: set[str] | frozenset[str]) -> DefUse:
    toks = stmt.tokens
    declared = local_declarations(stmt)
    defs: set[str] = set(declared)
    kills: set[str] = set(declared)
    refs = variable_refs(toks, variables | set(declared))
    uses: set[str] = set()
    for i in refs:
        name = toks[i].text
        nxt = toks[i + 1] if i + 1 < len(toks) else None
        if name in declared and nxt is not None and nxt.is_op("=", ";", ",", ":"):
            continue
        if nxt is not None and nxt.kind == "op" and nxt.text in _ASSIGN_OPS:
            # ``x = ...`` kills; compound assignment also reads
            before = toks[i - 1] if i > 0 else None
            at_start = before is None or before.is_op(";", "{", "(", ",") or (
                before.is_op(".") and i >= 2 and toks[i - 2].is_word("this"))
            if at_start or before.is_op("."):
                defs.add(name)
                if nxt.text == "=":
                    kills.add(name)
                else:
                    uses.add(name)
                continue
        if nxt is not None and nxt.is_op("++", "--") or (i > 0 and toks[i - 1].is_op("++", "--")):
            defs.add(name)
            uses.add(name)
            continue
        if nxt is not None and nxt.is_op(".") and i + 3 < len(toks) and toks[i + 2].kind == "ident" \
                and toks[i + 3].is_op("("):
            # receiver of a call: the call may mutate it
            defs.add(name)
        if nxt is not None and nxt.is_op("[") and _indexed_assignment(toks, i + 1):
            defs.add(name)
        uses.add(name)
    return DefUse(frozenset(defs), frozenset(kills), frozenset(uses))


def _indexed_assignment(toks, open_i: int) -> bool:
    depth = 0
    for j in range(open_i, len(toks)):
        if toks[j].is_op("["):
            depth += 1
        elif toks[j].is_op("]"):
            depth -= 1
            if depth == 0:
                return j + 1 < len(toks) and toks[j + 1].kind == "op" and toks[j + 1].text in _ASSIGN_OPS
    return False


def method_variables(model: ClassModel, method: MethodModel, statements: list[Statement]) -> set[str]:
    names = {p.name for p in method.parameters}
    names |= {f.name for f in model.fields}
    for s in statements:
        names.update(local_declarations(s))
    return names
