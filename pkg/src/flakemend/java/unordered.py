"""Backward def-use slicing from a failing assertion to unordered collections/APIs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .lexer import Token
from .statements import Statement, def_use, joined, method_variables, split_statements, statement_at
from .structure import ClassModel, MethodModel

_ITERATION_OWNERS = frozenset({"Map", "Collection", "Set", "List", "Iterable"})
_STRINGIFIERS = frozenset({"valueOf", "join", "toString", "toJson", "writeValueAsString", "format", "toJSONString"})


class SuspectReason(str, Enum):
    UNORDERED_COLLECTION_CTOR = "UNORDERED_COLLECTION_CTOR"
    UNORDERED_API_CALL = "UNORDERED_API_CALL"
    STRINGIFIED_UNORDERED_VALUE = "STRINGIFIED_UNORDERED_VALUE"


@dataclass(frozen=True)
class SuspectStatement:
    line: int
    text: str
    reason: SuspectReason


@dataclass(frozen=True)
class UnorderedApis:
    types: frozenset[str]  # simple names
    apis: frozenset[str]  # method names flagged wherever they are called
    iteration_sinks: frozenset[str]  # flagged only on an unordered receiver

    @classmethod
    def parse(cls, text: str) -> "UnorderedApis":
        types, apis, sinks = set(), set(), set()
        entries = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                entries.append(line)
        for name in entries:
            last = name.rsplit(".", 1)[-1]
            if last[:1].isupper():
                types.add(last)
        for name in entries:
            owner, _, last = name.rpartition(".")
            if last[:1].isupper():
                continue
            owner_simple = owner.rsplit(".", 1)[-1]
            if owner_simple in _ITERATION_OWNERS or owner_simple in types:
                sinks.add(last)
            else:
                apis.add(last)
        return cls(frozenset(types), frozenset(apis), frozenset(sinks))

    @classmethod
    def load(cls, path: str | Path | None = None) -> "UnorderedApis":
        if path is None:
            text = resources.files("flakemend").joinpath("data/unordered-apis.txt").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.parse(text)


def _constructs_unordered(toks: tuple[Token, ...], cfg: UnorderedApis) -> bool:
    for i, t in enumerate(toks[:-1]):
        if t.is_word("new"):
            j = i + 1
            while j + 2 < len(toks) and toks[j].kind == "ident" and toks[j + 1].is_op("."):
                j += 2
            if toks[j].kind == "ident" and toks[j].text in cfg.types:
                return True
    return False


def _calls(toks: tuple[Token, ...], names: frozenset[str]) -> list[int]:
    """Indexes of ``.name(`` call sites."""
    return [
        i for i in range(1, len(toks) - 1)
        if toks[i].kind == "ident" and toks[i].text in names and toks[i - 1].is_op(".") and toks[i + 1].is_op("(")
    ]


def _receiver(toks: tuple[Token, ...], dot_i: int) -> str | None:
    r = toks[dot_i - 1] if dot_i >= 1 else None
    return r.text if r is not None and r.kind == "ident" else None


def _declared_unordered(toks: tuple[Token, ...], cfg: UnorderedApis) -> bool:
    """``HashMap<...> name`` at the start of a declaration."""
    return bool(toks) and toks[0].kind == "ident" and toks[0].text in cfg.types and len(toks) > 1 and \
        (toks[1].kind == "ident" or toks[1].is_op("<"))


def _api_call(toks, cfg: UnorderedApis, tainted: set[str]) -> bool:
    if _calls(toks, cfg.apis):
        return True
    for i in _calls(toks, cfg.iteration_sinks):
        if _receiver(toks, i - 1) in tainted:
            return True
    return False


def _stringifies(toks, tainted: set[str]) -> bool:
    has_literal = any(t.kind == "string" for t in toks)
    for i, t in enumerate(toks):
        if t.kind != "ident" or t.text not in tainted or (i > 0 and toks[i - 1].is_op(".")):
            continue
        if i + 3 < len(toks) and toks[i + 1].is_op(".") and toks[i + 2].is_word("toString") and toks[i + 3].is_op("("):
            return True
        if has_literal and ((i > 0 and toks[i - 1].is_op("+")) or (i + 1 < len(toks) and toks[i + 1].is_op("+"))):
            return True
        # argument of a stringifying call: walk back to the call's opening paren
        depth = 0
        for j in range(i - 1, 0, -1):
            if toks[j].is_op(")"):
                depth += 1
            elif toks[j].is_op("("):
                if depth == 0:
                    callee = toks[j - 1]
                    if callee.kind == "ident" and callee.text in _STRINGIFIERS:
                        return True
                    break
                depth -= 1
    return False


def _type_is_unordered(type_text: str, cfg: UnorderedApis) -> bool:
    base = type_text.split("<", 1)[0].strip().rsplit(".", 1)[-1]
    return base in cfg.types


def _seed_taint(model: ClassModel, method: MethodModel, cfg: UnorderedApis) -> set[str]:
    """Fields and parameters that hold unordered values on entry."""
    seeded = {p.name for p in method.parameters if _type_is_unordered(p.type_text, cfg)}
    for f in model.fields:
        if _type_is_unordered(f.type_text, cfg):
            seeded.add(f.name)
        else:
            toks = tuple(model.tokens_between(f.start, f.end))
            if _constructs_unordered(toks, cfg):
                seeded.add(f.name)
    return seeded


def _taint(statements: list[Statement], variables: set[str], cfg: UnorderedApis,
           seeded: set[str] = frozenset()) -> list[set[str]]:
    """Forward pass: variables holding unordered values *before* each statement."""
    tainted: set[str] = set(seeded)
    before = []
    for s in statements:
        before.append(set(tainted))
        du = def_use(s, variables)
        toks = s.tokens
        if _constructs_unordered(toks, cfg) or _declared_unordered(toks, cfg) or _api_call(toks, cfg, tainted):
            tainted |= set(du.kills) or set(du.defs)
        elif du.kills and du.uses & tainted and not _stringifies(toks, tainted):
            # copies/derivations of unordered values keep their nondeterministic order
            tainted |= set(du.kills)
        else:
            tainted -= set(du.kills)
    return before


def backward_slice(statements: list[Statement], sink_index: int, variables: set[str]) -> list[int]:
    """Indexes of statements on a def-use path into ``statements[sink_index]``."""
    dus = [def_use(s, variables) for s in statements]
    in_slice = {sink_index}
    seen: set[tuple[str, int]] = set()
    work = [(v, sink_index) for v in dus[sink_index].uses]
    while work:
        var, at = work.pop()
        if (var, at) in seen:
            continue
        seen.add((var, at))
        target_path = statements[at].block_path
        for j in range(at - 1, -1, -1):
            if var not in dus[j].defs:
                continue
            if j not in in_slice:
                in_slice.add(j)
            work.extend((u, j) for u in dus[j].uses)
            path = statements[j].block_path
            if var in dus[j].kills and target_path[: len(path)] == path:
                break
    return sorted(in_slice)


def find_unordered_suspects(
    model: ClassModel, method: MethodModel, sink_line: int, apis: UnorderedApis | None = None
) -> list[SuspectStatement]:
    """Statements feeding the assertion at ``sink_line`` that involve unordered values."""
    cfg = apis or UnorderedApis.load()
    statements = split_statements(model, method)
    sink = statement_at(statements, sink_line)
    if sink is None:
        return []
    sink_index = statements.index(sink)
    variables = method_variables(model, method, statements)
    tainted_before = _taint(statements, variables, cfg, _seed_taint(model, method, cfg))
    out = []
    for j in backward_slice(statements, sink_index, variables):
        s = statements[j]
        toks = s.tokens
        if _constructs_unordered(toks, cfg):
            reason = SuspectReason.UNORDERED_COLLECTION_CTOR
        elif _api_call(toks, cfg, tainted_before[j]):
            reason = SuspectReason.UNORDERED_API_CALL
        elif _stringifies(toks, tainted_before[j]):
            reason = SuspectReason.STRINGIFIED_UNORDERED_VALUE
        else:
            continue
        out.append(SuspectStatement(s.start_line, joined(s.text), reason))
    return out
