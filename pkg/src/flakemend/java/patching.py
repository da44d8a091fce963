"""Materialize an LLM patch against a parsed test class."""

from __future__ import annotations

import re
import textwrap
from dataclasses import dataclass, field

from .lexer import JavaSyntaxError
from .parser import parse_member, parse_test_class
from .structure import ClassModel, ImportDecl, MethodModel

_COORD_RE = re.compile(r"^\s*([\w.\-]+):([\w.\-]+):([\w.\-${}]+)\s*$")


class UnknownTarget(LookupError):
    """A replacement names a method the class does not declare."""


class PatchSyntaxError(ValueError):
    """The patched source no longer parses."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, order=True)
class Coordinate:
    group: str
    artifact: str
    version: str

    @classmethod
    def parse(cls, text: str) -> "Coordinate":
        m = _COORD_RE.match(text)
        if not m:
            raise ValueError(f"expected group:artifact:version, got {text!r}")
        return cls(*m.groups())

    def __str__(self) -> str:
        return f"{self.group}:{self.artifact}:{self.version}"


@dataclass(frozen=True)
class PatchCandidate:
    method_replacements: dict[str, str] = field(default_factory=dict)
    new_imports: tuple[ImportDecl, ...] = ()
    removed_imports: tuple[ImportDecl, ...] = ()
    build_dependencies: tuple[Coordinate, ...] = ()
    raw_response: str = ""
    additions: frozenset[str] = frozenset()  # replacement keys that introduce new methods

    def __post_init__(self) -> None:
        object.__setattr__(self, "method_replacements", dict(self.method_replacements))
        object.__setattr__(self, "new_imports", tuple(self.new_imports))
        object.__setattr__(self, "removed_imports", tuple(self.removed_imports))
        object.__setattr__(self, "build_dependencies", tuple(self.build_dependencies))
        object.__setattr__(self, "additions", frozenset(self.additions))
        both = set(self.new_imports) & set(self.removed_imports)
        if both:
            raise ValueError(f"imports both added and removed: {sorted(i.qualified_name for i in both)}")
        stray = self.additions - set(self.method_replacements)
        if stray:
            raise ValueError(f"additions without source: {sorted(stray)}")

    @property
    def is_empty(self) -> bool:
        return not (self.method_replacements or self.new_imports or self.removed_imports or self.build_dependencies)

    def replace(self, **changes) -> "PatchCandidate":
        values = {
            "method_replacements": self.method_replacements,
            "new_imports": self.new_imports,
            "removed_imports": self.removed_imports,
            "build_dependencies": self.build_dependencies,
            "raw_response": self.raw_response,
            "additions": self.additions,
        }
        values.update(changes)
        return PatchCandidate(**values)


def _line_start(text: str, offset: int) -> int:
    return text.rfind("\n", 0, offset) + 1


def _line_end(text: str, offset: int) -> int:
    nl = text.find("\n", offset)
    return len(text) if nl < 0 else nl + 1


def member_indent(text: str, start: int) -> str:
    prefix = text[_line_start(text, start):start]
    return prefix if not prefix.strip() else ""


def reindent(source: str, indent: str) -> str:
    """Dedent ``source`` and indent every line but the first by ``indent``.

    The first line is dedented on its own: text sliced out of a class starts at
    column 0 while the rest keeps the member indentation.
    """
    head, _, rest = source.strip("\n").rstrip().partition("\n")
    lines = [head.strip()] + (textwrap.dedent(rest).split("\n") if rest else [])
    return "\n".join([lines[0]] + [indent + ln if ln.strip() else "" for ln in lines[1:]])


def parse_replacement(name: str, source: str) -> MethodModel:
    """The declaration of ``name`` inside a replacement snippet."""
    try:
        wrapped = parse_member(textwrap.dedent(source))
    except JavaSyntaxError as exc:
        raise PatchSyntaxError(f"replacement for {name} does not parse: {exc.reason}") from exc
    for m in list(wrapped.methods) + list(wrapped.constructors):
        if m.name == name:
            return m
    raise PatchSyntaxError(f"replacement for {name} does not declare {name}")


def select_target(model: ClassModel, name: str, replacement: MethodModel) -> MethodModel | None:
    """The overload a replacement refers to: same parameter types, else same arity, else the first."""
    pool = model.methods_named(name) or [c for c in model.constructors if c.name == name]
    if not pool:
        return None
    for pick in (
        lambda m: m.parameter_types == replacement.parameter_types,
        lambda m: len(m.parameters) == len(replacement.parameters),
    ):
        hits = [m for m in pool if pick(m)]
        if hits:
            return hits[0]
    return pool[0]


def _package_line_end(model: ClassModel) -> int | None:
    toks = model.tokens
    for i, t in enumerate(toks):
        if t.is_word("package"):
            for k in range(i, len(toks)):
                if toks[k].is_op(";"):
                    return _line_end(model.source_text, toks[k].end)
        if t.is_word("import", "class", "interface", "enum", "record"):
            break
    return None


def _import_edits(model: ClassModel, patch: PatchCandidate) -> list[tuple[int, int, str]]:
    text = model.source_text
    edits = []
    removed = set(patch.removed_imports)
    for imp in model.imports:
        if imp in removed:
            a, b = _line_start(text, imp.start), _line_end(text, imp.end)
            if text[a:imp.start].strip() or text[imp.end:b].strip():
                a, b = imp.start, imp.end
            edits.append((a, b, ""))
    existing = set(model.imports)
    fresh = []
    for imp in patch.new_imports:
        if imp not in existing and imp not in fresh:
            fresh.append(imp)
    if not fresh:
        return edits
    block = "".join(i.render() + "\n" for i in sorted(fresh, key=lambda i: (i.is_static, i.qualified_name)))
    if model.imports:
        # each new import joins the group of its kind (static or regular) when one exists
        inserts: dict[int, list[ImportDecl]] = {}
        for imp in sorted(fresh, key=lambda i: (i.is_static, i.qualified_name)):
            group = [i for i in model.imports if i.is_static == imp.is_static]
            at = _line_end(text, max(group, key=lambda i: i.end).end) if group else model.import_block_end
            inserts.setdefault(at, []).append(imp)
        for at, imps in inserts.items():
            block = "".join(i.render() + "\n" for i in imps)
            if at > 0 and not text[:at].endswith("\n"):
                block = "\n" + block
            edits.append((at, at, block))
    else:
        at = _package_line_end(model)
        if at is None:
            edits.append((0, 0, block + "\n"))
        else:
            lead = "" if text[:at].endswith("\n") else "\n"
            edits.append((at, at, lead + "\n" + block))
    return edits


def apply_patch(model: ClassModel, patch: PatchCandidate) -> str:
    """New source text with the patch applied; untouched bytes stay identical."""
    text = model.source_text
    edits: list[tuple[int, int, str]] = []
    additions = []
    for name, source in patch.method_replacements.items():
        replacement = parse_replacement(name, source)
        target = select_target(model, name, replacement)
        if target is None:
            if name not in patch.additions:
                raise UnknownTarget(f"{model.fqn} has no method {name}")
            additions.append(source)
            continue
        indent = member_indent(text, target.start)
        edits.append((target.start, target.end, reindent(source, indent)))
    if additions:
        members = model.methods + model.constructors
        indent = member_indent(text, members[0].start) if members else "    "
        close = model.body_end
        at = _line_start(text, close)
        if text[at:close].strip():
            at = close
        block = "".join("\n" + indent + reindent(src, indent) + "\n" for src in additions)
        if at == close:
            block += "\n"
        edits.append((at, at, block))
    edits.extend(_import_edits(model, patch))

    # apply back to front; an insertion at the end of a deleted span sorts first
    edits.sort(key=lambda e: (e[0], e[1]), reverse=True)
    prev_start = len(text) + 1
    out = text
    for a, b, new in edits:
        if b > prev_start:
            raise PatchSyntaxError("overlapping edits in patch")
        out = out[:a] + new + out[b:]
        prev_start = a
    try:
        parse_test_class(out)
    except JavaSyntaxError as exc:
        raise PatchSyntaxError(exc.reason, exc.line) from exc
    return out
