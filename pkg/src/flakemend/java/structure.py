"""Structural model of a parsed Java test class."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .lexer import LineIndex, Token

TEST_ANNOTATIONS = frozenset({"Test", "ParameterizedTest", "RepeatedTest", "TestFactory", "TestTemplate", "Theory"})
FIXTURE_ANNOTATIONS = frozenset(
    {"Before", "After", "BeforeClass", "AfterClass", "BeforeEach", "AfterEach", "BeforeAll", "AfterAll",
     "BeforeMethod", "AfterMethod"}
)


def annotation_name(raw: str) -> str:
    """``@org.junit.Test(timeout = 5)`` -> ``Test``."""
    m = re.match(r"@\s*([\w$.\s]+)", raw)
    return m.group(1).replace(" ", "").split(".")[-1] if m else raw


def squash(text: str) -> str:
    """Whitespace-normalized text used for declaration comparisons."""
    text = re.sub(r"\s+", " ", text.strip())
    return re.sub(r"\s*([<>,\[\]()?&.])\s*", r"\1", text)


@dataclass(frozen=True)
class ImportDecl:
    qualified_name: str
    is_static: bool = False
    raw: str = field(default="", compare=False)
    start: int = field(default=-1, compare=False, repr=False)
    end: int = field(default=-1, compare=False, repr=False)

    @property
    def is_wildcard(self) -> bool:
        return self.qualified_name.endswith(".*")

    @property
    def simple_name(self) -> str:
        return self.qualified_name.rsplit(".", 1)[-1]

    @property
    def package(self) -> str:
        return self.qualified_name.rsplit(".", 1)[0]

    def render(self) -> str:
        return f"import {'static ' if self.is_static else ''}{self.qualified_name};"

    @classmethod
    def parse(cls, line: str) -> "ImportDecl":
        m = re.match(r"^\s*import\s+(static\s+)?([\w$.]+(?:\s*\.\s*\*)?)\s*;?\s*$", line)
        if not m:
            raise ValueError(f"not an import declaration: {line!r}")
        name = re.sub(r"\s+", "", m.group(2))
        return cls(name, bool(m.group(1)), raw=line.strip())


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type_text: str
    modifiers: tuple[str, ...]
    annotations: tuple[str, ...]
    start: int
    end: int
    start_line: int
    end_line: int
    text: str

    @property
    def is_static(self) -> bool:
        return "static" in self.modifiers


@dataclass(frozen=True)
class Parameter:
    type_text: str
    name: str
    raw: str


@dataclass(frozen=True)
class MethodModel:
    name: str
    annotations: tuple[str, ...]
    modifiers: tuple[str, ...]
    type_params: str
    return_type: str
    parameters: tuple[Parameter, ...]
    throws: str
    body_text: str | None
    start: int
    end: int
    start_line: int
    end_line: int
    text: str
    is_constructor: bool = False
    # offsets relative to ``start``; used to rebuild declaration headers
    return_type_span: tuple[int, int] = (0, 0)
    params_span: tuple[int, int] = (0, 0)
    body_offset: int | None = None

    @property
    def annotation_names(self) -> tuple[str, ...]:
        return tuple(annotation_name(a) for a in self.annotations)

    @property
    def is_test(self) -> bool:
        return any(a in TEST_ANNOTATIONS for a in self.annotation_names)

    @property
    def is_fixture(self) -> bool:
        return any(a in FIXTURE_ANNOTATIONS for a in self.annotation_names)

    @property
    def header_text(self) -> str:
        """Declaration up to (not including) the body."""
        if self.body_offset is None:
            return self.text.rstrip(";").rstrip()
        return self.text[: self.body_offset].rstrip()

    @property
    def parameter_types(self) -> tuple[str, ...]:
        return tuple(squash(p.type_text) for p in self.parameters)

    def contains_line(self, line: int) -> bool:
        return self.start_line <= line <= self.end_line


@dataclass(frozen=True)
class OpaqueMember:
    """Nested types and initializer blocks: kept as spans, not modeled."""

    kind: str
    name: str
    start: int
    end: int
    start_line: int
    end_line: int


@dataclass(frozen=True)
class ClassModel:
    package: str
    name: str
    kind: str
    imports: tuple[ImportDecl, ...]
    fields: tuple[FieldDecl, ...]
    methods: tuple[MethodModel, ...]
    constructors: tuple[MethodModel, ...]
    opaque: tuple[OpaqueMember, ...]
    source_text: str
    tokens: tuple[Token, ...] = field(repr=False, compare=False)
    line_index: LineIndex = field(repr=False, compare=False)
    body_start: int = 0  # offset of the class body's opening brace
    body_end: int = 0  # offset of the class body's closing brace

    @property
    def fqn(self) -> str:
        return f"{self.package}.{self.name}" if self.package else self.name

    @property
    def path_suffix(self) -> str:
        """Path of this class relative to a source root."""
        return "/".join(self.fqn.split(".")) + ".java"

    def method(self, name: str) -> MethodModel | None:
        for m in self.methods:
            if m.name == name:
                return m
        return None

    def methods_named(self, name: str) -> list[MethodModel]:
        return [m for m in self.methods if m.name == name]

    def field_named(self, name: str) -> FieldDecl | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None

    @property
    def test_methods(self) -> list[MethodModel]:
        return [m for m in self.methods if m.is_test]

    def members(self) -> list[tuple[int, int]]:
        """Sorted, de-duplicated spans of every top-level member."""
        spans = {(f.start, f.end) for f in self.fields}
        spans |= {(m.start, m.end) for m in self.methods + self.constructors}
        spans |= {(o.start, o.end) for o in self.opaque}
        return sorted(spans)

    def segments(self) -> list[tuple[int, int]]:
        """Contiguous spans (gaps and members alternating) covering the source."""
        out, pos = [], 0
        for start, end in self.members():
            if start > pos:
                out.append((pos, start))
            out.append((start, end))
            pos = end
        if pos < len(self.source_text):
            out.append((pos, len(self.source_text)))
        return out

    def reconstruct(self) -> str:
        return "".join(self.source_text[a:b] for a, b in self.segments())

    def line_text(self, line: int) -> str:
        a, b = self.line_index.span_of(line)
        return self.source_text[a:b].rstrip("\r\n")

    def tokens_between(self, start: int, end: int) -> list[Token]:
        return [t for t in self.tokens if start <= t.start and t.end <= end]

    @property
    def import_block_end(self) -> int:
        """Offset just past the last import line (or package line) -- where new imports go."""
        if self.imports:
            last = max(self.imports, key=lambda i: i.end)
            _, end = self.line_index.span_of(self.line_index.line_of(last.end - 1))
            return end
        return -1
