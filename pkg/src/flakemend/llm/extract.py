"""Turn an LLM response into a :class:`PatchCandidate`.

Responses are expected to use labeled fenced blocks::

    ```java METHOD testFoo
    @Test public void testFoo() { ... }
    ```
    ```IMPORTS
    import java.util.LinkedHashMap;
    - import java.util.HashMap;
    ```
    ```BUILD_DEPS
    com.google.code.gson:gson:2.8.6
    ```

A single unlabeled block holding a full method (or the whole class) is
accepted as a fallback.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..java.lexer import JavaSyntaxError
from ..java.parser import parse_member, parse_test_class
from ..java.patching import Coordinate, PatchCandidate
from ..java.structure import ClassModel, ImportDecl, squash

_FENCE = re.compile(r"^[ \t]*(`{3,}|~{3,})(?P<info>[^\n]*)\n(?P<body>.*?)^[ \t]*\1[ \t]*$", re.M | re.S)
_METHOD_LABEL = re.compile(r"\bMETHOD\s+(?P<name>[A-Za-z_$][\w$]*)")
_XML_DEP = re.compile(
    r"<groupId>\s*(?P<g>[^<\s]+)\s*</groupId>\s*<artifactId>\s*(?P<a>[^<\s]+)\s*</artifactId>\s*"
    r"<version>\s*(?P<v>[^<\s]+)\s*</version>", re.S
)


class UnparseableResponse(ValueError):
    """The response holds no usable code block."""


@dataclass(frozen=True)
class Block:
    info: str
    body: str


def fenced_blocks(text: str) -> list[Block]:
    return [Block(m.group("info").strip(), m.group("body")) for m in _FENCE.finditer(text)]


def _methods_in(source: str) -> list[tuple[str, str]]:
    """(name, text) of every method or constructor declared in a member snippet."""
    try:
        wrapped = parse_member(source)
    except JavaSyntaxError:
        return []
    members = sorted(list(wrapped.methods) + list(wrapped.constructors), key=lambda m: m.start)
    return [(m.name, m.text) for m in members]


def _imports(body: str) -> tuple[list[ImportDecl], list[ImportDecl]]:
    added, removed = [], []
    for raw in body.splitlines():
        line = raw.strip()
        if not line or line.startswith(("//", "#")):
            continue
        remove = line.startswith("-")
        line = line.lstrip("+-").strip()
        if not line.startswith("import"):
            line = f"import {line.rstrip(';')};"
        try:
            decl = ImportDecl.parse(line)
        except ValueError:
            continue
        (removed if remove else added).append(decl)
    return added, removed


def _deps(body: str) -> list[Coordinate]:
    out = []
    for m in _XML_DEP.finditer(body):
        out.append(Coordinate(m.group("g"), m.group("a"), m.group("v")))
    if out:
        return out
    for raw in body.splitlines():
        try:
            out.append(Coordinate.parse(raw.strip().lstrip("+").strip()))
        except ValueError:
            continue
    return out


def _from_whole_class(body: str, target: ClassModel) -> tuple[dict[str, str], list[ImportDecl]] | None:
    try:
        model = parse_test_class(body)
    except JavaSyntaxError:
        return None
    if model.name != target.name:
        return None
    replacements = {}
    for m in model.methods:
        original = target.method(m.name)
        if original is None or squash(original.text) != squash(m.text):
            replacements[m.name] = m.text
    new_imports = [i for i in model.imports if i not in set(target.imports)]
    return replacements, new_imports


def extract_patch(response_text: str, target: ClassModel) -> PatchCandidate:
    blocks = fenced_blocks(response_text)
    replacements: dict[str, str] = {}
    added: list[ImportDecl] = []
    removed: list[ImportDecl] = []
    deps: list[Coordinate] = []
    labeled = False
    for block in blocks:
        label = _METHOD_LABEL.search(block.info)
        if label:
            labeled = True
            found = _methods_in(block.body)
            if not found:
                # keep it so the syntax problem surfaces as feedback instead of vanishing
                replacements[label.group("name")] = block.body.strip("\n")
            for name, text in found:
                replacements[name] = text
        elif re.search(r"\bIMPORTS\b", block.info):
            labeled = True
            a, r = _imports(block.body)
            added += a
            removed += r
        elif re.search(r"\bBUILD_DEPS\b", block.info):
            labeled = True
            deps += _deps(block.body)

    if not labeled:
        code_blocks = [b for b in blocks if b.body.strip()]
        if len(code_blocks) == 1:
            body = code_blocks[0].body
            whole = _from_whole_class(body, target)
            if whole is not None:
                replacements, added = whole
            else:
                lines = body.splitlines()
                import_lines = [ln for ln in lines if ln.strip().startswith("import ")]
                rest = "\n".join(ln for ln in lines if not ln.strip().startswith("import "))
                replacements = dict(_methods_in(rest))
                added, _ = _imports("\n".join(import_lines))

    if not (replacements or added or removed or deps):
        raise UnparseableResponse("response contains no usable code block")

    clash = set(added) & set(removed)
    added = [i for i in dict.fromkeys(added) if i not in clash]
    removed = [i for i in dict.fromkeys(removed) if i not in clash]
    known = {m.name for m in target.methods} | {c.name for c in target.constructors}
    return PatchCandidate(
        method_replacements=replacements,
        new_imports=tuple(added),
        removed_imports=tuple(removed),
        build_dependencies=tuple(dict.fromkeys(deps)),
        raw_response=response_text,
        additions=frozenset(n for n in replacements if n not in known),
    )
