"""Parse compiler output (Maven-wrapped or plain javac) into diagnostics.

Recognized header lines::

    [ERROR] /abs/path/Foo.java:[27,9] cannot find symbol     (maven-compiler-plugin)
    src/test/java/Foo.java:27: error: cannot find symbol     (javac)

Continuation lines (``symbol:``, ``location:``, ``both method ...``) attach to
the preceding header.  Maven repeats every error in its failure summary; the
repeats are dropped.
"""

from __future__ import annotations

import re
from pathlib import Path, PurePosixPath
from typing import Sequence

from ..model import CompilationDiagnostic, DiagnosticKind

MAVEN_HEADER = re.compile(r"^\[ERROR\]\s+(?P<file>\S.*?\.java):\[(?P<line>\d+)(?:,(?P<col>\d+))?\]\s+(?P<msg>.+?)\s*$")
JAVAC_HEADER = re.compile(r"^(?P<file>\S.*?\.java):(?P<line>\d+):\s+error:\s+(?P<msg>.+?)\s*$")
_CONTINUATION = re.compile(r"^(?:\[ERROR\])?\s+(?P<body>(?:symbol|location|required|found|reason|both)\b.*?)\s*$")

_SYMBOL = re.compile(
    r"symbol:\s+(?:static\s+)?(?:(?:class|interface|enum|record|variable|method|constructor|package)\s+)?"
    r"(?P<name>[\w$.]+)"
)
_PACKAGE = re.compile(r"package (?P<name>[\w$.]+) does not exist")
_AMBIGUOUS = re.compile(r"reference to (?P<name>[\w$]+) is ambiguous")
# summary lines after which continuation lines cannot belong to the last header
_BLOCK_END = re.compile(r"^(?:\d+ errors?\b|\[INFO\]|\[WARNING\]|\[ERROR\] (?:Failed|->|COMPILATION)|BUILD )")


def classify(message: str, continuation: Sequence[str]) -> tuple[DiagnosticKind, str | None]:
    if m := _PACKAGE.search(message):
        return DiagnosticKind.PACKAGE_NOT_FOUND, m.group("name")
    if m := _AMBIGUOUS.search(message):
        return DiagnosticKind.AMBIGUOUS_REFERENCE, m.group("name")
    if "cannot find symbol" in message:
        for line in continuation:
            if m := _SYMBOL.search(line):
                return DiagnosticKind.MISSING_SYMBOL, m.group("name")
        # javac sometimes inlines the symbol: "cannot find symbol: class Foo"
        if m := _SYMBOL.search(message.replace("cannot find symbol:", "symbol:")):
            return DiagnosticKind.MISSING_SYMBOL, m.group("name")
    return DiagnosticKind.OTHER, None


def relativize(path: str, roots: Sequence[str | Path]) -> str:
    p = PurePosixPath(path.replace("\\", "/"))
    for root in roots:
        r = PurePosixPath(str(Path(root)).replace("\\", "/"))
        try:
            return str(p.relative_to(r))
        except ValueError:
            continue
    return str(p)


def parse_compiler_output(text: str, roots: Sequence[str | Path] = ()) -> tuple[CompilationDiagnostic, ...]:
    out: list[CompilationDiagnostic] = []
    seen: set[tuple[str, int, str | None, str]] = set()
    current: dict | None = None

    def flush():
        if current is None:
            return
        kind, symbol = classify(current["msg"], current["cont"])
        raw = "\n".join([current["msg"], *current["cont"]])
        file = relativize(current["file"], roots)
        key = (file, current["line"], current["col"], raw)
        if key not in seen:
            seen.add(key)
            out.append(CompilationDiagnostic(file, current["line"], kind, symbol, raw))

    for line in text.splitlines():
        m = MAVEN_HEADER.match(line) or JAVAC_HEADER.match(line)
        if m:
            flush()
            current = {"file": m.group("file"), "line": int(m.group("line")),
                       "col": m.groupdict().get("col"), "msg": m.group("msg"), "cont": []}
            continue
        if current is not None and (c := _CONTINUATION.match(line)):
            current["cont"].append(c.group("body"))
            continue
        if current is not None and _BLOCK_END.match(line):
            flush()
            current = None
    flush()
    return tuple(out)
