"""Lossless dependency edits on Maven ``pom.xml`` manifests.

The manifest is validated with :mod:`xml.etree` but edited as text, so comments,
formatting and attribute order outside the touched element survive unchanged.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .patching import Coordinate

_TAG_RE = re.compile(r"<!--.*?-->|<!\[CDATA\[.*?\]\]>|<\?.*?\?>|<!DOCTYPE[^>]*>|<(/?)([\w.:\-]+)[^>]*?(/?)>", re.S)


class ManifestParseError(ValueError):
    """The manifest is not well-formed XML or lacks a ``project`` root."""


@dataclass
class _Element:
    name: str
    path: tuple[str, ...]
    open_start: int
    open_end: int
    close_start: int = -1
    close_end: int = -1
    children: list["_Element"] | None = None

    def inner(self, text: str) -> str:
        return text[self.open_end:self.close_start]

    def child(self, name: str) -> "_Element | None":
        for c in self.children or []:
            if c.name == name:
                return c
        return None


def _local(name: str) -> str:
    return name.split(":")[-1]


def _scan(text: str) -> _Element:
    stack: list[_Element] = []
    root = None
    for m in _TAG_RE.finditer(text):
        if m.group(2) is None:
            continue
        closing, name, selfclosing = m.group(1), _local(m.group(2)), m.group(3)
        if closing:
            el = stack.pop()
            el.close_start, el.close_end = m.start(), m.end()
            continue
        path = (stack[-1].path if stack else ()) + (name,)
        el = _Element(name, path, m.start(), m.end(), children=[])
        if stack:
            stack[-1].children.append(el)
        elif root is None:
            root = el
        if selfclosing:
            el.close_start = el.close_end = m.end()
        else:
            stack.append(el)
    if root is None:
        raise ManifestParseError("no root element")
    return root


def _indent_before(text: str, offset: int) -> str:
    start = text.rfind("\n", 0, offset) + 1
    prefix = text[start:offset]
    return prefix if not prefix.strip() else ""


def _indent_unit(text: str, project: _Element) -> str:
    for c in project.children or []:
        ind = _indent_before(text, c.open_start)
        if ind:
            return ind
    return "    "


def _dependency_xml(coord: Coordinate, indent: str, unit: str) -> str:
    inner = indent + unit
    return (
        f"{indent}<dependency>\n"
        f"{inner}<groupId>{coord.group}</groupId>\n"
        f"{inner}<artifactId>{coord.artifact}</artifactId>\n"
        f"{inner}<version>{coord.version}</version>\n"
        f"{indent}</dependency>\n"
    )


def _text(text: str, el: _Element | None) -> str | None:
    return el.inner(text).strip() if el is not None else None


def find_dependency(manifest_text: str, group: str, artifact: str) -> str | None:
    """Declared version of ``group:artifact`` in the project's dependencies ('' if unversioned)."""
    project = _validated(manifest_text)
    deps = project.child("dependencies")
    for d in (deps.children if deps else []):
        if d.name == "dependency" and _text(manifest_text, d.child("groupId")) == group \
                and _text(manifest_text, d.child("artifactId")) == artifact:
            return _text(manifest_text, d.child("version")) or ""
    return None


def _validated(manifest_text: str) -> _Element:
    try:
        root = ET.fromstring(manifest_text.encode("utf-8") if manifest_text.lstrip().startswith("<?xml")
                             else manifest_text)
    except ET.ParseError as exc:
        raise ManifestParseError(f"malformed manifest: {exc}") from exc
    if _local(root.tag.rsplit("}", 1)[-1]) != "project":
        raise ManifestParseError(f"root element is <{root.tag}>, expected <project>")
    return _scan(manifest_text)


def edit_build_dependency(manifest_text: str, coord: Coordinate) -> str:
    """Add ``coord`` to the project's dependencies or rewrite its version; idempotent."""
    text = manifest_text
    project = _validated(text)
    unit = _indent_unit(text, project)
    deps = project.child("dependencies")
    if deps is not None:
        for d in deps.children or []:
            if d.name != "dependency":
                continue
            if _text(text, d.child("groupId")) != coord.group or _text(text, d.child("artifactId")) != coord.artifact:
                continue
            version = d.child("version")
            if version is None:
                art = d.child("artifactId")
                ind = _indent_before(text, art.open_start)
                insert = f"\n{ind}<version>{coord.version}</version>" if ind else f"<version>{coord.version}</version>"
                return text[:art.close_end] + insert + text[art.close_end:]
            if version.inner(text).strip() == coord.version:
                return text
            return text[:version.open_end] + coord.version + text[version.close_start:]
        if deps.close_start == deps.close_end:
            # self-closing <dependencies/>
            ind = _indent_before(text, deps.open_start)
            block = f"<dependencies>\n{_dependency_xml(coord, ind + unit, unit)}{ind}</dependencies>"
            return text[:deps.open_start] + block + text[deps.close_end:]
        close_ind = _indent_before(text, deps.close_start)
        existing = [d for d in deps.children or [] if d.name == "dependency"]
        dep_ind = _indent_before(text, existing[-1].open_start) if existing else close_ind + unit
        if close_ind or text[:deps.close_start].endswith("\n"):
            at = text.rfind("\n", 0, deps.close_start) + 1
            return text[:at] + _dependency_xml(coord, dep_ind, unit) + text[at:]
        return text[:deps.close_start] + "\n" + _dependency_xml(coord, dep_ind, unit) + text[deps.close_start:]

    close_ind = _indent_before(text, project.close_start)
    block = f"{close_ind}{unit}<dependencies>\n{_dependency_xml(coord, close_ind + unit + unit, unit)}" \
            f"{close_ind}{unit}</dependencies>\n"
    at = text.rfind("\n", 0, project.close_start) + 1
    if text[at:project.close_start].strip():
        return text[:project.close_start] + "\n" + block + text[project.close_start:]
    return text[:at] + block + text[at:]
