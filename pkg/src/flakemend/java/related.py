"""Select the code an LLM needs to see for a given flaky test."""

from __future__ import annotations

import textwrap
from collections import deque
from dataclasses import dataclass

from ..model import FlakinessCategory, FlakyTestCase
from .statements import variable_refs
from .structure import ClassModel, MethodModel


class TargetNotFound(LookupError):
    pass


@dataclass(frozen=True)
class CodeUnit:
    role: str  # flaky | polluter | field | helper
    class_fqn: str
    name: str
    source: str
    file: str
    depth: int = 0  # helpers: distance from the tests in the call graph


@dataclass(frozen=True)
class RelatedCode:
    units: tuple[CodeUnit, ...]

    def by_role(self, role: str) -> list[CodeUnit]:
        return [u for u in self.units if u.role == role]

    def without(self, unit: CodeUnit) -> "RelatedCode":
        return RelatedCode(tuple(u for u in self.units if u is not unit))

    @property
    def names(self) -> set[tuple[str, str]]:
        return {(u.role, u.name) for u in self.units}


def member_source(model: ClassModel, start: int, end: int) -> str:
    """Member text dedented as if it started in column 0."""
    line_start = model.source_text.rfind("\n", 0, start) + 1
    prefix = model.source_text[line_start:start]
    if prefix.strip():
        prefix = ""
    return textwrap.dedent(prefix + model.source_text[start:end])


def method_source(model: ClassModel, method: MethodModel) -> str:
    return member_source(model, method.start, method.end)


def called_methods(model: ClassModel, method: MethodModel) -> set[str]:
    """Names of same-class methods invoked from ``method`` (``foo(`` or ``this.foo(``)."""
    if method.body_offset is None:
        return set()
    own = {m.name for m in model.methods}
    toks = model.tokens_between(method.start + method.body_offset, method.end)
    out = set()
    for i, t in enumerate(toks[:-1]):
        if t.kind != "ident" or t.text not in own or not toks[i + 1].is_op("("):
            continue
        prev = toks[i - 1] if i else None
        if prev is not None and prev.is_op(".") and not (i >= 2 and toks[i - 2].is_word("this")):
            continue
        if prev is not None and prev.is_word("new"):
            continue
        out.add(t.text)
    return out


def helper_closure(model: ClassModel, roots: list[MethodModel]) -> dict[str, int]:
    """Non-test helpers reachable from ``roots`` plus fixture methods, with their depth."""
    depth: dict[str, int] = {}
    queue: deque[tuple[MethodModel, int]] = deque((m, 0) for m in roots)
    for m in model.methods:
        if m.is_fixture and not m.is_test:
            depth[m.name] = 1
            queue.append((m, 1))
    root_names = {m.name for m in roots}
    while queue:
        m, d = queue.popleft()
        for name in sorted(called_methods(model, m)):
            if name in root_names:
                continue
            for callee in model.methods_named(name):
                if callee.is_test:
                    continue
                if name not in depth or depth[name] > d + 1:
                    depth[name] = d + 1
                    queue.append((callee, d + 1))
    return depth


def fields_referenced(model: ClassModel, method: MethodModel) -> set[str]:
    if method.body_offset is None:
        return set()
    names = {f.name for f in model.fields}
    toks = model.tokens_between(method.start + method.body_offset, method.end)
    shadowed = {p.name for p in method.parameters}
    return {toks[i].text for i in variable_refs(toks, names)} - shadowed


def _find(model: ClassModel, name: str, what: str) -> MethodModel:
    m = model.method(name)
    if m is None:
        raise TargetNotFound(f"{what} {model.fqn}#{name} not found")
    return m


def extract_related_code(
    model: ClassModel, case: FlakyTestCase, polluter_models: dict[str, ClassModel] | None = None
) -> RelatedCode:
    """Flaky method always; for OD victims also polluters, fields and helpers."""
    flaky = _find(model, case.test.method, "flaky test")
    units = [CodeUnit("flaky", model.fqn, flaky.name, method_source(model, flaky), model.path_suffix)]
    if case.category is not FlakinessCategory.OD_VICTIM:
        return RelatedCode(tuple(units))

    polluter_models = dict(polluter_models or {})
    polluter_models.setdefault(model.fqn, model)
    roots: dict[str, list[MethodModel]] = {model.fqn: [flaky]}
    for p in case.polluters:
        pm = polluter_models.get(p.class_fqn)
        if pm is None:
            raise TargetNotFound(f"no source model for polluter class {p.class_fqn}")
        method = _find(pm, p.method, "polluter")
        units.append(CodeUnit("polluter", pm.fqn, method.name, method_source(pm, method), pm.path_suffix))
        roots.setdefault(pm.fqn, []).append(method)

    for fqn, root_methods in roots.items():
        cm = polluter_models[fqn]
        seen_spans = set()
        for f in cm.fields:
            if (f.start, f.end) in seen_spans:
                continue
            seen_spans.add((f.start, f.end))
            units.append(CodeUnit("field", cm.fqn, f.name, member_source(cm, f.start, f.end), cm.path_suffix))
        closure = helper_closure(cm, root_methods)
        for m in cm.methods:
            if m.name in closure and not m.is_test:
                units.append(
                    CodeUnit("helper", cm.fqn, m.name, method_source(cm, m), cm.path_suffix, depth=closure[m.name])
                )
    return RelatedCode(tuple(units))
