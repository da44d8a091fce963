"""Offline repair of LLM patches that do not compile.

Four strategies run in a fixed order: revert declaration drift on methods the
compiler complains about, import missing classes (each candidate confirmed by a
compile probe), add build dependencies for missing packages, and drop patch
imports that clash with the class's own imports.
"""

from __future__ import annotations

import re
import zipfile
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .java.declarations import declaration_diff, revert_declaration
from .java.lexer import JavaSyntaxError
from .java.parser import parse_test_class
from .java.patching import (Coordinate, PatchCandidate, PatchSyntaxError, apply_patch, parse_replacement,
                            select_target)
from .java.pom import edit_build_dependency, find_dependency
from .java.structure import ClassModel, ImportDecl
from .model import CompilationDiagnostic, DiagnosticKind, StitchAction, StitchActionKind

DEFAULT_PROBE_BUDGET = 10
Prober = Callable[[PatchCandidate], Sequence[CompilationDiagnostic]]

# standard-library packages tried first, in this order; other java.*/javax.* follow
_PREFERRED_PACKAGES = (
    "java.util", "java.util.function", "java.util.stream", "java.util.concurrent", "java.util.concurrent.atomic",
    "java.io", "java.nio.file", "java.nio.charset", "java.time", "java.math", "java.lang.reflect", "java.net",
    "java.text", "java.sql",
)
_CLASS_SYMBOL_CATEGORIES = {"class", "interface", "enum", "record"}


class ClassIndex:
    """Simple class name -> fully-qualified candidates."""

    def __init__(self, mapping: dict[str, Iterable[str]] | None = None, classpath: Iterable[str] = ()):
        self._map: dict[str, list[str]] = defaultdict(list)
        self._classpath: set[str] = set(classpath)
        for simple, names in (mapping or {}).items():
            for n in names:
                self.add(n)

    def add(self, qualified: str, from_classpath: bool = False) -> None:
        simple = qualified.rsplit(".", 1)[-1]
        if qualified not in self._map[simple]:
            self._map[simple].append(qualified)
        if from_classpath:
            self._classpath.add(qualified)

    def __contains__(self, simple: str) -> bool:
        return bool(self._map.get(simple))

    def items(self):
        return ((k, list(v)) for k, v in self._map.items() if v)

    def merge(self, other: "ClassIndex") -> "ClassIndex":
        out = ClassIndex()
        for src in (self, other):
            for _, names in src.items():
                for n in names:
                    out.add(n, n in src._classpath)
        return out

    def candidates(self, simple: str, hints: str = "") -> list[str]:
        """Ordered trial list: names mentioned in ``hints`` first, then JDK packages, then the classpath."""
        names = list(self._map.get(simple, ()))

        def rank(q: str) -> tuple:
            pkg = q.rsplit(".", 1)[0]
            mentioned = 0 if re.search(rf"(?<![\w.]){re.escape(q)}\b", hints) or \
                re.search(rf"(?<![\w.]){re.escape(pkg)}\.\*", hints) else 1
            if pkg in _PREFERRED_PACKAGES:
                tier = (0, _PREFERRED_PACKAGES.index(pkg))
            elif pkg.startswith(("java.", "javax.")) and q not in self._classpath:
                tier = (1, 0)
            else:
                tier = (2, 0)
            return (mentioned, tier, q)

        return sorted(names, key=rank)

    @classmethod
    def builtin(cls) -> "ClassIndex":
        text = resources.files("flakemend").joinpath("data/jdk-classes.txt").read_text(encoding="utf-8")
        index = cls()
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                index.add(line)
        return index

    @classmethod
    def from_jar(cls, path: str | Path, classpath: bool = True) -> "ClassIndex":
        """Top-level public-looking classes in a jar (also reads ``ct.sym`` signature archives)."""
        index = cls()
        with zipfile.ZipFile(path) as zf:
            for name in zf.namelist():
                if not name.endswith((".class", ".sig")) or "$" in name or name.endswith(
                        ("module-info.class", "package-info.class", "module-info.sig", "package-info.sig")):
                    continue
                parts = name.rsplit(".", 1)[0].split("/")
                # ct.sym entries look like "9ABC/java.base/java/util/List.sig"
                while parts and not re.fullmatch(r"[a-z_][\w]*", parts[0]):
                    parts = parts[1:]
                if len(parts) >= 2:
                    index.add(".".join(parts), from_classpath=classpath)
        return index

    @classmethod
    def from_jdk(cls, java_home: str | Path) -> "ClassIndex":
        home = Path(java_home)
        for candidate in (home / "lib" / "ct.sym", home / "jre" / "lib" / "rt.jar", home / "lib" / "rt.jar"):
            if candidate.exists():
                return cls.from_jar(candidate, classpath=False)
        return cls.builtin()

    @classmethod
    def from_sources(cls, root: str | Path) -> "ClassIndex":
        """Classes declared in a project's own source tree."""
        index = cls()
        for path in Path(root).rglob("*.java"):
            if "target" in path.parts:
                continue
            head = path.read_text(encoding="utf-8", errors="replace")[:4000]
            m = re.search(r"^\s*package\s+([\w.]+)\s*;", head, re.M)
            pkg = m.group(1) + "." if m else ""
            index.add(pkg + path.stem, from_classpath=True)
        return index


@dataclass(frozen=True)
class DependencyTable:
    entries: tuple[tuple[str, Coordinate], ...]

    @classmethod
    def parse(cls, text: str) -> "DependencyTable":
        out = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            prefix, coord = line.split()
            out.append((prefix, Coordinate.parse(coord)))
        return cls(tuple(out))

    @classmethod
    def load(cls, path: str | Path | None = None) -> "DependencyTable":
        if path is None:
            text = resources.files("flakemend").joinpath("data/package-coordinates.txt").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.parse(text)

    def lookup(self, package: str) -> Coordinate | None:
        best = None
        for prefix, coord in self.entries:
            if (package == prefix or package.startswith(prefix + ".")) and (best is None or len(prefix) > len(best[0])):
                best = (prefix, coord)
        return best[1] if best else None


@dataclass(frozen=True)
class StitchResult:
    patch: PatchCandidate
    actions: tuple[StitchAction, ...]
    unresolved: tuple[str, ...] = ()
    diagnostics: tuple[CompilationDiagnostic, ...] = field(default=())  # last known diagnostics


def ident(d: CompilationDiagnostic) -> tuple:
    """Line-independent identity of a diagnostic, matching the identical-error rule."""
    return (d.file, d.kind, d.symbol or d.message)


def _in_class_file(d: CompilationDiagnostic, model: ClassModel) -> bool:
    return d.file.replace("\\", "/").endswith(model.path_suffix)


# -- strategy 1: declarations ----------------------------------------------------------


def implicated_methods(original: ClassModel, patch: PatchCandidate,
                       diagnostics: Sequence[CompilationDiagnostic]) -> set[str]:
    """Replaced methods that a diagnostic points into; class-level diagnostics implicate them all."""
    diags = [d for d in diagnostics if _in_class_file(d, original)]
    if not diags or not patch.method_replacements:
        return set()
    try:
        patched = parse_test_class(apply_patch(original, patch))
    except (PatchSyntaxError, JavaSyntaxError):
        return set(patch.method_replacements)
    spans = {}
    for name in patch.method_replacements:
        for m in patched.methods_named(name) + [c for c in patched.constructors if c.name == name]:
            spans.setdefault(name, []).append((m.start_line, m.end_line))
    all_spans = [(m.start_line, m.end_line) for m in patched.methods + patched.constructors]
    hit = set()
    for d in diags:
        owners = {n for n, ss in spans.items() if any(a <= d.line <= b for a, b in ss)}
        if owners:
            hit |= owners
        elif not any(a <= d.line <= b for a, b in all_spans):
            hit |= set(spans)  # class-level line: imports, fields, annotations
    return hit


def reconcile_declarations(original: ClassModel, patch: PatchCandidate,
                           diagnostics: Sequence[CompilationDiagnostic]) -> tuple[PatchCandidate, list[StitchAction]]:
    actions = []
    replacements = dict(patch.method_replacements)
    for name in sorted(implicated_methods(original, patch, diagnostics)):
        if name in patch.additions:
            continue
        try:
            patched = parse_replacement(name, replacements[name])
        except PatchSyntaxError:
            continue
        target = select_target(original, name, patched)
        if target is None:
            continue
        diffs = declaration_diff(target, patched)
        if not diffs:
            continue
        replacements[name] = revert_declaration(target, patched)
        cause = next((d for d in diagnostics if _in_class_file(d, original)), None)
        actions.append(StitchAction(StitchActionKind.REVERT_DECLARATION,
                                    f"{name}: " + "; ".join(str(d) for d in diffs), cause))
    if not actions:
        return patch, []
    return patch.replace(method_replacements=replacements), actions


# -- strategy 2: missing classes -------------------------------------------------------


def _is_class_symbol(d: CompilationDiagnostic) -> bool:
    if d.kind is not DiagnosticKind.MISSING_SYMBOL or not d.symbol:
        return False
    cat = d.symbol_category
    simple = d.symbol.rsplit(".", 1)[-1]
    return cat in _CLASS_SYMBOL_CATEGORIES or (cat in (None, "variable") and simple[:1].isupper())


def resolve_missing_symbols(original: ClassModel, patch: PatchCandidate, diagnostics: Sequence[CompilationDiagnostic],
                            index: ClassIndex, prober: Prober, budget: int = DEFAULT_PROBE_BUDGET
                            ) -> tuple[PatchCandidate, list[StitchAction], list[str], tuple[CompilationDiagnostic, ...]]:
    """Try candidate imports one probe at a time; keep the first that removes the error without adding others."""
    current = tuple(diagnostics)
    actions, unresolved = [], []
    done: set[str] = set()
    for d in diagnostics:
        if not _is_class_symbol(d):
            continue
        simple = d.symbol.rsplit(".", 1)[-1]
        if simple in done:
            continue
        done.add(simple)
        imported = {i.qualified_name for i in original.imports} | {i.qualified_name for i in patch.new_imports}
        cands = [c for c in index.candidates(simple, patch.raw_response) if c not in imported]
        if not cands:
            unresolved.append(f"missing symbol {simple}: no import candidates")
            continue
        target = ident(d)
        baseline = {ident(x) for x in current}
        accepted = False
        for cand in cands[:budget]:
            trial = patch.replace(new_imports=patch.new_imports + (ImportDecl(cand),))
            after = tuple(prober(trial))
            after_ids = {ident(x) for x in after}
            if target not in after_ids and after_ids <= baseline:
                patch, current = trial, after
                actions.append(StitchAction(StitchActionKind.ADD_IMPORT, cand, d))
                accepted = True
                break
        if not accepted:
            tried = min(len(cands), budget)
            unresolved.append(f"missing symbol {simple}: none of {tried} candidate(s) resolved it")
    return patch, actions, unresolved, current


# -- strategy 3: missing packages ------------------------------------------------------


def add_build_dependency_for_missing_package(patch: PatchCandidate, diagnostics: Sequence[CompilationDiagnostic],
                                             manifest: str | None, table: DependencyTable
                                             ) -> tuple[PatchCandidate, list[StitchAction], list[str]]:
    actions, unresolved = [], []
    effective = manifest
    if manifest is not None:
        for dep in patch.build_dependencies:
            effective = edit_build_dependency(effective, dep)
    seen = set()
    for d in diagnostics:
        if d.kind is not DiagnosticKind.PACKAGE_NOT_FOUND or not d.symbol or d.symbol in seen:
            continue
        seen.add(d.symbol)
        coord = table.lookup(d.symbol)
        if coord is None:
            unresolved.append(f"package {d.symbol}: no known build coordinate")
            continue
        if effective is not None:
            if find_dependency(effective, coord.group, coord.artifact) == coord.version:
                continue  # stale diagnostic: the dependency is already declared
            effective = edit_build_dependency(effective, coord)
        elif coord in patch.build_dependencies:
            continue
        deps = tuple(c for c in patch.build_dependencies if (c.group, c.artifact) != (coord.group, coord.artifact))
        patch = patch.replace(build_dependencies=deps + (coord,))
        actions.append(StitchAction(StitchActionKind.ADD_BUILD_DEP, str(coord), d))
    return patch, actions, unresolved


# -- strategy 4: import conflicts --------------------------------------------------------


def _render(i: ImportDecl) -> str:
    return f"static {i.qualified_name}" if i.is_static else i.qualified_name


def resolve_import_conflicts(original_imports: Sequence[ImportDecl], patch: PatchCandidate
                             ) -> tuple[PatchCandidate, list[StitchAction]]:
    """Exclude patch imports whose simple name clashes with a different original import."""
    originals = list(original_imports)
    keep, actions = [], []
    for imp in patch.new_imports:
        if imp in originals:
            continue  # identical re-import: dropped silently
        clash = None if imp.is_wildcard else next(
            (o for o in originals if not o.is_wildcard and o.is_static == imp.is_static
             and o.simple_name == imp.simple_name
             and o.qualified_name != imp.qualified_name and o not in patch.removed_imports), None)
        if clash is not None:
            actions.append(StitchAction(StitchActionKind.EXCLUDE_IMPORT, _render(imp)))
            continue
        keep.append(imp)
    if tuple(keep) == patch.new_imports:
        return patch, actions
    return patch.replace(new_imports=tuple(keep)), actions


# -- driver ----------------------------------------------------------------------------------


def stitch(original: ClassModel, patch: PatchCandidate, diagnostics: Sequence[CompilationDiagnostic],
           index: ClassIndex, manifest: str | None, prober: Prober, table: DependencyTable | None = None,
           budget: int = DEFAULT_PROBE_BUDGET) -> StitchResult:
    if not diagnostics:
        return StitchResult(patch, ())
    table = table or DependencyTable.load()
    actions: list[StitchAction] = []
    unresolved: list[str] = []
    current = tuple(diagnostics)

    patch, acts = reconcile_declarations(original, patch, current)
    actions += acts
    if acts:
        current = tuple(prober(patch))
    if current:
        patch, acts, unres, current = resolve_missing_symbols(original, patch, current, index, prober, budget)
        actions += acts
        unresolved += unres
    if current:
        patch, acts, unres = add_build_dependency_for_missing_package(patch, current, manifest, table)
        actions += acts
        unresolved += unres
    patch, acts = resolve_import_conflicts(original.imports, patch)
    actions += acts
    return StitchResult(patch, tuple(actions), tuple(unresolved), current)


def replay_actions(original: ClassModel, patch: PatchCandidate, actions: Iterable[StitchAction]) -> PatchCandidate:
    """Re-apply a logged action sequence to the pre-stitch patch."""
    for a in actions:
        if a.kind is StitchActionKind.REVERT_DECLARATION:
            name = a.detail.split(":", 1)[0]
            patched = parse_replacement(name, patch.method_replacements[name])
            target = select_target(original, name, patched)
            replacements = dict(patch.method_replacements)
            replacements[name] = revert_declaration(target, patched)
            patch = patch.replace(method_replacements=replacements)
        elif a.kind is StitchActionKind.ADD_IMPORT:
            patch = patch.replace(new_imports=patch.new_imports + (ImportDecl(a.detail),))
        elif a.kind is StitchActionKind.ADD_BUILD_DEP:
            coord = Coordinate.parse(a.detail)
            deps = tuple(c for c in patch.build_dependencies if (c.group, c.artifact) != (coord.group, coord.artifact))
            patch = patch.replace(build_dependencies=deps + (coord,))
        elif a.kind is StitchActionKind.EXCLUDE_IMPORT:
            static = a.detail.startswith("static ")
            gone = ImportDecl(a.detail.removeprefix("static "), static)
            patch = patch.replace(new_imports=tuple(i for i in patch.new_imports if i != gone))
    # identical re-imports are dropped by conflict resolution without an action
    originals = set(original.imports)
    if any(i in originals for i in patch.new_imports):
        patch = patch.replace(new_imports=tuple(i for i in patch.new_imports if i not in originals))
    return patch
