"""Per-test repair loop and campaigns over input lists."""

from __future__ import annotations

import csv
import json
import logging
import statistics
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .inspector import ContextBundle, NotReproduced, extract_context, reproduce
from .java.lexer import JavaSyntaxError
from .java.parser import parse_test_class
from .java.patching import PatchCandidate, PatchSyntaxError, UnknownTarget, apply_patch
from .java.pom import ManifestParseError, edit_build_dependency
from .java.related import RelatedCode, TargetNotFound, extract_related_code
from .java.structure import ClassModel
from .java.unordered import UnorderedApis
from .llm.extract import UnparseableResponse, extract_patch
from .llm.providers import FixtureMiss, Provider, ProviderConfig, ProviderError
from .model import (MAX_ITERATIONS, CompilationDiagnostic, DiagnosticKind, FlakinessCategory, FlakyTestCase,
                    IterationRecord, OutcomeKind, RepairSession, RepairStatus, StitchAction, SuspicionFlag, TestId,
                    diagnostic_key, encode_report, report_filename)
from .prompts.forge import (DEFAULT_CHAR_BUDGET, DEFAULT_MAX_DIAGNOSTICS, FeedbackContext, PromptOverflow,
                            augment_with_feedback, build_prompt)
from .runner.base import InfraError, Runner, TestNotFound, WorkingCopy
from .stitcher import DEFAULT_PROBE_BUDGET, ClassIndex, DependencyTable, stitch
from .validator import covictim_sweep, overfit_guard, shared_fields_of, suspicious_patch_flags, validate

log = logging.getLogger(__name__)

FIXED_BY_COVICTIM_SWEEP = "FIXED_BY_COVICTIM_SWEEP"
ROW_ERROR = "ROW_ERROR"
INPUT_HEADER = ("project", "sha", "module", "test", "category", "polluters")
SUMMARY_FILE = "campaign-summary.json"


@dataclass(frozen=True)
class CampaignConfig:
    project_dir: Path
    input_path: Path | None
    provider: ProviderConfig
    out_dir: Path
    max_iterations: int = MAX_ITERATIONS
    identical_error_limit: int = 3
    nondex_rounds: int = 5
    jobs: int = 1
    seed: int = 0
    keep_workdirs: bool = False
    prompt_budget: int = DEFAULT_CHAR_BUDGET
    max_diagnostics: int = DEFAULT_MAX_DIAGNOSTICS
    probe_budget: int = DEFAULT_PROBE_BUDGET
    dependency_table: Path | None = None
    scratch_dir: Path | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "project_dir", Path(self.project_dir))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.input_path is not None:
            object.__setattr__(self, "input_path", Path(self.input_path))
        if not 1 <= self.max_iterations <= MAX_ITERATIONS:
            raise ValueError(f"max_iterations must be within 1..{MAX_ITERATIONS}")
        if not 1 <= self.identical_error_limit <= self.max_iterations:
            raise ValueError("identical_error_limit must be within 1..max_iterations")
        if self.nondex_rounds < 1 or self.jobs < 1 or self.probe_budget < 1 or self.max_diagnostics < 1:
            raise ValueError("rounds, jobs, probe budget and diagnostic cap must be positive")


# -- runner wrapper -------------------------------------------------------------------------


class RetryingRunner(Runner):
    """Retries each runner operation once when the build infrastructure fails."""

    def __init__(self, inner: Runner):
        self.inner = inner
        self.backend = inner.backend
        self.retries = 0

    def _call(self, fn, *args):
        try:
            return fn(*args)
        except InfraError as exc:
            self.retries += 1
            log.warning("infrastructure failure, retrying once: %s", exc)
            return fn(*args)

    def compile(self, copy):
        return self._call(self.inner.compile, copy)

    def run_ordered(self, copy, sequence):
        return self._call(self.inner.run_ordered, copy, sequence)

    def run_isolated(self, copy, test):
        return self._call(self.inner.run_isolated, copy, test)

    def run_shaken(self, copy, test, rounds, seed):
        return self._call(self.inner.run_shaken, copy, test, rounds, seed)


class _TimedRunner(Runner):
    """Measures wall-clock time spent inside the runner."""

    def __init__(self, inner: Runner):
        self.inner = inner
        self.backend = inner.backend
        self.elapsed = 0.0

    def _call(self, fn, *args):
        start = time.monotonic()
        try:
            return fn(*args)
        finally:
            self.elapsed += time.monotonic() - start

    def compile(self, copy):
        return self._call(self.inner.compile, copy)

    def run_ordered(self, copy, sequence):
        return self._call(self.inner.run_ordered, copy, sequence)

    def run_isolated(self, copy, test):
        return self._call(self.inner.run_isolated, copy, test)

    def run_shaken(self, copy, test, rounds, seed):
        return self._call(self.inner.run_shaken, copy, test, rounds, seed)

    def lap(self) -> float:
        value, self.elapsed = self.elapsed, 0.0
        return value


# -- source models ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceSet:
    models: dict[str, ClassModel]
    paths: dict[str, str]  # fqn -> path relative to the working-copy root
    warnings: tuple[str, ...] = ()


def load_sources(copy: WorkingCopy) -> SourceSet:
    """Parse the module's test sources (falling back to every source file)."""
    module = copy.module_root
    roots = [module / "src" / "test"] if (module / "src" / "test").is_dir() else [module]
    models, paths, warnings = {}, {}, []
    for root in roots:
        for path in sorted(root.rglob("*.java")):
            if "target" in path.relative_to(copy.root).parts:
                continue
            try:
                model = parse_test_class(path.read_text(encoding="utf-8"))
            except (JavaSyntaxError, UnicodeDecodeError) as exc:
                warnings.append(f"skipped {copy.rel(path)}: {exc}")
                continue
            models.setdefault(model.fqn, model)
            paths.setdefault(model.fqn, copy.rel(path))
    return SourceSet(models, paths, tuple(warnings))


def route_patch(patch: PatchCandidate, primary: ClassModel, others: Sequence[ClassModel]) -> dict[str, PatchCandidate]:
    """Split a patch by the class that owns each replaced method (unknown names go to ``primary``)."""
    owned: dict[str, dict[str, str]] = defaultdict(dict)
    for name, src in patch.method_replacements.items():
        owner = primary
        if not _declares(primary, name):
            owner = next((o for o in others if _declares(o, name)), primary)
        owned[owner.fqn][name] = src
    if not owned:
        owned[primary.fqn] = {}
    by_fqn = {m.fqn: m for m in (primary, *others)}
    out = {}
    for fqn, replacements in owned.items():
        model = by_fqn[fqn]
        removed = tuple(i for i in patch.removed_imports if i in model.imports)
        out[fqn] = PatchCandidate(
            method_replacements=replacements,
            new_imports=patch.new_imports,
            removed_imports=removed,
            build_dependencies=patch.build_dependencies if fqn == next(iter(owned)) else (),
            raw_response=patch.raw_response,
            additions=frozenset(n for n in replacements if not _declares(model, n)),
        )
    return out


def _declares(model: ClassModel, name: str) -> bool:
    return model.method(name) is not None or any(c.name == name for c in model.constructors)


def _synthetic(file: str, line: int | None, message: str) -> CompilationDiagnostic:
    return CompilationDiagnostic(file, max(1, line or 1), DiagnosticKind.OTHER, None, message)


# -- one session -------------------------------------------------------------------------------


@dataclass
class SessionDeps:
    runner: Runner
    provider: Provider
    index: ClassIndex | None = None
    dependency_table: DependencyTable | None = None
    apis: UnorderedApis | None = None
    on_workdir: Callable[[WorkingCopy], None] | None = None


class _Session:
    def __init__(self, case: FlakyTestCase, config: CampaignConfig, deps: SessionDeps, project_dir: Path):
        self.case = case
        self.config = config
        self.deps = deps
        self.project_dir = project_dir
        self.runner = _TimedRunner(deps.runner)
        self.iterations: list[IterationRecord] = []
        self.warnings: list[str] = []
        self.tokens_in = self.tokens_out = 0

    # file plumbing

    def _write(self, copy: WorkingCopy, sources: SourceSet, patches: Mapping[str, PatchCandidate]
               ) -> list[CompilationDiagnostic]:
        """Write a patch set onto the pristine copy; diagnostics for parts that cannot be applied."""
        copy.reset()
        synthetic, deps = [], []
        for fqn, p in patches.items():
            rel = sources.paths[fqn]
            try:
                copy.write_text(rel, apply_patch(sources.models[fqn], p))
            except PatchSyntaxError as exc:
                synthetic.append(_synthetic(rel, exc.line, f"error: patched code does not parse: {exc}"))
            except UnknownTarget as exc:
                synthetic.append(_synthetic(rel, 1, f"error: {exc}"))
            deps += p.build_dependencies
        if deps:
            manifest_rel = self._manifest_rel(copy)
            text = copy.read_text(manifest_rel)
            if text is None:
                synthetic.append(_synthetic(manifest_rel, 1, "error: no build manifest to add dependencies to"))
            else:
                try:
                    for coord in dict.fromkeys(deps):
                        text = edit_build_dependency(text, coord)
                    copy.write_text(manifest_rel, text)
                except ManifestParseError as exc:
                    synthetic.append(_synthetic(manifest_rel, 1, f"error: {exc}"))
        return synthetic

    def _manifest_rel(self, copy: WorkingCopy) -> str:
        return copy.rel(copy.module_root / "pom.xml")

    def _compile(self, copy: WorkingCopy, sources: SourceSet, patches: Mapping[str, PatchCandidate]
                 ) -> list[CompilationDiagnostic]:
        synthetic = self._write(copy, sources, patches)
        result = self.runner.compile(copy)
        return synthetic + list(result.diagnostics)

    def _stitch(self, copy: WorkingCopy, sources: SourceSet, patches: dict[str, PatchCandidate],
                diagnostics: list[CompilationDiagnostic]) -> tuple[dict[str, PatchCandidate], list[StitchAction], list]:
        actions: list[StitchAction] = []
        manifest = copy.read_text(self._manifest_rel(copy))
        index = self.deps.index or ClassIndex.builtin()
        table = self.deps.dependency_table or DependencyTable.load(self.config.dependency_table)
        for fqn in list(patches):
            model = sources.models[fqn]
            mine = [d for d in diagnostics if d.file.replace("\\", "/").endswith(model.path_suffix)
                    or d.kind is DiagnosticKind.PACKAGE_NOT_FOUND]
            if not mine:
                continue

            def prober(trial: PatchCandidate, fqn=fqn) -> list[CompilationDiagnostic]:
                return self._compile(copy, sources, {**patches, fqn: trial})

            try:
                result = stitch(model, patches[fqn], mine, index, manifest, prober, table, self.config.probe_budget)
            except ManifestParseError as exc:
                self.warnings.append(f"stitching skipped the build manifest: {exc}")
                continue
            patches[fqn] = result.patch
            actions += result.actions
            self.warnings += [f"stitch unresolved: {u}" for u in result.unresolved]
        if not actions:
            self._write(copy, sources, patches)  # drop whatever the last probe left behind
            return patches, actions, diagnostics
        return patches, actions, self._compile(copy, sources, patches)

    # context

    def _patched_sources(self, copy: WorkingCopy, sources: SourceSet) -> SourceSet:
        models = dict(sources.models)
        for fqn, rel in sources.paths.items():
            if rel in copy.touched():
                try:
                    models[fqn] = parse_test_class(copy.read_text(rel) or "")
                except JavaSyntaxError:
                    pass
        return SourceSet(models, sources.paths)

    def _related(self, models: Mapping[str, ClassModel]) -> RelatedCode:
        return extract_related_code(models[self.case.test.class_fqn], self.case, dict(models))

    # loop

    def run(self) -> RepairSession:
        start = time.monotonic()
        copy = WorkingCopy.create(self.project_dir, self.case.test.module_path, self.config.scratch_dir)
        if self.deps.on_workdir:
            self.deps.on_workdir(copy)
        status, final_patch, error = RepairStatus.EXHAUSTED_ITERATIONS, None, None
        co_fixed: list[TestId] = []
        flags: list[SuspicionFlag] = []
        try:
            with copy.exclusive():
                status, final_patch, co_fixed, flags = self._loop(copy)
        except NotReproduced as exc:
            status, error = RepairStatus.NOT_REPRODUCED, str(exc)
        except (ProviderError, FixtureMiss) as exc:
            status, error = RepairStatus.PROVIDER_ERROR, str(exc)
        except InfraError as exc:
            status, error = RepairStatus.INFRA_ERROR, str(exc)
        except PromptOverflow as exc:
            status, error = RepairStatus.PROVIDER_ERROR, f"prompt over budget: {exc}"
        finally:
            if self.config.keep_workdirs:
                self.warnings.append(f"working copy kept at {copy.root}")
            else:
                copy.discard()
        return RepairSession(
            case=self.case,
            iterations=tuple(self.iterations),
            status=status,
            final_patch=final_patch,
            wall_time_s=time.monotonic() - start,
            llm_tokens_in=self.tokens_in,
            llm_tokens_out=self.tokens_out,
            co_victims_fixed=tuple(co_fixed),
            flags=tuple(flags),
            warnings=tuple(self.warnings),
            seed=self.config.seed,
            error=error,
        )

    def _loop(self, copy: WorkingCopy):
        case, config = self.case, self.config
        base = self.runner.compile(copy)
        if base.kind is OutcomeKind.COMPILATION_ERROR:
            raise InfraError("the pristine project does not compile")
        sources = load_sources(copy)
        self.warnings += sources.warnings
        for t in (case.test, *case.polluters):
            model = sources.models.get(t.class_fqn)
            if model is None or model.method(t.method) is None:
                raise TestNotFound(str(t))
        primary = sources.models[case.test.class_fqn]
        others = [sources.models[p.class_fqn] for p in case.polluters if p.class_fqn != primary.fqn]
        others = list({m.fqn: m for m in others}.values())

        failing = reproduce(case, self.runner, copy, config.nondex_rounds, config.seed)
        context = extract_context(case, failing, sources.models, self.deps.apis)
        self.warnings += context.warnings
        prompt = build_prompt(case, context, 1, config.prompt_budget)
        keys: list[str] = []
        self.runner.lap()  # reproduction time is not part of any iteration

        for index in range(1, config.max_iterations + 1):
            text = prompt.render()
            completion = self.deps.provider.complete(text)
            self.tokens_in += completion.tokens_in
            self.tokens_out += completion.tokens_out
            notes: list[str] = []
            actions: list[StitchAction] = []

            try:
                patch = extract_patch(completion.text, primary)
                patches = route_patch(patch, primary, others)
                diagnostics = self._compile(copy, sources, patches)
            except UnparseableResponse as exc:
                patches = {}
                diagnostics = [_synthetic(sources.paths[primary.fqn], 1, f"error: {exc}")]
            if diagnostics and patches:
                patches, actions, diagnostics = self._stitch(copy, sources, dict(patches), diagnostics)
                if actions:
                    notes.append(f"stitching applied {len(actions)} action(s)")

            if diagnostics:
                key = diagnostic_key(diagnostics, [str(copy.root)])
                keys.append(key)
                self.iterations.append(IterationRecord(index, text, completion.text, tuple(actions),
                                                       OutcomeKind.COMPILATION_ERROR, key, completion.tokens_in,
                                                       completion.tokens_out, self.runner.lap(), tuple(notes)))
                streak = keys[-config.identical_error_limit:]
                if len(streak) == config.identical_error_limit and len(set(streak)) == 1:
                    return RepairStatus.EXHAUSTED_IDENTICAL_ERRORS, None, [], []
                if index == config.max_iterations:
                    break
                patched = self._patched_sources(copy, sources)
                feedback = FeedbackContext(self._safe_related(patched.models, context.related_code),
                                           tuple(diagnostics), None, config.max_diagnostics)
                prompt = augment_with_feedback(prompt, self.iterations[-1], feedback)
                continue

            keys.append("")  # a compiling patch breaks the identical-error streak
            if not copy.diff():
                notes.append("the patch leaves every file unchanged")
                self.iterations.append(IterationRecord(index, text, completion.text, tuple(actions),
                                                       OutcomeKind.TEST_FAILURE, None, completion.tokens_in,
                                                       completion.tokens_out, self.runner.lap(), tuple(notes)))
                if index == config.max_iterations:
                    break
                feedback = FeedbackContext(context.related_code, (), context, config.max_diagnostics)
                prompt = augment_with_feedback(prompt, self.iterations[-1], feedback)
                continue
            outcome = validate(case, copy, self.runner, config.nondex_rounds, config.seed)
            if outcome.kind is OutcomeKind.TEST_PASS:
                patched = self._patched_sources(copy, sources)
                flags = self._flags(sources, patched)
                co_fixed = covictim_sweep(case, copy, self.runner) if case.co_victims else []
                if case.category is FlakinessCategory.OD_VICTIM:
                    shared = shared_fields_of(case, patched.models)
                    exclude = (case.test, *case.polluters, *case.co_victims)
                    self.warnings += [str(w) for w in overfit_guard(patched.models.values(), shared, exclude)]
                self.iterations.append(IterationRecord(index, text, completion.text, tuple(actions),
                                                       OutcomeKind.TEST_PASS, None, completion.tokens_in,
                                                       completion.tokens_out, self.runner.lap(), tuple(notes)))
                return RepairStatus.FIXED, copy.diff(), co_fixed, flags

            self.iterations.append(IterationRecord(index, text, completion.text, tuple(actions),
                                                   OutcomeKind.TEST_FAILURE, None, completion.tokens_in,
                                                   completion.tokens_out, self.runner.lap(), tuple(notes)))
            if index == config.max_iterations:
                break
            patched = self._patched_sources(copy, sources)
            fresh = self._fresh_context(outcome.failure, patched, context)
            feedback = FeedbackContext(fresh.related_code, (), fresh, config.max_diagnostics)
            prompt = augment_with_feedback(prompt, self.iterations[-1], feedback)
        return RepairStatus.EXHAUSTED_ITERATIONS, None, [], []

    def _safe_related(self, models: Mapping[str, ClassModel], fallback: RelatedCode) -> RelatedCode:
        try:
            return self._related(models)
        except TargetNotFound:
            return fallback

    def _fresh_context(self, failure, patched: SourceSet, previous: ContextBundle) -> ContextBundle:
        try:
            return extract_context(self.case, failure, patched.models, self.deps.apis)
        except (TargetNotFound, KeyError, ValueError):
            return previous

    def _flags(self, sources: SourceSet, patched: SourceSet) -> list[SuspicionFlag]:
        flags = []
        for fqn, model in sources.models.items():
            new = patched.models.get(fqn)
            if new is model or new is None:
                continue
            for m in new.methods:
                old = model.method(m.name)
                if old is not None and old.text != m.text and (m.is_test or old.is_test):
                    flags += suspicious_patch_flags(old.text, m.text)
        return flags


def repair_one(case: FlakyTestCase, config: CampaignConfig, deps: SessionDeps,
               project_dir: Path | None = None) -> RepairSession:
    """Run the full repair loop for one flaky test in a scratch working copy."""
    runner = deps.runner if isinstance(deps.runner, RetryingRunner) else RetryingRunner(deps.runner)
    session_deps = SessionDeps(runner, deps.provider, deps.index, deps.dependency_table, deps.apis, deps.on_workdir)
    return _Session(case, config, session_deps, Path(project_dir or config.project_dir)).run()


# -- campaigns -----------------------------------------------------------------------------------


class InputError(ValueError):
    """The input list itself is unusable."""


@dataclass(frozen=True)
class InputRow:
    number: int  # 1-based data row number
    project: str
    sha: str
    module: str
    test: str
    category: str
    polluters: str


def read_input(path: Path) -> list[InputRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        return []
    header = [h.strip().lower() for h in rows[0]]
    if header[: len(INPUT_HEADER)] != list(INPUT_HEADER):
        raise InputError(f"{path}: expected header {','.join(INPUT_HEADER)}")
    out = []
    for n, raw in enumerate(rows[1:], 1):
        padded = [c.strip() for c in raw] + [""] * (len(INPUT_HEADER) - len(raw))
        out.append(InputRow(n, *padded[: len(INPUT_HEADER)]))
    return out


def case_from_row(row: InputRow) -> FlakyTestCase:
    module = row.module or "."
    category = FlakinessCategory.parse(row.category)
    polluters = tuple(TestId.parse(p, module) for p in row.polluters.split(";") if p.strip())
    return FlakyTestCase(TestId.parse(row.test, module), category, polluters)


def with_co_victims(cases: Sequence[FlakyTestCase], projects: Sequence[str]) -> list[FlakyTestCase]:
    """Attach as co-victims the other victims whose polluters are all among this victim's polluters."""
    out = []
    for i, c in enumerate(cases):
        if c.category is not FlakinessCategory.OD_VICTIM:
            out.append(c)
            continue
        mine = set(c.polluters)
        co = tuple(
            o.test for j, o in enumerate(cases)
            if j != i and projects[j] == projects[i] and o.category is FlakinessCategory.OD_VICTIM
            and o.test != c.test and set(o.polluters) <= mine and o.test.module_path == c.test.module_path
        )
        out.append(FlakyTestCase(c.test, c.category, c.polluters, tuple(dict.fromkeys(co))))
    return out


@dataclass
class RowResult:
    row: int
    test: str
    category: str | None
    status: str
    report: str | None = None
    diff: str | None = None
    fixed_by: str | None = None
    error: str | None = None
    session: RepairSession | None = field(default=None, repr=False)

    def to_doc(self) -> dict:
        return {k: v for k, v in {
            "row": self.row, "test": self.test, "category": self.category, "status": self.status,
            "report": self.report, "diff": self.diff, "fixed_by": self.fixed_by, "error": self.error,
        }.items() if v is not None}


@dataclass
class CampaignReport:
    rows: list[RowResult]
    provider: dict
    config: dict
    exit_code: int

    def summary(self) -> dict:
        per_category: dict[str, dict[str, int]] = defaultdict(lambda: {"fixed": 0, "unfixed": 0})
        flags: dict[str, int] = defaultdict(int)
        sessions = [r.session for r in self.rows if r.session is not None]
        for r in self.rows:
            if r.category is None:
                continue
            fixed = r.status in (RepairStatus.FIXED.value, FIXED_BY_COVICTIM_SWEEP)
            per_category[r.category]["fixed" if fixed else "unfixed"] += 1
        for s in sessions:
            for f in s.flags:
                flags[f.kind.value] += 1
        statuses: dict[str, int] = defaultdict(int)
        for r in self.rows:
            statuses[r.status] += 1
        return {
            "format": "flakemend-campaign",
            "version": 1,
            "provider": self.provider,
            "config": self.config,
            "totals": {
                "rows": len(self.rows),
                "sessions": len(sessions),
                "llm_calls": sum(s.llm_calls for s in sessions),
                "tokens_in": sum(s.llm_tokens_in for s in sessions),
                "tokens_out": sum(s.llm_tokens_out for s in sessions),
                "mean_wall_time_s": statistics.fmean([s.wall_time_s for s in sessions]) if sessions else 0.0,
            },
            "statuses": dict(sorted(statuses.items())),
            "per_category": {k: per_category[k] for k in sorted(per_category)},
            "suspicion_flags": dict(sorted(flags.items())),
            "rows": [r.to_doc() for r in self.rows],
            "exit_code": self.exit_code,
        }


def _safe_name(test: TestId) -> str:
    return f"{test.class_fqn}.{test.method}"


def _project_for(row: InputRow, config: CampaignConfig) -> Path:
    if row.project and row.project not in (".", ""):
        candidate = Path(row.project)
        if not candidate.is_absolute():
            candidate = config.project_dir / row.project
        if candidate.is_dir():
            return candidate
    return config.project_dir


def _groups(cases: Sequence[FlakyTestCase | None], projects: Sequence[str]) -> list[list[int]]:
    """Row indices that must run in order because they share polluters; everything else is independent."""
    parent = list(range(len(cases)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[tuple[str, TestId], int] = {}
    for i, c in enumerate(cases):
        if c is None:
            continue
        for t in (c.test, *c.polluters):
            key = (projects[i], t)
            if key in owner:
                parent[find(i)] = find(owner[key])
            else:
                owner[key] = i
    groups: dict[int, list[int]] = defaultdict(list)
    for i in range(len(cases)):
        groups[find(i)].append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def run_campaign(config: CampaignConfig, runner: Runner, provider: Provider, index: ClassIndex | None = None,
                 apis: UnorderedApis | None = None) -> CampaignReport:
    """Repair every row of the input list and write reports, diffs and the campaign summary."""
    out = config.out_dir
    (out / "sessions").mkdir(parents=True, exist_ok=True)
    (out / "diffs").mkdir(parents=True, exist_ok=True)
    rows = read_input(config.input_path) if config.input_path is not None else []

    cases: list[FlakyTestCase | None] = []
    results: list[RowResult | None] = []
    projects: list[str] = []
    for row in rows:
        projects.append(str(_project_for(row, config)))
        try:
            cases.append(case_from_row(row))
            results.append(None)
        except ValueError as exc:
            cases.append(None)
            results.append(RowResult(row.number, row.test, None, ROW_ERROR, error=str(exc)))
    valid = [i for i, c in enumerate(cases) if c is not None]
    enriched = with_co_victims([cases[i] for i in valid], [projects[i] for i in valid])
    for i, c in zip(valid, enriched):
        cases[i] = c

    if index is None:
        index = ClassIndex.builtin()
        for p in sorted(set(projects) | {str(config.project_dir)}):
            if Path(p).is_dir():
                index = index.merge(ClassIndex.from_sources(p))
    table = DependencyTable.load(config.dependency_table)
    deps = SessionDeps(RetryingRunner(runner), provider, index, table, apis)

    def run_group(group: list[int]) -> None:
        fixed_by: dict[TestId, TestId] = {}
        for i in group:
            case = cases[i]
            if case is None:
                continue
            row = rows[i]
            if case.test in fixed_by:
                results[i] = RowResult(row.number, str(case.test), case.category.value, FIXED_BY_COVICTIM_SWEEP,
                                       fixed_by=str(fixed_by[case.test]))
                continue
            try:
                session = repair_one(case, config, deps, Path(projects[i]))
            except (TestNotFound, TargetNotFound) as exc:
                results[i] = RowResult(row.number, str(case.test), case.category.value, ROW_ERROR,
                                       error=f"test not found: {exc}")
                continue
            except FileNotFoundError as exc:
                results[i] = RowResult(row.number, str(case.test), case.category.value, ROW_ERROR, error=str(exc))
                continue
            report_name = report_filename(case.test)
            (out / "sessions" / report_name).write_text(encode_report(session), encoding="utf-8")
            diff_name = None
            if session.final_patch:
                diff_name = f"{_safe_name(case.test)}.diff"
                (out / "diffs" / diff_name).write_text(session.final_patch, encoding="utf-8")
            for w in session.co_victims_fixed:
                fixed_by[w] = case.test
            results[i] = RowResult(row.number, str(case.test), case.category.value, session.status.value,
                                   f"sessions/{report_name}", f"diffs/{diff_name}" if diff_name else None,
                                   error=session.error, session=session)

    groups = _groups(cases, projects)
    if config.jobs == 1 or len(groups) <= 1:
        for g in groups:
            run_group(g)
    else:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            list(pool.map(run_group, groups))

    final = [r for r in results if r is not None]
    if any(r.status == RepairStatus.INFRA_ERROR.value for r in final):
        code = 2
    elif all(r.status in (RepairStatus.FIXED.value, FIXED_BY_COVICTIM_SWEEP) for r in final):
        code = 0
    else:
        code = 1
    report = CampaignReport(final, config.provider.describe(), {
        "max_iterations": config.max_iterations,
        "identical_error_limit": config.identical_error_limit,
        "nondex_rounds": config.nondex_rounds,
        "jobs": config.jobs,
        "seed": config.seed,
        "probe_budget": config.probe_budget,
        "prompt_budget": config.prompt_budget,
        "max_diagnostics": config.max_diagnostics,
    }, code)
    (out / SUMMARY_FILE).write_text(json.dumps(report.summary(), indent=2) + "\n", encoding="utf-8")
    return report
