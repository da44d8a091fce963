"""Reproduce a flaky failure and distill it into the three context items."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .java.related import RelatedCode, extract_related_code, fields_referenced
from .java.statements import NoEnclosingMethod, locate_statement
from .java.structure import ClassModel
from .java.unordered import SuspectStatement, UnorderedApis, find_unordered_suspects
from .model import FlakinessCategory, FlakyTestCase, OutcomeKind, RunResult, StackFrame
from .runner.base import Runner, WorkingCopy

DEFAULT_SHAKE_ROUNDS = 5


class NotReproduced(RuntimeError):
    """The reported flakiness did not show up under the category's protocol."""


@dataclass(frozen=True)
class FailingAssertion:
    line: int
    statement: str
    method: str
    class_fqn: str


@dataclass(frozen=True)
class ContextBundle:
    error_message: str  # verbatim failure message
    failing_assertion: FailingAssertion | None  # located from the stack trace
    suspects: tuple[SuspectStatement, ...]  # ID tests: unordered-value statements
    related_code: RelatedCode
    shared_state: tuple[str, ...] = ()  # OD victims: fields and helpers
    warnings: tuple[str, ...] = ()

    @property
    def degraded(self) -> bool:
        return self.failing_assertion is None


def reproduce(case: FlakyTestCase, runner: Runner, copy: WorkingCopy,
              rounds: int = DEFAULT_SHAKE_ROUNDS, seed: int = 0) -> RunResult:
    """Run the category's reproduction protocol and return the failing result."""
    if case.category is FlakinessCategory.OD_VICTIM:
        result = runner.run_ordered(copy, [*case.polluters, case.test])[case.test]
    elif case.category is FlakinessCategory.OD_BRITTLE:
        result = runner.run_isolated(copy, case.test)
    else:
        shaken = runner.run_shaken(copy, case.test, rounds, seed)
        result = next((r for r in shaken if r.kind is OutcomeKind.TEST_FAILURE), shaken[-1])
    if result.kind is not OutcomeKind.TEST_FAILURE:
        raise NotReproduced(f"{case.test} did not fail under the {case.category.value} protocol")
    return result


def _outer(fqn: str) -> str:
    return fqn.split("$", 1)[0]


def _locate(frames: tuple[StackFrame, ...], candidates: list[ClassModel]) -> FailingAssertion | None:
    for model in candidates:
        for frame in frames:  # innermost first
            if _outer(frame.class_fqn) != model.fqn or frame.line is None:
                continue
            try:
                located = locate_statement(model, frame.class_fqn, frame.line)
            except NoEnclosingMethod:
                continue
            if located.is_empty:
                continue
            return FailingAssertion(located.line, located.text, located.method.name, model.fqn)
    return None


def _shared_state(case: FlakyTestCase, models: Mapping[str, ClassModel], related: RelatedCode) -> tuple[str, ...]:
    test_model = models[case.test.class_fqn]
    victim = test_model.method(case.test.method)
    used = fields_referenced(test_model, victim) if victim else set()
    for p in case.polluters:
        pm = models.get(p.class_fqn)
        pol = pm.method(p.method) if pm else None
        if pol is not None and pm.fqn == test_model.fqn:
            used |= fields_referenced(pm, pol)
    lines = []
    for unit in related.by_role("field"):
        tag = "shared field" if unit.name in used and unit.class_fqn == test_model.fqn else "field"
        lines.append(f"{tag} {unit.name}: {' '.join(unit.source.split())}")
    for unit in related.by_role("helper"):
        lines.append(f"helper method {unit.name}() in {unit.class_fqn.rsplit('.', 1)[-1]}")
    return tuple(lines)


def extract_context(case: FlakyTestCase, result: RunResult, models: Mapping[str, ClassModel],
                    apis: UnorderedApis | None = None) -> ContextBundle:
    """Error message verbatim, failing assertion from the stack trace, extra context by category."""
    if result.kind is not OutcomeKind.TEST_FAILURE:
        raise ValueError("context extraction needs a failing result")
    model = models[case.test.class_fqn]
    related = extract_related_code(model, case, dict(models))
    same_package = [m for fqn, m in models.items() if fqn != model.fqn and m.package == model.package]
    assertion = _locate(result.stack_frames, [model]) or _locate(result.stack_frames, same_package)
    warnings = []
    if assertion is None:
        warnings.append("CONTEXT_DEGRADED: no stack frame points into the test class; "
                        "prompting with the error message only")

    suspects: tuple[SuspectStatement, ...] = ()
    shared: tuple[str, ...] = ()
    if case.category is FlakinessCategory.ID and assertion is not None:
        owner = models[assertion.class_fqn]
        method = owner.method(assertion.method)
        if method is not None:
            suspects = tuple(find_unordered_suspects(owner, method, assertion.line, apis))
    elif case.category is FlakinessCategory.OD_VICTIM:
        shared = _shared_state(case, models, related)
    return ContextBundle(result.failure_message or "", assertion, suspects, related, shared, tuple(warnings))
