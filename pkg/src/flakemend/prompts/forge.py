"""Render category-specific repair prompts and fold feedback into them."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Sequence

from ..inspector import ContextBundle
from ..java.related import CodeUnit, RelatedCode
from ..java.unordered import SuspectReason
from ..model import CompilationDiagnostic, FlakinessCategory, FlakyTestCase, IterationRecord, OutcomeKind, TestId

DEFAULT_CHAR_BUDGET = 24_000
DEFAULT_MAX_DIAGNOSTICS = 5
MAX_MESSAGE_CHARS = 2_000
RULE_COUNT = 6

SECTION_TITLES = ("Instruction", "Problem Definition", "Related Code", "Failure Location", "Rules")

_TEMPLATE_FILES = {
    FlakinessCategory.OD_VICTIM: "od_victim.txt",
    FlakinessCategory.OD_BRITTLE: "od_brittle.txt",
    FlakinessCategory.ID: "id.txt",
}
_ROLE_LABEL = {"polluter": "Polluter test", "field": "Field", "helper": "Helper method"}
_FLAKY_LABEL = {
    FlakinessCategory.OD_VICTIM: "Victim test",
    FlakinessCategory.OD_BRITTLE: "Brittle test",
    FlakinessCategory.ID: "Flaky test",
}
_REASON_TEXT = {
    SuspectReason.UNORDERED_COLLECTION_CTOR: "creates an unordered collection",
    SuspectReason.UNORDERED_API_CALL: "calls an API with unspecified order",
    SuspectReason.STRINGIFIED_UNORDERED_VALUE: "turns an unordered value into a string",
}


class PromptOverflow(ValueError):
    """Even after trimming, the prompt does not fit in the character budget."""


def _sections(text: str) -> dict[str, str]:
    out: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        if line.startswith("##"):
            continue
        m = re.fullmatch(r"\[(\w+)\]", line.strip())
        if m:
            current = m.group(1)
            out[current] = []
        elif current is not None:
            out[current].append(line)
    return {k: "\n".join(v).strip("\n") for k, v in out.items()}


@lru_cache(maxsize=None)
def load_template(name: str) -> dict[str, str]:
    return _sections(resources.files("flakemend").joinpath(f"prompts/templates/{name}").read_text(encoding="utf-8"))


def rules() -> tuple[str, ...]:
    table = load_template("rules.txt")
    out = tuple(table[f"rule{i}"] for i in range(1, RULE_COUNT + 1))
    return out


@dataclass(frozen=True)
class Prompt:
    instruction: str
    problem_definition: str
    related_code: str
    failure_location: str
    rules: tuple[str, ...]
    category: FlakinessCategory
    iteration: int = 1
    char_budget: int = DEFAULT_CHAR_BUDGET

    def __post_init__(self) -> None:
        if len(self.rules) != RULE_COUNT:
            raise ValueError(f"a prompt carries exactly {RULE_COUNT} rules")
        if not 1 <= self.iteration <= 5:
            raise ValueError("iteration outside 1..5")
        if self.char_budget <= 0:
            raise ValueError("char budget must be positive")

    def render(self) -> str:
        rules = "\n".join(f"{i}. {r}" for i, r in enumerate(self.rules, 1))
        bodies = (self.instruction, self.problem_definition, self.related_code, self.failure_location, rules)
        return "\n\n".join(f"### {title}\n{body}" for title, body in zip(SECTION_TITLES, bodies)) + "\n"

    def __len__(self) -> int:
        return len(self.render())


# -- section renderers ---------------------------------------------------------


def _short(t: TestId) -> str:
    return t.method


def problem_fields(case: FlakyTestCase) -> dict[str, str]:
    return {
        "test": str(case.test),
        "test_short": _short(case.test),
        "polluters": ", ".join(str(p) for p in case.polluters),
        "polluters_short": ", ".join(_short(p) for p in case.polluters),
    }


def render_unit(unit: CodeUnit, category: FlakinessCategory) -> str:
    label = _FLAKY_LABEL[category] if unit.role == "flaky" else _ROLE_LABEL[unit.role]
    cls = unit.class_fqn.rsplit(".", 1)[-1]
    return f"```java\n// {label}: {cls}#{unit.name}\n// File: {unit.file}\n{unit.source.rstrip()}\n```"


def render_related_code(related: RelatedCode, category: FlakinessCategory) -> str:
    return "\n\n".join(render_unit(u, category) for u in related.units)


def _one_line(text: str, limit: int = MAX_MESSAGE_CHARS) -> str:
    text = text.strip()
    if len(text) <= limit:
        return text
    head = limit // 2
    return f"{text[:head]} ...[{len(text) - limit} characters trimmed]... {text[-(limit - head):]}"


def render_failure_location(context: ContextBundle) -> str:
    lines = [f"Error: {_one_line(context.error_message) or '(no message)'}"]
    a = context.failing_assertion
    if a is None:
        lines.append("Failing assertion: unknown, no stack frame points into the test class")
    else:
        lines.append(f"Failing assertion (line {a.line} of {a.method}): {a.statement}")
    for s in context.suspects:
        lines.append(f"Possible flakiness source (line {s.line}, {_REASON_TEXT[s.reason]}): {s.text}")
    for entry in context.shared_state:
        lines.append(f"Possible shared state: {entry}")
    return "\n".join(lines)


def diagnostic_line(d: CompilationDiagnostic) -> str:
    detail = d.symbol or d.message
    return f"Compilation error: {d.file}:{d.line} {d.kind.value} {detail}"


def select_diagnostics(diagnostics: Sequence[CompilationDiagnostic], k: int) -> list[CompilationDiagnostic]:
    """At most ``k`` diagnostics, distinct by (file, kind, symbol-or-message), in source order."""
    seen = set()
    out = []
    for d in sorted(diagnostics, key=lambda d: (d.file, d.line)):
        ident = (d.file, d.kind, d.symbol or d.message)
        if ident in seen:
            continue
        seen.add(ident)
        out.append(d)
        if len(out) == k:
            break
    return out


def render_compile_feedback(diagnostics: Sequence[CompilationDiagnostic], k: int) -> str:
    chosen = select_diagnostics(diagnostics, k)
    head = f"The previous patch does not compile ({len(diagnostics)} diagnostics, {len(chosen)} shown):"
    return "\n".join([head, *(diagnostic_line(d) for d in chosen)])


# -- budget ----------------------------------------------------------------------


def _drop_order(related: RelatedCode) -> list[CodeUnit]:
    """Units in the order they are sacrificed: deepest helpers first, then fields, then polluters."""
    helpers = sorted(related.by_role("helper"), key=lambda u: (-u.depth, -related.units.index(u)))
    fields = list(reversed(related.by_role("field")))
    polluters = list(reversed(related.by_role("polluter")))
    return helpers + fields + polluters


def fit_to_budget(prompt: Prompt, related: RelatedCode) -> Prompt:
    """Drop whole related-code units until the prompt fits, or raise :class:`PromptOverflow`."""
    current = prompt
    for unit in _drop_order(related):
        if len(current) <= current.char_budget:
            return current
        related = related.without(unit)
        current = replace(current, related_code=render_related_code(related, prompt.category))
    if len(current) > current.char_budget:
        raise PromptOverflow(f"prompt needs {len(current)} characters, budget is {current.char_budget}")
    return current


# -- public operations -------------------------------------------------------------


def build_prompt(case: FlakyTestCase, context: ContextBundle, iteration: int = 1,
                 char_budget: int = DEFAULT_CHAR_BUDGET) -> Prompt:
    table = load_template(_TEMPLATE_FILES[case.category])
    fields = problem_fields(case)
    prompt = Prompt(
        instruction=Template(table["instruction"]).substitute(fields),
        problem_definition=Template(table["problem_definition"]).substitute(fields),
        related_code=render_related_code(context.related_code, case.category),
        failure_location=render_failure_location(context),
        rules=rules(),
        category=case.category,
        iteration=iteration,
        char_budget=char_budget,
    )
    return fit_to_budget(prompt, context.related_code)


@dataclass(frozen=True)
class FeedbackContext:
    related_code: RelatedCode  # the latest patched code
    diagnostics: tuple[CompilationDiagnostic, ...] = ()
    context: ContextBundle | None = None  # fresh CI items for test failures
    max_diagnostics: int = DEFAULT_MAX_DIAGNOSTICS


def augment_with_feedback(previous: Prompt, record: IterationRecord, new_context: FeedbackContext) -> Prompt:
    if record.outcome is OutcomeKind.TEST_PASS:
        raise ValueError("nothing to feed back after a passing iteration")
    if record.outcome is OutcomeKind.COMPILATION_ERROR:
        if not new_context.diagnostics:
            raise ValueError("compilation feedback needs diagnostics")
        failure = render_compile_feedback(new_context.diagnostics, new_context.max_diagnostics)
    else:
        if new_context.context is None:
            raise ValueError("test-failure feedback needs a fresh context bundle")
        failure = render_failure_location(new_context.context)
    prompt = replace(
        previous,
        related_code=render_related_code(new_context.related_code, previous.category),
        failure_location=failure,
        iteration=previous.iteration + 1,
    )
    return fit_to_budget(prompt, new_context.related_code)
