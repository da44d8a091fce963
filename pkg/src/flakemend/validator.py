"""Decide whether a patch removes the flakiness, sweep co-victims, and flag suspicious patches."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .java.lexer import JavaSyntaxError, Token
from .java.parser import parse_member
from .java.related import fields_referenced
from .java.statements import Statement, def_use, method_variables, split_statements
from .java.structure import ClassModel, MethodModel, squash
from .model import FlakinessCategory, FlakyTestCase, OutcomeKind, RunResult, SuspicionFlag, SuspicionKind, TestId
from .runner.base import Runner, WorkingCopy

DEFAULT_SHAKE_ROUNDS = 5
POLLUTERS_FIRST = "polluters-first"
VICTIM_FIRST = "victim-first"
ISOLATED = "isolated"

# catching any of these hides an assertion failure
_SWALLOWING_TYPES = frozenset({
    "Throwable", "Error", "AssertionError", "AssertionFailedError", "ComparisonFailure",
    "MultipleFailuresError", "AssertionFailedException",
})
_NON_VARIABLES = frozenset({"true", "false", "null", "this", "new", "super", "class", "instanceof"})


@dataclass(frozen=True)
class ValidationOutcome:
    kind: OutcomeKind
    per_order_results: dict[str, RunResult] = field(default_factory=dict)
    shaken_results: tuple[RunResult, ...] = ()
    co_victims_fixed: tuple[TestId, ...] = ()
    warnings: tuple[SuspicionFlag, ...] = ()
    polluter_results: dict[TestId, RunResult] = field(default_factory=dict)
    failure: RunResult | None = None  # the result that drives the next prompt

    @property
    def runner_time_s(self) -> float:
        results = list(self.per_order_results.values()) + list(self.shaken_results)
        return sum(r.duration_s for r in results) + sum(r.duration_s for r in self.polluter_results.values())


def validate(case: FlakyTestCase, copy: WorkingCopy, runner: Runner, rounds: int = DEFAULT_SHAKE_ROUNDS,
             seed: int = 0) -> ValidationOutcome:
    """Run the category's acceptance protocol on an already-compiling working copy."""
    if case.category is FlakinessCategory.OD_VICTIM:
        forward = runner.run_ordered(copy, [*case.polluters, case.test])
        backward = runner.run_ordered(copy, [case.test, *case.polluters])
        orders = {POLLUTERS_FIRST: forward[case.test], VICTIM_FIRST: backward[case.test]}
        polluters = {p: forward[p] for p in case.polluters}
        failure = next((r for r in orders.values() if not r.passed), None)
        if failure is None:
            broken = next(((p, r) for p, r in polluters.items() if not r.passed), None)
            if broken is not None:
                p, r = broken
                failure = replace(r, failure_message=f"polluter {p} now fails: {r.failure_message}")
        kind = OutcomeKind.TEST_PASS if failure is None else OutcomeKind.TEST_FAILURE
        return ValidationOutcome(kind, orders, polluter_results=polluters, failure=failure)
    if case.category is FlakinessCategory.OD_BRITTLE:
        result = runner.run_isolated(copy, case.test)
        return ValidationOutcome(result.kind if result.kind is not OutcomeKind.COMPILATION_ERROR
                                 else OutcomeKind.TEST_FAILURE, {ISOLATED: result},
                                 failure=None if result.passed else result)
    shaken = tuple(runner.run_shaken(copy, case.test, rounds, seed))
    failure = next((r for r in shaken if not r.passed), None)
    kind = OutcomeKind.TEST_PASS if failure is None and len(shaken) >= rounds else OutcomeKind.TEST_FAILURE
    if failure is None and kind is OutcomeKind.TEST_FAILURE:
        failure = RunResult(OutcomeKind.TEST_FAILURE, failure_message=f"only {len(shaken)} of {rounds} shaken rounds ran")
    return ValidationOutcome(kind, shaken_results=shaken, failure=failure)


def covictim_sweep(case: FlakyTestCase, copy: WorkingCopy, runner: Runner) -> list[TestId]:
    """Co-victims that now pass after the same polluters."""
    fixed = []
    for w in case.co_victims:
        if runner.run_ordered(copy, [*case.polluters, w])[w].passed:
            fixed.append(w)
    return fixed


# -- overfitting guard ------------------------------------------------------------------


@dataclass(frozen=True)
class OverfitWarning:
    test: TestId
    field: str  # "Class.field"

    def __str__(self) -> str:
        return f"OVERFIT_RISK: {self.test} also references shared field {self.field}"


def shared_fields_of(case: FlakyTestCase, models: Mapping[str, ClassModel]) -> set[tuple[str, str]]:
    """(class fqn, field) pairs referenced by the victim and by at least one polluter."""
    def refs(t: TestId) -> set[tuple[str, str]]:
        m = models.get(t.class_fqn)
        method = m.method(t.method) if m else None
        if method is None:
            return set()
        out = {(m.fqn, f) for f in fields_referenced(m, method)}
        out |= _static_refs(m, method, models)
        return out

    victim = refs(case.test)
    polluted = set().union(*(refs(p) for p in case.polluters)) if case.polluters else set()
    return victim & polluted


def _static_refs(model: ClassModel, method: MethodModel, models: Mapping[str, ClassModel]) -> set[tuple[str, str]]:
    """``Other.field`` references to fields of other known classes."""
    if method.body_offset is None:
        return set()
    by_simple = {m.name: m for m in models.values()}
    toks = model.tokens_between(method.start + method.body_offset, method.end)
    out = set()
    for i in range(len(toks) - 2):
        a, dot, b = toks[i], toks[i + 1], toks[i + 2]
        if a.kind == "ident" and dot.is_op(".") and b.kind == "ident" and a.text in by_simple:
            owner = by_simple[a.text]
            if owner.fqn != model.fqn and owner.field_named(b.text) is not None:
                out.add((owner.fqn, b.text))
    return out


def overfit_guard(suite_models: Iterable[ClassModel], shared_fields: Iterable[tuple[str, str]],
                  exclude: Iterable[TestId] = ()) -> list[OverfitWarning]:
    """Other tests touching the shared state.  Warnings annotate reports; they never block."""
    shared = set(shared_fields)
    if not shared:
        return []
    models = list(suite_models)
    by_fqn = {m.fqn: m for m in models}
    skip = {str(t) for t in exclude}
    out = []
    for model in models:
        for method in model.test_methods:
            test = TestId(model.fqn, method.name)
            if str(test) in skip:
                continue
            refs = {(model.fqn, f) for f in fields_referenced(model, method)} | _static_refs(model, method, by_fqn)
            for owner, name in sorted(refs & shared):
                out.append(OverfitWarning(test, f"{owner.rsplit('.', 1)[-1]}.{name}"))
    return out


# -- suspicious patches -------------------------------------------------------------------


@dataclass(frozen=True)
class _Assertion:
    statement: Statement
    call_count: int
    args: tuple[tuple[Token, ...], ...]  # argument token lists of the outermost assertion call
    name: str

    @property
    def text(self) -> str:
        return squash(self.statement.text)


@dataclass(frozen=True)
class _Body:
    model: ClassModel
    method: MethodModel
    statements: tuple[Statement, ...]
    assertions: tuple[_Assertion, ...]
    swallowing_ranges: tuple[tuple[int, int], ...]  # offsets of try bodies with a swallowing catch


def _is_assert_call(toks: Sequence[Token], i: int) -> bool:
    t = toks[i]
    if t.kind != "ident" or i + 1 >= len(toks) or not toks[i + 1].is_op("("):
        return False
    return t.text.startswith("assert") or t.text == "fail"


def _close(toks: Sequence[Token], open_i: int) -> int:
    depth = 0
    for j in range(open_i, len(toks)):
        if toks[j].is_op("(", "[", "{"):
            depth += 1
        elif toks[j].is_op(")", "]", "}"):
            depth -= 1
            if depth == 0:
                return j
    return len(toks) - 1


def _split_args(toks: Sequence[Token], open_i: int) -> tuple[tuple[Token, ...], ...]:
    close = _close(toks, open_i)
    args, cur, depth = [], [], 0
    for t in toks[open_i + 1:close]:
        if t.is_op("(", "[", "{"):
            depth += 1
        elif t.is_op(")", "]", "}"):
            depth -= 1
        if t.is_op(",") and depth == 0:
            args.append(tuple(cur))
            cur = []
        else:
            cur.append(t)
    if cur:
        args.append(tuple(cur))
    return tuple(args)


def _assertion_of(stmt: Statement) -> _Assertion | None:
    toks = stmt.tokens
    if toks and toks[0].is_word("assert"):
        end = next((i for i, t in enumerate(toks) if t.is_op(":", ";")), len(toks))
        return _Assertion(stmt, 1, (tuple(toks[1:end]),), "assert")
    calls = [i for i in range(len(toks)) if _is_assert_call(toks, i)]
    if not calls:
        return None
    first = calls[0]
    return _Assertion(stmt, len(calls), _split_args(toks, first + 1), toks[first].text)


def _swallowing_tries(toks: Sequence[Token]) -> list[tuple[int, int]]:
    ranges = []
    for i, t in enumerate(toks):
        if not t.is_word("try"):
            continue
        j = i + 1
        if j < len(toks) and toks[j].is_op("("):
            j = _close(toks, j) + 1
        if j >= len(toks) or not toks[j].is_op("{"):
            continue
        body_end = _close(toks, j)
        k = body_end + 1
        swallows = False
        while k < len(toks) and toks[k].is_word("catch"):
            paren_close = _close(toks, k + 1)
            types = {x.text for x in toks[k + 2:paren_close] if x.kind == "ident"}
            block_close = _close(toks, paren_close + 1)
            block = toks[paren_close + 2:block_close]
            rethrows = any(x.is_word("throw") for x in block) or any(
                _is_assert_call(block, n) and block[n].text == "fail" for n in range(len(block)))
            if types & _SWALLOWING_TYPES and not rethrows:
                swallows = True
            k = block_close + 1
        if swallows:
            ranges.append((toks[j].start, toks[body_end].end))
    return ranges


def _body(source: str) -> _Body | None:
    try:
        model = parse_member(source)
    except JavaSyntaxError:
        return None
    members = list(model.methods) + list(model.constructors)
    if len(members) != 1 or members[0].body_offset is None:
        return None
    method = members[0]
    statements = tuple(split_statements(model, method))
    assertions = tuple(a for a in (_assertion_of(s) for s in statements) if a is not None)
    toks = model.tokens_between(method.start + method.body_offset, method.end)
    return _Body(model, method, statements, assertions, tuple(_swallowing_tries(toks)))


def _idents(tokens: Sequence[Token]) -> tuple[set[str], set[str]]:
    """(variables, called names) mentioned in a token run."""
    variables, calls = set(), set()
    for i, t in enumerate(tokens):
        if t.kind != "ident" or t.text in _NON_VARIABLES:
            continue
        prev = tokens[i - 1] if i else None
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if nxt is not None and nxt.is_op("("):
            calls.add(t.text)
        elif prev is None or not prev.is_op("."):
            if t.text[:1].islower() or t.text.isupper():
                variables.add(t.text)
    return variables, calls


def _subjects(a: _Assertion) -> set[str]:
    variables, calls = set(), set()
    for arg in a.args:
        v, c = _idents(arg)
        variables |= v
        calls |= c
    calls = {c for c in calls if not c.startswith("assert")}
    return variables or calls


def _slice_names(body: _Body, seed_stmt: Statement, names: set[str]) -> set[str]:
    """``names`` plus everything that flows into them earlier in the method."""
    variables = method_variables(body.model, body.method, list(body.statements))
    out = set(names)
    frontier = set(names) & variables
    for stmt in reversed([s for s in body.statements if s.start < seed_stmt.start]):
        du = def_use(stmt, variables)
        if du.defs & frontier:
            v, c = _idents(stmt.tokens)
            out |= v | c
            frontier |= du.uses
    return out


def _is_constant_true(a: _Assertion) -> bool:
    args = [squash("".join(t.text + " " for t in arg)).strip() for arg in a.args]
    if a.name == "assert":
        return bool(args) and args[0] == "true"
    if a.name == "assertTrue":
        return bool(args) and args[-1] == "true"
    if a.name == "assertFalse":
        return bool(args) and args[-1] == "false"
    if a.name in ("assertEquals", "assertSame", "assertArrayEquals", "assertIterableEquals", "assertLinesMatch"):
        if len(args) == 2:
            return args[0] == args[1]
        # (message, expected, actual) or (expected, actual, delta)
        return len(args) >= 3 and (args[0] == args[1] or args[1] == args[2])
    if a.name in ("assertNotNull",):
        return bool(args) and (args[-1].startswith("new ") or args[-1].startswith('"'))
    if a.name in ("assertNull",):
        return bool(args) and args[-1] == "null"
    if a.name == "assertThat":
        text = a.text
        m = re.match(r"assertThat\((.*?)\)\.(isTrue|isFalse|isEqualTo|isSameAs)\((.*)\);?$", text)
        if m:
            subject, verb, expected = m.group(1), m.group(2), m.group(3)
            return (verb == "isTrue" and subject == "true") or (verb == "isFalse" and subject == "false") or \
                (verb in ("isEqualTo", "isSameAs") and subject == expected)
        if len(args) >= 2:
            return bool(re.fullmatch(r"(true|false),(is|equalTo)\(\1\)|(\w+),(is|equalTo)\(\3\)",
                                     ",".join(args[-2:]).replace(" ", "")))
    return False


def _inside(ranges: Iterable[tuple[int, int]], stmt: Statement) -> bool:
    return any(a <= stmt.start and stmt.end <= b for a, b in ranges)


def suspicious_patch_flags(original_method: str, patched_method: str) -> list[SuspicionFlag]:
    """Warnings for patches that may pass by silencing the test rather than fixing it."""
    orig, patched = _body(original_method), _body(patched_method)
    if orig is None or patched is None:
        return []
    name = patched.method.name
    flags: list[SuspicionFlag] = []

    orig_texts = Counter(a.text for a in orig.assertions)
    patched_texts = Counter(a.text for a in patched.assertions)
    removed = [a for a in orig.assertions if (orig_texts - patched_texts)[a.text] > 0]
    added = [a for a in patched.assertions if (patched_texts - orig_texts)[a.text] > 0]
    orig_calls = sum(a.call_count for a in orig.assertions)
    patched_calls = sum(a.call_count for a in patched.assertions)
    if patched_calls < orig_calls:
        reach = [_slice_names(patched, a.statement, _subjects(a) | _idents(a.statement.tokens)[0]) for a in added]
        for gone in removed:
            subj = _subjects(gone)
            if not any(subj & r for r in reach):
                flags.append(SuspicionFlag(SuspicionKind.ASSERTION_DELETED, gone.statement.text.strip(), name))
                break

    wrapped_before = {a.text for a in orig.assertions if _inside(orig.swallowing_ranges, a.statement)}
    for a in patched.assertions:
        if a.text in orig_texts and a.text not in wrapped_before and _inside(patched.swallowing_ranges, a.statement):
            flags.append(SuspicionFlag(SuspicionKind.TRY_CATCH_WRAPPED, a.statement.text.strip(), name))
            break

    trivial_before = {a.text for a in orig.assertions if _is_constant_true(a)}
    for a in added:
        if a.text not in trivial_before and _is_constant_true(a):
            flags.append(SuspicionFlag(SuspicionKind.TRIVIALLY_TRUE_ASSERTION, a.statement.text.strip(), name))
            break
    return flags
