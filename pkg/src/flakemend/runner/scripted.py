"""Deterministic backend whose behavior is defined by a JSON script table.

Table layout::

    {
      "tests": ["pkg.ATest#m", ...],            # anything else is TEST_NOT_FOUND
      "durations": {"compile": 0.5, "test": 0.1},
      "compile": [                               # first matching rule wins; default compiles
        {"when": [{"file": "src/...java", "contains": "REGEX"}],
         "file": "src/...java",                  # file used by @@line_of:REGEX@@
         "output": "raw javac or maven text, may use @@root@@ and @@line_of:REGEX@@"}
      ],
      "runs": [                                  # result per test: first matching rule naming it
        {"sequence": ["pkg.ATest#p", "pkg.ATest#v"], "match": "exact" | "subsequence",
         "when": [...], "results": {"pkg.ATest#v": {"fail": "message", "trace": ["pkg.ATest.v(ATest.java:12)"]}}}
      ],
      "shaken": [
        {"test": "pkg.ATest#m", "when": [...], "failing_rounds": [2], "failing_seeds": [],
         "fail": "message", "trace": [...]}
      ]
    }

``when`` conditions test the working copy's current files: ``contains`` and
``lacks`` take regular expressions.  Round ``i`` of a shaken run uses seed
``seed + i - 1``.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from ..model import OutcomeKind, RunResult, TestId
from .base import BackendKind, InfraError, Runner, RunnerBackend, TestNotFound, WorkingCopy
from .diagnostics import parse_compiler_output
from .reports import parse_frame

_PLACEHOLDER = re.compile(r"@@(root|line_of:(.*?))@@")


class ScriptError(ValueError):
    pass


def _is_subsequence(needle: Sequence[str], hay: Sequence[str]) -> bool:
    it = iter(hay)
    return all(any(x == y for y in it) for x in needle)


@dataclass
class ScriptedRunner(Runner):
    table: dict[str, Any]
    history: list[tuple] = field(default_factory=list)
    backend = RunnerBackend(BackendKind.SCRIPTED)

    def __post_init__(self) -> None:
        self._lock = threading.Lock()
        for key in self.table:
            if key not in ("tests", "durations", "compile", "runs", "shaken", "comment"):
                raise ScriptError(f"unknown script table key {key!r}")
        self.known = {str(TestId.parse(t)) for t in self.table.get("tests", [])}

    @classmethod
    def load(cls, path: str | Path) -> "ScriptedRunner":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    # -- helpers ---------------------------------------------------------------

    def _duration(self, what: str) -> float:
        return float(self.table.get("durations", {}).get(what, 0.0))

    @staticmethod
    def _holds(copy: WorkingCopy, conditions: list[dict]) -> bool:
        for cond in conditions or []:
            text = copy.read_text(cond["file"]) or ""
            if "contains" in cond and not re.search(cond["contains"], text, re.M):
                return False
            if "lacks" in cond and re.search(cond["lacks"], text, re.M):
                return False
        return True

    def _check_known(self, tests: Sequence[TestId]) -> None:
        for t in tests:
            if str(t) not in self.known:
                raise TestNotFound(str(t))

    def _failure(self, rule: dict) -> RunResult:
        frames = tuple(f for f in (parse_frame(line) for line in rule.get("trace", [])) if f is not None)
        return RunResult(OutcomeKind.TEST_FAILURE, failure_message=rule["fail"], stack_frames=frames,
                         duration_s=self._duration("test"))

    def _expand(self, copy: WorkingCopy, rule: dict) -> str:
        def sub(m: re.Match) -> str:
            if m.group(1) == "root":
                return str(copy.root)
            text = copy.read_text(rule["file"]) or ""
            for n, line in enumerate(text.splitlines(), 1):
                if re.search(m.group(2), line):
                    return str(n)
            raise ScriptError(f"@@line_of:{m.group(2)}@@ matched nothing in {rule['file']}")

        return _PLACEHOLDER.sub(sub, rule["output"])

    # -- operations ------------------------------------------------------------

    def compile(self, copy: WorkingCopy) -> RunResult:
        with self._lock:
            self.history.append(("compile",))
        for rule in self.table.get("compile", []):
            if self._holds(copy, rule.get("when", [])):
                if rule.get("infra"):
                    raise InfraError(rule["infra"])
                diags = parse_compiler_output(self._expand(copy, rule), roots=[copy.root])
                if not diags:
                    raise ScriptError("compile rule output contains no diagnostics")
                return RunResult(OutcomeKind.COMPILATION_ERROR, diagnostics=diags,
                                 duration_s=self._duration("compile"))
        return RunResult(OutcomeKind.TEST_PASS, duration_s=self._duration("compile"))

    def run_ordered(self, copy: WorkingCopy, sequence: Sequence[TestId]) -> dict[TestId, RunResult]:
        if not sequence:
            raise ValueError("empty test sequence")
        self._check_known(sequence)
        names = [str(t) for t in sequence]
        with self._lock:
            self.history.append(("ordered", tuple(names)))
        matching = []
        for rule in self.table.get("runs", []):
            wanted = [str(TestId.parse(s)) for s in rule.get("sequence", [])]
            mode = rule.get("match", "exact")
            if mode == "exact":
                ok = wanted == names
            elif mode == "subsequence":
                ok = _is_subsequence(wanted, names)
            else:
                raise ScriptError(f"unknown match mode {mode!r}")
            if ok and self._holds(copy, rule.get("when", [])):
                matching.append(rule)
        out = {}
        for t, name in zip(sequence, names):
            result = RunResult(OutcomeKind.TEST_PASS, duration_s=self._duration("test"))
            for rule in matching:
                expected = {str(TestId.parse(k)): v for k, v in rule.get("results", {}).items()}.get(name)
                if expected is not None:
                    if "fail" in expected:
                        result = self._failure(expected)
                    break
            out[t] = result
        return out

    def run_shaken(self, copy: WorkingCopy, test: TestId, rounds: int, seed: int) -> list[RunResult]:
        if rounds < 1:
            raise ValueError("rounds must be at least 1")
        self._check_known([test])
        with self._lock:
            self.history.append(("shaken", str(test), rounds, seed))
        rule = next(
            (r for r in self.table.get("shaken", [])
             if str(TestId.parse(r["test"])) == str(test) and self._holds(copy, r.get("when", []))),
            None,
        )
        out = []
        for i in range(1, rounds + 1):
            fails = rule is not None and (
                i in rule.get("failing_rounds", []) or (seed + i - 1) in rule.get("failing_seeds", [])
            )
            if fails:
                out.append(self._failure(rule))
            else:
                out.append(RunResult(OutcomeKind.TEST_PASS, duration_s=self._duration("test")))
        return out
