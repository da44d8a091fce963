"""Shared domain types for repair sessions and their JSON report format."""

from __future__ import annotations

import json
import posixpath
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Sequence

REPORT_SCHEMA_VERSION = 1
REPORT_FORMAT = "flakemend-session"
MAX_ITERATIONS = 5

_FQN_RE = re.compile(r"^[A-Za-z_$][\w$]*(\.[A-Za-z_$][\w$]*)*$")


class FlakinessCategory(str, Enum):
    ID = "ID"
    OD_VICTIM = "OD_VICTIM"
    OD_BRITTLE = "OD_BRITTLE"

    @classmethod
    def parse(cls, text: str) -> "FlakinessCategory":
        """Accepts both our names and the IDoFT spellings (``OD-Vic``, ``OD-Brit``)."""
        key = text.strip().upper().replace("-", "_")
        aliases = {"OD_VIC": "OD_VICTIM", "OD_BRIT": "OD_BRITTLE", "VICTIM": "OD_VICTIM", "BRITTLE": "OD_BRITTLE"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown flakiness category {text!r}") from None


class OutcomeKind(str, Enum):
    TEST_PASS = "TEST_PASS"
    TEST_FAILURE = "TEST_FAILURE"
    COMPILATION_ERROR = "COMPILATION_ERROR"


class DiagnosticKind(str, Enum):
    MISSING_SYMBOL = "MISSING_SYMBOL"
    PACKAGE_NOT_FOUND = "PACKAGE_NOT_FOUND"
    AMBIGUOUS_REFERENCE = "AMBIGUOUS_REFERENCE"
    OTHER = "OTHER"


class RepairStatus(str, Enum):
    FIXED = "FIXED"
    EXHAUSTED_ITERATIONS = "EXHAUSTED_ITERATIONS"
    EXHAUSTED_IDENTICAL_ERRORS = "EXHAUSTED_IDENTICAL_ERRORS"
    NOT_REPRODUCED = "NOT_REPRODUCED"
    PROVIDER_ERROR = "PROVIDER_ERROR"
    INFRA_ERROR = "INFRA_ERROR"


class StitchActionKind(str, Enum):
    REVERT_DECLARATION = "REVERT_DECLARATION"
    ADD_IMPORT = "ADD_IMPORT"
    ADD_BUILD_DEP = "ADD_BUILD_DEP"
    EXCLUDE_IMPORT = "EXCLUDE_IMPORT"


class SuspicionKind(str, Enum):
    ASSERTION_DELETED = "ASSERTION_DELETED"
    TRY_CATCH_WRAPPED = "TRY_CATCH_WRAPPED"
    TRIVIALLY_TRUE_ASSERTION = "TRIVIALLY_TRUE_ASSERTION"


@dataclass(frozen=True)
class TestId:
    class_fqn: str
    method: str
    module_path: str = "."

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self) -> None:
        if not _FQN_RE.match(self.class_fqn):
            raise ValueError(f"invalid class name {self.class_fqn!r}")
        if not self.method or not re.match(r"^[A-Za-z_$][\w$]*$", self.method):
            raise ValueError(f"invalid method name {self.method!r}")
        norm = posixpath.normpath(self.module_path.replace("\\", "/") or ".")
        if norm.startswith("/") or norm == ".." or norm.startswith("../"):
            raise ValueError(f"module path {self.module_path!r} escapes the project root")
        object.__setattr__(self, "module_path", norm)

    @classmethod
    def parse(cls, text: str, module_path: str = ".") -> "TestId":
        """Parse ``pkg.Class#method`` (``pkg.Class.method`` is accepted too)."""
        text = text.strip()
        if "#" in text:
            fqn, _, method = text.partition("#")
        else:
            fqn, _, method = text.rpartition(".")
        return cls(fqn, method, module_path)

    @property
    def simple_class(self) -> str:
        return self.class_fqn.rsplit(".", 1)[-1]

    @property
    def package(self) -> str:
        return self.class_fqn.rpartition(".")[0]

    def __str__(self) -> str:
        return f"{self.class_fqn}#{self.method}"


@dataclass(frozen=True)
class FlakyTestCase:
    test: TestId
    category: FlakinessCategory
    polluters: tuple[TestId, ...] = ()
    co_victims: tuple[TestId, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "polluters", tuple(self.polluters))
        object.__setattr__(self, "co_victims", tuple(self.co_victims))
        if self.category is FlakinessCategory.OD_VICTIM and not self.polluters:
            raise ValueError(f"{self.test}: an OD victim needs at least one polluter")
        if self.category is not FlakinessCategory.OD_VICTIM and self.polluters:
            raise ValueError(f"{self.test}: polluters only apply to OD victims")
        if self.test in self.polluters:
            raise ValueError(f"{self.test} cannot pollute itself")
        if self.test in self.co_victims:
            raise ValueError(f"{self.test} cannot be its own co-victim")


@dataclass(frozen=True)
class CompilationDiagnostic:
    file: str
    line: int
    kind: DiagnosticKind
    symbol: str | None
    raw_message: str

    def __post_init__(self) -> None:
        if self.line < 1:
            raise ValueError("diagnostic line must be positive")
        if self.kind is DiagnosticKind.MISSING_SYMBOL and not self.symbol:
            raise ValueError("missing-symbol diagnostics need a symbol")
        if not self.raw_message:
            raise ValueError("diagnostic message is empty")

    @property
    def symbol_category(self) -> str | None:
        """``class``/``variable``/``method``... from javac's ``symbol:`` line."""
        m = re.search(r"symbol:\s+(?:static\s+)?(class|interface|enum|record|variable|method|constructor|package)\s",
                      self.raw_message + " ")
        return m.group(1) if m else None

    @property
    def message(self) -> str:
        return self.raw_message.splitlines()[0]


@dataclass(frozen=True)
class StackFrame:
    class_fqn: str
    method: str
    file: str | None
    line: int | None


@dataclass(frozen=True)
class RunResult:
    kind: OutcomeKind
    diagnostics: tuple[CompilationDiagnostic, ...] = ()
    failure_message: str | None = None
    stack_frames: tuple[StackFrame, ...] = ()
    duration_s: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))
        object.__setattr__(self, "stack_frames", tuple(self.stack_frames))
        if (self.kind is OutcomeKind.COMPILATION_ERROR) != bool(self.diagnostics):
            raise ValueError("COMPILATION_ERROR results carry diagnostics and nothing else does")
        if self.kind is OutcomeKind.TEST_FAILURE and self.failure_message is None:
            raise ValueError("TEST_FAILURE results need a failure message")
        if self.duration_s < 0:
            raise ValueError("negative duration")

    @property
    def passed(self) -> bool:
        return self.kind is OutcomeKind.TEST_PASS


@dataclass(frozen=True)
class StitchAction:
    kind: StitchActionKind
    detail: str
    resolved_diagnostic: CompilationDiagnostic | None = None


@dataclass(frozen=True)
class SuspicionFlag:
    kind: SuspicionKind
    evidence: str
    method: str = ""


@dataclass(frozen=True)
class IterationRecord:
    index: int
    prompt_text: str
    response_text: str
    stitch_actions: tuple[StitchAction, ...]
    outcome: OutcomeKind
    diagnostic_key: str | None = None
    tokens_in: int = 0
    tokens_out: int = 0
    runner_time_s: float = 0.0
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "stitch_actions", tuple(self.stitch_actions))
        object.__setattr__(self, "notes", tuple(self.notes))
        if not 1 <= self.index <= MAX_ITERATIONS:
            raise ValueError(f"iteration index {self.index} outside 1..{MAX_ITERATIONS}")
        if self.outcome is OutcomeKind.COMPILATION_ERROR and not self.diagnostic_key:
            raise ValueError("compilation-error iterations need a diagnostic key")
        if self.tokens_in < 0 or self.tokens_out < 0:
            raise ValueError("negative token count")


@dataclass(frozen=True)
class RepairSession:
    case: FlakyTestCase
    iterations: tuple[IterationRecord, ...]
    status: RepairStatus
    final_patch: str | None = None
    wall_time_s: float = 0.0
    llm_tokens_in: int = 0
    llm_tokens_out: int = 0
    co_victims_fixed: tuple[TestId, ...] = ()
    flags: tuple[SuspicionFlag, ...] = ()
    warnings: tuple[str, ...] = ()
    seed: int | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        for name in ("iterations", "co_victims_fixed", "flags", "warnings"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if len(self.iterations) > MAX_ITERATIONS:
            raise ValueError(f"at most {MAX_ITERATIONS} iterations per session")
        if [it.index for it in self.iterations] != list(range(1, len(self.iterations) + 1)):
            raise ValueError("iteration indices must run 1..k without gaps")
        if self.status is RepairStatus.FIXED:
            if not self.final_patch:
                raise ValueError("FIXED sessions carry the final patch")
            if not self.iterations or self.iterations[-1].outcome is not OutcomeKind.TEST_PASS:
                raise ValueError("FIXED sessions end with a passing iteration")
        if self.llm_tokens_in < 0 or self.llm_tokens_out < 0 or self.wall_time_s < 0:
            raise ValueError("negative accounting value")

    @property
    def llm_calls(self) -> int:
        return len(self.iterations)


def classify_outcome(raw: RunResult) -> OutcomeKind:
    return raw.kind


def _relative_file(path: str, roots: Sequence[str]) -> str:
    path = path.replace("\\", "/")
    for root in roots:
        root = root.replace("\\", "/").rstrip("/") + "/"
        if path.startswith(root):
            return path[len(root):]
    if path.startswith("/"):
        # unknown root: keep the module-relative tail
        for marker in ("/src/test/", "/src/main/"):
            if marker in path:
                return path[path.index(marker) + 1:]
    return path


def diagnostic_key(diagnostics: Iterable[CompilationDiagnostic], roots: Sequence[str] = ()) -> str:
    """Line-insensitive identity of a set of compiler errors.

    Two rounds with equal keys count as the same compilation error for the
    early-termination rule.
    """
    parts = set()
    for d in diagnostics:
        if d.symbol:
            what = d.symbol
        else:
            tokens = re.sub(r"^(error|warning):\s*", "", d.message.strip()).split()
            what = tokens[0] if tokens else ""
        parts.add((_relative_file(d.file, roots), d.kind.value, what))
    return ";".join("|".join(p) for p in sorted(parts))


# --- report codec -----------------------------------------------------------


class ReportError(ValueError):
    """Raised when a report document cannot be decoded; names the bad field."""

    def __init__(self, field_path: str, problem: str):
        super().__init__(f"{field_path}: {problem}")
        self.field_path = field_path


def _test_to_doc(t: TestId) -> dict[str, str]:
    return {"class": t.class_fqn, "method": t.method, "module": t.module_path}


def _diag_to_doc(d: CompilationDiagnostic) -> dict[str, Any]:
    return {"file": d.file, "line": d.line, "kind": d.kind.value, "symbol": d.symbol, "message": d.raw_message}


def encode_report(session: RepairSession) -> str:
    case = session.case
    doc = {
        "format": REPORT_FORMAT,
        "schema_version": REPORT_SCHEMA_VERSION,
        "case": {
            "test": _test_to_doc(case.test),
            "category": case.category.value,
            "polluters": [_test_to_doc(t) for t in case.polluters],
            "co_victims": [_test_to_doc(t) for t in case.co_victims],
        },
        "status": session.status.value,
        "iterations": [
            {
                "index": it.index,
                "prompt": it.prompt_text,
                "response": it.response_text,
                "stitch_actions": [
                    {
                        "kind": a.kind.value,
                        "detail": a.detail,
                        "resolved": _diag_to_doc(a.resolved_diagnostic) if a.resolved_diagnostic else None,
                    }
                    for a in it.stitch_actions
                ],
                "outcome": it.outcome.value,
                "diagnostic_key": it.diagnostic_key,
                "tokens_in": it.tokens_in,
                "tokens_out": it.tokens_out,
                "runner_time_s": it.runner_time_s,
                "notes": list(it.notes),
            }
            for it in session.iterations
        ],
        "final_patch": session.final_patch,
        "wall_time_s": session.wall_time_s,
        "llm_tokens_in": session.llm_tokens_in,
        "llm_tokens_out": session.llm_tokens_out,
        "co_victims_fixed": [_test_to_doc(t) for t in session.co_victims_fixed],
        "flags": [{"kind": f.kind.value, "evidence": f.evidence, "method": f.method} for f in session.flags],
        "warnings": list(session.warnings),
        "seed": session.seed,
        "error": session.error,
    }
    return json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=False) + "\n"


class _Reader:
    """Typed access into a decoded document that reports the failing path."""

    def __init__(self, data: Any, path: str):
        self.data = data
        self.path = path

    def _get(self, key: str, types: type | tuple[type, ...], optional: bool = False) -> Any:
        where = f"{self.path}.{key}" if self.path else key
        if not isinstance(self.data, dict):
            raise ReportError(self.path or "<root>", "expected an object")
        if key not in self.data:
            if optional:
                return None
            raise ReportError(where, "missing")
        value = self.data[key]
        if value is None and optional:
            return None
        if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
            raise ReportError(where, f"expected {types}, got bool")
        if not isinstance(value, types):
            raise ReportError(where, f"expected {types}, got {type(value).__name__}")
        return value

    def str(self, key: str, optional: bool = False) -> str | None:
        return self._get(key, str, optional)

    def int(self, key: str, optional: bool = False) -> int | None:
        return self._get(key, int, optional)

    def num(self, key: str) -> float:
        return float(self._get(key, (int, float)))

    def list(self, key: str) -> list["_Reader"]:
        items = self._get(key, list)
        return [_Reader(v, f"{self.path}.{key}[{i}]" if self.path else f"{key}[{i}]") for i, v in enumerate(items)]

    def obj(self, key: str, optional: bool = False) -> "_Reader | None":
        value = self._get(key, dict, optional)
        if value is None:
            return None
        return _Reader(value, f"{self.path}.{key}" if self.path else key)

    def enum(self, key: str, enum_type: type[Enum]) -> Any:
        raw = self.str(key)
        try:
            return enum_type(raw)
        except ValueError:
            raise ReportError(f"{self.path}.{key}" if self.path else key, f"unknown value {raw!r}") from None

    def build(self, fn, *args):
        try:
            return fn(*args)
        except ReportError:
            raise
        except (ValueError, TypeError) as exc:
            raise ReportError(self.path or "<root>", str(exc)) from None


def _test_from(r: _Reader) -> TestId:
    return r.build(TestId, r.str("class"), r.str("method"), r.str("module"))


def _diag_from(r: _Reader) -> CompilationDiagnostic:
    return r.build(
        CompilationDiagnostic,
        r.str("file"),
        r.int("line"),
        r.enum("kind", DiagnosticKind),
        r.str("symbol", optional=True),
        r.str("message"),
    )


def decode_report(document: str) -> RepairSession:
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ReportError("<document>", f"not JSON ({exc})") from None
    root = _Reader(data, "")
    if root.str("format") != REPORT_FORMAT:
        raise ReportError("format", f"expected {REPORT_FORMAT!r}")
    version = root.int("schema_version")
    if version != REPORT_SCHEMA_VERSION:
        raise ReportError("schema_version", f"unsupported version {version}")

    c = root.obj("case")
    case = c.build(
        FlakyTestCase,
        _test_from(c.obj("test")),
        c.enum("category", FlakinessCategory),
        tuple(_test_from(p) for p in c.list("polluters")),
        tuple(_test_from(p) for p in c.list("co_victims")),
    )
    iterations = []
    for it in root.list("iterations"):
        actions = []
        for a in it.list("stitch_actions"):
            resolved = a.obj("resolved", optional=True)
            actions.append(
                StitchAction(
                    a.enum("kind", StitchActionKind),
                    a.str("detail"),
                    _diag_from(resolved) if resolved is not None else None,
                )
            )
        notes = []
        for n in it.list("notes"):
            if not isinstance(n.data, str):
                raise ReportError(n.path, "expected a string")
            notes.append(n.data)
        iterations.append(
            it.build(
                IterationRecord,
                it.int("index"),
                it.str("prompt"),
                it.str("response"),
                tuple(actions),
                it.enum("outcome", OutcomeKind),
                it.str("diagnostic_key", optional=True),
                it.int("tokens_in"),
                it.int("tokens_out"),
                it.num("runner_time_s"),
                tuple(notes),
            )
        )
    flags = [
        SuspicionFlag(f.enum("kind", SuspicionKind), f.str("evidence"), f.str("method")) for f in root.list("flags")
    ]
    warnings = []
    for w in root.list("warnings"):
        if not isinstance(w.data, str):
            raise ReportError(w.path, "expected a string")
        warnings.append(w.data)
    return root.build(
        RepairSession,
        case,
        tuple(iterations),
        root.enum("status", RepairStatus),
        root.str("final_patch", optional=True),
        root.num("wall_time_s"),
        root.int("llm_tokens_in"),
        root.int("llm_tokens_out"),
        tuple(_test_from(t) for t in root.list("co_victims_fixed")),
        tuple(flags),
        tuple(warnings),
        root.int("seed", optional=True),
        root.str("error", optional=True),
    )


def report_filename(test: TestId) -> str:
    return f"{test.class_fqn}.{test.method}.session.json"
