"""Parse JUnit/Surefire XML reports and Java stack traces."""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Iterable

from ..model import OutcomeKind, RunResult, StackFrame, TestId

_FRAME = re.compile(r"^\s*at\s+(?P<cls>[\w$.]+)\.(?P<method>[\w$<>]+)\((?P<loc>[^)]*)\)")


def parse_frame(line: str) -> StackFrame | None:
    m = _FRAME.match(line) or _FRAME.match("at " + line.strip())
    if not m:
        return None
    loc = m.group("loc")
    file, lineno = None, None
    if ":" in loc:
        file, _, num = loc.rpartition(":")
        lineno = int(num) if num.isdigit() else None
    elif loc.endswith(".java"):
        file = loc
    return StackFrame(m.group("cls"), m.group("method"), file, lineno)


def parse_stack_trace(text: str) -> tuple[StackFrame, ...]:
    """Frames of the outermost exception in innermost-first order (``Caused by`` sections skipped)."""
    frames = []
    for line in text.splitlines():
        if line.lstrip().startswith("Caused by:"):
            break
        f = parse_frame(line) if line.lstrip().startswith("at ") else None
        if f is not None:
            frames.append(f)
    return tuple(frames)


def failure_message_of(text: str) -> str:
    """Exception message from the first line(s) of a trace: ``java.lang.AssertionError: msg``."""
    head = []
    for line in text.splitlines():
        if line.lstrip().startswith("at "):
            break
        head.append(line)
    msg = "\n".join(head).strip()
    m = re.match(r"^[\w$.]+(?:Error|Exception|Failure|Throwable)(?::\s?(.*))?$", msg, re.S)
    if m:
        return (m.group(1) or "").strip() or msg
    return msg


def results_from_xml(xml_text: str) -> dict[TestId, RunResult]:
    """Per-test results from one Surefire ``TEST-*.xml`` document."""
    root = ET.fromstring(xml_text)
    cases = root.iter("testcase")
    out = {}
    for case in cases:
        cls, name = case.get("classname", ""), case.get("name", "")
        # parameterized/dynamic names look like "name[1]" or "name()"
        method = re.split(r"[\[(]", name, 1)[0]
        if not cls or not method:
            continue
        tid = TestId(cls, method)
        duration = float(case.get("time", "0") or 0)
        problem = case.find("failure")
        if problem is None:
            problem = case.find("error")
        if problem is None:
            if case.find("skipped") is not None:
                continue
            out[tid] = RunResult(OutcomeKind.TEST_PASS, duration_s=duration)
            continue
        trace = problem.text or ""
        message = problem.get("message")
        if message is None:
            message = failure_message_of(trace)
        out[tid] = RunResult(OutcomeKind.TEST_FAILURE, failure_message=message,
                             stack_frames=parse_stack_trace(trace), duration_s=duration)
    return out


def results_from_dir(report_dir: Path) -> dict[TestId, RunResult]:
    out: dict[TestId, RunResult] = {}
    for path in sorted(Path(report_dir).glob("TEST-*.xml")):
        out.update(results_from_xml(path.read_text(encoding="utf-8")))
    return out


def render_trace(message: str, frames: Iterable[StackFrame], exception: str = "java.lang.AssertionError") -> str:
    lines = [f"{exception}: {message}"]
    for f in frames:
        loc = f"{f.file}:{f.line}" if f.file and f.line else (f.file or "Unknown Source")
        lines.append(f"\tat {f.class_fqn}.{f.method}({loc})")
    return "\n".join(lines)
