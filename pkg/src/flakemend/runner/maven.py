"""Maven backend: compile with ``mvn``, run ordered sequences via a generated launcher, shake with NonDex."""

from __future__ import annotations

import os
import shutil
import subprocess
import time
from importlib import resources
from pathlib import Path
from typing import Sequence

from ..model import OutcomeKind, RunResult, TestId
from .base import BackendKind, InfraError, Runner, RunnerBackend, TestNotFound, Timeouts, WorkingCopy
from .diagnostics import parse_compiler_output
from .reports import parse_stack_trace, results_from_dir

NONDEX_PLUGIN = "edu.illinois:nondex-maven-plugin:2.1.7"
_NONDEX_HINT = (
    "NonDex could not be resolved; make sure the nondex-maven-plugin is reachable from your Maven "
    "repositories (or pre-install it with `mvn dependency:get -Dartifact=edu.illinois:nondex-maven-plugin:2.1.7`)"
)


def _unescape(field: str) -> str:
    out, i = [], 0
    while i < len(field):
        c = field[i]
        if c == "\\" and i + 1 < len(field):
            out.append({"t": "\t", "n": "\n", "r": "\r", "\\": "\\"}.get(field[i + 1], field[i + 1]))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def parse_launcher_output(text: str) -> dict[str, RunResult | None]:
    """Lines ``id\\tSTATUS\\tmessage\\ttrace\\tmillis``; NOT_FOUND maps to ``None``."""
    out: dict[str, RunResult | None] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise InfraError(f"unexpected ordered-run output line: {line!r}")
        ident, status, message, trace, millis = parts
        seconds = int(millis or 0) / 1000
        if status == "NOT_FOUND":
            out[ident] = None
        elif status == "PASS":
            out[ident] = RunResult(OutcomeKind.TEST_PASS, duration_s=seconds)
        else:
            trace = _unescape(trace)
            out[ident] = RunResult(OutcomeKind.TEST_FAILURE, failure_message=_unescape(message),
                                   stack_frames=parse_stack_trace(trace), duration_s=seconds)
    return out


class MavenRunner(Runner):
    backend = RunnerBackend(BackendKind.MAVEN)

    def __init__(self, mvn: str = "mvn", java: str = "java", javac: str = "javac",
                 timeouts: Timeouts = Timeouts(), extra_args: Sequence[str] = (), nondex_plugin: str = NONDEX_PLUGIN):
        self.mvn = mvn
        self.java = java
        self.javac = javac
        self.timeouts = timeouts
        self.extra_args = tuple(extra_args)
        self.nondex_plugin = nondex_plugin

    # -- subprocess plumbing ---------------------------------------------------

    def _exec(self, cmd: list[str], cwd: Path, timeout: float) -> subprocess.CompletedProcess:
        exe = shutil.which(cmd[0])
        if exe is None:
            raise InfraError(f"{cmd[0]} not found on PATH; install it or pass its location explicitly")
        try:
            return subprocess.run([exe, *cmd[1:]], cwd=cwd, capture_output=True, text=True, timeout=timeout,
                                  env={**os.environ, "MAVEN_OPTS": os.environ.get("MAVEN_OPTS", "")})
        except subprocess.TimeoutExpired as exc:
            raise InfraError(f"{cmd[0]} timed out after {timeout:.0f}s") from exc

    def _mvn(self, copy: WorkingCopy, args: list[str], timeout: float) -> subprocess.CompletedProcess:
        cmd = [self.mvn, "-B", *self.extra_args]
        if copy.module_path not in ("", "."):
            cmd += ["-pl", copy.module_path, "-am"]
        return self._exec(cmd + args, copy.root, timeout)

    @staticmethod
    def _tail(proc: subprocess.CompletedProcess, n: int = 30) -> str:
        return "\n".join((proc.stdout + proc.stderr).splitlines()[-n:])

    # -- operations -------------------------------------------------------------

    def compile(self, copy: WorkingCopy) -> RunResult:
        start = time.monotonic()
        proc = self._mvn(copy, ["test-compile"], self.timeouts.compile_s)
        elapsed = time.monotonic() - start
        diagnostics = parse_compiler_output(proc.stdout + "\n" + proc.stderr, roots=[copy.root])
        if diagnostics:
            return RunResult(OutcomeKind.COMPILATION_ERROR, diagnostics=diagnostics, duration_s=elapsed)
        if proc.returncode != 0:
            raise InfraError(f"mvn test-compile failed without compiler diagnostics:\n{self._tail(proc)}")
        return RunResult(OutcomeKind.TEST_PASS, duration_s=elapsed)

    def _classpath(self, copy: WorkingCopy) -> str:
        cp_file = copy.module_root / "target" / "flakemend-classpath.txt"
        proc = self._mvn(copy, ["test-compile", "dependency:build-classpath", "-Dmdep.includeScope=test",
                                f"-Dmdep.outputFile={cp_file}"], self.timeouts.compile_s)
        if proc.returncode != 0 or not cp_file.exists():
            raise InfraError(f"could not resolve the test classpath:\n{self._tail(proc)}")
        target = copy.module_root / "target"
        return os.pathsep.join([str(target / "test-classes"), str(target / "classes"),
                                cp_file.read_text(encoding="utf-8").strip()])

    def run_ordered(self, copy: WorkingCopy, sequence: Sequence[TestId]) -> dict[TestId, RunResult]:
        if not sequence:
            raise ValueError("empty test sequence")
        if len({t.module_path for t in sequence}) > 1:
            raise ValueError("ordered runs need every test in one module")
        classpath = self._classpath(copy)
        platform = "junit-platform-launcher" in classpath
        launcher = "FlakemendOrderedRun5" if platform else "FlakemendOrderedRun4"
        work = copy.module_root / "target" / "flakemend"
        work.mkdir(parents=True, exist_ok=True)
        src = resources.files("flakemend").joinpath(f"runner/java/{launcher}.java").read_text(encoding="utf-8")
        (work / f"{launcher}.java").write_text(src, encoding="utf-8")
        proc = self._exec([self.javac, "-cp", classpath, "-d", str(work), str(work / f"{launcher}.java")],
                          work, self.timeouts.compile_s)
        if proc.returncode != 0:
            raise InfraError(f"could not build the ordered-run launcher:\n{self._tail(proc)}")
        out_file = work / "results.tsv"
        out_file.unlink(missing_ok=True)
        # one JVM for the whole sequence: shared static state carries over exactly as in a suite run
        proc = self._exec([self.java, "-cp", os.pathsep.join([str(work), classpath]), launcher, str(out_file),
                           *[str(t) for t in sequence]], copy.module_root, self.timeouts.test_s * len(sequence))
        if not out_file.exists():
            raise InfraError(f"ordered run produced no results:\n{self._tail(proc)}")
        raw = parse_launcher_output(out_file.read_text(encoding="utf-8"))
        results = {}
        for t in sequence:
            r = raw.get(str(t))
            if r is None:
                raise TestNotFound(str(t))
            results[t] = r
        return results

    def run_shaken(self, copy: WorkingCopy, test: TestId, rounds: int, seed: int) -> list[RunResult]:
        if rounds < 1:
            raise ValueError("rounds must be at least 1")
        nondex_dir = copy.module_root / ".nondex"
        before = set(nondex_dir.iterdir()) if nondex_dir.exists() else set()
        proc = self._mvn(copy, [f"{self.nondex_plugin}:nondex", f"-Dtest={test.class_fqn}#{test.method}",
                                f"-DnondexRuns={rounds}", f"-DnondexSeed={seed}", "-DfailIfNoTests=false"],
                         self.timeouts.shaker_s)
        output = proc.stdout + proc.stderr
        if "No plugin found" in output or "nondex-maven-plugin" in output and "Could not resolve" in output:
            raise InfraError(_NONDEX_HINT)
        runs = sorted((d for d in nondex_dir.iterdir() if d.is_dir() and d not in before),
                      key=lambda d: d.stat().st_mtime) if nondex_dir.exists() else []
        if not runs:
            raise InfraError(f"NonDex produced no run directories:\n{self._tail(proc)}")
        results = []
        for d in runs:
            per_test = results_from_dir(d)
            r = per_test.get(TestId(test.class_fqn, test.method))
            if r is None:
                raise TestNotFound(str(test))
            results.append(r)
        return results  # clean run first, then one per shaken round
