"""Working copies and the runner interface shared by every backend."""

from __future__ import annotations

import difflib
import shutil
import tempfile
import threading
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Sequence

from ..model import RunResult, TestId

_COPY_IGNORE = shutil.ignore_patterns("target", ".nondex", ".flakemend")


class InfraError(RuntimeError):
    """The build tool itself failed (missing, timed out, crashed) -- not the code under test."""


class TestNotFound(LookupError):
    __test__ = False


class ConcurrentAccess(RuntimeError):
    """A second mutator tried to use a working copy that is already busy."""


class BackendKind(str, Enum):
    MAVEN = "MAVEN"
    SCRIPTED = "SCRIPTED"


@dataclass(frozen=True)
class RunnerBackend:
    kind: BackendKind
    supports_ordered_runs: bool = True
    supports_shaker: bool = True


@dataclass(frozen=True)
class Timeouts:
    compile_s: float = 600.0
    test_s: float = 300.0
    shaker_s: float = 900.0


class WorkingCopy:
    """A scratch clone of a project where patches are trialed.

    Files written through :meth:`write_text` are tracked so the copy can be
    diffed against, or reset to, its pristine state.
    """

    def __init__(self, root: str | Path, module_path: str = ".", origin: str | Path | None = None):
        self.root = Path(root).resolve()
        self.module_path = module_path
        self.origin = Path(origin).resolve() if origin is not None else None
        if self.origin is not None and (self.root == self.origin or self.origin in self.root.parents):
            raise ValueError("a working copy must live outside the original checkout")
        if not self.module_root.resolve().is_relative_to(self.root):
            raise ValueError(f"module path {module_path!r} escapes the project root")
        self._originals: dict[str, str | None] = {}
        self._lock = threading.Lock()

    @classmethod
    def create(cls, project_dir: str | Path, module_path: str = ".", scratch_parent: str | Path | None = None
               ) -> "WorkingCopy":
        project_dir = Path(project_dir).resolve()
        if not project_dir.is_dir():
            raise FileNotFoundError(f"project directory {project_dir} does not exist")
        if scratch_parent is not None:
            Path(scratch_parent).mkdir(parents=True, exist_ok=True)
        scratch = Path(tempfile.mkdtemp(prefix="flakemend-", dir=scratch_parent))
        dest = scratch / project_dir.name
        shutil.copytree(project_dir, dest, ignore=_COPY_IGNORE, symlinks=True)
        return cls(dest, module_path, origin=project_dir)

    @property
    def module_root(self) -> Path:
        return self.root / self.module_path

    @property
    def dirty(self) -> bool:
        return any(self.read_text(rel) != text for rel, text in self._originals.items())

    @contextmanager
    def exclusive(self) -> Iterator["WorkingCopy"]:
        if not self._lock.acquire(blocking=False):
            raise ConcurrentAccess(f"working copy {self.root} is already in use")
        try:
            yield self
        finally:
            self._lock.release()

    def path(self, rel: str) -> Path:
        p = (self.root / rel).resolve()
        if not p.is_relative_to(self.root):
            raise ValueError(f"{rel!r} escapes the working copy")
        return p

    def rel(self, path: str | Path) -> str:
        return Path(path).resolve().relative_to(self.root).as_posix()

    def read_text(self, rel: str) -> str | None:
        p = self.path(rel)
        return p.read_text(encoding="utf-8") if p.exists() else None

    def write_text(self, rel: str, text: str) -> None:
        if rel not in self._originals:
            self._originals[rel] = self.read_text(rel)
        p = self.path(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")

    def touched(self) -> list[str]:
        return sorted(rel for rel, text in self._originals.items() if self.read_text(rel) != text)

    def diff(self) -> str:
        """Unified diff of every touched file against its pristine content (``git apply`` compatible)."""
        chunks = []
        for rel in self.touched():
            before = self._originals[rel]
            after = self.read_text(rel)
            chunks.append(unified_diff(rel, before, after))
        return "".join(chunks)

    def reset(self) -> None:
        for rel, text in self._originals.items():
            p = self.path(rel)
            if text is None:
                p.unlink(missing_ok=True)
            else:
                p.write_text(text, encoding="utf-8")
        self._originals.clear()

    def discard(self) -> None:
        target = self.root.parent if self.root.parent.name.startswith("flakemend-") else self.root
        shutil.rmtree(target, ignore_errors=True)


def unified_diff(rel: str, before: str | None, after: str | None) -> str:
    a = (before or "").splitlines(keepends=True)
    b = (after or "").splitlines(keepends=True)
    for lines in (a, b):
        if lines and not lines[-1].endswith("\n"):
            lines[-1] += "\n\\ No newline at end of file\n"
    src = "/dev/null" if before is None else f"a/{rel}"
    dst = "/dev/null" if after is None else f"b/{rel}"
    head = f"diff --git a/{rel} b/{rel}\n"
    if before is None:
        head += "new file mode 100644\n"
    elif after is None:
        head += "deleted file mode 100644\n"
    return head + "".join(difflib.unified_diff(a, b, src, dst))


class Runner(ABC):
    backend: RunnerBackend

    @abstractmethod
    def compile(self, copy: WorkingCopy) -> RunResult:
        """Compile main and test sources; TEST_PASS means the build compiled."""

    @abstractmethod
    def run_ordered(self, copy: WorkingCopy, sequence: Sequence[TestId]) -> dict[TestId, RunResult]:
        """Run ``sequence`` in exactly that order inside one runtime instance."""

    def run_isolated(self, copy: WorkingCopy, test: TestId) -> RunResult:
        return self.run_ordered(copy, [test])[test]

    @abstractmethod
    def run_shaken(self, copy: WorkingCopy, test: TestId, rounds: int, seed: int) -> list[RunResult]:
        """Run ``test`` under nondeterminism shaking for ``rounds`` seeds."""
