"""Build and test execution backends."""

from .base import (BackendKind, ConcurrentAccess, InfraError, Runner, RunnerBackend, TestNotFound, Timeouts,
                   WorkingCopy)
from .diagnostics import parse_compiler_output
from .maven import MavenRunner
from .scripted import ScriptedRunner

__all__ = [
    "BackendKind", "ConcurrentAccess", "InfraError", "MavenRunner", "Runner", "RunnerBackend", "ScriptedRunner",
    "TestNotFound", "Timeouts", "WorkingCopy", "parse_compiler_output",
]
