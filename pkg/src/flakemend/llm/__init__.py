"""Provider-agnostic completions and response parsing."""

from .extract import UnparseableResponse, extract_patch
from .providers import (Completion, FixtureMiss, HttpProvider, Provider, ProviderConfig, ProviderError, ProviderKind,
                        RecordingProvider, ReplayProvider, ScriptedProvider, complete, make_provider, prompt_digest)

__all__ = [
    "Completion", "FixtureMiss", "HttpProvider", "Provider", "ProviderConfig", "ProviderError", "ProviderKind",
    "RecordingProvider", "ReplayProvider", "ScriptedProvider", "UnparseableResponse", "complete", "extract_patch",
    "make_provider", "prompt_digest",
]
