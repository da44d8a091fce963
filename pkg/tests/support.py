"""Helpers shared by the test modules."""

from __future__ import annotations

import json
import re
from pathlib import Path

from campaign_data import RESPONSES
from flakemend.java.parser import parse_test_class
from flakemend.llm.providers import ProviderConfig, ProviderKind, RecordingProvider, ReplayProvider, ScriptedProvider
from flakemend.orchestrator import CampaignConfig, run_campaign
from flakemend.runner.scripted import ScriptedRunner

TESTS = Path(__file__).resolve().parent
FIXTURES = TESTS / "fixtures"
JAVA = FIXTURES / "java"
CAMPAIGN = FIXTURES / "campaign"
CAMPAIGN_PROJECT = CAMPAIGN / "project"
CAMPAIGN_INPUT = CAMPAIGN / "input.csv"
CAMPAIGN_TABLE = CAMPAIGN / "runner-table.json"
CAMPAIGN_REPLAY = CAMPAIGN / "replay.json"
GOLDENS = FIXTURES / "goldens"


def java(name: str) -> str:
    return (JAVA / name).read_text(encoding="utf-8")


def model_of(name: str):
    return parse_test_class(java(name))


def campaign_model(rel: str):
    return parse_test_class((CAMPAIGN_PROJECT / rel).read_text(encoding="utf-8"))


def campaign_runner() -> ScriptedRunner:
    return ScriptedRunner.load(CAMPAIGN_TABLE)


def _problem_section(prompt: str) -> str:
    m = re.search(r"### Problem Definition\n(.*?)\n### ", prompt, re.S)
    return m.group(1) if m else prompt


def campaign_responder():
    """Prompt -> canned response, advancing per test on every call."""
    seen: dict[str, int] = {}

    def respond(prompt: str) -> str:
        section = _problem_section(prompt)
        for test, answers in RESPONSES.items():
            if test in section:
                n = seen.get(test, 0)
                seen[test] = n + 1
                return answers[min(n, len(answers) - 1)]
        raise AssertionError(f"no canned response for prompt:\n{section}")

    return respond


def campaign_config(out: Path, provider: ProviderConfig | None = None, **overrides) -> CampaignConfig:
    provider = provider or ProviderConfig(ProviderKind.REPLAY, fixture_path=str(CAMPAIGN_REPLAY))
    return CampaignConfig(project_dir=CAMPAIGN, input_path=CAMPAIGN_INPUT, provider=provider, out_dir=out,
                          **overrides)


def record_campaign_fixture(fixture_path: Path, out: Path):
    """Run the campaign with the canned responder and record every exchange for replay."""
    fixture_path.unlink(missing_ok=True)
    scripted = ScriptedProvider(campaign_responder())
    recorder = RecordingProvider(scripted, fixture_path)
    report = run_campaign(campaign_config(out), campaign_runner(), recorder)
    return report, scripted


def replay_campaign(out: Path, **overrides):
    return run_campaign(campaign_config(out, **overrides), campaign_runner(), ReplayProvider(CAMPAIGN_REPLAY))


def load_json(path: Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
