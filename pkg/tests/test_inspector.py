from __future__ import annotations

import pytest

from flakemend.inspector import NotReproduced, extract_context, reproduce
from flakemend.java.unordered import SuspectReason
from flakemend.model import FlakinessCategory, FlakyTestCase, OutcomeKind, RunResult, StackFrame, TestId
from flakemend.runner.base import WorkingCopy
from flakemend.runner.scripted import ScriptedRunner
from support import CAMPAIGN_PROJECT, campaign_model, campaign_runner

SETTINGS = "src/test/java/org/example/config/SettingsTest.java"
JSON = "src/test/java/org/example/json/JsonMapConverterTest.java"
BOOT = "src/test/java/org/example/env/BootstrapEnvironmentTest.java"
ENV_PKG = "org.example.env"


@pytest.fixture
def copy(tmp_path):
    wc = WorkingCopy.create(CAMPAIGN_PROJECT, scratch_parent=tmp_path)
    yield wc
    wc.discard()


def _victim(cls, victim, polluter):
    return FlakyTestCase(TestId(cls, victim), FlakinessCategory.OD_VICTIM, (TestId(cls, polluter),))


def test_reproduce_victim_runs_polluters_first(copy):
    runner = campaign_runner()
    case = _victim("org.example.config.SettingsTest", "testDefaultMode", "testLoadFastProfile")
    result = reproduce(case, runner, copy)
    assert result.failure_message == "expected:<[safe]> but was:<[fast]>"
    assert runner.history[-1] == ("ordered", (str(case.polluters[0]), str(case.test)))


def test_reproduce_brittle_runs_isolated(copy):
    runner = campaign_runner()
    case = FlakyTestCase(TestId("org.example.plugin.RegistryTest", "testLookupJson"), FlakinessCategory.OD_BRITTLE)
    assert reproduce(case, runner, copy).kind is OutcomeKind.TEST_FAILURE
    assert runner.history[-1] == ("ordered", (str(case.test),))


def test_reproduce_id_uses_first_failing_round(copy):
    runner = campaign_runner()
    case = FlakyTestCase(TestId("org.example.json.JsonMapConverterTest", "convertToDatabaseColumn_twoElement"),
                         FlakinessCategory.ID)
    assert reproduce(case, runner, copy, rounds=5, seed=7).kind is OutcomeKind.TEST_FAILURE
    assert runner.history[-1] == ("shaken", str(case.test), 5, 7)


def test_not_reproduced(copy):
    case = FlakyTestCase(TestId("org.example.util.UuidTest", "testUuidLength"), FlakinessCategory.ID)
    with pytest.raises(NotReproduced):
        reproduce(case, campaign_runner(), copy)


def test_id_context_points_at_the_hashmap(copy):
    model = campaign_model(JSON)
    case = FlakyTestCase(TestId(model.fqn, "convertToDatabaseColumn_twoElement"), FlakinessCategory.ID)
    result = reproduce(case, campaign_runner(), copy)
    ctx = extract_context(case, result, {model.fqn: model})
    assert ctx.error_message == result.failure_message
    assert ctx.failing_assertion.line == 32
    assert ctx.failing_assertion.statement.startswith("assertEquals(")
    assert [(s.line, s.reason) for s in ctx.suspects] == [(28, SuspectReason.UNORDERED_COLLECTION_CTOR)]
    assert not ctx.degraded and ctx.warnings == ()


def test_victim_context_has_shared_state(copy):
    model = campaign_model(BOOT)
    case = _victim(model.fqn, "assertWithoutEventTraceRdbConfiguration", "assertGetEventTraceRdbConfigurationMap")
    result = reproduce(case, campaign_runner(), copy)
    ctx = extract_context(case, result, {model.fqn: model})
    assert ctx.error_message == "java.lang.AssertionError"
    assert ctx.failing_assertion.line == 28
    assert ctx.failing_assertion.method == "assertWithoutEventTraceRdbConfiguration"
    assert ctx.suspects == ()
    assert any(s.startswith("shared field bootstrapEnvironment") for s in ctx.shared_state)
    assert {u.role for u in ctx.related_code.units} >= {"flaky", "polluter", "field"}


def test_frames_outside_the_test_degrade_context():
    model = campaign_model(JSON)
    case = FlakyTestCase(TestId(model.fqn, "convertToDatabaseColumn_twoElement"), FlakinessCategory.ID)
    result = RunResult(OutcomeKind.TEST_FAILURE, failure_message="boom",
                       stack_frames=(StackFrame("java.util.HashMap", "get", "HashMap.java", 10),))
    ctx = extract_context(case, result, {model.fqn: model})
    assert ctx.degraded and ctx.failing_assertion is None
    assert ctx.warnings and ctx.warnings[0].startswith("CONTEXT_DEGRADED")
    assert ctx.suspects == ()


def test_helper_frame_in_same_package_is_used():
    test_model = campaign_model(BOOT)
    helper_src = ("package org.example.env;\n\nclass Checks {\n    static void check(boolean b) {\n"
                  "        org.junit.Assert.assertTrue(b);\n    }\n}\n")
    from flakemend.java.parser import parse_test_class
    helper = parse_test_class(helper_src)
    case = FlakyTestCase(TestId(test_model.fqn, "assertWithoutEventTraceRdbConfiguration"), FlakinessCategory.ID)
    result = RunResult(OutcomeKind.TEST_FAILURE, failure_message="x",
                       stack_frames=(StackFrame(f"{ENV_PKG}.Checks", "check", "Checks.java", 5),))
    ctx = extract_context(case, result, {test_model.fqn: test_model, helper.fqn: helper})
    assert ctx.failing_assertion.class_fqn == helper.fqn and ctx.failing_assertion.line == 5


def test_context_needs_a_failure():
    model = campaign_model(JSON)
    case = FlakyTestCase(TestId(model.fqn, "convertToDatabaseColumn_twoElement"), FlakinessCategory.ID)
    with pytest.raises(ValueError):
        extract_context(case, RunResult(OutcomeKind.TEST_PASS), {model.fqn: model})


def test_inner_class_frames_map_to_outer(copy):
    model = campaign_model(SETTINGS)
    case = _victim(model.fqn, "testDefaultMode", "testLoadFastProfile")
    result = RunResult(OutcomeKind.TEST_FAILURE, failure_message="m",
                       stack_frames=(StackFrame(model.fqn + "$1", "run", "SettingsTest.java", 17),))
    ctx = extract_context(case, result, {model.fqn: model})
    assert ctx.failing_assertion.line == 17


def test_scripted_runner_in_isolation_passes_victim(copy):
    runner = ScriptedRunner({"tests": ["a.T#v", "a.T#p"], "runs": [
        {"sequence": ["a.T#p", "a.T#v"], "results": {"a.T#v": {"fail": "x"}}}]})
    case = FlakyTestCase(TestId("a.T", "v"), FlakinessCategory.OD_BRITTLE)
    with pytest.raises(NotReproduced):
        reproduce(case, runner, copy)
