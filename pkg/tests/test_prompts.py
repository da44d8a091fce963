from __future__ import annotations

import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from flakemend.inspector import ContextBundle, FailingAssertion, extract_context, reproduce
from flakemend.java.related import CodeUnit, RelatedCode
from flakemend.model import (CompilationDiagnostic, DiagnosticKind, FlakinessCategory, FlakyTestCase,
                             IterationRecord, OutcomeKind, TestId)
from flakemend.prompts.forge import (RULE_COUNT, SECTION_TITLES, FeedbackContext, Prompt, PromptOverflow,
                                     augment_with_feedback, build_prompt, rules, select_diagnostics)
from flakemend.runner.base import WorkingCopy
from support import CAMPAIGN_PROJECT, GOLDENS, campaign_model, campaign_runner

CASES = {
    "od_victim": ("src/test/java/org/example/config/SettingsTest.java",
                  FlakyTestCase(TestId("org.example.config.SettingsTest", "testDefaultMode"),
                                FlakinessCategory.OD_VICTIM,
                                (TestId("org.example.config.SettingsTest", "testLoadFastProfile"),))),
    "od_brittle": ("src/test/java/org/example/plugin/RegistryTest.java",
                   FlakyTestCase(TestId("org.example.plugin.RegistryTest", "testLookupJson"),
                                 FlakinessCategory.OD_BRITTLE)),
    "id": ("src/test/java/org/example/json/JsonMapConverterTest.java",
           FlakyTestCase(TestId("org.example.json.JsonMapConverterTest", "convertToDatabaseColumn_twoElement"),
                         FlakinessCategory.ID)),
}


def _prompt_for(name, tmp_path):
    rel, case = CASES[name]
    wc = WorkingCopy.create(CAMPAIGN_PROJECT, scratch_parent=tmp_path)
    try:
        model = campaign_model(rel)
        ctx = extract_context(case, reproduce(case, campaign_runner(), wc), {model.fqn: model})
        return case, ctx, build_prompt(case, ctx)
    finally:
        wc.discard()


def _section_titles(text):
    return re.findall(r"^### (.+)$", text, re.M)


@pytest.mark.parametrize("name", sorted(CASES))
def test_matches_golden(name, tmp_path):
    _, _, prompt = _prompt_for(name, tmp_path)
    assert prompt.render() == (GOLDENS / f"{name}.txt").read_text(encoding="utf-8")


@pytest.mark.parametrize("name", sorted(CASES))
def test_five_sections_six_rules(name, tmp_path):
    case, _, prompt = _prompt_for(name, tmp_path)
    text = prompt.render()
    assert tuple(_section_titles(text)) == SECTION_TITLES
    rules_body = text.split("### Rules\n", 1)[1]
    assert re.findall(r"^(\d+)\. ", rules_body, re.M) == [str(i) for i in range(1, RULE_COUNT + 1)]
    assert str(case.test) in text.split("### Problem Definition\n", 1)[1].split("###")[0]


def test_rules_are_shared_and_mention_the_response_format():
    rs = rules()
    assert len(rs) == 6
    assert "```java METHOD" in rs[5] and "IMPORTS" in rs[5] and "BUILD_DEPS" in rs[5]
    assert "pom.xml" in rs[1]


def test_victim_prompt_names_polluter(tmp_path):
    _, _, prompt = _prompt_for("od_victim", tmp_path)
    assert "testLoadFastProfile" in prompt.problem_definition
    assert "// Polluter test: SettingsTest#testLoadFastProfile" in prompt.related_code


def test_id_prompt_lists_suspects(tmp_path):
    _, _, prompt = _prompt_for("id", tmp_path)
    assert "Possible flakiness source (line 28" in prompt.failure_location


def _diag(i, file="src/test/java/a/T.java", symbol=None):
    return CompilationDiagnostic(file, i, DiagnosticKind.MISSING_SYMBOL, symbol or f"Sym{i}",
                                 "cannot find symbol")


def test_forty_diagnostics_are_capped_at_five(tmp_path):
    case, ctx, prompt = _prompt_for("id", tmp_path)
    diags = tuple(_diag(i) for i in range(40, 0, -1))
    record = IterationRecord(1, prompt.render(), "r", (), OutcomeKind.COMPILATION_ERROR, "k")
    nxt = augment_with_feedback(prompt, record, FeedbackContext(ctx.related_code, diags))
    lines = [ln for ln in nxt.failure_location.splitlines() if ln.startswith("Compilation error:")]
    assert len(lines) == 5
    assert lines[0].endswith("MISSING_SYMBOL Sym1")
    assert "(40 diagnostics, 5 shown)" in nxt.failure_location
    assert nxt.iteration == 2
    assert tuple(_section_titles(nxt.render())) == SECTION_TITLES


@given(st.lists(st.tuples(st.integers(1, 50), st.sampled_from(["A", "B", "C"]),
                          st.sampled_from(["x/A.java", "x/B.java"])), max_size=40), st.integers(1, 8))
def test_select_diagnostics_properties(raw, k):
    diags = [_diag(line, file, sym) for line, sym, file in raw]
    chosen = select_diagnostics(diags, k)
    idents = [(d.file, d.kind, d.symbol) for d in chosen]
    assert len(chosen) <= k
    assert len(set(idents)) == len(idents)
    assert len(chosen) == min(k, len({(d.file, d.kind, d.symbol) for d in diags}))
    assert [(d.file, d.line) for d in chosen] == sorted((d.file, d.line) for d in chosen)


def test_failure_feedback_uses_fresh_context(tmp_path):
    case, ctx, prompt = _prompt_for("id", tmp_path)
    record = IterationRecord(1, prompt.render(), "r", (), OutcomeKind.TEST_FAILURE)
    fresh = ContextBundle("new message", FailingAssertion(30, "assertX();", case.test.method, case.test.class_fqn),
                          (), ctx.related_code)
    nxt = augment_with_feedback(prompt, record, FeedbackContext(ctx.related_code, context=fresh))
    assert nxt.failure_location.startswith("Error: new message\nFailing assertion (line 30")
    with pytest.raises(ValueError):
        augment_with_feedback(prompt, record, FeedbackContext(ctx.related_code))
    with pytest.raises(ValueError):
        augment_with_feedback(prompt, IterationRecord(1, "p", "r", (), OutcomeKind.TEST_PASS),
                              FeedbackContext(ctx.related_code))


def test_budget_drops_deepest_helpers_first(tmp_path):
    case, ctx, _ = _prompt_for("od_victim", tmp_path)
    fqn = case.test.class_fqn
    big = "void pad() {\n" + "    x();\n" * 200 + "}"
    units = ctx.related_code.units + (
        CodeUnit("helper", fqn, "shallow", "void shallow() { deep(); }", "f", depth=1),
        CodeUnit("helper", fqn, "deep", big, "f", depth=2),
    )
    bundle = ContextBundle(ctx.error_message, ctx.failing_assertion, (), RelatedCode(units))
    full = len(build_prompt(case, bundle, char_budget=10**6))
    fitted = build_prompt(case, bundle, char_budget=full - 100)
    assert "shallow" in fitted.related_code and "void pad()" not in fitted.related_code
    assert len(fitted) <= full - 100
    with pytest.raises(PromptOverflow):
        build_prompt(case, bundle, char_budget=200)


def test_long_messages_are_trimmed(tmp_path):
    case, ctx, _ = _prompt_for("id", tmp_path)
    bundle = ContextBundle("E" * 10_000, ctx.failing_assertion, ctx.suspects, ctx.related_code)
    prompt = build_prompt(case, bundle)
    assert "characters trimmed" in prompt.failure_location
    assert len(prompt.failure_location) < 3_000


def test_prompt_validation():
    with pytest.raises(ValueError):
        Prompt("i", "p", "r", "f", ("only one",), FlakinessCategory.ID)
    with pytest.raises(ValueError):
        Prompt("i", "p", "r", "f", rules(), FlakinessCategory.ID, iteration=6)
