from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path

import httpx
import pytest

from campaign_data import CACHE_FIX, CACHE_WRONG_API, EXPECTED_CALLS, EXPECTED_STATUS
from flakemend import cli
from flakemend.llm.providers import HttpProvider, ProviderConfig, ProviderKind, ScriptedProvider
from flakemend.model import (FlakinessCategory, FlakyTestCase, OutcomeKind, RepairStatus, TestId, decode_report)
from flakemend.orchestrator import (CampaignConfig, InputError, RetryingRunner, SessionDeps, _groups, read_input,
                                    repair_one, run_campaign, with_co_victims)
from flakemend.runner.base import InfraError, WorkingCopy
from flakemend.runner.scripted import ScriptedRunner
from flakemend.validator import validate
from support import (CAMPAIGN, CAMPAIGN_INPUT, CAMPAIGN_PROJECT, CAMPAIGN_REPLAY, CAMPAIGN_TABLE, campaign_config,
                     campaign_responder, campaign_runner, load_json, record_campaign_fixture, replay_campaign)

HEADER = "project,sha,module,test,category,polluters\n"
CACHE_ROW = "project,0000000,.,org.example.cache.CacheTest#testEmptyCache,OD-Vic,org.example.cache.WarmupTest#testWarmCache\n"
CACHE = FlakyTestCase(TestId.parse("org.example.cache.CacheTest#testEmptyCache"), FlakinessCategory.OD_VICTIM,
                      (TestId.parse("org.example.cache.WarmupTest#testWarmCache"),))


@pytest.fixture(scope="module")
def replayed(tmp_path_factory):
    out = tmp_path_factory.mktemp("replay") / "out"
    return replay_campaign(out), out


def _input(tmp_path, *rows) -> Path:
    path = tmp_path / "input.csv"
    path.write_text(HEADER + "".join(rows), encoding="utf-8")
    return path


def _single(tmp_path, responses, rows=(CACHE_ROW,), **overrides):
    provider = ScriptedProvider(responses)
    config = CampaignConfig(CAMPAIGN, _input(tmp_path, *rows), ProviderConfig(ProviderKind.REPLAY, fixture_path="x"),
                            tmp_path / "out", **overrides)
    return run_campaign(config, campaign_runner(), provider), provider


# -- the replay campaign --------------------------------------------------------------


def test_replay_statuses_and_calls(replayed):
    report, _ = replayed
    assert {r.test: r.status for r in report.rows} == EXPECTED_STATUS
    assert {r.test: r.session.llm_calls for r in report.rows if r.session} == EXPECTED_CALLS
    assert sum(EXPECTED_CALLS.values()) == 9
    assert report.exit_code == 1


def test_replay_covictims_credit_the_victim(replayed):
    report, _ = replayed
    by_test = {r.test: r for r in report.rows}
    victim = by_test["org.example.config.SettingsTest#testDefaultMode"]
    assert {str(t) for t in victim.session.co_victims_fixed} == {
        "org.example.config.SettingsTest#testDefaultLevel", "org.example.config.SettingsTest#testDefaultName"}
    for name in ("testDefaultLevel", "testDefaultName"):
        row = by_test[f"org.example.config.SettingsTest#{name}"]
        assert row.fixed_by == victim.test and row.session is None


def test_replay_writes_reports_and_summary(replayed):
    report, out = replayed
    summary = load_json(out / "campaign-summary.json")
    assert summary == json.loads(json.dumps(report.summary()))
    assert summary["totals"]["llm_calls"] == 9
    assert summary["statuses"]["FIXED"] == 7
    for row in report.rows:
        if row.session is None:
            continue
        doc = (out / row.report).read_text(encoding="utf-8")
        assert decode_report(doc).status is row.session.status
        assert (row.diff is not None) == (row.session.status is RepairStatus.FIXED)


def test_replay_diffs_apply_to_a_pristine_checkout(replayed, tmp_path):
    report, out = replayed
    for row in report.rows:
        if row.diff is None:
            continue
        pristine = tmp_path / row.test.replace("#", "_")
        shutil.copytree(CAMPAIGN_PROJECT, pristine)
        result = subprocess.run(["git", "apply", "--whitespace=nowarn", str(out / row.diff)], cwd=pristine,
                                capture_output=True, text=True)
        assert result.returncode == 0, result.stderr
        wc = WorkingCopy.create(pristine, scratch_parent=tmp_path)
        try:
            assert validate(row.session.case, wc, campaign_runner()).kind is OutcomeKind.TEST_PASS
        finally:
            wc.discard()


def test_replay_accounting(replayed):
    report, _ = replayed
    for row in report.rows:
        if row.session is None:
            continue
        s = row.session
        assert s.wall_time_s >= sum(it.runner_time_s for it in s.iterations)
        assert s.llm_tokens_in == sum(it.tokens_in for it in s.iterations)
        assert (s.llm_tokens_in > 0) == bool(s.iterations)


def test_replay_fixture_is_current(tmp_path):
    fixture = tmp_path / "replay.json"
    report, scripted = record_campaign_fixture(fixture, tmp_path / "out")
    assert load_json(fixture)["entries"] == load_json(CAMPAIGN_REPLAY)["entries"]
    assert scripted.calls == 9


def test_parallel_jobs_match_serial(replayed, tmp_path):
    serial, _ = replayed
    parallel = replay_campaign(tmp_path / "out", jobs=4)
    assert [(r.test, r.status) for r in parallel.rows] == [(r.test, r.status) for r in serial.rows]


# -- termination -------------------------------------------------------------------------


def test_identical_compile_errors_stop_at_three(tmp_path):
    report, provider = _single(tmp_path, [CACHE_WRONG_API])
    (row,) = report.rows
    session = row.session
    assert session.status is RepairStatus.EXHAUSTED_IDENTICAL_ERRORS
    assert provider.calls == 3 and session.llm_calls == 3
    assert len({it.diagnostic_key for it in session.iterations}) == 1
    assert all(it.outcome is OutcomeKind.COMPILATION_ERROR for it in session.iterations)
    assert report.exit_code == 1


def _attempt(i):
    return f'''```java METHOD testEmptyCache
@Test
public void testEmptyCache() {{
    Cache.put("attempt", "{i}");
    assertEquals(0, Cache.size());
}}
```
'''


def test_five_distinct_failures_exhaust_iterations(tmp_path):
    report, provider = _single(tmp_path, [_attempt(i) for i in range(1, 7)])
    session = report.rows[0].session
    assert session.status is RepairStatus.EXHAUSTED_ITERATIONS
    assert provider.calls == 5 and session.llm_calls == 5
    assert [it.outcome for it in session.iterations] == [OutcomeKind.TEST_FAILURE] * 5
    assert session.final_patch is None


def test_compiling_patch_breaks_the_identical_streak(tmp_path):
    responses = [CACHE_WRONG_API, CACHE_WRONG_API, _attempt(1), CACHE_WRONG_API, CACHE_WRONG_API]
    report, provider = _single(tmp_path, responses)
    assert report.rows[0].session.status is RepairStatus.EXHAUSTED_ITERATIONS
    assert provider.calls == 5


def test_recovery_after_compile_error(tmp_path):
    report, provider = _single(tmp_path, [CACHE_WRONG_API, CACHE_FIX])
    session = report.rows[0].session
    assert session.status is RepairStatus.FIXED and provider.calls == 2
    assert "Compilation error:" in session.iterations[1].prompt_text
    assert report.exit_code == 0


def test_max_iterations_override(tmp_path):
    report, provider = _single(tmp_path, [_attempt(i) for i in range(5)], max_iterations=2, identical_error_limit=2)
    assert provider.calls == 2
    assert report.rows[0].session.status is RepairStatus.EXHAUSTED_ITERATIONS


def test_unchanged_patch_is_a_failed_iteration(tmp_path):
    original = '''```java METHOD testEmptyCache
@Test
public void testEmptyCache() {
    assertEquals(0, Cache.size());
}
```
'''
    report, _ = _single(tmp_path, [original, CACHE_FIX])
    first = report.rows[0].session.iterations[0]
    assert first.outcome is OutcomeKind.TEST_FAILURE
    assert "the patch leaves every file unchanged" in first.notes


def test_unparseable_response_counts_as_compile_error(tmp_path):
    report, _ = _single(tmp_path, ["I cannot help with that.", CACHE_FIX])
    first = report.rows[0].session.iterations[0]
    assert first.outcome is OutcomeKind.COMPILATION_ERROR
    assert report.rows[0].status == "FIXED"


# -- campaign plumbing ------------------------------------------------------------------------


def test_empty_input_exits_zero(tmp_path):
    report, provider = _single(tmp_path, ["x"], rows=())
    assert report.rows == [] and report.exit_code == 0 and provider.calls == 0
    assert load_json(tmp_path / "out" / "campaign-summary.json")["totals"]["rows"] == 0


def test_infra_failure_is_retried_once_then_reported(tmp_path):
    class Flaky(ScriptedRunner):
        failures = 0

        def compile(self, copy):
            if self.failures < 1:
                self.failures += 1
                raise InfraError("maven crashed")
            return super().compile(copy)

    retrying = RetryingRunner(Flaky(load_json(CAMPAIGN_TABLE)))
    wc = WorkingCopy.create(CAMPAIGN_PROJECT, scratch_parent=tmp_path)
    try:
        assert retrying.compile(wc).passed and retrying.retries == 1
    finally:
        wc.discard()

    broken = ScriptedRunner({**load_json(CAMPAIGN_TABLE), "compile": [{"infra": "disk full"}]})
    config = CampaignConfig(CAMPAIGN, _input(tmp_path, CACHE_ROW), ProviderConfig(ProviderKind.REPLAY, fixture_path="x"),
                            tmp_path / "out")
    report = run_campaign(config, broken, ScriptedProvider(["x"]))
    assert report.rows[0].status == "INFRA_ERROR" and report.exit_code == 2


def test_repair_one_session(tmp_path):
    deps = SessionDeps(campaign_runner(), ScriptedProvider([CACHE_FIX]))
    config = campaign_config(tmp_path / "out", scratch_dir=tmp_path)
    session = repair_one(CACHE, config, deps, CAMPAIGN_PROJECT)
    assert session.status is RepairStatus.FIXED
    assert "Cache.clear();" in session.final_patch
    assert not [p for p in tmp_path.iterdir() if p.name.startswith("flakemend-")]


def test_input_validation(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n", encoding="utf-8")
    with pytest.raises(InputError):
        read_input(bad)
    rows = read_input(CAMPAIGN_INPUT)
    assert len(rows) == 11 and rows[0].number == 1


def test_row_level_errors(tmp_path):
    rows = [CACHE_ROW, "project,0,.,not-a-test,ID,\n", "project,0,.,a.B#c,WHAT,\n"]
    report, _ = _single(tmp_path, [CACHE_FIX], rows=rows)
    assert [r.status for r in report.rows] == ["FIXED", "ROW_ERROR", "ROW_ERROR"]
    assert report.exit_code == 1


def test_co_victims_and_grouping():
    p = TestId.parse("a.T#p")
    cases = [FlakyTestCase(TestId.parse(f"a.T#v{i}"), FlakinessCategory.OD_VICTIM, (p,)) for i in range(3)]
    cases.append(FlakyTestCase(TestId.parse("b.U#x"), FlakinessCategory.ID))
    enriched = with_co_victims(cases, ["proj"] * 4)
    assert [str(t) for t in enriched[0].co_victims] == ["a.T#v1", "a.T#v2"]
    assert enriched[3].co_victims == ()
    assert _groups(enriched, ["proj"] * 4) == [[0, 1, 2], [3]]
    assert _groups(enriched, ["p1", "p2", "p1", "p1"]) == [[0, 2], [1], [3]]


def test_config_validation(tmp_path):
    cfg = ProviderConfig(ProviderKind.REPLAY, fixture_path="x")
    for bad in ({"max_iterations": 6}, {"max_iterations": 0}, {"identical_error_limit": 6}, {"jobs": 0}):
        with pytest.raises(ValueError):
            CampaignConfig(CAMPAIGN, None, cfg, tmp_path, **bad)


# -- command line ----------------------------------------------------------------------------------


def _cli(tmp_path, *extra):
    return cli.main(["repair", "--project", str(CAMPAIGN), "--input", str(CAMPAIGN_INPUT), "--out",
                     str(tmp_path / "out"), "--script", str(CAMPAIGN_TABLE), *extra])


def test_cli_replay(tmp_path, capsys):
    code = _cli(tmp_path, "--provider", "replay", "--replay", str(CAMPAIGN_REPLAY))
    out = capsys.readouterr().out
    assert code == 1
    assert "FIXED_BY_COVICTIM_SWEEP" in out and "summary written to" in out
    summary = load_json(tmp_path / "out" / "campaign-summary.json")
    assert summary["provider"]["kind"] == "REPLAY" and summary["exit_code"] == 1


@pytest.mark.parametrize("args,message", [
    (["--provider", "replay"], "needs --replay"),
    (["--provider", "nope", "--providers-file", "/nonexistent.json"], "no providers file"),
])
def test_cli_config_errors(tmp_path, capsys, args, message):
    assert _cli(tmp_path, *args) == 2
    assert message in capsys.readouterr().err


def test_cli_named_provider_rejects_inline_keys(tmp_path, capsys):
    table = tmp_path / "providers.json"
    table.write_text(json.dumps({"p": {"kind": "HTTP_API", "endpoint": "https://x", "api_key": "k"}}))
    assert _cli(tmp_path, "--provider", "p", "--providers-file", str(table)) == 2
    assert "environment variable" in capsys.readouterr().err


def test_cli_record_mode(tmp_path, monkeypatch):
    fixture = tmp_path / "rec.json"
    seen = []

    def fake_make_provider(config):
        seen.append(config)
        return ScriptedProvider(campaign_responder())

    monkeypatch.setattr(cli, "make_provider", fake_make_provider)
    provider_file = tmp_path / "p.json"
    provider_file.write_text(json.dumps({"kind": "HTTP_API", "endpoint": "https://llm.invalid",
                                         "api_key_env": "FLAKEMEND_TEST_KEY"}))
    assert _cli(tmp_path, "--provider", str(provider_file), "--record", str(fixture)) == 1
    assert load_json(fixture)["entries"] == load_json(CAMPAIGN_REPLAY)["entries"]


# -- secrets ----------------------------------------------------------------------------------------

SECRET = "sk-live-DO-NOT-LEAK-4f8a9c"


def test_reports_never_contain_credentials(tmp_path, monkeypatch):
    monkeypatch.setenv("FLAKEMEND_TEST_KEY", SECRET)
    respond = campaign_responder()
    auth = []

    def handler(request: httpx.Request):
        auth.append(request.headers.get("authorization"))
        prompt = json.loads(request.content)["messages"][0]["content"]
        return httpx.Response(200, json={"choices": [{"message": {"content": respond(prompt)}}],
                                         "usage": {"prompt_tokens": 5, "completion_tokens": 3}})

    cfg = ProviderConfig(ProviderKind.HTTP_API, endpoint="https://llm.invalid", model="m",
                         api_key_env="FLAKEMEND_TEST_KEY")
    provider = HttpProvider(cfg, transport=httpx.MockTransport(handler))
    out = tmp_path / "out"
    report = run_campaign(campaign_config(out, provider=cfg, keep_workdirs=True, scratch_dir=tmp_path / "work"),
                          campaign_runner(), provider)
    assert report.exit_code == 1 and len(auth) == 9
    assert set(auth) == {f"Bearer {SECRET}"}
    files = [p for p in tmp_path.rglob("*") if p.is_file()]
    assert any(p.name == "campaign-summary.json" for p in files)
    for path in files:
        assert SECRET.encode() not in path.read_bytes(), path
    summary = load_json(out / "campaign-summary.json")
    assert summary["provider"]["kind"] == "HTTP_API" and "api_key_env" not in summary["provider"]
