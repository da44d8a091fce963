from __future__ import annotations

import hashlib
import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flakemend.llm.providers import (FixtureMiss, HttpProvider, ProviderConfig, ProviderError, ProviderKind,
                                     RecordingProvider, ReplayProvider, ScriptedProvider, load_fixture,
                                     make_provider, prompt_digest, save_fixture)

SECRET = "sk-test-0123456789abcdef"


def _chat(text="hello", tin=11, tout=7):
    return {"choices": [{"message": {"role": "assistant", "content": text}}],
            "usage": {"prompt_tokens": tin, "completion_tokens": tout}}


def _http(handler, **overrides):
    cfg = ProviderConfig(ProviderKind.HTTP_API, endpoint="https://llm.invalid", model="m1",
                         api_key_env="FLAKEMEND_TEST_KEY", **overrides)
    return HttpProvider(cfg, transport=httpx.MockTransport(handler))


def test_http_request_shape_and_parsing(monkeypatch):
    monkeypatch.setenv("FLAKEMEND_TEST_KEY", SECRET)
    seen = []

    def handler(request: httpx.Request):
        seen.append(request)
        return httpx.Response(200, json=_chat("patched"))

    c = _http(handler).complete("the prompt")
    assert (c.text, c.tokens_in, c.tokens_out) == ("patched", 11, 7)
    (req,) = seen
    assert req.url.path == "/v1/chat/completions"
    assert req.headers["authorization"] == f"Bearer {SECRET}"
    body = json.loads(req.content)
    assert body == {"messages": [{"role": "user", "content": "the prompt"}], "temperature": 0.0,
                    "max_tokens": 2048, "model": "m1"}


def test_no_key_means_no_auth_header(monkeypatch):
    monkeypatch.delenv("FLAKEMEND_TEST_KEY", raising=False)
    seen = []
    _http(lambda r: seen.append(r) or httpx.Response(200, json=_chat())).complete("p")
    assert "authorization" not in seen[0].headers


@pytest.mark.parametrize("first", [
    lambda r: httpx.Response(503),
    lambda r: httpx.Response(429),
    lambda r: (_ for _ in ()).throw(httpx.ConnectError("down", request=r)),
    lambda r: (_ for _ in ()).throw(httpx.ReadTimeout("slow", request=r)),
])
def test_one_retry_on_transient_failure(first):
    calls = []

    def handler(request):
        calls.append(1)
        return first(request) if len(calls) == 1 else httpx.Response(200, json=_chat("ok"))

    assert _http(handler).complete("p").text == "ok"
    assert len(calls) == 2


def test_two_transient_failures_raise():
    calls = []
    with pytest.raises(ProviderError, match="failed twice"):
        _http(lambda r: calls.append(1) or httpx.Response(500)).complete("p")
    assert len(calls) == 2


@pytest.mark.parametrize("response", [
    httpx.Response(400, json={"error": "bad"}),
    httpx.Response(200, content=b"not json"),
    httpx.Response(200, json={"choices": []}),
])
def test_permanent_failures_do_not_retry(response):
    calls = []
    with pytest.raises(ProviderError):
        _http(lambda r: calls.append(1) or response).complete("p")
    assert len(calls) == 1


def test_custom_response_paths():
    provider = _http(lambda r: httpx.Response(200, json={"output": {"text": "x"}, "n": {"i": 3, "o": 4}}),
                     request_path="/generate", response_text_path="output.text", tokens_in_path="n.i",
                     tokens_out_path="n.o")
    c = provider.complete("p")
    assert (c.text, c.tokens_in, c.tokens_out) == ("x", 3, 4)


def test_config_never_holds_or_describes_keys(monkeypatch):
    monkeypatch.setenv("FLAKEMEND_TEST_KEY", SECRET)
    cfg = ProviderConfig(ProviderKind.HTTP_API, endpoint="https://x", api_key_env="FLAKEMEND_TEST_KEY")
    assert SECRET not in json.dumps(cfg.describe())
    assert SECRET not in repr(cfg)
    with pytest.raises(ValueError, match="environment variable"):
        ProviderConfig.from_dict({"kind": "HTTP_API", "endpoint": "https://x", "api_key": SECRET})


@pytest.mark.parametrize("raw", [
    {"kind": "REPLAY"},
    {"kind": "HTTP_API"},
    {"kind": "HTTP_API", "endpoint": "https://x", "max_output_tokens": 0},
    {"kind": "NOPE"},
])
def test_config_validation(raw):
    with pytest.raises(ValueError):
        ProviderConfig.from_dict(raw)


@given(st.text(max_size=200))
def test_digest_is_sha256_of_utf8(text):
    assert prompt_digest(text) == hashlib.sha256(text.encode("utf-8")).hexdigest()


def test_record_then_replay(tmp_path):
    fixture = tmp_path / "f.json"
    scripted = ScriptedProvider(lambda p: p.upper())
    recorder = RecordingProvider(scripted, fixture)
    for p in ["a", "b", "ünïcode"]:
        recorder.complete(p)
    replay = make_provider(ProviderConfig(ProviderKind.REPLAY, fixture_path=str(fixture)))
    assert [replay.complete(p).text for p in ["a", "b", "ünïcode"]] == ["A", "B", "ÜNÏCODE"]
    assert replay.complete("a").tokens_in == scripted.complete("a").tokens_in
    with pytest.raises(FixtureMiss) as miss:
        replay.complete("c")
    assert miss.value.digest == prompt_digest("c")


def test_fixture_file_format(tmp_path):
    path = tmp_path / "f.json"
    save_fixture(path, {"b": {"response": "2"}, "a": {"response": "1"}})
    doc = json.loads(path.read_text())
    assert doc["format"] == "flakemend-replay" and doc["version"] == 1 and doc["digest"] == "sha256"
    assert list(doc["entries"]) == ["a", "b"]
    assert load_fixture(tmp_path / "missing.json") == {}
    path.write_text(json.dumps({"format": "other"}))
    with pytest.raises(ValueError):
        load_fixture(path)


def test_recording_extends_existing_fixture(tmp_path):
    path = tmp_path / "f.json"
    RecordingProvider(ScriptedProvider(["one"]), path).complete("p1")
    RecordingProvider(ScriptedProvider(["two"]), path).complete("p2")
    assert ReplayProvider(path).complete("p1").text == "one"
    assert ReplayProvider(path).complete("p2").text == "two"


def test_scripted_queue():
    p = ScriptedProvider(["x", "y"])
    assert [p.complete(str(i)).text for i in range(3)] == ["x", "y", "y"]
    assert p.calls == 3
    with pytest.raises(ProviderError):
        ScriptedProvider([]).complete("p")
