import json

import httpx
import pytest

from storydeck.errors import AuthFailed, EmptyScript, TimedOut, Unavailable
from storydeck.gateway import (
    CompletionParams,
    Gateway,
    HttpBackend,
    Transcript,
    complete,
    gateway_from_flag,
    mock_load,
)


class TestMockBackend:
    def test_index_rules_answer_in_order(self):
        backend = mock_load(
            [{"index": 0, "response": "r1"}, {"index": 1, "response": "r2"}]
        )
        params = CompletionParams(deadline=1.0)
        assert backend.send("a", params) == "r1"
        assert backend.send("b", params) == "r2"

    def test_substring_rule(self):
        backend = mock_load([{"substring": "meta relation", "response": "payload"}])
        assert backend.send("please find a meta relation", CompletionParams()) == "payload"

    def test_unmatched_prompt_unavailable(self):
        backend = mock_load([{"substring": "zzz", "response": "x"}])
        with pytest.raises(Unavailable):
            backend.send("nothing matches", CompletionParams())

    def test_empty_script_rejected(self):
        with pytest.raises(EmptyScript):
            mock_load([])

    def test_rule_without_matcher_rejected(self):
        with pytest.raises(EmptyScript):
            mock_load([{"response": "x"}])

    def test_object_response_serialized(self):
        backend = mock_load([{"index": 0, "response": {"a": 1}}])
        assert json.loads(backend.send("p", CompletionParams())) == {"a": 1}


class TestComplete:
    def test_transcript_records_every_call(self):
        backend = mock_load([{"substring": "p", "response": "out"}])
        transcript = Transcript()
        params = CompletionParams(deadline=1.0)
        complete("p1", params, backend, transcript)
        complete("p2", params, backend, transcript)
        with pytest.raises(Unavailable):
            complete("xx", params, backend, transcript)
        assert len(transcript.entries) == 3
        assert transcript.entries[0].response == "out"
        assert transcript.entries[2].response == "<error: Unavailable>"

    def test_deadline_exceeded(self):
        backend = mock_load([{"index": 0, "response": "late", "delay": 0.05}])
        with pytest.raises(TimedOut):
            complete("p", CompletionParams(deadline=0.01), backend, Transcript())

    def test_jsonl_export(self):
        backend = mock_load([{"substring": "p", "response": "out"}])
        transcript = Transcript()
        complete("p", CompletionParams(deadline=1.0), backend, transcript)
        lines = transcript.to_jsonl().strip().split("\n")
        entry = json.loads(lines[0])
        assert entry["prompt"] == "p" and entry["backend"] == "mock"


class TestCompletionParams:
    def test_temperature_defaults_to_zero(self):
        assert CompletionParams().temperature == 0.0

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            CompletionParams(temperature=-1)

    def test_nonpositive_deadline_rejected(self):
        with pytest.raises(ValueError):
            CompletionParams(deadline=0)


def http_backend_with(handler) -> HttpBackend:
    transport = httpx.MockTransport(handler)
    return HttpBackend(
        "http://llm.test/v1",
        api_key="k",
        model_name="test-model",
        client=httpx.Client(transport=transport),
    )


class TestHttpBackend:
    def test_requires_api_key(self):
        with pytest.raises(AuthFailed):
            HttpBackend("http://llm.test", api_key=None)

    def test_request_serialization_includes_temperature_zero(self):
        captured = {}

        def handler(request):
            captured.update(json.loads(request.content))
            return httpx.Response(
                200, json={"choices": [{"message": {"content": "hi"}}]}
            )

        backend = http_backend_with(handler)
        assert backend.send("prompt", CompletionParams()) == "hi"
        assert captured["temperature"] == 0.0
        assert captured["model"] == "test-model"
        assert captured["messages"] == [{"role": "user", "content": "prompt"}]

    def test_401_maps_to_auth_failed(self):
        backend = http_backend_with(lambda r: httpx.Response(401, json={}))
        with pytest.raises(AuthFailed):
            backend.send("p", CompletionParams())

    def test_500_maps_to_unavailable(self):
        backend = http_backend_with(lambda r: httpx.Response(500, json={}))
        with pytest.raises(Unavailable):
            backend.send("p", CompletionParams())

    def test_timeout_maps_to_timed_out(self):
        def handler(request):
            raise httpx.ConnectTimeout("too slow")

        backend = http_backend_with(handler)
        with pytest.raises(TimedOut):
            backend.send("p", CompletionParams())


class TestGatewayFromFlag:
    def test_none_means_offline(self):
        assert gateway_from_flag(None) is None

    def test_mock_flag_loads_script(self, tmp_path):
        script = tmp_path / "s.json"
        script.write_text(json.dumps([{"index": 0, "response": "ok"}]))
        gw = gateway_from_flag(f"mock:{script}")
        assert gw.complete("anything") == "ok"
        assert gw.params.deadline == 1.0

    def test_http_flag_without_key_fails_auth(self, monkeypatch):
        monkeypatch.delenv("LLM_API_KEY", raising=False)
        with pytest.raises(AuthFailed):
            gateway_from_flag("http://llm.test/v1")

    def test_http_flag_with_key(self, monkeypatch):
        monkeypatch.setenv("LLM_API_KEY", "secret")
        monkeypatch.setenv("LLM_MODEL", "m1")
        gw = gateway_from_flag("http://llm.test/v1")
        assert gw.backend.name == "http:http://llm.test/v1"
        assert gw.params.model_name == "m1"

    def test_unknown_scheme_rejected(self):
        with pytest.raises(EmptyScript):
            gateway_from_flag("grpc:foo")


class TestDeterminism:
    def test_same_script_same_answers(self):
        script = [
            {"index": 0, "response": "a"},
            {"substring": "x", "response": "b"},
        ]
        prompts = ["first", "x marks", "x again"]
        runs = []
        for _ in range(2):
            gw = Gateway(backend=mock_load(script), params=CompletionParams(deadline=1.0))
            out = []
            for p in prompts:
                out.append(gw.complete(p))
            runs.append(out)
        assert runs[0] == runs[1] == ["a", "b", "b"]
        assert len(gw.transcript) == 3
