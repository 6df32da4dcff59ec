import json
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from tabqa.llm_client import (
    ChatRequest,
    EndpointUnreachable,
    ReplayClient,
    ReplayMiss,
    ResponseTruncated,
    RoleTag,
    LiveClient,
    load_transcript,
    record_transcript,
    transcript_key,
)


def _req(text="What is the mean age?", role=RoleTag.CODE_GEN, **kw):
    return ChatRequest(system_text="sys", user_text=text, role_tag=role, **kw)


class TestChatRequest:
    def test_rejects_empty_user_text(self):
        with pytest.raises(ValueError):
            _req("")

    def test_rejects_out_of_range_temperature(self):
        with pytest.raises(ValueError):
            _req(temperature=2.5)
        with pytest.raises(ValueError):
            _req(temperature=-0.1)

    def test_defaults(self):
        r = _req()
        assert r.temperature == 0.0
        assert r.max_output_tokens >= 1


class TestTranscriptKey:
    def test_stable(self):
        assert transcript_key(RoleTag.CODE_GEN, "abc") == transcript_key(RoleTag.CODE_GEN, "abc")

    def test_role_distinguishes(self):
        assert transcript_key(RoleTag.CODE_GEN, "abc") != transcript_key(RoleTag.CODE_FIX, "abc")

    def test_system_text_excluded(self):
        client = ReplayClient({transcript_key(RoleTag.CODE_GEN, "u"): "reply"})
        a = ChatRequest(system_text="one", user_text="u", role_tag=RoleTag.CODE_GEN)
        b = ChatRequest(system_text="two", user_text="u", role_tag=RoleTag.CODE_GEN)
        assert client.complete(a).text == client.complete(b).text == "reply"


class TestReplayClient:
    def test_hit(self):
        client = ReplayClient({transcript_key(RoleTag.CODE_GEN, "q"): "result = 1"})
        resp = client.complete(_req("q"))
        assert resp.text == "result = 1"
        assert resp.backend == "Replay"
        assert resp.latency_ms == 0

    def test_miss_raises_with_key(self):
        client = ReplayClient({})
        with pytest.raises(ReplayMiss) as exc:
            client.complete(_req("q"))
        assert exc.value.key == transcript_key(RoleTag.CODE_GEN, "q")


class TestTranscriptFiles:
    def test_round_trip(self, tmp_path):
        pairs = [
            (_req("q1"), "code one"),
            (_req("q2", role=RoleTag.COLUMN_SELECT), "<columns>\nAge\n</columns>"),
        ]
        path = tmp_path / "t.jsonl"
        record_transcript(pairs, path)
        client = load_transcript(path)
        for req, text in pairs:
            assert client.complete(req).text == text

    def test_duplicate_key_last_write_wins(self, tmp_path, caplog):
        pairs = [(_req("q"), "first"), (_req("q"), "second")]
        path = tmp_path / "t.jsonl"
        with caplog.at_level("WARNING"):
            record_transcript(pairs, path)
        assert "duplicate" in caplog.text
        assert load_transcript(path).complete(_req("q")).text == "second"
        assert len(path.read_text().splitlines()) == 1


class _Handler(BaseHTTPRequestHandler):
    script = []  # list of (status, body_dict) consumed per request
    seen = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        type(self).seen.append(json.loads(self.rfile.read(length)))
        status, body = type(self).script.pop(0)
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    httpd = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    _Handler.script = []
    _Handler.seen = []
    yield f"http://127.0.0.1:{httpd.server_port}/v1/chat/completions"
    httpd.shutdown()


def _ok_body(text, finish="stop"):
    return {"choices": [{"message": {"content": text}, "finish_reason": finish}]}


class TestLiveClient:
    def test_success(self, server, monkeypatch):
        monkeypatch.setenv("TABQA_API_KEY", "sk-test")
        _Handler.script.append((200, _ok_body("result = df['Age'].mean()")))
        client = LiveClient(server, model="m1")
        resp = client.complete(_req("q", temperature=0.0))
        assert resp.text == "result = df['Age'].mean()"
        assert resp.backend == "Live"
        sent = _Handler.seen[0]
        assert sent["model"] == "m1"
        assert sent["temperature"] == 0.0
        assert [m["role"] for m in sent["messages"]] == ["system", "user"]

    def test_retries_server_errors_then_succeeds(self, server):
        _Handler.script += [(500, {}), (503, {}), (200, _ok_body("ok"))]
        client = LiveClient(server, model="m", backoff_s=(0,))
        assert client.complete(_req("q")).text == "ok"
        assert len(_Handler.seen) == 3

    def test_gives_up_after_max_retries(self, server):
        _Handler.script += [(500, {})] * 3
        client = LiveClient(server, model="m", max_retries=3, backoff_s=(0,))
        with pytest.raises(EndpointUnreachable):
            client.complete(_req("q"))
        assert len(_Handler.seen) == 3

    def test_client_error_not_retried(self, server):
        _Handler.script += [(401, {"error": "bad key"})]
        client = LiveClient(server, model="m", backoff_s=(0,))
        with pytest.raises(EndpointUnreachable):
            client.complete(_req("q"))
        assert len(_Handler.seen) == 1

    def test_truncated_reply_raises_without_retry(self, server):
        _Handler.script += [(200, _ok_body("partial", finish="length"))]
        client = LiveClient(server, model="m", backoff_s=(0,))
        with pytest.raises(ResponseTruncated):
            client.complete(_req("q", max_output_tokens=8))
        assert len(_Handler.seen) == 1

    def test_connection_refused_backs_off_then_raises(self):
        client = LiveClient(
            "http://127.0.0.1:9/v1/chat/completions",
            model="m",
            max_retries=3,
            backoff_s=(0.01,),
            timeout_s=1.0,
        )
        start = time.monotonic()
        with pytest.raises(EndpointUnreachable):
            client.complete(_req("q"))
        assert time.monotonic() - start < 5.0
