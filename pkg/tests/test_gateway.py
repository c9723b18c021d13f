import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from eqdiscover.backends import (
    BackendConfig,
    DeadBackend,
    LiveBackend,
    MockBackend,
    RecordingBackend,
    ReplayBackend,
    complete_batch,
    prompt_sha256,
)
from eqdiscover.errors import (
    ReplayMissError,
    ScriptExhaustedError,
    TooFewParentsError,
    TransportError,
)
from eqdiscover.expressions import SymbolLibrary
from eqdiscover.extraction import extract_equations
from eqdiscover.prompts import PromptBuilder

PDE_LIB = SymbolLibrary.pde_default()
ODE_LIB = SymbolLibrary.ode_default()


class TestPrompts:
    def test_init_contains_library_and_rules(self):
        prompt = PromptBuilder(PDE_LIB).render_init_prompt(10)
        for operand in PDE_LIB.operands:
            assert operand in prompt
        assert "do not use numeric constants" in prompt
        assert "^2, ^3" in prompt

    def test_init_ode_contains_const_and_all_operators(self):
        prompt = PromptBuilder(ODE_LIB).render_init_prompt(10)
        assert "const" in prompt
        for symbol in ("+", "-", "*", "/", "^", "sin", "cos", "log", "exp"):
            assert symbol in prompt

    def test_single_expression_request(self):
        prompt = PromptBuilder(ODE_LIB).render_init_prompt(1)
        assert "exactly one equation" in prompt

    def test_rendering_deterministic(self):
        builder = PromptBuilder(PDE_LIB, task="find it")
        assert builder.render_init_prompt(5) == builder.render_init_prompt(5)

    def test_self_improve_embeds_pairs_verbatim(self):
        builder = PromptBuilder(PDE_LIB)
        pairs = [(f"u_xx + u^{k}", 0.9 - 0.1 * k) for k in range(2, 4)] + [
            ("u*u_x", 0.5), ("u_x", 0.41), ("u", 0.3)]
        prompt = builder.render_self_improve_prompt(pairs, n=10)
        for equation, score in pairs:
            assert equation in prompt
            assert f"(score {score:.4f})" in prompt

    def test_self_improve_requires_sorted_nonempty(self):
        builder = PromptBuilder(PDE_LIB)
        with pytest.raises(ValueError):
            builder.render_self_improve_prompt([], n=5)
        with pytest.raises(ValueError):
            builder.render_self_improve_prompt([("u", 0.1), ("u_x", 0.9)], n=5)

    def test_evolve_lists_parents_and_operators(self):
        builder = PromptBuilder(PDE_LIB)
        parents = [f"u^2 + u_x*{name}" for name in PDE_LIB.operands] + [
            "u*u_x", "u*u_x", "u_xx", "u_xxx"]
        prompt = builder.render_evolve_prompt(parents, n=10)
        assert "crossover" in prompt and "mutation" in prompt
        assert prompt.count("u*u_x") >= 2  # duplicates preserved

    def test_evolve_too_few_parents(self):
        with pytest.raises(TooFewParentsError):
            PromptBuilder(PDE_LIB).render_evolve_prompt(["u"], n=10)

    def test_custom_template_dir(self, tmp_path):
        (tmp_path / "init.txt").write_text("TASK=$task N=$n_text OPS=$operators\n")
        (tmp_path / "self_improve.txt").write_text("$examples\n")
        (tmp_path / "evolve.txt").write_text("$parents\n")
        builder = PromptBuilder(PDE_LIB, task="hunt", template_dir=tmp_path)
        assert builder.render_init_prompt(3) == "TASK=hunt N=exactly 3 equations OPS=+, -, *, /, ^2, ^3\n"


class TestExtraction:
    def test_numbered_lines(self):
        response = "1. u*u_x + u_xx\n2. u^2 + u_xxx"
        assert [str(e) for e in extract_equations(response, PDE_LIB)] == [
            "u*u_x + u_xx", "u^2 + u_xxx"]

    def test_fenced_block_wins_over_prose(self):
        response = "Some prose with u_xxxx inside.\n```text\nu*u_x + u_xx\nu^3\nu_x*x\n```\nafter"
        assert [str(e) for e in extract_equations(response, PDE_LIB)] == [
            "u*u_x + u_xx", "u^3", "u_x*x"]

    def test_invalid_line_logged_and_dropped(self, caplog):
        with caplog.at_level("INFO", logger="eqdiscover.extraction"):
            out = extract_equations("here is sin(sin(sin(x)))", ODE_LIB)
        assert out == []
        assert sum("nesting" in rec.message for rec in caplog.records) == 1

    def test_lhs_stripped(self):
        out = extract_equations("u_t = -u*u_x + 0.1*u_xx", PDE_LIB)
        assert [str(e) for e in out] == ["-u*u_x + u_xx"]

    def test_max_n(self):
        response = "\n".join(f"{i}. u^{2 + i % 2}" for i in range(1, 8))
        assert len(extract_equations(response, PDE_LIB, max_n=3)) == 3

    def test_never_returns_invalid(self):
        response = "```\nu^9\nsin(u)\nu*u_x\nc0 + u\n```"
        out = extract_equations(response, PDE_LIB)
        assert [str(e) for e in out] == ["u*u_x"]

    def test_empty_response(self):
        assert extract_equations("", PDE_LIB) == []

    def test_python_exponent_notation(self):
        out = extract_equations("- u**2 + u_xx", PDE_LIB)
        assert [str(e) for e in out] == ["u^2 + u_xx"]


class TestMockBackend:
    def test_passthrough_and_exhaustion(self):
        backend = MockBackend(["u*u_x + u_xx"])
        assert backend.complete("p").response == "u*u_x + u_xx"
        with pytest.raises(ScriptExhaustedError):
            backend.complete("p")

    def test_from_file(self, tmp_path):
        path = tmp_path / "script.txt"
        path.write_text("first\nline two\n---\nsecond\n")
        backend = MockBackend.from_file(path)
        assert backend.complete("a").response == "first\nline two"
        assert backend.complete("b").response == "second"


class TestReplayBackend:
    def test_record_then_replay_byte_identical(self, tmp_path):
        script = ["resp one", "resp two"]
        transcript = tmp_path / "transcript.jsonl"
        recorder = RecordingBackend(MockBackend(script), transcript,
                                    model="test-model", temperature=0.9)
        prompts = ["prompt A", "prompt B"]
        recorded = [recorder.complete(p).response for p in prompts]

        replay = ReplayBackend.from_file(transcript)
        replayed = [replay.complete(p).response for p in prompts]
        assert replayed == recorded

        for line in transcript.read_text().splitlines():
            record = json.loads(line)
            assert set(record) == {"prompt_sha256", "response", "model",
                                   "temperature", "timestamp"}
            assert record["model"] == "test-model"

    def test_fifo_for_repeated_prompts(self, tmp_path):
        records = [
            {"prompt_sha256": prompt_sha256("p"), "response": "first"},
            {"prompt_sha256": prompt_sha256("p"), "response": "second"},
        ]
        backend = ReplayBackend(records)
        assert backend.complete("p").response == "first"
        assert backend.complete("p").response == "second"

    def test_replay_miss(self):
        backend = ReplayBackend([])
        with pytest.raises(ReplayMissError):
            backend.complete("never recorded")


class _ChatHandler(BaseHTTPRequestHandler):
    calls = []
    fail_first_with = None

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).calls.append(
            {"path": self.path, "body": body,
             "auth": self.headers.get("Authorization")})
        if self.headers.get("Authorization") != "Bearer good-key":
            self._send(401, {"error": "bad key"})
            return
        if type(self).fail_first_with and len(type(self).calls) == 1:
            self._send(type(self).fail_first_with, {"error": "try again"})
            return
        self._send(200, {"choices": [{"message": {"content": "```\nu*u_x\n```"}}]})

    def _send(self, status, payload):
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def chat_server():
    _ChatHandler.calls = []
    _ChatHandler.fail_first_with = None
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ChatHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/v1"
    server.shutdown()


class TestLiveBackend:
    def _config(self, url, **kw):
        return BackendConfig(endpoint_url=url, model_name="test-model",
                             temperature=0.9, max_retries=2, timeout=5.0,
                             api_key_env="EQD_TEST_KEY", retry_backoff=0.0, **kw)

    def test_request_carries_model_temperature_and_key(self, chat_server, monkeypatch):
        monkeypatch.setenv("EQD_TEST_KEY", "good-key")
        backend = LiveBackend(self._config(chat_server))
        exchange = backend.complete("find the equation")
        assert exchange.response == "```\nu*u_x\n```"
        call = _ChatHandler.calls[0]
        assert call["path"].endswith("/chat/completions")
        assert call["body"]["model"] == "test-model"
        assert call["body"]["temperature"] == 0.9
        assert call["body"]["messages"] == [
            {"role": "user", "content": "find the equation"}]
        assert call["auth"] == "Bearer good-key"

    def test_retries_transient_failure(self, chat_server, monkeypatch):
        monkeypatch.setenv("EQD_TEST_KEY", "good-key")
        _ChatHandler.fail_first_with = 429
        backend = LiveBackend(self._config(chat_server))
        exchange = backend.complete("p")
        assert exchange.response.startswith("```")
        assert len(_ChatHandler.calls) == 2

    def test_auth_failure_carries_status(self, chat_server, monkeypatch):
        monkeypatch.setenv("EQD_TEST_KEY", "bad-key")
        backend = LiveBackend(self._config(chat_server))
        with pytest.raises(TransportError) as err:
            backend.complete("p")
        assert err.value.status == 401

    def test_missing_key_env(self, chat_server, monkeypatch):
        monkeypatch.delenv("EQD_TEST_KEY", raising=False)
        backend = LiveBackend(self._config(chat_server))
        with pytest.raises(TransportError):
            backend.complete("p")
        assert _ChatHandler.calls == []

    def test_unreachable_endpoint(self, monkeypatch):
        monkeypatch.setenv("EQD_TEST_KEY", "good-key")
        backend = LiveBackend(self._config("http://127.0.0.1:9/v1"))
        with pytest.raises(TransportError):
            backend.complete("p")


class TestBatch:
    def test_join_in_request_order(self):
        backend = MockBackend([f"resp {i}" for i in range(6)])
        exchanges = complete_batch(backend, [f"p{i}" for i in range(6)],
                                   max_concurrent=3)
        assert [e.prompt for e in exchanges] == [f"p{i}" for i in range(6)]
        assert sorted(e.response for e in exchanges) == [f"resp {i}" for i in range(6)]

    def test_dead_backend(self):
        with pytest.raises(TransportError):
            DeadBackend().complete("p")
