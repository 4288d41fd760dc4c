"""Backend tests: stub determinism, script files, HTTP wire format, retries."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from summbench import HttpChatBackend, HttpModelBackend, SamplingParams, StubBackend
from summbench.errors import BackendError, ValidationError


# --- sampling params -------------------------------------------------------


def test_sampling_defaults_match_protocol():
    params = SamplingParams()
    assert (params.temperature, params.top_k, params.top_p) == (1.0, 64, 0.95)
    assert params.n_samples == 1


@pytest.mark.parametrize("kwargs", [
    {"temperature": -0.1}, {"top_k": 0}, {"top_p": 0.0}, {"top_p": 1.2},
    {"n_samples": 0}])
def test_sampling_validation(kwargs):
    with pytest.raises(ValidationError):
        SamplingParams(**kwargs)


# --- stub backend ----------------------------------------------------------


def test_stub_is_deterministic_across_instances():
    a, b = StubBackend("s"), StubBackend("s")
    assert np.array_equal(a.embed(["tok", "other"]), b.embed(["tok", "other"]))
    assert a.cond_logprob("x", "y z") == b.cond_logprob("x", "y z")
    assert a.yes_no_probs("p") == b.yes_no_probs("p")
    assert a.generate("q") == b.generate("q")


def test_stub_embed_shape_fixed():
    backend = StubBackend("s", embedding_dim=8)
    assert backend.embed(["a", "b", "c"]).shape == (3, 8)


def test_stub_logprob_nonpositive_and_counted():
    total, count = StubBackend("s").cond_logprob("src", "one two three")
    assert total <= 0 and count == 3


def test_stub_rules_first_match_wins():
    backend = StubBackend("s", rules=[
        {"contains": "alpha", "response": "first"},
        {"contains": "alp", "response": "second"}])
    assert backend.generate("alpha beta") == "first"


def test_stub_script_file(tmp_path):
    script = {"identity": "scripted-1", "embedding_dim": 4,
              "rules": [{"contains": "hello", "response": "world"},
                        {"contains": "bool", "p_yes": 0.9, "p_no": 0.1}],
              "default_response": "fallback"}
    path = tmp_path / "script.json"
    path.write_text(json.dumps(script))
    backend = StubBackend.from_script(path)
    assert backend.identity == "scripted-1"
    assert backend.generate("say hello") == "world"
    assert backend.generate("anything else") == "fallback"
    assert backend.yes_no_probs("bool check") == (0.9, 0.1)
    assert backend.embed(["t"]).shape == (1, 4)


# --- HTTP backends ---------------------------------------------------------


class _Handler(BaseHTTPRequestHandler):
    fail_first = 0
    seen = []

    def do_POST(self):
        cls = type(self)
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        cls.seen.append((self.path, body))
        if cls.fail_first > 0:
            cls.fail_first -= 1
            self.send_response(500)
            self.end_headers()
            return
        if self.path == "/api/generate":
            reply = {"response": "generated text"}
        elif self.path == "/api/embed":
            reply = {"embeddings": [[1.0, 0.0]] * len(body["input"])}
        elif self.path == "/api/logprob":
            reply = {"logprob": -4.0, "token_count": 2}
        elif self.path == "/api/yesno":
            reply = {"p_yes": 0.7, "p_no": 0.3}
        else:
            self.send_response(404)
            self.end_headers()
            return
        payload = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_server():
    _Handler.fail_first = 0
    _Handler.seen = []
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}", _Handler
    server.shutdown()


def test_chat_backend_request_carries_sampling(http_server):
    endpoint, handler = http_server
    backend = HttpChatBackend(endpoint, "model-x")
    sampling = SamplingParams(temperature=0.2, top_k=10, top_p=0.5, seed=7)
    assert backend.complete("hi", sampling) == "generated text"
    path, body = handler.seen[-1]
    assert path == "/api/generate"
    assert body["model"] == "model-x"
    assert body["options"] == {"temperature": 0.2, "top_k": 10, "top_p": 0.5,
                               "seed": 7}


def test_model_backend_endpoints(http_server):
    endpoint, _ = http_server
    backend = HttpModelBackend(endpoint, "model-y")
    assert backend.embed(["a", "b"]).shape == (2, 2)
    assert backend.cond_logprob("s", "t") == (-4.0, 2)
    assert backend.yes_no_probs("p") == (0.7, 0.3)
    assert backend.generate("g") == "generated text"
    backend.probe()


def test_retry_recovers_from_transient_failure(http_server):
    endpoint, handler = http_server
    handler.fail_first = 2
    backend = HttpChatBackend(endpoint, "m", initial_backoff=0.01)
    assert backend.complete("hi", SamplingParams()) == "generated text"


def test_retries_exhausted_raises(http_server):
    endpoint, handler = http_server
    handler.fail_first = 10
    backend = HttpChatBackend(endpoint, "m", initial_backoff=0.01, max_attempts=3)
    with pytest.raises(BackendError, match="3 attempts"):
        backend.complete("hi", SamplingParams())
    assert handler.fail_first == 7  # exactly 3 requests were made
