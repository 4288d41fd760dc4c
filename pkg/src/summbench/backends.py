"""Scoring backends: abstract surfaces, deterministic stubs, HTTP clients.

Two capability surfaces exist.  A *model* backend offers embeddings,
conditional log-probabilities, yes/no probabilities and free generation; a
*chat* backend offers sampled text completion.  All model specificity
(names, versions, sampling parameters) flows into the run manifest rather
than into code.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Protocol, runtime_checkable

import numpy as np
import requests

from .errors import BackendError, ValidationError


@dataclass(frozen=True)
class SamplingParams:
    """Sampling configuration, serialized verbatim into the manifest."""

    temperature: float = 1.0
    top_k: int = 64
    top_p: float = 0.95
    seed: Optional[int] = None
    n_samples: int = 1

    def __post_init__(self):
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        if self.top_k < 1:
            raise ValidationError("top_k must be a positive integer")
        if not (0 < self.top_p <= 1):
            raise ValidationError("top_p must lie in (0, 1]")
        if self.n_samples < 1:
            raise ValidationError("n_samples must be >= 1")

    def to_dict(self) -> dict:
        return {"temperature": self.temperature, "top_k": self.top_k,
                "top_p": self.top_p, "seed": self.seed, "n_samples": self.n_samples}


@runtime_checkable
class ModelBackend(Protocol):
    identity: str

    def embed(self, tokens: list[str]) -> np.ndarray: ...

    def cond_logprob(self, source: str, target: str) -> tuple[float, int]: ...

    def yes_no_probs(self, prompt: str) -> tuple[float, float]: ...

    def generate(self, prompt: str) -> str: ...


@runtime_checkable
class ChatBackend(Protocol):
    identity: str

    def complete(self, prompt: str, sampling: SamplingParams) -> str: ...


def _digest(*parts: str) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.digest()


def _unit_fraction(*parts: str) -> float:
    """Deterministic value in [0, 1) derived from the inputs."""
    return int.from_bytes(_digest(*parts)[:8], "big") / 2**64


class StubBackend:
    """Deterministic scripted backend for tests and offline runs.

    Responses come from an ordered rule list (first substring match wins);
    anything unmatched falls back to hash-derived defaults, so the same
    input always yields the same output across processes.

    Script file format (JSON)::

        {"identity": "stub-1", "embedding_dim": 16,
         "rules": [{"contains": "atomic statements", "response": "1. ..."},
                   {"contains": "Is the claim", "p_yes": 0.9, "p_no": 0.1},
                   {"contains": "news article", "logprob_per_token": -0.7}],
         "default_response": "3"}
    """

    def __init__(self, identity: str = "stub", rules: Optional[list[dict]] = None,
                 embedding_dim: int = 16, default_response: Optional[str] = None,
                 embeddings: Optional[dict[str, list[float]]] = None):
        self.identity = identity
        self.rules = list(rules or [])
        self.embedding_dim = embedding_dim
        self.default_response = default_response
        self._embedding_overrides = dict(embeddings or {})
        self.calls: list[tuple[str, str]] = []

    @classmethod
    def from_script(cls, path) -> "StubBackend":
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
        return cls(identity=cfg.get("identity", "stub"),
                   rules=cfg.get("rules", []),
                   embedding_dim=cfg.get("embedding_dim", 16),
                   default_response=cfg.get("default_response"),
                   embeddings=cfg.get("embeddings"))

    def _match(self, text: str) -> Optional[dict]:
        for rule in self.rules:
            if rule.get("contains", "") in text:
                return rule
        return None

    def embed(self, tokens: list[str]) -> np.ndarray:
        vectors = []
        for token in tokens:
            if token in self._embedding_overrides:
                vectors.append(np.asarray(self._embedding_overrides[token], dtype=float))
                continue
            raw = _digest("embed", token)
            need = self.embedding_dim
            buf = raw
            while len(buf) < need:
                buf += _digest("embed", token, str(len(buf)))
            vec = np.frombuffer(buf[:need], dtype=np.uint8).astype(float)
            vectors.append(vec / 255.0 - 0.5)
        return np.stack(vectors)

    def cond_logprob(self, source: str, target: str) -> tuple[float, int]:
        self.calls.append(("cond_logprob", target))
        n_tokens = max(1, len(target.split()))
        rule = self._match(source + "\n" + target)
        if rule and "logprob_total" in rule:
            return float(rule["logprob_total"]), int(rule.get("token_count", n_tokens))
        if rule and "logprob_per_token" in rule:
            return float(rule["logprob_per_token"]) * n_tokens, n_tokens
        per_token = -0.5 - 2.5 * _unit_fraction("logprob", source, target)
        return per_token * n_tokens, n_tokens

    def yes_no_probs(self, prompt: str) -> tuple[float, float]:
        self.calls.append(("yes_no", prompt))
        rule = self._match(prompt)
        if rule and "p_yes" in rule:
            return float(rule["p_yes"]), float(rule.get("p_no", 1.0 - float(rule["p_yes"])))
        p_yes = 0.05 + 0.9 * _unit_fraction("yesno", prompt)
        return p_yes, 1.0 - p_yes

    def generate(self, prompt: str) -> str:
        self.calls.append(("generate", prompt))
        rule = self._match(prompt)
        if rule and "response" in rule:
            return rule["response"]
        if self.default_response is not None:
            return self.default_response
        return str(1 + int(4 * _unit_fraction("generate", prompt)))

    def complete(self, prompt: str, sampling: SamplingParams) -> str:
        return self.generate(prompt)


class _HttpClient:
    """POST with bounded retries, exponential backoff, and an in-flight gate."""

    def __init__(self, endpoint: str, max_attempts: int = 3,
                 initial_backoff: float = 1.0, timeout: float = 120.0,
                 max_inflight: int = 1):
        self.endpoint = endpoint.rstrip("/")
        self.max_attempts = max_attempts
        self.initial_backoff = initial_backoff
        self.timeout = timeout
        self._gate = threading.Semaphore(max_inflight)
        self._session = requests.Session()

    def post(self, path: str, payload: dict) -> dict:
        url = self.endpoint + path
        delay = self.initial_backoff
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(delay)
                delay *= 2
            try:
                with self._gate:
                    resp = self._session.post(url, json=payload, timeout=self.timeout)
                resp.raise_for_status()
                return resp.json()
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
        raise BackendError(
            f"{url}: failed after {self.max_attempts} attempts: {last_error}")


class HttpChatBackend:
    """Chat backend over a local-inference HTTP generation API."""

    def __init__(self, endpoint: str, model: str, **client_kwargs):
        self.model = model
        self.identity = model
        self._client = _HttpClient(endpoint, **client_kwargs)

    def complete(self, prompt: str, sampling: SamplingParams) -> str:
        payload = {
            "model": self.model,
            "prompt": prompt,
            "stream": False,
            "options": {
                "temperature": sampling.temperature,
                "top_k": sampling.top_k,
                "top_p": sampling.top_p,
            },
        }
        if sampling.seed is not None:
            payload["options"]["seed"] = sampling.seed
        data = self._client.post("/api/generate", payload)
        if "response" not in data:
            raise BackendError(f"chat backend reply missing 'response': {data}")
        return data["response"]

    def probe(self) -> None:
        self.complete("ping", SamplingParams(temperature=0.0))


class HttpModelBackend:
    """Model backend over per-capability HTTP endpoints."""

    def __init__(self, endpoint: str, model: str, **client_kwargs):
        self.model = model
        self.identity = model
        self._client = _HttpClient(endpoint, **client_kwargs)

    def embed(self, tokens: list[str]) -> np.ndarray:
        data = self._client.post("/api/embed", {"model": self.model, "input": tokens})
        try:
            return np.asarray(data["embeddings"], dtype=float)
        except (KeyError, ValueError) as exc:
            raise BackendError(f"bad embed reply: {exc}") from exc

    def cond_logprob(self, source: str, target: str) -> tuple[float, int]:
        data = self._client.post("/api/logprob",
                                 {"model": self.model, "source": source, "target": target})
        try:
            return float(data["logprob"]), int(data["token_count"])
        except (KeyError, ValueError) as exc:
            raise BackendError(f"bad logprob reply: {exc}") from exc

    def yes_no_probs(self, prompt: str) -> tuple[float, float]:
        data = self._client.post("/api/yesno", {"model": self.model, "prompt": prompt})
        try:
            return float(data["p_yes"]), float(data["p_no"])
        except (KeyError, ValueError) as exc:
            raise BackendError(f"bad yes/no reply: {exc}") from exc

    def generate(self, prompt: str) -> str:
        data = self._client.post("/api/generate",
                                 {"model": self.model, "prompt": prompt, "stream": False})
        if "response" not in data:
            raise BackendError(f"model backend reply missing 'response': {data}")
        return data["response"]

    def probe(self) -> None:
        self.embed(["ping"])


@dataclass
class BackendSuite:
    """The backends one run has available, with their manifest identities."""

    model: Optional[ModelBackend] = None
    chat: Optional[ChatBackend] = None
    chat_sampling: SamplingParams = field(default_factory=SamplingParams)
    model_backend_id: str = "model"
    chat_backend_id: str = "chat"

    def require_model(self) -> ModelBackend:
        if self.model is None:
            raise BackendError("metric needs a model backend but none is configured")
        return self.model

    def require_chat(self) -> ChatBackend:
        if self.chat is None:
            raise BackendError("metric needs a chat backend but none is configured")
        return self.chat

    def manifest_entries(self) -> list[dict]:
        entries = []
        if self.model is not None:
            entries.append(backend_manifest_entry(self.model_backend_id, "model", self.model))
        if self.chat is not None:
            entries.append(backend_manifest_entry(self.chat_backend_id, "chat",
                                                  self.chat, self.chat_sampling))
        return entries


def backend_manifest_entry(backend_id: str, kind: str, backend,
                           sampling: Optional[SamplingParams] = None) -> dict:
    """Manifest row describing one backend; sampling mandatory for chat."""
    entry = {
        "backend_id": backend_id,
        "kind": kind,
        "model": getattr(backend, "identity", "unknown"),
        "class": type(backend).__name__,
    }
    if kind == "chat":
        entry["sampling"] = (sampling or SamplingParams()).to_dict()
    return entry
