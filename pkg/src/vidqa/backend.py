"""Uniform interface to chat-capable LVLMs and embedding encoders.

Every other module talks to models through this surface. Two
implementations ship: a deterministic offline mock for tests and ablation
fixtures, and a wire client speaking the JSON POST protocol documented in
docs/backend_integration.md.

Mock determinism contract: given the same script, seed, and request
sequence, responses and embeddings are identical across runs and
platforms (hashing uses sha256, never the process-salted builtin hash).
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from .errors import (
    BackendUnavailable,
    ContextOverflow,
    DimensionMismatch,
    EmptyInput,
    ImageUnsupported,
    ZeroNormVector,
)
from .index import EmbeddingVector

DEFAULT_IMAGE_TOKEN_COST = 256


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    image_ref: str


Part = TextPart | ImagePart


@dataclass
class ChatRequest:
    system_prompt: str
    user_parts: list[Part]
    max_output_tokens: int = 512
    temperature: float = 0.0  # zero everywhere for reproducible ablations

    def __post_init__(self) -> None:
        if not self.user_parts:
            raise ValueError("chat request needs at least one user part")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass
class ChatResponse:
    text: str
    usage: dict[str, int]
    backend_id: str


@dataclass(frozen=True)
class BackendProfile:
    backend_id: str
    context_window: int
    embedding_dim: int | None
    supports_images: bool = True

    def __post_init__(self) -> None:
        if self.context_window <= 0:
            raise ValueError("context_window must be positive")


def estimate_tokens(
    parts: Sequence[Part], image_token_cost: int = DEFAULT_IMAGE_TOKEN_COST
) -> int:
    """Deterministic overestimate: ceil(chars/4) per text part, flat per image."""
    total = 0
    for part in parts:
        if isinstance(part, TextPart):
            total += math.ceil(len(part.text) / 4)
        else:
            total += image_token_cost
    return total


def render_surface(request: ChatRequest) -> str:
    """Canonical text rendering of a request.

    This is both the mock's rule-matching surface and the preimage for
    prompt digests, so it must stay stable across runs.
    """
    lines = [request.system_prompt]
    for part in request.user_parts:
        if isinstance(part, TextPart):
            lines.append(part.text)
        else:
            lines.append(f"[image: {part.image_ref}]")
    return "\n".join(lines)


class _BackendBase:
    """Shared pre-checks: image support and context-window estimates."""

    profile: BackendProfile
    image_token_cost: int = DEFAULT_IMAGE_TOKEN_COST

    def chat(self, request: ChatRequest) -> ChatResponse:
        if not self.profile.supports_images and any(
            isinstance(p, ImagePart) for p in request.user_parts
        ):
            raise ImageUnsupported(f"{self.profile.backend_id} does not accept images")
        estimate = estimate_tokens(
            [TextPart(request.system_prompt), *request.user_parts],
            self.image_token_cost,
        )
        if estimate > self.profile.context_window:
            raise ContextOverflow(
                f"estimated {estimate} tokens exceeds context window "
                f"{self.profile.context_window}"
            )
        return self._chat(request)

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text:
            raise EmptyInput("cannot embed empty text")
        return self._unit(self._embed("text", text))

    def embed_image(self, image_ref: str) -> EmbeddingVector:
        if not image_ref:
            raise EmptyInput("cannot embed empty image reference")
        return self._unit(self._embed("image", image_ref))

    def _unit(self, vec: EmbeddingVector) -> EmbeddingVector:
        norm = float(np.linalg.norm(vec.values.astype(np.float64)))
        if norm == 0.0:
            raise ZeroNormVector("provider returned a zero embedding")
        return EmbeddingVector(vec.values.astype(np.float64) / norm)

    def _chat(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError

    def _embed(self, kind: str, content: str) -> EmbeddingVector:
        raise NotImplementedError


# --- deterministic mock -------------------------------------------------


@dataclass
class MockRule:
    """One scripted response: regex over the rendered prompt surface.

    `max_uses` makes a rule consumable so fixtures can script sequences
    (e.g. an inadequate verdict followed by an adequate one).
    """

    pattern: str
    response: str
    max_uses: int | None = None
    uses: int = field(default=0, compare=False)

    def exhausted(self) -> bool:
        return self.max_uses is not None and self.uses >= self.max_uses


class MockChatScript:
    """Ordered rule list; first live rule whose pattern matches wins.

    The final rule must match everything (pattern ".*") so the mock always
    answers; scripts without a default are rejected at load.
    """

    def __init__(self, rules: Sequence[MockRule]):
        rules = list(rules)
        if not rules or rules[-1].pattern != ".*" or rules[-1].max_uses is not None:
            raise ValueError("mock script needs a final unlimited '.*' default rule")
        self.rules = rules
        self._compiled = [re.compile(r.pattern, re.DOTALL) for r in rules]
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "MockChatScript":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = [
            MockRule(r["pattern"], r["response"], r.get("max_uses"))
            for r in data["rules"]
        ]
        return cls(rules)

    @classmethod
    def default(cls) -> "MockChatScript":
        return cls([MockRule(".*", "1")])

    def match(self, surface: str) -> str:
        with self._lock:
            for rule, rx in zip(self.rules, self._compiled):
                if rule.exhausted():
                    continue
                if rx.search(surface):
                    rule.uses += 1
                    return rule.response
        raise AssertionError("unreachable: default rule matches everything")

    def reset(self) -> None:
        for rule in self.rules:
            rule.uses = 0


class MockBackend(_BackendBase):
    """Offline backend: scripted chat, n-gram hash embeddings.

    Embeddings hash character trigrams (the whole string when shorter)
    into `dim` buckets seeded by `seed`, then L2-normalize; similarity
    roughly tracks surface overlap, which is all pipeline property tests
    need. Images hash their image_ref bytes the same way.
    """

    NGRAM = 3

    def __init__(
        self,
        dim: int,
        script: MockChatScript | None = None,
        seed: int = 0,
        context_window: int = 32768,
        supports_images: bool = True,
        image_token_cost: int = DEFAULT_IMAGE_TOKEN_COST,
    ):
        self.profile = BackendProfile(
            backend_id=f"mock-{seed}",
            context_window=context_window,
            embedding_dim=dim,
            supports_images=supports_images,
        )
        self.script = script or MockChatScript.default()
        self.seed = seed
        self.image_token_cost = image_token_cost

    def _chat(self, request: ChatRequest) -> ChatResponse:
        surface = render_surface(request)
        text = self.script.match(surface)
        usage = {
            "input_tokens": estimate_tokens(
                [TextPart(request.system_prompt), *request.user_parts],
                self.image_token_cost,
            ),
            "output_tokens": estimate_tokens([TextPart(text)]),
        }
        return ChatResponse(text=text, usage=usage, backend_id=self.profile.backend_id)

    def _embed(self, kind: str, content: str) -> EmbeddingVector:
        dim = self.profile.embedding_dim or 1
        vec = np.zeros(dim, dtype=np.float64)
        grams = (
            [content[i : i + self.NGRAM] for i in range(len(content) - self.NGRAM + 1)]
            if len(content) >= self.NGRAM
            else [content]
        )
        for gram in grams:
            digest = hashlib.sha256(
                f"{self.seed}|{kind}|{gram}".encode("utf-8")
            ).digest()
            bucket = int.from_bytes(digest[:8], "little") % dim
            vec[bucket] += 1.0
        return EmbeddingVector(vec)


# --- wire client ----------------------------------------------------------


class WireBackend(_BackendBase):
    """JSON-over-HTTP client with retries and an in-flight cap.

    Transient failures (connection errors, timeouts, 5xx) are retried with
    exponential backoff; 4xx responses are permanent and surface
    immediately. The engine normalizes embeddings in case the provider
    does not.
    """

    def __init__(
        self,
        profile: BackendProfile,
        chat_url: str,
        embed_url: str,
        auth_token: str | None = None,
        timeout_s: float = 30.0,
        retry_attempts: int = 3,
        retry_backoff_s: float = 0.25,
        max_in_flight: int = 4,
        session: requests.Session | None = None,
        image_token_cost: int = DEFAULT_IMAGE_TOKEN_COST,
    ):
        if retry_attempts < 1:
            raise ValueError("retry_attempts must be >= 1")
        self.profile = profile
        self.chat_url = chat_url
        self.embed_url = embed_url
        self.auth_token = auth_token
        self.timeout_s = timeout_s
        self.retry_attempts = retry_attempts
        self.retry_backoff_s = retry_backoff_s
        self.image_token_cost = image_token_cost
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(max_in_flight)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        return headers

    def _post(self, url: str, body: dict) -> dict:
        last_error = "no attempt made"
        for attempt in range(self.retry_attempts):
            if attempt:
                time.sleep(self.retry_backoff_s * 2 ** (attempt - 1))
            try:
                with self._gate:
                    resp = self._session.post(
                        url, json=body, headers=self._headers(), timeout=self.timeout_s
                    )
            except requests.RequestException as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(
                    f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}"
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise BackendUnavailable(f"{url} returned non-JSON body") from exc
        raise BackendUnavailable(
            f"{url} failed after {self.retry_attempts} attempts ({last_error})"
        )

    def _chat(self, request: ChatRequest) -> ChatResponse:
        parts = []
        for part in request.user_parts:
            if isinstance(part, TextPart):
                parts.append({"type": "text", "text": part.text})
            else:
                parts.append({"type": "image", "image_ref": part.image_ref})
        body = {
            "system": request.system_prompt,
            "parts": parts,
            "max_output_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        }
        data = self._post(self.chat_url, body)
        if "text" not in data:
            raise BackendUnavailable("chat response lacks 'text'")
        return ChatResponse(
            text=str(data["text"]),
            usage=dict(data.get("usage", {})),
            backend_id=str(data.get("backend_id", self.profile.backend_id)),
        )

    def _embed(self, kind: str, content: str) -> EmbeddingVector:
        data = self._post(self.embed_url, {"kind": kind, "content": content})
        if "embedding" not in data:
            raise BackendUnavailable("embed response lacks 'embedding'")
        vec = EmbeddingVector(np.asarray(data["embedding"], dtype=np.float64))
        expected = self.profile.embedding_dim
        if expected is not None and vec.dim != expected:
            raise DimensionMismatch(
                f"provider returned dim {vec.dim}, profile declares {expected}"
            )
        return vec


class CountingBackend:
    """Wrapper that counts chat and embed calls; used for traces and caches."""

    def __init__(self, inner):
        self.inner = inner
        self.chat_calls = 0
        self.embed_calls = 0
        self._lock = threading.Lock()

    @property
    def profile(self) -> BackendProfile:
        return self.inner.profile

    @property
    def image_token_cost(self) -> int:
        return self.inner.image_token_cost

    def chat(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.chat_calls += 1
        return self.inner.chat(request)

    def embed_text(self, text: str) -> EmbeddingVector:
        with self._lock:
            self.embed_calls += 1
        return self.inner.embed_text(text)

    def embed_image(self, image_ref: str) -> EmbeddingVector:
        with self._lock:
            self.embed_calls += 1
        return self.inner.embed_image(image_ref)


def make_backend(profile_cfg: dict, default_dim: int, seed: int):
    """Construct a backend from a profile dict (see config.EngineConfig)."""
    kind = profile_cfg.get("type", "mock")
    if kind == "mock":
        script_path = profile_cfg.get("script")
        script = (
            MockChatScript.from_file(script_path)
            if script_path
            else MockChatScript.default()
        )
        return MockBackend(
            dim=int(profile_cfg.get("embedding_dim", default_dim)),
            script=script,
            seed=int(profile_cfg.get("seed", seed)),
            context_window=int(profile_cfg.get("context_window", 32768)),
            supports_images=bool(profile_cfg.get("supports_images", True)),
            image_token_cost=int(
                profile_cfg.get("image_token_cost", DEFAULT_IMAGE_TOKEN_COST)
            ),
        )
    if kind == "wire":
        for key in ("chat_url", "embed_url"):
            if not profile_cfg.get(key):
                raise ValueError(f"wire profile needs {key!r} (flag, env, or config)")
        profile = BackendProfile(
            backend_id=str(profile_cfg.get("name", "wire")),
            context_window=int(profile_cfg.get("context_window", 32768)),
            embedding_dim=(
                int(profile_cfg["embedding_dim"])
                if profile_cfg.get("embedding_dim") is not None
                else default_dim
            ),
            supports_images=bool(profile_cfg.get("supports_images", True)),
        )
        return WireBackend(
            profile=profile,
            chat_url=profile_cfg["chat_url"],
            embed_url=profile_cfg["embed_url"],
            auth_token=profile_cfg.get("auth_token"),
            timeout_s=float(profile_cfg.get("timeout_s", 30.0)),
            retry_attempts=int(profile_cfg.get("retry_attempts", 3)),
            retry_backoff_s=float(profile_cfg.get("retry_backoff_s", 0.25)),
            max_in_flight=int(profile_cfg.get("max_in_flight", 4)),
            image_token_cost=int(
                profile_cfg.get("image_token_cost", DEFAULT_IMAGE_TOKEN_COST)
            ),
        )
    raise ValueError(f"unknown backend type {kind!r}")
