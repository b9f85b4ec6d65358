"""Pluggable backends: transcription (LLM/OCR), image description, agents and embeddings.

Every backend speaks the same JSON request/response contract whether it is a
remote HTTP service or the deterministic in-process mock:

``POST /transcribe`` ``{"image_b64", "strategy"}`` -> ``{"blocks": [{"text", "bbox"?, "confidence"?, "role"?, "level"?}], "tables": [str]}``
``POST /describe``   ``{"image_b64"}`` -> ``{"content_type", "description"?, "axes"?, "legend"?, "labels"?, "steps"?, "transcription"?}``
``POST /complete``   ``{"role", "template", "prompt", "image_b64"?}`` -> ``{"text"}``
``POST /embed``      ``{"texts"}`` -> ``{"vectors"}``

Mocks consult a fixture directory first (``<fixtures>/<route>/<sha256>.json``)
and otherwise fall back to rule-based deterministic behaviour.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import math
import string
import threading
import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Protocol, TypeVar

import httpx
import numpy as np

from .errors import (
    AgentUnavailable,
    BackendRejectedInput,
    BackendUnavailable,
    InputTooLong,
    UndecodableImage,
)

log = logging.getLogger(__name__)

T = TypeVar("T")

AGENT_ROLES = ("assembler", "metadata", "questions", "summary", "judge", "answer", "dataset")


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("ragnodes.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def template_version(name: str) -> int:
    first = load_template(name).splitlines()[0]
    return int(first.split(":", 1)[1]) if first.startswith("# version:") else 0


@dataclass(frozen=True)
class AgentRequest:
    role: str
    template: str
    variables: dict[str, Any] = field(default_factory=dict)
    image: bytes | None = None

    def __post_init__(self):
        if self.role not in AGENT_ROLES:
            raise ValueError(f"unknown agent role {self.role!r}")

    def render(self) -> str:
        body = "\n".join(line for line in load_template(self.template).splitlines()
                         if not line.startswith("# version:"))
        values = {k: v if isinstance(v, str) else canonical_json(v)
                  for k, v in self.variables.items()}
        prompt = string.Template(body).safe_substitute(values)
        if "previous_reply" in self.variables:
            prompt += ("\n\nYour previous reply could not be used.\n"
                       f"Previous reply:\n{self.variables['previous_reply']}\n"
                       f"Error: {self.variables.get('error', '')}\n"
                       "Reply again following the required format exactly.")
        return prompt

    def fingerprint(self) -> str:
        payload = {"role": self.role, "template": self.template, "variables": self.variables,
                   "image": sha256_hex(self.image) if self.image else None}
        return sha256_hex(canonical_json(payload))

    def with_repair(self, previous_reply: str, error: str) -> AgentRequest:
        variables = dict(self.variables, previous_reply=previous_reply, error=error)
        return AgentRequest(self.role, self.template, variables, self.image)


@dataclass(frozen=True)
class AgentResponse:
    text: str
    status: str = "ok"


class TranscriptionBackend(Protocol):
    def transcribe(self, image: bytes, strategy: str) -> dict: ...


class VisionBackend(Protocol):
    def describe(self, image: bytes) -> dict: ...


class Agent(Protocol):
    def complete(self, request: AgentRequest) -> AgentResponse: ...


class EmbeddingBackend(Protocol):
    dim: int
    max_input_tokens: int

    def embed(self, texts: list[str]) -> list[np.ndarray]: ...


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def call_with_retry(fn: Callable[[], T], retries: int = 1, backoff: float = 0.5,
                    sleep: Callable[[float], None] = time.sleep) -> T:
    """Call ``fn``; on BackendUnavailable retry up to ``retries`` times with exponential backoff."""
    attempt = 0
    while True:
        try:
            return fn()
        except BackendUnavailable:
            if attempt >= retries:
                raise
            sleep(backoff * (2 ** attempt))
            attempt += 1


class FixtureStore:
    """Fixture files addressed by content hash: ``<root>/<route>/<key>.json``."""

    def __init__(self, root: Path | str | None):
        self.root = Path(root) if root else None

    def get(self, route: str, key: str) -> dict | None:
        if self.root is None:
            return None
        path = self.root / route / f"{key}.json"
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, route: str, key: str, payload: dict) -> Path:
        if self.root is None:
            raise ValueError("fixture store has no root directory")
        path = self.root / route / f"{key}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(canonical_json(payload) + "\n", encoding="utf-8")
        return path


def image_size(image: bytes) -> tuple[int, int]:
    from PIL import Image, UnidentifiedImageError
    import io

    try:
        with Image.open(io.BytesIO(image)) as im:
            return im.size
    except (UnidentifiedImageError, OSError) as exc:
        raise UndecodableImage(str(exc)) from exc


class MockBackend:
    """Deterministic stand-in for every non-embedding backend slot.

    Transcriptions and descriptions come only from fixtures (no fixture means an
    empty transcription and a generic description). Agent completions use a
    fixture when one matches the request fingerprint, else the rule-based
    behaviour in :mod:`ragnodes.mock_agents`.
    """

    remote = False
    max_in_flight = 0

    def __init__(self, fixtures: Path | str | None = None, max_image_bytes: int = 20 * 2**20):
        self.fixtures = FixtureStore(fixtures)
        self.max_image_bytes = max_image_bytes

    def transcribe(self, image: bytes, strategy: str) -> dict:
        if len(image) > self.max_image_bytes:
            raise BackendRejectedInput(f"image of {len(image)} bytes exceeds limit")
        fixture = self.fixtures.get(f"transcribe-{strategy.lower()}", sha256_hex(image))
        if fixture is None:
            return {"blocks": [], "tables": []}
        if "text" in fixture and "blocks" not in fixture:
            return {"blocks": [{"text": fixture["text"]}], "tables": fixture.get("tables", [])}
        return {"blocks": fixture.get("blocks", []), "tables": fixture.get("tables", [])}

    def describe(self, image: bytes) -> dict:
        fixture = self.fixtures.get("describe", sha256_hex(image))
        if fixture is not None:
            return fixture
        w, h = image_size(image)
        return {"content_type": "other", "description": f"Image of {w}x{h} pixels."}

    def complete(self, request: AgentRequest) -> AgentResponse:
        fixture = self.fixtures.get("complete", request.fingerprint())
        if fixture is not None:
            return AgentResponse(fixture["text"])
        from .mock_agents import respond

        return AgentResponse(respond(request))


class MockEmbedding:
    """Hash-seeded pseudo-random unit vectors.

    A text maps to the normalized sum of per-token Gaussian vectors, each seeded
    by the token's SHA-256, so identical texts give identical vectors and shared
    vocabulary gives positive similarity. Texts without word tokens hash whole.
    """

    remote = False
    max_in_flight = 0

    def __init__(self, dim: int = 256, max_input_tokens: int = 8192):
        self.dim = dim
        self.max_input_tokens = max_input_tokens

    def _seeded(self, key: str) -> np.ndarray:
        return _seeded_vector(key, self.dim)

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        from .textutil import tokens

        out = []
        for text in texts:
            if estimate_tokens(text) > self.max_input_tokens:
                raise InputTooLong(f"{len(text)} chars exceeds {self.max_input_tokens} tokens")
            toks = tokens(text)
            if toks:
                counts: dict[str, int] = {}
                for t in toks:
                    counts[t] = counts.get(t, 0) + 1
                v = np.zeros(self.dim)
                for tok in sorted(counts):
                    v += counts[tok] * self._seeded("tok:" + tok)
            else:
                v = self._seeded("txt:" + text)
            norm = float(np.sqrt(np.dot(v, v)))
            if norm == 0.0:
                v = self._seeded("txt:" + text)
                norm = float(np.sqrt(np.dot(v, v)))
            out.append(v / norm)
        return out


@lru_cache(maxsize=65536)
def _seeded_vector(key: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "little")
    v = np.random.Generator(np.random.PCG64(seed)).standard_normal(dim)
    v.setflags(write=False)
    return v


class HttpBackend:
    """JSON-over-HTTP client for any backend slot."""

    remote = True

    def __init__(self, endpoint: str, api_key: str | None = None, model: str | None = None,
                 timeout: float = 60.0, retries: int = 1, backoff: float = 0.5,
                 max_in_flight: int = 4, max_image_bytes: int = 5 * 2**20,
                 dim: int = 1024, max_input_tokens: int = 8192,
                 transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.max_in_flight = max_in_flight
        self.max_image_bytes = max_image_bytes
        self.dim = dim
        self.max_input_tokens = max_input_tokens
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._gate = threading.BoundedSemaphore(max_in_flight) if max_in_flight > 0 else None

    def close(self) -> None:
        self._client.close()

    def _post_once(self, route: str, body: dict) -> dict:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        if self.model:
            body = dict(body, model=self.model)
        try:
            resp = self._client.post(f"{self.endpoint}/{route}", json=body, headers=headers)
        except httpx.TimeoutException as exc:
            raise BackendUnavailable(f"{route}: timeout after {self.timeout}s") from exc
        except httpx.TransportError as exc:
            raise BackendUnavailable(f"{route}: {exc}") from exc
        if resp.status_code == 413:
            raise BackendRejectedInput(f"{route}: payload too large")
        if resp.status_code == 422 and route == "describe":
            raise UndecodableImage(resp.text)
        if resp.status_code >= 500 or resp.status_code == 429:
            raise BackendUnavailable(f"{route}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendRejectedInput(f"{route}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendUnavailable(f"{route}: non-JSON response") from exc

    def _post(self, route: str, body: dict) -> dict:
        def once():
            if self._gate is None:
                return self._post_once(route, body)
            with self._gate:
                return self._post_once(route, body)

        return call_with_retry(once, self.retries, self.backoff)

    def transcribe(self, image: bytes, strategy: str) -> dict:
        if len(image) > self.max_image_bytes:
            raise BackendRejectedInput(f"image of {len(image)} bytes exceeds limit")
        data = self._post("transcribe", {"image_b64": base64.b64encode(image).decode("ascii"),
                                         "strategy": strategy})
        return {"blocks": data.get("blocks", []), "tables": data.get("tables", [])}

    def describe(self, image: bytes) -> dict:
        return self._post("describe", {"image_b64": base64.b64encode(image).decode("ascii")})

    def complete(self, request: AgentRequest) -> AgentResponse:
        body = {"role": request.role, "template": request.template, "prompt": request.render()}
        if request.image is not None:
            body["image_b64"] = base64.b64encode(request.image).decode("ascii")
        try:
            data = self._post("complete", body)
        except BackendUnavailable as exc:
            raise AgentUnavailable(str(exc)) from exc
        return AgentResponse(str(data.get("text", "")))

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        for t in texts:
            if estimate_tokens(t) > self.max_input_tokens:
                raise InputTooLong(f"{len(t)} chars exceeds {self.max_input_tokens} tokens")
        data = self._post("embed", {"texts": texts})
        vectors = [np.asarray(v, dtype=np.float64) for v in data["vectors"]]
        if len(vectors) != len(texts):
            raise BackendUnavailable("embed: vector count does not match input count")
        return vectors
