"""Embedding and chat-completion clients with batching, retries, mocks, cache.

Both client kinds speak OpenAI-compatible JSON endpoints, so any hosted or
open-weight server exposing that wire protocol is pluggable.  Endpoints whose
URL starts with ``mock:`` never touch the network: they run built-in
deterministic behaviors that make the whole pipeline executable offline and
byte-reproducible.

Mock embedding (``mock://embedding``): a text is tokenized to lowercase
``[a-z0-9]+`` runs; each token maps to a fixed pseudo-random direction in 64
dimensions derived by hashing ``model_id:token``; the text vector is the
count-weighted sum of token directions, L2-normalized.  Equal texts always
produce equal vectors, and token overlap translates into cosine similarity.

Mock chat endpoints dispatch on the URL path:

* ``mock://chat/summarize``  — answers a statement-summarization prompt with
  the five most frequent non-stopword tokens of the statement block.
* ``mock://chat/judge``      — answers a taxonomy-evaluation prompt with a
  nested JSON of 1-5 scores derived from hashing the prompt.
* ``mock://chat/label-a`` and ``mock://chat/label-b`` — answer a test-set
  labeling prompt by flagging sentence ids whose text overlaps a built-in AI
  keyword list; the ``label-a`` list is a superset of ``label-b``'s, so the
  two mock judges disagree on a controlled subset of sentences.

Embeddings are cached in an append-only per-model file keyed by the SHA-256
of the text.  A fully cached run performs zero backend calls (observable via
``EmbeddingClient.request_count``).
"""

from __future__ import annotations

import ast
import hashlib
import json
import logging
import os
import re
import struct
import threading
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import ConfigurationError, ProviderError

logger = logging.getLogger(__name__)

EMBEDDING = "embedding"
CHAT = "chat"

MOCK_SCHEME = "mock:"
MOCK_DIM = 64

_TOKEN_RE = re.compile(r"[a-z0-9]+")

#: Common English filler tokens excluded by the mock summarizer.
MOCK_STOPWORDS = frozenset(
    """a an the and or of to in for with on at by from as is are be been was were
    will would can could may might shall should must do does did done have has had
    you your we our they their he she it its this that these those i me my us them
    not no nor so than then there here when where which who whom what how all any
    each other some such only own same more most per via also into over under out
    up down about after before during between required preferred ability able
    experience work job skills skill statements output description""".split()
)

#: Mock test-set judge keyword lists. ``label-a`` uses the union (lenient
#: judge); ``label-b`` uses only the core list (strict judge).
MOCK_AI_CORE = frozenset(
    """ai ml machine learning neural network networks deep nlp pytorch tensorflow
    model models algorithm algorithms data mining llm llms transformer
    embeddings classifier regression clustering vision robotics""".split()
)
MOCK_AI_EXTENDED = MOCK_AI_CORE | frozenset(
    """python statistical statistics analytics automation chatbot chatbots cloud
    gpu inference training prediction predictive intelligence recommendation
    forecasting annotation speech recognition optimization""".split()
)


@dataclass(frozen=True)
class ProviderConfig:
    """Connection and policy settings for one embedding or chat backend."""

    kind: str
    endpoint: str
    model_id: str
    api_key_env: Optional[str] = None
    max_batch: int = 64
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 3
    backoff: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in (EMBEDDING, CHAT):
            raise ConfigurationError(f"unknown provider kind {self.kind!r}")
        if self.max_batch < 1:
            raise ConfigurationError("max_batch must be >= 1")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be >= 0")

    @property
    def is_mock(self) -> bool:
        return self.endpoint.startswith(MOCK_SCHEME)


def mock_embedding_config(model_id: str = "mock-embed-a") -> ProviderConfig:
    return ProviderConfig(kind=EMBEDDING, endpoint="mock://embedding", model_id=model_id)


def mock_chat_config(role: str = "summarize", model_id: str = "") -> ProviderConfig:
    return ProviderConfig(
        kind=CHAT,
        endpoint=f"mock://chat/{role}",
        model_id=model_id or f"mock-chat-{role}",
        temperature=0.0,
    )


@dataclass
class EmbeddingVector:
    """Unit-norm embedding with its producing model tag."""

    values: np.ndarray
    model_id: str

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ProviderError("embedding values must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ProviderError("embedding contains non-finite entries")
        norm = float(np.linalg.norm(self.values))
        if abs(norm - 1.0) > 1e-6:
            raise ProviderError(f"embedding norm {norm} deviates from 1 by > 1e-6")

    def __len__(self) -> int:
        return self.values.shape[0]


def normalize(values: np.ndarray) -> np.ndarray:
    """Scale a vector to unit L2 norm."""
    values = np.asarray(values, dtype=np.float64)
    norm = np.linalg.norm(values)
    if norm == 0.0 or not np.isfinite(norm):
        raise ProviderError("cannot normalize a zero or non-finite vector")
    return values / norm


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two unit vectors (their dot product)."""
    if len(a) != len(b):
        raise ProviderError(f"embedding length mismatch: {len(a)} vs {len(b)}")
    return float(np.clip(np.dot(a.values, b.values), -1.0, 1.0))


# ---------------------------------------------------------------------------
# Deterministic mock backends
# ---------------------------------------------------------------------------


def _expand_hash(seed: bytes, n_bytes: int) -> bytes:
    """Deterministically expand a seed to ``n_bytes`` via chained SHA-512."""
    out = bytearray()
    block = seed
    while len(out) < n_bytes:
        block = hashlib.sha512(block).digest()
        out.extend(block)
    return bytes(out[:n_bytes])


class _TokenVectors:
    """Per-model cache of deterministic token direction vectors."""

    def __init__(self) -> None:
        self._cache: dict[tuple[str, str], np.ndarray] = {}
        self._lock = threading.Lock()

    def get(self, model_id: str, token: str, dim: int = MOCK_DIM) -> np.ndarray:
        key = (model_id, token)
        with self._lock:
            vec = self._cache.get(key)
        if vec is not None:
            return vec
        seed = hashlib.sha256(f"{model_id}:{token}".encode("utf-8")).digest()
        raw = _expand_hash(seed, dim * 2)
        ints = struct.unpack(f"<{dim}H", raw)
        vec = np.array([u / 65535.0 * 2.0 - 1.0 for u in ints], dtype=np.float64)
        with self._lock:
            self._cache[key] = vec
        return vec


_TOKEN_VECTORS = _TokenVectors()


def mock_embed_text(text: str, model_id: str, dim: int = MOCK_DIM) -> np.ndarray:
    """Deterministic unit vector for a text under the mock embedding model."""
    counts = Counter(_TOKEN_RE.findall(text.lower()))
    vec = np.zeros(dim, dtype=np.float64)
    # summed in sorted token order so equal token multisets give equal bytes
    for token, count in sorted(counts.items()):
        vec += count * _TOKEN_VECTORS.get(model_id, token, dim)
    if not counts or float(np.linalg.norm(vec)) == 0.0:
        vec = _TOKEN_VECTORS.get(model_id, "", dim)
    return normalize(vec)


def _statement_block(prompt: str) -> str:
    """Text after the last 'statements:' marker, before the next 'Output:::'."""
    idx = prompt.rfind("statements:")
    if idx < 0:
        return prompt
    block = prompt[idx + len("statements:") :]
    end = block.find("Output:::")
    return block[:end] if end >= 0 else block


def mock_chat_summarize(prompt: str) -> str:
    """Five most frequent non-stopword tokens of the final statement block."""
    block = _statement_block(prompt)
    counts = Counter(
        t for t in _TOKEN_RE.findall(block.lower()) if t not in MOCK_STOPWORDS
    )
    top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
    words = [t for t, _ in top] or ["untitled"]
    return "Output:::\nDescription: " + " ".join(words) + "."


_JUDGE_STRUCTURE: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("Clarity", ("Precision", "Unambiguity", "Consistency", "Accessibility")),
    (
        "Hierarchical Coherence",
        ("Gradational Specificity", "Parent-Child Coherence", "Consistency"),
    ),
    ("Orthogonality", ("Distinctiveness", "Non-overlap")),
    ("Completeness", ("Domain Coverage", "Depth", "Balance")),
)


def mock_chat_judge(prompt: str) -> str:
    """Nested JSON of hash-derived 1-5 scores for the judge criteria."""
    result: dict[str, dict[str, int]] = {}
    for category, criteria in _JUDGE_STRUCTURE:
        result[category] = {}
        for criterion in criteria:
            digest = hashlib.sha256(
                f"{prompt}|{category}|{criterion}".encode("utf-8")
            ).digest()
            result[category][criterion] = digest[0] % 5 + 1
    return json.dumps(result, indent=1)


def _texts_block(prompt: str) -> Optional[dict]:
    idx = prompt.rfind("texts:")
    if idx < 0:
        return None
    block = prompt[idx + len("texts:") :]
    end = block.find("Output:::")
    if end >= 0:
        block = block[:end]
    block = block.strip()
    for parser in (json.loads, ast.literal_eval):
        try:
            obj = parser(block)
        except (ValueError, SyntaxError):
            continue
        if isinstance(obj, dict):
            return obj
    return None


def mock_chat_test_labeler(prompt: str, keyword_set: frozenset[str]) -> str:
    """Flag sentence ids whose tokens overlap the given AI keyword list."""
    mapping = _texts_block(prompt) or {}
    flagged: list[int] = []
    for key, value in mapping.items():
        try:
            sid = int(key)
        except (TypeError, ValueError):
            continue
        tokens = set(_TOKEN_RE.findall(str(value).lower()))
        if tokens & keyword_set:
            flagged.append(sid)
    flagged.sort()
    return "Output:::\nClassification: [" + ", ".join(str(i) for i in flagged) + "]"


def _mock_chat_dispatch(endpoint: str, prompt: str) -> str:
    path = endpoint[len(MOCK_SCHEME) :].strip("/").split("/")
    role = path[-1] if path else ""
    if role == "summarize" or role == "chat":
        return mock_chat_summarize(prompt)
    if role == "judge":
        return mock_chat_judge(prompt)
    if role == "label-a":
        return mock_chat_test_labeler(prompt, MOCK_AI_EXTENDED)
    if role == "label-b":
        return mock_chat_test_labeler(prompt, MOCK_AI_CORE)
    raise ConfigurationError(f"unknown mock chat role in endpoint {endpoint!r}")


# ---------------------------------------------------------------------------
# Persistent embedding cache
# ---------------------------------------------------------------------------


class EmbeddingCache:
    """Append-only on-disk cache of embeddings for one model.

    Record format: 32-byte SHA-256 of the text, uint32 little-endian
    dimension, then ``dim`` float32 little-endian values.  The whole file is
    indexed into memory on first open; appends go through a single writer
    lock.  A record whose dimension disagrees with the rest of the file is a
    hard error — it means two different models wrote under one model id.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._index: dict[bytes, np.ndarray] = {}
        self._dim: Optional[int] = None
        self._lock = threading.Lock()
        if self.path.exists():
            self._load()

    @staticmethod
    def key_for(text: str) -> bytes:
        return hashlib.sha256(text.encode("utf-8")).digest()

    def _load(self) -> None:
        data = self.path.read_bytes()
        pos = 0
        while pos < len(data):
            if pos + 36 > len(data):
                raise ProviderError(f"cache file {self.path} is truncated")
            key = data[pos : pos + 32]
            (dim,) = struct.unpack_from("<I", data, pos + 32)
            start = pos + 36
            end = start + 4 * dim
            if end > len(data):
                raise ProviderError(f"cache file {self.path} is truncated")
            if self._dim is None:
                self._dim = dim
            elif dim != self._dim:
                raise ProviderError(
                    f"cache file {self.path}: dimension mismatch {dim} vs {self._dim}"
                )
            vec = np.frombuffer(data[start:end], dtype="<f4").astype(np.float64)
            self._index[key] = vec
            pos = end

    def __len__(self) -> int:
        return len(self._index)

    def get(self, text: str) -> Optional[np.ndarray]:
        return self._index.get(self.key_for(text))

    def put(self, text: str, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        dim = values.shape[0]
        with self._lock:
            if self._dim is not None and dim != self._dim:
                raise ProviderError(
                    f"cache {self.path}: dimension mismatch {dim} vs existing {self._dim}"
                )
            key = self.key_for(text)
            if key in self._index:
                return
            self._dim = dim
            self._index[key] = values
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("ab") as fh:
                fh.write(key)
                fh.write(struct.pack("<I", dim))
                fh.write(values.astype("<f4").tobytes())


def _cache_filename(model_id: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9._-]+", "_", model_id)
    return f"{safe}.embcache"


# ---------------------------------------------------------------------------
# Clients
# ---------------------------------------------------------------------------


def _require_api_key(config: ProviderConfig) -> Optional[str]:
    if config.is_mock:
        return None
    if not config.api_key_env:
        return None
    key = os.environ.get(config.api_key_env)
    if not key:
        raise ConfigurationError(
            f"environment variable {config.api_key_env!r} is not set for "
            f"provider {config.model_id!r}"
        )
    return key


class _RetryingTransport:
    """Shared retry/backoff wrapper around a request callable."""

    def __init__(self, config: ProviderConfig, sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.sleep = sleep
        self.retries_logged = 0

    def run(self, fn: Callable[[], object], describe: str) -> object:
        last_exc: Optional[Exception] = None
        for attempt in range(self.config.max_retries + 1):
            try:
                return fn()
            except (ProviderError, ConfigurationError):
                raise
            except Exception as exc:  # transport-level failure: retry
                last_exc = exc
                if attempt < self.config.max_retries:
                    delay = self.config.backoff * (2.0**attempt)
                    self.retries_logged += 1
                    logger.warning(
                        "%s failed (%s); retry %d/%d in %.2fs",
                        describe,
                        exc,
                        attempt + 1,
                        self.config.max_retries,
                        delay,
                    )
                    self.sleep(delay)
        raise ProviderError(f"{describe} failed after retries: {last_exc}")


class EmbeddingClient:
    """Batching, caching, retrying client for one embedding provider."""

    def __init__(
        self,
        config: ProviderConfig,
        *,
        cache_dir: str | Path | None = None,
        transport: Optional[Callable[[list[str]], list[list[float]]]] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if config.kind != EMBEDDING:
            raise ConfigurationError(
                f"EmbeddingClient requires an embedding provider, got {config.kind!r}"
            )
        self.config = config
        self.request_count = 0
        self.embedded_text_count = 0
        self._retry = _RetryingTransport(config, sleep)
        self._transport = transport
        self._api_key = _require_api_key(config)
        self.cache = (
            EmbeddingCache(Path(cache_dir) / _cache_filename(config.model_id))
            if cache_dir is not None
            else None
        )
        self._memory: dict[bytes, np.ndarray] = {}

    @property
    def retries_logged(self) -> int:
        return self._retry.retries_logged

    def _lookup(self, text: str) -> Optional[np.ndarray]:
        key = EmbeddingCache.key_for(text)
        vec = self._memory.get(key)
        if vec is None and self.cache is not None:
            vec = self.cache.get(text)
            if vec is not None:
                self._memory[key] = vec
        return vec

    def _store(self, text: str, values: np.ndarray) -> None:
        self._memory[EmbeddingCache.key_for(text)] = values
        if self.cache is not None:
            self.cache.put(text, values)

    def _request_batch(self, batch: list[str]) -> list[np.ndarray]:
        def call() -> list[np.ndarray]:
            self.request_count += 1
            self.embedded_text_count += len(batch)
            if self._transport is not None:
                raw = self._transport(batch)
            elif self.config.is_mock:
                raw = [mock_embed_text(t, self.config.model_id) for t in batch]
            else:
                raw = self._http_embed(batch)
            if len(raw) != len(batch):
                raise RuntimeError(
                    f"provider returned {len(raw)} embeddings for {len(batch)} inputs"
                )
            return [normalize(np.asarray(v, dtype=np.float64)) for v in raw]

        result = self._retry.run(call, f"embedding batch of {len(batch)}")
        return result  # type: ignore[return-value]

    def _http_embed(self, batch: list[str]) -> list[list[float]]:
        import requests

        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        resp = requests.post(
            self.config.endpoint,
            json={"model": self.config.model_id, "input": batch},
            headers=headers,
            timeout=self.config.timeout,
        )
        resp.raise_for_status()
        payload = resp.json()
        rows = sorted(payload["data"], key=lambda item: item["index"])
        return [row["embedding"] for row in rows]

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        """Embed texts, preserving order; cached entries skip the backend."""
        if any(not isinstance(t, str) or not t for t in texts):
            raise ProviderError("embed_texts requires non-empty strings")
        results: list[Optional[np.ndarray]] = [self._lookup(t) for t in texts]
        missing: list[int] = []
        seen_text: dict[str, int] = {}
        for i, vec in enumerate(results):
            if vec is None and texts[i] not in seen_text:
                seen_text[texts[i]] = i
                missing.append(i)
        for start in range(0, len(missing), self.config.max_batch):
            chunk = missing[start : start + self.config.max_batch]
            batch = [texts[i] for i in chunk]
            try:
                vectors = self._request_batch(batch)
            except ProviderError as exc:
                exc.failed_indices = chunk
                raise
            for i, vec in zip(chunk, vectors):
                expected = self._dim()
                if expected is not None and vec.shape[0] != expected:
                    raise ProviderError(
                        f"model {self.config.model_id}: dimension {vec.shape[0]} "
                        f"conflicts with cached dimension {expected}"
                    )
                self._store(texts[i], vec)
                results[i] = vec
        # resolve duplicates of freshly embedded texts
        for i, vec in enumerate(results):
            if vec is None:
                results[i] = self._lookup(texts[i])
        out = []
        for i, vec in enumerate(results):
            if vec is None:
                raise ProviderError(f"no embedding produced for input {i}")
            out.append(EmbeddingVector(values=vec, model_id=self.config.model_id))
        return out

    def _dim(self) -> Optional[int]:
        if self.cache is not None and self.cache._dim is not None:
            return self.cache._dim
        if self._memory:
            return next(iter(self._memory.values())).shape[0]
        return None

    def embed_matrix(self, texts: list[str]) -> np.ndarray:
        """Embed texts and stack the unit vectors into an (n, d) matrix."""
        vectors = self.embed(texts)
        return np.vstack([v.values for v in vectors]) if vectors else np.zeros((0, 0))


def embed_texts(texts: list[str], config: ProviderConfig, **kwargs) -> list[EmbeddingVector]:
    """One-shot convenience wrapper over :class:`EmbeddingClient`."""
    return EmbeddingClient(config, **kwargs).embed(texts)


class ChatClient:
    """Retrying chat-completion client with deterministic mock dispatch."""

    def __init__(
        self,
        config: ProviderConfig,
        *,
        transport: Optional[Callable[[str], str]] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if config.kind != CHAT:
            raise ConfigurationError(
                f"ChatClient requires a chat provider, got {config.kind!r}"
            )
        self.config = config
        self.request_count = 0
        self._retry = _RetryingTransport(config, sleep)
        self._transport = transport
        self._api_key = _require_api_key(config)

    @property
    def retries_logged(self) -> int:
        return self._retry.retries_logged

    def _http_chat(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        resp = requests.post(
            self.config.endpoint,
            json={
                "model": self.config.model_id,
                "temperature": self.config.temperature,
                "messages": [{"role": "user", "content": prompt}],
            },
            headers=headers,
            timeout=self.config.timeout,
        )
        resp.raise_for_status()
        payload = resp.json()
        return payload["choices"][0]["message"]["content"]

    def complete(self, prompt: str) -> str:
        """Return the raw completion text for a prompt."""
        def call() -> str:
            self.request_count += 1
            if self._transport is not None:
                text = self._transport(prompt)
            elif self.config.is_mock:
                text = _mock_chat_dispatch(self.config.endpoint, prompt)
            else:
                text = self._http_chat(prompt)
            if not isinstance(text, str):
                raise RuntimeError("chat transport returned a non-string completion")
            return text

        text = self._retry.run(call, f"chat completion ({self.config.model_id})")
        if not str(text).strip():
            raise ProviderError(
                f"chat provider {self.config.model_id} returned an empty completion"
            )
        return str(text)


def chat_complete(prompt: str, config: ProviderConfig, **kwargs) -> str:
    """One-shot convenience wrapper over :class:`ChatClient`."""
    return ChatClient(config, **kwargs).complete(prompt)


# ---------------------------------------------------------------------------
# Provider roster configuration
# ---------------------------------------------------------------------------


@dataclass
class ProviderRoster:
    """The full set of providers one pipeline run needs, by role.

    ``embedding`` is the scoring/coverage ensemble (N >= 1).  The first
    embedding provider doubles as the clustering, augmentation, and
    consolidation model.  Chat roles: ``label`` writes cluster labels,
    ``judge`` scores taxonomies, ``test_a``/``test_b`` label test sentences.
    """

    embedding: tuple[ProviderConfig, ...]
    label: ProviderConfig
    judge: ProviderConfig
    test_a: ProviderConfig
    test_b: ProviderConfig

    def __post_init__(self) -> None:
        if not self.embedding:
            raise ConfigurationError("at least one embedding provider is required")
        for cfg in self.embedding:
            if cfg.kind != EMBEDDING:
                raise ConfigurationError("roster.embedding entries must be embeddings")
        for role_name in ("label", "judge", "test_a", "test_b"):
            cfg = getattr(self, role_name)
            if cfg.kind != CHAT:
                raise ConfigurationError(f"roster.{role_name} must be a chat provider")
        for role_name in ("judge", "test_a", "test_b"):
            cfg = getattr(self, role_name)
            if cfg.temperature != 0.0:
                raise ConfigurationError(
                    f"evaluation chat provider {role_name} must use temperature 0"
                )

    @property
    def primary_embedding(self) -> ProviderConfig:
        return self.embedding[0]


def mock_roster(n_embedding: int = 1) -> ProviderRoster:
    """Fully offline roster built from the deterministic mock providers."""
    embeds = tuple(
        mock_embedding_config(f"mock-embed-{chr(ord('a') + i)}") for i in range(n_embedding)
    )
    return ProviderRoster(
        embedding=embeds,
        label=mock_chat_config("summarize"),
        judge=mock_chat_config("judge"),
        test_a=mock_chat_config("label-a"),
        test_b=mock_chat_config("label-b"),
    )


def _config_from_dict(obj: dict, kind: str) -> ProviderConfig:
    known = {
        "endpoint",
        "model_id",
        "api_key_env",
        "max_batch",
        "temperature",
        "timeout",
        "max_retries",
        "backoff",
    }
    unknown = set(obj) - known
    if unknown:
        raise ConfigurationError(f"unknown provider config keys: {sorted(unknown)}")
    if "endpoint" not in obj or "model_id" not in obj:
        raise ConfigurationError("provider config requires 'endpoint' and 'model_id'")
    return ProviderConfig(kind=kind, **obj)


def load_roster(path: str | Path) -> ProviderRoster:
    """Read a provider roster from a JSON file.

    Layout::

        {
          "embedding": [{"endpoint": ..., "model_id": ..., ...}, ...],
          "chat": {
            "label":  {"endpoint": ..., "model_id": ...},
            "judge":  {...}, "test_a": {...}, "test_b": {...}
          }
        }

    A missing file section falls back to the corresponding mock provider, so
    a roster file of ``{}`` runs the pipeline fully offline.
    """
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read provider roster {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigurationError(f"provider roster {path} must be a JSON object")
    fallback = mock_roster()
    embedding = tuple(
        _config_from_dict(entry, EMBEDDING) for entry in obj.get("embedding", [])
    ) or fallback.embedding
    chat = obj.get("chat", {})
    roles = {}
    for role_name in ("label", "judge", "test_a", "test_b"):
        if role_name in chat:
            roles[role_name] = _config_from_dict(chat[role_name], CHAT)
        else:
            roles[role_name] = getattr(fallback, role_name)
    return ProviderRoster(embedding=embedding, **roles)


@dataclass
class Clients:
    """Instantiated clients for every roster role, sharing one cache dir."""

    embedding: tuple[EmbeddingClient, ...]
    label: ChatClient
    judge: ChatClient
    test_a: ChatClient
    test_b: ChatClient

    @property
    def primary_embedding(self) -> EmbeddingClient:
        """The first embedding client: used for clustering, augmentation,
        and label consolidation.  The full tuple is the scoring ensemble."""
        return self.embedding[0]

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(c.config.model_id for c in self.embedding) + tuple(
            getattr(self, role).config.model_id
            for role in ("label", "judge", "test_a", "test_b")
        )


def build_clients(
    roster: ProviderRoster, cache_dir: Optional[str | Path] = None
) -> Clients:
    """Instantiate one client per roster role.

    ``cache_dir`` enables the persistent embedding cache; chat calls are
    never cached.
    """
    return Clients(
        embedding=tuple(
            EmbeddingClient(cfg, cache_dir=cache_dir) for cfg in roster.embedding
        ),
        label=ChatClient(roster.label),
        judge=ChatClient(roster.judge),
        test_a=ChatClient(roster.test_a),
        test_b=ChatClient(roster.test_b),
    )
