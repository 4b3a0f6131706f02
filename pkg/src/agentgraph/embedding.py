"""Text embedding: vectors, providers, cache, and the canonical node text.

Two providers share one contract (``model_id``, ``dim``, ``embed_batch``):

* :class:`HashingProvider` - offline signed feature hashing over tokens,
  a pure function of (text, dim, seed).
* :class:`RemoteProvider` - an OpenAI-compatible ``/embeddings`` client with
  batching, bounded retries, an in-flight cap and an on-disk cache.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import httpx
import numpy as np

from .catalog import AgentNode, ToolNode, atomic_write

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics."""
    return _TOKEN_RE.findall(text.lower())


class EmbeddingError(RuntimeError):
    """Provider failure. ``retryable`` separates transient from fatal errors."""

    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class DimensionMismatchError(ValueError):
    pass


class EmbeddingVector:
    """Fixed-length finite real vector tagged with the model that produced it."""

    __slots__ = ("values", "model_id")

    def __init__(self, values: Sequence[float] | np.ndarray, model_id: str):
        arr = np.array(values, dtype=np.float64).reshape(-1)
        if arr.size == 0:
            raise ValueError("embedding vector must have positive dimension")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding vector contains non-finite values")
        arr.setflags(write=False)
        self.values = arr
        self.model_id = model_id

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @classmethod
    def zeros(cls, dim: int, model_id: str) -> "EmbeddingVector":
        return cls(np.zeros(dim), model_id)

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self.model_id == other.model_id and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dim}, model_id={self.model_id!r})"


def check_compatible(u: EmbeddingVector, v: EmbeddingVector) -> None:
    if u.dim != v.dim or u.model_id != v.model_id:
        raise DimensionMismatchError(
            f"incompatible vectors: ({u.model_id!r}, dim {u.dim}) vs ({v.model_id!r}, dim {v.dim})"
        )


def dot_rows(matrix: np.ndarray, vec: np.ndarray) -> np.ndarray:
    # Row-wise multiply-then-sum: each row's result does not depend on the
    # other rows, so a one-row call is bitwise equal to the batched call.
    return (matrix * vec).sum(axis=-1)


def cosine_similarity(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine of the angle between two vectors; 0.0 if either is zero."""
    check_compatible(u, v)
    nu = float(np.sqrt(dot_rows(u.values, u.values)))
    nv = float(np.sqrt(dot_rows(v.values, v.values)))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(dot_rows(u.values, v.values)) / (nu * nv)


def node_text(
    node: AgentNode | ToolNode,
    *,
    include_schema: bool = False,
    type_prefix: bool = False,
) -> str:
    """Canonical text embedded for a node: ``"<name>: <description>"``."""
    desc = node.description.strip()
    text = f"{node.name}: {desc}" if desc else node.name
    if include_schema and isinstance(node, ToolNode) and node.schema_text:
        text = f"{text}\n{node.schema_text}"
    if type_prefix:
        text = f"{'tool' if isinstance(node, ToolNode) else 'agent'}: {text}"
    return text


class EmbeddingProvider(Protocol):
    model_id: str
    dim: int

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def embed_text(provider: EmbeddingProvider, text: str) -> EmbeddingVector:
    return provider.embed_batch([text])[0]


class HashingProvider:
    """Signed feature hashing of lowercase alphanumeric tokens, L2-normalized.

    Text without tokens maps to the zero vector.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self.model_id = f"hashing-d{dim}-s{seed}"
        self._salt = seed.to_bytes(8, "little", signed=True)

    def _vector(self, text: str) -> np.ndarray:
        out = np.zeros(self.dim)
        for tok in tokenize(text):
            h = hashlib.blake2b(tok.encode("utf-8"), digest_size=16, salt=self._salt).digest()
            bucket = int.from_bytes(h[:8], "little") % self.dim
            out[bucket] += 1.0 if h[8] & 1 else -1.0
        norm = np.sqrt(dot_rows(out, out))
        if norm > 0:
            out /= norm
        return out

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [EmbeddingVector(self._vector(t), self.model_id) for t in texts]


class EmbeddingCache:
    """Content-addressed vector store: one JSON file per (model_id, text).

    Writes go through an atomic rename, so readers never see partial files
    and concurrent writers of the same key are harmless.
    """

    def __init__(self, root: str | os.PathLike[str]):
        self.root = Path(root)

    @staticmethod
    def key(model_id: str, text: str) -> str:
        return hashlib.sha256(f"{model_id}\x00{text}".encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, model_id: str, text: str) -> EmbeddingVector | None:
        path = self._path(self.key(model_id, text))
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError) as exc:
            logger.warning("ignoring unreadable cache entry %s: %s", path, exc)
            return None
        return EmbeddingVector(doc["values"], doc["model_id"])

    def put(self, text: str, vec: EmbeddingVector) -> None:
        path = self._path(self.key(vec.model_id, text))
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"model_id": vec.model_id, "values": vec.values.tolist()}
        atomic_write(path, json.dumps(doc).encode("utf-8"))


@dataclass
class RetryPolicy:
    max_attempts: int = 5
    base_delay: float = 0.5
    max_delay: float = 8.0

    def delay(self, attempt: int) -> float:
        return min(self.max_delay, self.base_delay * (2 ** attempt))


class RemoteProvider:
    """Client for an OpenAI-compatible embeddings endpoint.

    The API key is read from the environment variable named by
    ``api_key_env``; it is never accepted directly.
    """

    def __init__(
        self,
        model: str,
        *,
        endpoint: str = "https://api.openai.com/v1/embeddings",
        api_key_env: str = "OPENAI_API_KEY",
        dim: int | None = None,
        cache_dir: str | os.PathLike[str] | None = None,
        batch_size: int = 64,
        timeout: float = 30.0,
        retry: RetryPolicy | None = None,
        max_in_flight: int = 4,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        if batch_size <= 0:
            raise ValueError("batch_size must be positive")
        self.model = model
        self.model_id = f"remote:{model}"
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.dim = dim
        self.cache = EmbeddingCache(cache_dir) if cache_dir is not None else None
        self.batch_size = batch_size
        self.retry = retry or RetryPolicy()
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise EmbeddingError(f"environment variable {self.api_key_env} is not set", retryable=False)
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def _request(self, texts: list[str]) -> list[list[float]]:
        payload = {"model": self.model, "input": texts}
        last: EmbeddingError | None = None
        for attempt in range(self.retry.max_attempts):
            try:
                with self._slots:
                    resp = self._client.post(self.endpoint, json=payload, headers=self._headers())
            except httpx.TransportError as exc:
                last = EmbeddingError(f"transport error: {exc}", retryable=True)
            else:
                if resp.status_code == 200:
                    return self._parse(resp, len(texts))
                retryable = resp.status_code == 429 or resp.status_code >= 500
                last = EmbeddingError(
                    f"embedding request failed with HTTP {resp.status_code}: {resp.text[:200]}",
                    retryable=retryable,
                )
                if not retryable:
                    raise last
            if attempt + 1 < self.retry.max_attempts:
                self._sleep(self.retry.delay(attempt))
        assert last is not None
        raise last

    def _parse(self, resp: httpx.Response, expected: int) -> list[list[float]]:
        try:
            data = sorted(resp.json()["data"], key=lambda d: d["index"])
            rows = [d["embedding"] for d in data]
        except (KeyError, TypeError, ValueError) as exc:
            raise EmbeddingError(f"malformed embedding response: {exc}") from exc
        if len(rows) != expected:
            raise EmbeddingError(f"expected {expected} embeddings, got {len(rows)}")
        for row in rows:
            if self.dim is None:
                self.dim = len(row)
            if len(row) != self.dim:
                raise DimensionMismatchError(f"response dimension {len(row)} != expected {self.dim}")
        return rows

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        out: list[EmbeddingVector | None] = [None] * len(texts)
        todo: list[int] = []
        for i, text in enumerate(texts):
            if not text.strip():
                continue
            cached = self.cache.get(self.model_id, text) if self.cache else None
            if cached is not None:
                if self.dim is None:
                    self.dim = cached.dim
                elif cached.dim != self.dim:
                    raise DimensionMismatchError(f"cached dimension {cached.dim} != expected {self.dim}")
                out[i] = cached
            else:
                todo.append(i)
        for start in range(0, len(todo), self.batch_size):
            chunk = todo[start : start + self.batch_size]
            rows = self._request([texts[i] for i in chunk])
            for i, row in zip(chunk, rows):
                vec = EmbeddingVector(row, self.model_id)
                if self.cache:
                    self.cache.put(texts[i], vec)
                out[i] = vec
        for i, text in enumerate(texts):
            if out[i] is None:
                if self.dim is None:
                    raise EmbeddingError("cannot build an empty-text vector before the dimension is known")
                out[i] = EmbeddingVector.zeros(self.dim, self.model_id)
        return out  # type: ignore[return-value]

    def close(self) -> None:
        self._client.close()
