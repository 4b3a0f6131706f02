"""Exact per-corpus vector indexes and the on-disk index container."""

from __future__ import annotations

import base64
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .catalog import (
    GraphFormatError,
    KnowledgeGraph,
    NodeType,
    atomic_write,
    dump_json,
    graph_from_dict,
    graph_to_dict,
)
from .embedding import (
    DimensionMismatchError,
    EmbeddingError,
    EmbeddingProvider,
    EmbeddingVector,
    dot_rows,
    node_text,
)

CONTAINER_FORMAT_VERSION = 1


class IndexBuildError(RuntimeError):
    def __init__(self, message: str, node_ids: list[str]):
        super().__init__(message)
        self.node_ids = node_ids


class StaleIndexError(RuntimeError):
    """The container was built with a different embedding model."""


@dataclass(frozen=True)
class Candidate:
    node_id: str
    node_type: NodeType
    similarity: float
    corpus_rank: int
    ingestion_ordinal: int
    base_rank: int | None = None


@dataclass(frozen=True)
class TextOptions:
    """How node text is rendered before embedding."""

    include_schema: bool = False
    type_prefix: bool = False


@dataclass(eq=False)
class VectorIndex:
    corpus_type: NodeType
    node_ids: tuple[str, ...]
    matrix: np.ndarray
    model_id: str
    dim: int
    norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64).reshape(len(self.node_ids), self.dim)
        self.matrix.setflags(write=False)
        self.norms = np.sqrt(dot_rows(self.matrix, self.matrix))

    def __len__(self) -> int:
        return len(self.node_ids)

    @property
    def entries(self) -> list[tuple[str, EmbeddingVector]]:
        return [(nid, EmbeddingVector(row, self.model_id)) for nid, row in zip(self.node_ids, self.matrix)]

    def similarities(self, query_vec: EmbeddingVector) -> np.ndarray:
        """Cosine similarity of every entry to the query, in ingestion order."""
        if query_vec.dim != self.dim or query_vec.model_id != self.model_id:
            raise DimensionMismatchError(
                f"query ({query_vec.model_id!r}, dim {query_vec.dim}) does not match "
                f"{self.corpus_type} index ({self.model_id!r}, dim {self.dim})"
            )
        if not self.node_ids:
            return np.zeros(0)
        q = query_vec.values
        qn = float(np.sqrt(dot_rows(q, q)))
        dots = dot_rows(self.matrix, q)
        denom = self.norms * qn
        out = np.zeros(len(self.node_ids))
        nz = denom != 0.0
        out[nz] = dots[nz] / denom[nz]
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorIndex):
            return NotImplemented
        return (
            self.corpus_type == other.corpus_type
            and self.node_ids == other.node_ids
            and self.model_id == other.model_id
            and self.dim == other.dim
            and np.array_equal(self.matrix, other.matrix)
        )


def corpus_texts(graph: KnowledgeGraph, corpus_type: NodeType, options: TextOptions = TextOptions()) -> list[str]:
    nodes = graph.agents if corpus_type == "agent" else graph.tools
    return [node_text(n, include_schema=options.include_schema, type_prefix=options.type_prefix) for n in nodes]


def build_index(
    graph: KnowledgeGraph,
    provider: EmbeddingProvider,
    corpus_type: NodeType,
    *,
    options: TextOptions = TextOptions(),
    batch_size: int = 64,
    workers: int = 1,
) -> VectorIndex:
    """Embed one corpus of the graph. Entry order is ingestion order."""
    if corpus_type not in ("agent", "tool"):
        raise ValueError(f"corpus_type must be 'agent' or 'tool', got {corpus_type!r}")
    nodes = graph.agents if corpus_type == "agent" else graph.tools
    ids = [n.id for n in nodes]
    texts = corpus_texts(graph, corpus_type, options)
    batches = [(ids[i : i + batch_size], texts[i : i + batch_size]) for i in range(0, len(ids), batch_size)]

    def run(batch: tuple[list[str], list[str]]) -> list[EmbeddingVector]:
        bids, btexts = batch
        try:
            return provider.embed_batch(btexts)
        except (EmbeddingError, DimensionMismatchError) as exc:
            which = bids[0] if len(bids) == 1 else f"{bids[0]} .. {bids[-1]}"
            raise IndexBuildError(f"embedding failed for {corpus_type} node(s) {which}: {exc}", bids) from exc

    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, batches))
    else:
        results = [run(b) for b in batches]
    vectors = [v for chunk in results for v in chunk]

    dim = provider.dim
    if vectors:
        dim = vectors[0].dim
    if dim is None:
        raise IndexBuildError("provider dimension unknown for an empty corpus", [])
    matrix = np.array([v.values for v in vectors], dtype=np.float64).reshape(len(vectors), dim)
    return VectorIndex(corpus_type, tuple(ids), matrix, provider.model_id, dim)


def top_n(index: VectorIndex, query_vec: EmbeddingVector, n: int) -> list[Candidate]:
    """Top ``n`` entries by cosine similarity; ties go to the earlier-ingested node."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sims = index.similarities(query_vec)
    order = np.argsort(-sims, kind="stable")[:n]
    return [
        Candidate(
            node_id=index.node_ids[i],
            node_type=index.corpus_type,
            similarity=float(sims[i]),
            corpus_rank=rank,
            ingestion_ordinal=int(i),
        )
        for rank, i in enumerate(order.tolist(), start=1)
    ]


# -- container ---------------------------------------------------------------


def _encode_matrix(m: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(m, dtype="<f8").tobytes()).decode("ascii")


def _decode_matrix(s: str, rows: int, dim: int) -> np.ndarray:
    raw = base64.b64decode(s.encode("ascii"))
    return np.frombuffer(raw, dtype="<f8").reshape(rows, dim).astype(np.float64)


def _index_to_dict(index: VectorIndex) -> dict[str, Any]:
    return {
        "corpus_type": index.corpus_type,
        "node_ids": list(index.node_ids),
        "dim": index.dim,
        "model_id": index.model_id,
        "vectors_f8le_b64": _encode_matrix(index.matrix),
    }


def _index_from_dict(doc: dict[str, Any]) -> VectorIndex:
    ids = tuple(doc["node_ids"])
    dim = int(doc["dim"])
    return VectorIndex(doc["corpus_type"], ids, _decode_matrix(doc["vectors_f8le_b64"], len(ids), dim), doc["model_id"], dim)


@dataclass(eq=False)
class IndexContainer:
    graph: KnowledgeGraph
    tool_index: VectorIndex
    agent_index: VectorIndex
    text_options: TextOptions = TextOptions()
    version: str = ""

    @property
    def model_id(self) -> str:
        return self.agent_index.model_id


def _check_coverage(graph: KnowledgeGraph, index: VectorIndex) -> None:
    nodes = graph.agents if index.corpus_type == "agent" else graph.tools
    if tuple(n.id for n in nodes) != index.node_ids:
        raise GraphFormatError(f"{index.corpus_type} index does not cover the graph's {index.corpus_type} nodes")


def container_bytes(
    graph: KnowledgeGraph,
    tool_index: VectorIndex,
    agent_index: VectorIndex,
    text_options: TextOptions = TextOptions(),
) -> bytes:
    if tool_index.model_id != agent_index.model_id or tool_index.dim != agent_index.dim:
        raise ValueError("tool and agent indexes were built with different providers")
    if tool_index.corpus_type != "tool" or agent_index.corpus_type != "agent":
        raise ValueError("index corpus types are swapped")
    _check_coverage(graph, tool_index)
    _check_coverage(graph, agent_index)
    doc = {
        "format_version": CONTAINER_FORMAT_VERSION,
        "kind": "agentgraph-index",
        "model_id": agent_index.model_id,
        "dim": agent_index.dim,
        "text_options": {"include_schema": text_options.include_schema, "type_prefix": text_options.type_prefix},
        "graph": graph_to_dict(graph),
        "indexes": {"agent": _index_to_dict(agent_index), "tool": _index_to_dict(tool_index)},
    }
    return dump_json(doc)


def save_container(
    path: str | os.PathLike[str],
    graph: KnowledgeGraph,
    tool_index: VectorIndex,
    agent_index: VectorIndex,
    text_options: TextOptions = TextOptions(),
) -> str:
    """Write the container atomically; returns its version (content hash)."""
    data = container_bytes(graph, tool_index, agent_index, text_options)
    atomic_write(path, data)
    return hashlib.sha256(data).hexdigest()[:16]


def load_container(path: str | os.PathLike[str], expected_model_id: str | None = None) -> IndexContainer:
    data = Path(path).read_bytes()
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}: not an index container ({exc.msg})") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "agentgraph-index":
        raise GraphFormatError(f"{path}: not an index container")
    if doc.get("format_version") != CONTAINER_FORMAT_VERSION:
        raise GraphFormatError(
            f"{path}: container format version {doc.get('format_version')!r} is not supported "
            f"(expected {CONTAINER_FORMAT_VERSION})"
        )
    if expected_model_id is not None and doc["model_id"] != expected_model_id:
        raise StaleIndexError(
            f"index container was built with model {doc['model_id']!r} but the configured provider "
            f"is {expected_model_id!r}; rebuild the index"
        )
    graph = graph_from_dict(doc["graph"])
    try:
        agent_index = _index_from_dict(doc["indexes"]["agent"])
        tool_index = _index_from_dict(doc["indexes"]["tool"])
    except (KeyError, ValueError, TypeError) as exc:
        raise GraphFormatError(f"{path}: malformed index section ({exc})") from exc
    _check_coverage(graph, agent_index)
    _check_coverage(graph, tool_index)
    opts = doc.get("text_options") or {}
    return IndexContainer(
        graph,
        tool_index,
        agent_index,
        TextOptions(bool(opts.get("include_schema")), bool(opts.get("type_prefix"))),
        hashlib.sha256(data).hexdigest()[:16],
    )
