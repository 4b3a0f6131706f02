"""Reference retrievers: Okapi BM25, agent-only dense, tool-only dense, and
standard weighted RRF over the two per-corpus rank lists."""

from __future__ import annotations

import functools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .catalog import KnowledgeGraph, NodeType, owner_of
from .embedding import EmbeddingVector, node_text, tokenize
from .fusion import FusionConfig, ScoredCandidate, scores_tie, wrrf_score
from .index import TextOptions, VectorIndex, top_n
from .retrieval import AgentHit, default_n, traverse

Bm25Corpus = Literal["agent", "tool", "both"]


@dataclass(frozen=True)
class Bm25Index:
    node_ids: tuple[str, ...]
    node_types: tuple[NodeType, ...]
    term_freqs: tuple[Counter, ...]
    doc_lengths: tuple[int, ...]
    avg_doc_length: float
    doc_freqs: dict[str, int]
    k1: float = 1.2
    b: float = 0.75

    def __len__(self) -> int:
        return len(self.node_ids)

    def idf(self, term: str) -> float:
        # Smoothed Okapi idf; strictly positive, so scores are >= 0.
        n = self.doc_freqs.get(term, 0)
        return math.log((len(self.node_ids) - n + 0.5) / (n + 0.5) + 1.0)


def build_bm25_from_texts(
    docs: list[tuple[str, NodeType, str]], k1: float = 1.2, b: float = 0.75
) -> Bm25Index:
    tfs = tuple(Counter(tokenize(text)) for _, _, text in docs)
    lengths = tuple(sum(tf.values()) for tf in tfs)
    df: Counter = Counter()
    for tf in tfs:
        df.update(tf.keys())
    return Bm25Index(
        node_ids=tuple(d[0] for d in docs),
        node_types=tuple(d[1] for d in docs),
        term_freqs=tfs,
        doc_lengths=lengths,
        avg_doc_length=(sum(lengths) / len(lengths)) if lengths else 0.0,
        doc_freqs=dict(df),
        k1=k1,
        b=b,
    )


def build_bm25(
    graph: KnowledgeGraph,
    corpus: Bm25Corpus = "agent",
    *,
    k1: float = 1.2,
    b: float = 0.75,
    options: TextOptions = TextOptions(),
) -> Bm25Index:
    """Index node texts; agents first, then tools, each in ingestion order."""
    docs: list[tuple[str, NodeType, str]] = []
    if corpus in ("agent", "both"):
        docs += [(a.id, "agent", node_text(a, type_prefix=options.type_prefix)) for a in graph.agents]
    if corpus in ("tool", "both"):
        docs += [
            (t.id, "tool", node_text(t, include_schema=options.include_schema, type_prefix=options.type_prefix))
            for t in graph.tools
        ]
    if corpus not in ("agent", "tool", "both"):
        raise ValueError(f"unknown BM25 corpus {corpus!r}")
    return build_bm25_from_texts(docs, k1, b)


def bm25_scores(index: Bm25Index, query: str) -> np.ndarray:
    """Okapi BM25 score of every document; repeated query terms count again."""
    scores = np.zeros(len(index))
    terms = tokenize(query)
    if not terms or not len(index):
        return scores
    avgdl = index.avg_doc_length or 1.0
    for i, tf in enumerate(index.term_freqs):
        norm = index.k1 * (1.0 - index.b + index.b * index.doc_lengths[i] / avgdl)
        s = 0.0
        for t in terms:
            f = tf.get(t, 0)
            if f:
                s += index.idf(t) * f * (index.k1 + 1.0) / (f + norm)
        scores[i] = s
    return scores


def bm25_top_k(index: Bm25Index, query: str, k: int) -> list[tuple[str, float]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = bm25_scores(index, query)
    order = np.argsort(-scores, kind="stable")[:k]
    return [(index.node_ids[i], float(scores[i])) for i in order.tolist()]


def bm25_retrieve(index: Bm25Index, graph: KnowledgeGraph, query: str, k: int) -> list[str]:
    scores = bm25_scores(index, query)
    out: list[str] = []
    for i in np.argsort(-scores, kind="stable").tolist():
        a = owner_of(graph, index.node_ids[i], index.node_types[i])
        if a not in out:
            out.append(a)
            if len(out) == k:
                break
    return out


def agent_only_retrieve(agent_index: VectorIndex, query_vec: EmbeddingVector, k: int) -> list[str]:
    """Dense search over agent descriptions alone."""
    if not len(agent_index):
        return []
    return [c.node_id for c in top_n(agent_index, query_vec, k)]


def tool_only_retrieve(
    tool_index: VectorIndex,
    graph: KnowledgeGraph,
    query_vec: EmbeddingVector,
    k: int,
    n: int | None = None,
) -> list[str]:
    """Dense search over tools; owners of the top-N tools, deduplicated to K."""
    if not len(tool_index):
        return []
    out: list[str] = []
    for c in top_n(tool_index, query_vec, n or default_n(k)):
        a = graph.tool(c.node_id).parent_agent_id
        if a not in out:
            out.append(a)
            if len(out) == k:
                break
    return out


def _cmp_wrrf(a: ScoredCandidate, b: ScoredCandidate) -> int:
    if not scores_tie(a.fused_score, b.fused_score):
        return -1 if a.fused_score > b.fused_score else 1
    ka = (a.corpus_rank, 0 if a.node_type == "tool" else 1, a.ingestion_ordinal)
    kb = (b.corpus_rank, 0 if b.node_type == "tool" else 1, b.ingestion_ordinal)
    return (ka > kb) - (ka < kb)


def standard_wrrf_rank(tool_list, agent_list, cfg: FusionConfig) -> list[ScoredCandidate]:
    """Score each entity with weighted RRF over its own corpus rank list."""
    scored = [
        ScoredCandidate(
            node_id=c.node_id,
            node_type=c.node_type,
            similarity=c.similarity,
            corpus_rank=c.corpus_rank,
            ingestion_ordinal=c.ingestion_ordinal,
            fused_score=wrrf_score([(c.corpus_rank, cfg.alpha(c.node_type))], cfg.k),
        )
        for c in [*tool_list, *agent_list]
    ]
    scored.sort(key=functools.cmp_to_key(_cmp_wrrf))
    return scored


def standard_wrrf_retrieve(
    tool_index: VectorIndex,
    agent_index: VectorIndex,
    graph: KnowledgeGraph,
    query_vec: EmbeddingVector,
    cfg: FusionConfig,
    k: int,
    n: int | None = None,
) -> list[AgentHit]:
    n = n or default_n(k)
    fused = standard_wrrf_rank(top_n(tool_index, query_vec, n), top_n(agent_index, query_vec, n), cfg)
    return traverse(graph, fused, k)
