"""A loaded catalog + indexes + provider, exposing every retrieval strategy."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Literal

from .baselines import (
    Bm25Corpus,
    Bm25Index,
    agent_only_retrieve,
    bm25_retrieve,
    build_bm25,
    standard_wrrf_retrieve,
    tool_only_retrieve,
)
from .catalog import KnowledgeGraph
from .embedding import EmbeddingProvider, EmbeddingVector
from .fusion import FusionConfig
from .index import IndexContainer, TextOptions, VectorIndex, build_index
from .retrieval import (
    AgentHit,
    RetrievalRequest,
    RetrievalResult,
    default_n,
    retrieve_with_vector,
    union_hits,
)

StrategyName = Literal["graph", "agent-only", "tool-only", "bm25", "wrrf"]
STRATEGIES: tuple[str, ...] = ("graph", "agent-only", "tool-only", "bm25", "wrrf")

# A strategy maps (query text, K) to a ranked agent result.
Strategy = Callable[[str, int], RetrievalResult]


@dataclass(frozen=True)
class StrategyConfig:
    name: str = "graph"
    fusion: FusionConfig = field(default_factory=FusionConfig)
    # Per-corpus cutoff; None means default_n(K) at call time.
    n: int | None = None
    bm25_corpus: Bm25Corpus = "agent"

    def __post_init__(self) -> None:
        if self.name not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.name!r}; choose from {', '.join(STRATEGIES)}")


class Router:
    def __init__(
        self,
        graph: KnowledgeGraph,
        tool_index: VectorIndex,
        agent_index: VectorIndex,
        provider: EmbeddingProvider,
        *,
        text_options: TextOptions = TextOptions(),
        version: str = "",
    ):
        if tool_index.model_id != provider.model_id or agent_index.model_id != provider.model_id:
            raise ValueError(
                f"indexes built with {agent_index.model_id!r} cannot be queried with {provider.model_id!r}"
            )
        self.graph = graph
        self.tool_index = tool_index
        self.agent_index = agent_index
        self.provider = provider
        self.text_options = text_options
        self.version = version
        self._qcache: dict[str, EmbeddingVector] = {}
        self._bm25: dict[str, Bm25Index] = {}
        self._lock = threading.Lock()

    @classmethod
    def build(
        cls,
        graph: KnowledgeGraph,
        provider: EmbeddingProvider,
        *,
        text_options: TextOptions = TextOptions(),
        workers: int = 1,
    ) -> "Router":
        tools = build_index(graph, provider, "tool", options=text_options, workers=workers)
        agents = build_index(graph, provider, "agent", options=text_options, workers=workers)
        return cls(graph, tools, agents, provider, text_options=text_options)

    @classmethod
    def from_container(cls, container: IndexContainer, provider: EmbeddingProvider) -> "Router":
        return cls(
            container.graph,
            container.tool_index,
            container.agent_index,
            provider,
            text_options=container.text_options,
            version=container.version,
        )

    @property
    def model_id(self) -> str:
        return self.provider.model_id

    def embed_query(self, text: str) -> EmbeddingVector:
        with self._lock:
            hit = self._qcache.get(text)
        if hit is not None:
            return hit
        vec = self.provider.embed_batch([text])[0]
        with self._lock:
            self._qcache[text] = vec
        return vec

    def bm25_index(self, corpus: Bm25Corpus = "agent") -> Bm25Index:
        with self._lock:
            idx = self._bm25.get(corpus)
            if idx is None:
                idx = self._bm25[corpus] = build_bm25(self.graph, corpus, options=self.text_options)
            return idx

    # -- graph retrieval ----------------------------------------------------

    def retrieve(self, request: RetrievalRequest) -> RetrievalResult:
        """Route a request with the graph strategy (direct or stepwise)."""
        if request.mode == "stepwise":
            if not self.graph.agents:
                return RetrievalResult([], per_step=[[] for _ in request.steps], empty_catalog=True, per_step_hits=[])
            step_results = [self._graph(s, request.k, request.n, request.fusion) for s in request.steps]
            hits = [r.agents for r in step_results]
            return RetrievalResult(
                union_hits(hits, request.k), per_step=[r.agent_ids for r in step_results], per_step_hits=hits
            )
        return self._graph(request.query_text, request.k, request.n, request.fusion)

    def _graph(self, text: str, k: int, n: int | None, fusion: FusionConfig) -> RetrievalResult:
        if not self.graph.agents:
            return RetrievalResult([], empty_catalog=True)
        return retrieve_with_vector(
            self.graph, self.tool_index, self.agent_index, self.embed_query(text), k, n or default_n(k), fusion
        )

    # -- strategies ---------------------------------------------------------

    def strategy(self, cfg: StrategyConfig) -> Strategy:
        def wrap(ids: list[str]) -> RetrievalResult:
            return RetrievalResult([AgentHit(a) for a in ids], empty_catalog=not self.graph.agents)

        if cfg.name == "graph":
            return lambda text, k: self._graph(text, k, cfg.n, cfg.fusion)
        if cfg.name == "agent-only":
            return lambda text, k: wrap(agent_only_retrieve(self.agent_index, self.embed_query(text), k))
        if cfg.name == "tool-only":
            return lambda text, k: wrap(
                tool_only_retrieve(self.tool_index, self.graph, self.embed_query(text), k, cfg.n)
            )
        if cfg.name == "bm25":
            return lambda text, k: wrap(bm25_retrieve(self.bm25_index(cfg.bm25_corpus), self.graph, text, k))
        if cfg.name == "wrrf":
            return lambda text, k: RetrievalResult(
                standard_wrrf_retrieve(
                    self.tool_index, self.agent_index, self.graph, self.embed_query(text), cfg.fusion, k, cfg.n
                ),
                empty_catalog=not self.graph.agents,
            )
        raise ValueError(f"unknown strategy {cfg.name!r}")
