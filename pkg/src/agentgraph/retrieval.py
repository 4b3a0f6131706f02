"""Graph retrieval: dual top-N search, type-weighted fusion, tool->agent traversal."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Sequence

from .catalog import KnowledgeGraph, owner_of
from .embedding import EmbeddingProvider, EmbeddingVector, embed_text
from .fusion import FusionConfig, ScoredCandidate, type_weighted_rank
from .index import VectorIndex, top_n

Mode = Literal["direct", "stepwise"]


def default_n(k: int) -> int:
    """Per-corpus cutoff used when the caller does not set one."""
    return max(50, 10 * k)


@dataclass(frozen=True)
class RetrievalRequest:
    query_text: str = ""
    k: int = 5
    n: int | None = None
    fusion: FusionConfig = field(default_factory=FusionConfig)
    mode: Mode = "direct"
    steps: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n is None:
            object.__setattr__(self, "n", default_n(self.k))
        if self.n < self.k:
            raise ValueError(f"n ({self.n}) must be >= k ({self.k})")
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.mode not in ("direct", "stepwise"):
            raise ValueError(f"mode must be 'direct' or 'stepwise', got {self.mode!r}")
        if self.mode == "stepwise" and not self.steps:
            raise ValueError("stepwise mode needs at least one step")


@dataclass(frozen=True)
class AgentHit:
    agent_id: str
    # The fused entry that first mapped to this agent; None for baselines
    # that do not fuse.
    evidence: ScoredCandidate | None = None

    @property
    def via(self) -> str | None:
        return self.evidence.node_type if self.evidence is not None else None


@dataclass
class RetrievalResult:
    agents: list[AgentHit]
    per_step: list[list[str]] | None = None
    empty_catalog: bool = False
    per_step_hits: list[list[AgentHit]] | None = field(default=None, repr=False)

    @property
    def agent_ids(self) -> list[str]:
        return [h.agent_id for h in self.agents]

    def provenance(self) -> dict[str, int]:
        """Count result agents by the node type of their evidence."""
        hits = self.agents
        if self.per_step_hits is not None:
            hits = [h for step in self.per_step_hits for h in step]
        counts = {"agent": 0, "tool": 0, "none": 0}
        for h in hits:
            counts[h.via or "none"] += 1
        return counts


def traverse(graph: KnowledgeGraph, fused: Iterable[ScoredCandidate], k: int) -> list[AgentHit]:
    """Walk fused entries in order, map each to its agent, keep first K unique."""
    out: list[AgentHit] = []
    seen: set[str] = set()
    for e in fused:
        a = owner_of(graph, e.node_id, e.node_type)
        if a not in seen:
            seen.add(a)
            out.append(AgentHit(a, e))
            if len(out) == k:
                break
    return out


def fuse(
    tool_list: Sequence, agent_list: Sequence, fusion: FusionConfig
) -> list[ScoredCandidate]:
    return type_weighted_rank([*tool_list, *agent_list], fusion)


def retrieve_with_vector(
    graph: KnowledgeGraph,
    tool_index: VectorIndex,
    agent_index: VectorIndex,
    query_vec: EmbeddingVector,
    k: int,
    n: int,
    fusion: FusionConfig,
) -> RetrievalResult:
    if not graph.agents:
        return RetrievalResult([], empty_catalog=True)
    tool_list = top_n(tool_index, query_vec, n)
    agent_list = top_n(agent_index, query_vec, n)
    fused = fuse(tool_list, agent_list, fusion)
    return RetrievalResult(traverse(graph, fused, k))


def retrieve_agents(
    graph: KnowledgeGraph,
    tool_index: VectorIndex,
    agent_index: VectorIndex,
    request: RetrievalRequest,
    provider: EmbeddingProvider,
) -> RetrievalResult:
    """Route one request to at most K agents.

    Stepwise requests are delegated to :func:`retrieve_stepwise`.
    """
    if request.mode == "stepwise":
        return retrieve_stepwise(graph, tool_index, agent_index, request, provider)
    if not graph.agents:
        return RetrievalResult([], empty_catalog=True)
    q = embed_text(provider, request.query_text)
    return retrieve_with_vector(graph, tool_index, agent_index, q, request.k, request.n, request.fusion)


def union_hits(step_hits: Sequence[Sequence[AgentHit]], k: int) -> list[AgentHit]:
    """Order-preserving union across steps (step order, then rank), first K."""
    out: list[AgentHit] = []
    seen: set[str] = set()
    for hits in step_hits:
        for h in hits:
            if h.agent_id not in seen:
                seen.add(h.agent_id)
                out.append(h)
                if len(out) == k:
                    return out
    return out


def retrieve_stepwise(
    graph: KnowledgeGraph,
    tool_index: VectorIndex,
    agent_index: VectorIndex,
    request: RetrievalRequest,
    provider: EmbeddingProvider,
    workers: int = 1,
) -> RetrievalResult:
    if not request.steps:
        raise ValueError("stepwise retrieval needs at least one step")
    if not graph.agents:
        return RetrievalResult([], per_step=[[] for _ in request.steps], empty_catalog=True, per_step_hits=[])

    def one(step: str) -> RetrievalResult:
        sub = replace(request, query_text=step, mode="direct", steps=())
        return retrieve_agents(graph, tool_index, agent_index, sub, provider)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, request.steps))
    else:
        results = [one(s) for s in request.steps]
    step_hits = [r.agents for r in results]
    return RetrievalResult(
        agents=union_hits(step_hits, request.k),
        per_step=[r.agent_ids for r in results],
        per_step_hits=step_hits,
    )
