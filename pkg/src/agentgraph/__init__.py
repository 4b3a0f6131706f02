"""Agent routing over a bipartite agent/tool knowledge graph."""

from .catalog import (
    AgentNode,
    CatalogError,
    CatalogValidationError,
    KnowledgeGraph,
    ManifestParseError,
    ToolNode,
    load_graph,
    load_manifest,
    owner_of,
    save_graph,
)
from .embedding import (
    EmbeddingVector,
    HashingProvider,
    RemoteProvider,
    cosine_similarity,
    embed_text,
    node_text,
)
from .evaluation import (
    EvalQuery,
    MetricsReport,
    evaluate_run,
    map_at_k,
    ndcg_at_k,
    recall_at_k,
    sweep_weights,
)
from .fusion import FusionConfig, ScoredCandidate, assign_base_ranks, rrf_score, type_weighted_rank, wrrf_score
from .index import Candidate, VectorIndex, build_index, load_container, save_container, top_n
from .retrieval import RetrievalRequest, RetrievalResult, retrieve_agents, retrieve_stepwise
from .router import Router, StrategyConfig

__all__ = [name for name in dir() if not name.startswith("_")]
