"""Run configuration and the query payload shared by the CLI and the service."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .embedding import EmbeddingProvider, HashingProvider, RemoteProvider
from .fusion import FusionConfig
from .index import TextOptions
from .retrieval import RetrievalRequest, RetrievalResult, union_hits
from .router import STRATEGIES, Router, StrategyConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    catalog: str | None = None
    index: str | None = None
    provider: str = "deterministic"
    dim: int = 256
    seed: int = 0
    model: str = "text-embedding-ada-002"
    endpoint: str = "https://api.openai.com/v1/embeddings"
    api_key_env: str = "OPENAI_API_KEY"
    cache_dir: str | None = None
    n: int | None = None
    k: int = 5
    fusion: FusionConfig = field(default_factory=FusionConfig)
    strategy: str = "graph"
    granularity: str = "per_step"
    bm25_corpus: str = "agent"
    include_schema: bool = False
    type_prefix: bool = False
    output: str | None = None

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError("--k must be >= 1")
        if self.n is not None and self.n < self.k:
            raise ConfigError(f"--n ({self.n}) must be >= --k ({self.k})")
        if self.provider not in ("deterministic", "remote"):
            raise ConfigError(f"unknown provider {self.provider!r}")
        if self.provider == "remote":
            if not self.endpoint:
                raise ConfigError("remote provider needs an endpoint")
            if not self.api_key_env:
                raise ConfigError("remote provider needs a credential environment variable name")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")

    @property
    def text_options(self) -> TextOptions:
        return TextOptions(self.include_schema, self.type_prefix)

    def index_path(self) -> Path:
        if self.index:
            return Path(self.index)
        if not self.catalog:
            raise ConfigError("either --index or --catalog is required")
        p = Path(self.catalog)
        return p.with_name(p.stem + ".index.json")

    def make_provider(self) -> EmbeddingProvider:
        if self.provider == "deterministic":
            return HashingProvider(self.dim, self.seed)
        cache = self.cache_dir or os.path.join(os.path.expanduser("~"), ".cache", "agentgraph")
        return RemoteProvider(self.model, endpoint=self.endpoint, api_key_env=self.api_key_env, cache_dir=cache)

    def strategy_config(self) -> StrategyConfig:
        return StrategyConfig(self.strategy, self.fusion, self.n, self.bm25_corpus)  # type: ignore[arg-type]


def request_from_payload(payload: Mapping[str, Any]) -> tuple[RetrievalRequest, str]:
    """Build a request (and strategy name) from a JSON-like payload."""
    try:
        fusion = FusionConfig(
            k=float(payload.get("rrf_k", 60.0)),
            alpha_agent=float(payload.get("alpha_agent", 1.0)),
            alpha_tool=float(payload.get("alpha_tool", 1.0)),
            normalize_per_corpus=bool(payload.get("normalize_per_corpus", False)),
        )
        steps = tuple(payload.get("steps") or ())
        mode = payload.get("mode") or ("stepwise" if steps else "direct")
        n = payload.get("n")
        req = RetrievalRequest(
            query_text=str(payload.get("query_text", "")),
            k=int(payload.get("k", 5)),
            n=int(n) if n is not None else None,
            fusion=fusion,
            mode=mode,
            steps=steps,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    strategy = payload.get("strategy", "graph")
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}")
    if req.mode == "direct" and not req.query_text.strip():
        raise ConfigError("query_text is required in direct mode")
    return req, strategy


def _hit_dict(router: Router, hit) -> dict[str, Any]:
    out: dict[str, Any] = {"agent_id": hit.agent_id, "name": router.graph.agent(hit.agent_id).name}
    e = hit.evidence
    if e is not None:
        out["evidence"] = {
            "node_id": e.node_id,
            "node_type": e.node_type,
            "similarity": e.similarity,
            "corpus_rank": e.corpus_rank,
            "base_rank": e.base_rank,
            "fused_score": e.fused_score,
        }
    else:
        out["evidence"] = None
    return out


def run_query(router: Router, request: RetrievalRequest, strategy: str = "graph") -> dict[str, Any]:
    """Execute a request and render the structured output record."""
    if strategy == "graph":
        result = router.retrieve(request)
    else:
        run = router.strategy(StrategyConfig(strategy, request.fusion, request.n))
        texts = request.steps if request.mode == "stepwise" else (request.query_text,)
        results = [run(t, request.k) for t in texts]
        if request.mode == "stepwise":
            hits = [r.agents for r in results]
            result = RetrievalResult(union_hits(hits, request.k), [r.agent_ids for r in results],
                                     results[0].empty_catalog, hits)
        else:
            result = results[0]
    return {
        "query_text": request.query_text,
        "mode": request.mode,
        "steps": list(request.steps),
        "strategy": strategy,
        "k": request.k,
        "n": request.n,
        "fusion": {"rrf_k": request.fusion.k, "alpha_agent": request.fusion.alpha_agent,
                   "alpha_tool": request.fusion.alpha_tool},
        "agents": [_hit_dict(router, h) for h in result.agents],
        "per_step": result.per_step,
        "empty_catalog": result.empty_catalog,
        "model_id": router.model_id,
        "index_version": router.version,
    }
