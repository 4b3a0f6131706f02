"""Ranking metrics, benchmark datasets, evaluation runs and the weight sweep."""

from __future__ import annotations

import json
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Literal, Mapping, Sequence

from .catalog import KnowledgeGraph
from .fusion import FusionConfig
from .retrieval import default_n, union_hits
from .router import Router, Strategy, StrategyConfig

Granularity = Literal["per_step", "per_query_union", "direct"]
GRANULARITIES: tuple[str, ...] = ("per_step", "per_query_union", "direct")
DEFAULT_KS = (1, 3, 5)

# Default (alpha_agent, alpha_tool) grid for the weight sweep.
WEIGHT_GRID: tuple[tuple[float, float], ...] = (
    (1.0, 3.0),
    (1.0, 2.0),
    (1.0, 1.5),
    (1.0, 1.0),
    (1.5, 1.0),
    (2.0, 1.0),
    (3.0, 1.0),
)

# Comparison strategies that reconstruct an underspecified method; the label
# is written into every report that uses them.
RECONSTRUCTIONS = {
    "agent-only": "reconstruction: dense retrieval over agent names and descriptions only",
    "wrrf": "reconstruction: weighted RRF over the per-corpus rank lists, no joint ranking",
}


# -- metrics -----------------------------------------------------------------


def _check(relevant: Iterable[str], k: int) -> set[str]:
    rel = set(relevant)
    if not rel:
        raise ValueError("relevant set is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    return rel


def _hits(retrieved: Sequence[str], rel: set[str], k: int) -> list[bool]:
    # A repeated item only counts at its first position.
    seen: set[str] = set()
    out = []
    for item in retrieved[:k]:
        out.append(item in rel and item not in seen)
        seen.add(item)
    return out


def recall_at_k(retrieved: Sequence[str], relevant: Iterable[str], k: int) -> float:
    rel = _check(relevant, k)
    return len(set(retrieved[:k]) & rel) / len(rel)


def map_at_k(retrieved: Sequence[str], relevant: Iterable[str], k: int) -> float:
    """AP@k, normalized by min(|relevant|, k). mAP is its mean over queries."""
    rel = _check(relevant, k)
    total = 0.0
    found = 0
    for i, hit in enumerate(_hits(retrieved, rel, k), start=1):
        if hit:
            found += 1
            total += found / i
    return total / min(len(rel), k)


def ndcg_at_k(retrieved: Sequence[str], relevant: Iterable[str], k: int) -> float:
    """Binary-gain nDCG@k."""
    rel = _check(relevant, k)
    dcg = sum(1.0 / math.log2(i + 1) for i, hit in enumerate(_hits(retrieved, rel, k), start=1) if hit)
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, min(len(rel), k) + 1))
    return dcg / idcg


METRICS = {"recall": recall_at_k, "map": map_at_k, "ndcg": ndcg_at_k}


# -- datasets ----------------------------------------------------------------


@dataclass(frozen=True)
class EvalQuery:
    id: str
    question: str
    steps: tuple[str, ...]
    relevant_agents: frozenset[str]
    relevant_agents_per_step: tuple[frozenset[str], ...] | None = None

    def __post_init__(self) -> None:
        if not self.relevant_agents:
            raise ValueError(f"query {self.id!r}: relevant_agents is empty")
        if self.relevant_agents_per_step is not None and len(self.relevant_agents_per_step) != len(self.steps):
            raise ValueError(f"query {self.id!r}: relevant_agents_per_step does not match steps")

    def step_truth(self, i: int) -> frozenset[str]:
        if self.relevant_agents_per_step is not None and self.relevant_agents_per_step[i]:
            return self.relevant_agents_per_step[i]
        return self.relevant_agents


def _resolve_agent(graph: KnowledgeGraph, ref: str, qid: str) -> str:
    if graph.has_agent(ref):
        return ref
    for a in graph.agents:
        if a.name == ref:
            return a.id
    lowered = ref.strip().lower()
    for a in graph.agents:
        if a.name.lower() == lowered:
            return a.id
    raise ValueError(f"query {qid!r}: agent {ref!r} is not in the catalog")


def query_from_record(rec: Mapping[str, Any], graph: KnowledgeGraph | None = None) -> EvalQuery:
    qid = str(rec["id"])

    def res(refs: Iterable[str]) -> frozenset[str]:
        refs = list(refs)
        if graph is None:
            return frozenset(refs)
        return frozenset(_resolve_agent(graph, r, qid) for r in refs)

    per_step = rec.get("relevant_agents_per_step")
    return EvalQuery(
        id=qid,
        question=rec.get("question", ""),
        steps=tuple(rec.get("steps") or ()),
        relevant_agents=res(rec["relevant_agents"]),
        relevant_agents_per_step=tuple(res(s) for s in per_step) if per_step is not None else None,
    )


def load_dataset(path: str | os.PathLike[str], graph: KnowledgeGraph | None = None) -> list[EvalQuery]:
    """Read a dataset file (JSON list or JSON lines).

    With ``graph`` given, agent references are resolved to graph ids (exact
    id, then exact name, then case-insensitive name) and unknown agents
    raise ``ValueError``.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
        if isinstance(doc, list):
            records = doc
        elif "queries" in doc:
            records = doc["queries"]
        else:
            records = [doc]
    except json.JSONDecodeError:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
    return [query_from_record(r, graph) for r in records]


def query_to_record(q: EvalQuery) -> dict[str, Any]:
    rec: dict[str, Any] = {
        "id": q.id,
        "question": q.question,
        "steps": list(q.steps),
        "relevant_agents": sorted(q.relevant_agents),
    }
    if q.relevant_agents_per_step is not None:
        rec["relevant_agents_per_step"] = [sorted(s) for s in q.relevant_agents_per_step]
    return rec


_NUMBERING = re.compile(r"^\s*(?:step\s*)?\(?\d+[\.\):]?\s*", re.IGNORECASE)


def _split_lines(value: Any) -> list[str]:
    if value is None:
        return []
    if isinstance(value, list):
        return [str(v).strip() for v in value if str(v).strip()]
    lines = []
    for line in str(value).splitlines():
        line = _NUMBERING.sub("", line).strip()
        if line:
            lines.append(line)
    return lines


def _server_of(tool_line: str) -> str:
    # "server: tool", "server/tool", "server - tool" or a bare server name
    for sep in (":", "/", " - "):
        if sep in tool_line:
            return tool_line.split(sep, 1)[0].strip()
    return tool_line.strip()


def _first(rec: Mapping[str, Any], *keys: str) -> Any:
    for k in keys:
        if k in rec and rec[k] not in (None, ""):
            return rec[k]
    return None


def convert_livemcpbench(records: Iterable[Mapping[str, Any]]) -> list[dict[str, Any]]:
    """Map LiveMCPBench-style annotated questions into the dataset schema.

    Recognized fields (first match wins):

    * id: ``id``, ``task_id``, ``Question ID``
    * question: ``question``, ``Question``
    * steps: ``steps``, ``Steps`` or ``Annotator Metadata.Steps`` (a list, or
      numbered lines)
    * agents: ``relevant_agents``, ``mcp_servers``, ``servers``, else the
      server part of each ``Annotator Metadata.Tools`` line
      (``server: tool``, ``server/tool`` or ``server - tool``)
    """
    out = []
    for i, rec in enumerate(records):
        meta = rec.get("Annotator Metadata") or rec.get("annotator_metadata") or {}
        qid = _first(rec, "id", "task_id", "Question ID")
        question = _first(rec, "question", "Question") or ""
        steps = _split_lines(_first(rec, "steps", "Steps") or _first(meta, "Steps", "steps"))
        agents = _first(rec, "relevant_agents", "mcp_servers", "servers")
        if agents is None:
            tools = _split_lines(_first(rec, "tools", "Tools") or _first(meta, "Tools", "tools"))
            agents = [_server_of(t) for t in tools]
        agents = list(dict.fromkeys(a for a in _split_lines(agents) if a))
        if not agents:
            raise ValueError(f"record #{i}: no relevant agents found")
        new: dict[str, Any] = {
            "id": str(qid) if qid is not None else f"q{i:04d}",
            "question": question,
            "steps": steps,
            "relevant_agents": agents,
        }
        per_step = rec.get("relevant_agents_per_step")
        if per_step is not None:
            new["relevant_agents_per_step"] = per_step
        out.append(new)
    return out


# -- reports -----------------------------------------------------------------


@dataclass
class MetricsReport:
    ks: tuple[int, ...]
    metrics: dict[int, dict[str, float]]
    per_query: list[dict[str, Any]]
    provenance: dict[str, Any]
    metadata: dict[str, Any]

    def value(self, metric: str, k: int) -> float:
        return self.metrics[k][metric]

    def rows(self) -> list[dict[str, Any]]:
        label = self.metadata.get("label", self.metadata.get("strategy"))
        return [
            {"strategy": label, "k": k, **{m: self.metrics[k][m] for m in METRICS}}
            for k in self.ks
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "ks": list(self.ks),
            "metrics": {str(k): v for k, v in self.metrics.items()},
            "per_query": self.per_query,
            "provenance": self.provenance,
            "metadata": self.metadata,
        }


def format_table(rows: Sequence[Mapping[str, Any]], columns: Sequence[str] | None = None) -> str:
    """Plain fixed-width text table."""
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())

    def fmt(v: Any) -> str:
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    cells = [[fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[j]) for row in cells)) for j, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs) if xs else 0.0


def _score(retrieved: Sequence[str], relevant: frozenset[str], k: int) -> dict[str, float]:
    return {m: f(retrieved, relevant, k) for m, f in METRICS.items()}


def _evaluate_query(
    strategy: Strategy, q: EvalQuery, granularity: str, ks: Sequence[int]
) -> tuple[dict[str, Any], dict[str, int]]:
    per_k: dict[int, dict[str, float]] = {}
    retrieved_out: dict[int, Any] = {}
    prov = {"agent": 0, "tool": 0, "none": 0}
    kmax = max(ks)
    for k in ks:
        if granularity == "direct":
            res = strategy(q.question, k)
            per_k[k] = _score(res.agent_ids, q.relevant_agents, k)
            retrieved_out[k] = res.agent_ids
            step_results = [res]
        else:
            if not q.steps:
                raise ValueError(f"query {q.id!r} has no steps; step-wise evaluation needs them")
            step_results = [strategy(s, k) for s in q.steps]
            if granularity == "per_step":
                scores = [_score(r.agent_ids, q.step_truth(i), k) for i, r in enumerate(step_results)]
                per_k[k] = {m: _mean([s[m] for s in scores]) for m in METRICS}
                retrieved_out[k] = [r.agent_ids for r in step_results]
            else:
                union = [h.agent_id for h in union_hits([r.agents for r in step_results], k)]
                per_k[k] = _score(union, q.relevant_agents, k)
                retrieved_out[k] = union
        if k == kmax:
            for r in step_results:
                for h in r.agents:
                    prov[h.via or "none"] += 1
    row = {
        "id": q.id,
        "metrics": {str(k): v for k, v in per_k.items()},
        "retrieved": {str(k): v for k, v in retrieved_out.items()},
    }
    return row, prov


def evaluate_run(
    router: Router | None,
    dataset: Sequence[EvalQuery],
    strategy: StrategyConfig | Strategy = StrategyConfig(),
    granularity: Granularity = "per_step",
    *,
    ks: Sequence[int] = DEFAULT_KS,
    workers: int = 1,
    label: str | None = None,
) -> MetricsReport:
    """Run one strategy over a dataset and aggregate metrics per K.

    Every K is a separate retrieval at that K with a fixed per-corpus
    cutoff N, so results never depend on evaluation order. Aggregates are
    the mean of per-query values; in ``per_step`` mode a query's value is
    the mean over its steps.
    """
    if granularity not in GRANULARITIES:
        raise ValueError(f"unknown granularity {granularity!r}")
    if not dataset:
        raise ValueError("dataset is empty")
    ks = tuple(sorted(set(ks)))
    meta: dict[str, Any] = {"granularity": granularity, "ks": list(ks), "num_queries": len(dataset)}
    if isinstance(strategy, StrategyConfig):
        if router is None:
            raise ValueError("a router is required for a named strategy")
        cfg = strategy
        if cfg.n is None:
            cfg = replace(cfg, n=default_n(max(ks)))
        run = router.strategy(cfg)
        meta.update(
            strategy=cfg.name,
            fusion=asdict(cfg.fusion),
            n=cfg.n,
            provider_model=router.model_id,
            index_version=router.version,
            text_options=asdict(router.text_options),
            consolidation_tie_break="similarity desc, tool before agent, ingestion order",
            step_union_order="step order, then rank; first occurrence wins",
        )
        if cfg.name == "bm25":
            meta.update(bm25_corpus=cfg.bm25_corpus, bm25_k1=1.2, bm25_b=0.75)
        if cfg.name in RECONSTRUCTIONS:
            meta["reconstruction"] = RECONSTRUCTIONS[cfg.name]
    else:
        run = strategy
        meta["strategy"] = getattr(strategy, "__name__", "custom")
    meta["label"] = label or meta["strategy"]

    if router is not None:
        for q in dataset:
            for a in q.relevant_agents:
                if not router.graph.has_agent(a):
                    raise ValueError(f"query {q.id!r}: agent {a!r} is not in the catalog")

    def one(q: EvalQuery):
        return _evaluate_query(run, q, granularity, ks)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, dataset))
    else:
        results = [one(q) for q in dataset]

    per_query = [r for r, _ in results]
    counts = {"agent": 0, "tool": 0, "none": 0}
    for _, p in results:
        for key, v in p.items():
            counts[key] += v
    total = sum(counts.values())
    provenance = {
        "k": max(ks),
        "counts": counts,
        "agent_fraction": counts["agent"] / total if total else 0.0,
        "tool_fraction": counts["tool"] / total if total else 0.0,
    }
    metrics = {
        k: {m: _mean([row["metrics"][str(k)][m] for row in per_query]) for m in METRICS} for k in ks
    }
    return MetricsReport(ks, metrics, per_query, provenance, meta)


@dataclass
class SweepResult:
    grid: list[tuple[float, float]]
    graph: list[MetricsReport]
    wrrf: list[MetricsReport]
    metadata: dict[str, Any] = field(default_factory=dict)

    def table(self, k: int = 5) -> list[dict[str, Any]]:
        rows = []
        for (aa, at), g, w in zip(self.grid, self.graph, self.wrrf):
            for name, rep in (("graph", g), ("wrrf", w)):
                rows.append(
                    {
                        "alpha_agent": aa,
                        "alpha_tool": at,
                        "strategy": name,
                        **{f"{m}@{k}": rep.value(m, k) for m in METRICS},
                    }
                )
        return rows

    def series(self, metric: str = "recall", k: int = 5) -> dict[str, list[float]]:
        """Per-ratio metric series for plotting, one list per strategy."""
        return {
            "ratio": [f"{aa:g}:{at:g}" for aa, at in self.grid],
            "graph": [r.value(metric, k) for r in self.graph],
            "wrrf": [r.value(metric, k) for r in self.wrrf],
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "grid": [list(g) for g in self.grid],
            "graph": [r.to_dict() for r in self.graph],
            "wrrf": [r.to_dict() for r in self.wrrf],
            "metadata": self.metadata,
        }


def sweep_weights(
    router: Router,
    dataset: Sequence[EvalQuery],
    grid: Sequence[tuple[float, float]] = WEIGHT_GRID,
    base: StrategyConfig = StrategyConfig(),
    granularity: Granularity = "per_step",
    *,
    ks: Sequence[int] = DEFAULT_KS,
    workers: int = 1,
) -> SweepResult:
    """Evaluate the type-weighted graph strategy and standard weighted RRF at
    every (alpha_agent, alpha_tool) grid point."""
    if not grid:
        raise ValueError("weight grid is empty")
    graph_reports, wrrf_reports = [], []
    for aa, at in grid:
        fusion = FusionConfig(k=base.fusion.k, alpha_agent=aa, alpha_tool=at,
                              normalize_per_corpus=base.fusion.normalize_per_corpus)
        for name, bucket in (("graph", graph_reports), ("wrrf", wrrf_reports)):
            cfg = replace(base, name=name, fusion=fusion)
            bucket.append(
                evaluate_run(router, dataset, cfg, granularity, ks=ks, workers=workers,
                             label=f"{name}({aa:g},{at:g})")
            )
    return SweepResult(list(map(tuple, grid)), graph_reports, wrrf_reports,
                       {"granularity": granularity, "rrf_k": base.fusion.k, "provider_model": router.model_id})
