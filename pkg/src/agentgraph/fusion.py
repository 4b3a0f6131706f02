"""Reciprocal rank fusion: plain, weighted, and type-conditioned.

The type-conditioned variant scores each entity of a single merged list by
``alpha(type) / (k + r(e))`` where ``r(e)`` is the entity's global base rank
in that merged list. Because agents and tools share the denominator, the
relative order inside each node type never changes; only the interleaving
of the two types moves with the weights.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .index import Candidate

# Tie preference at consolidation when similarities are equal.
_TYPE_PREFERENCE = {"tool": 0, "agent": 1}

# Fused scores this close are ties. Exact ties are common (1.5/93 == 1/62)
# and rescaling the weights moves them by an ulp.
SCORE_REL_TOL = 1e-12


@dataclass(frozen=True)
class FusionConfig:
    k: float = 60.0
    alpha_agent: float = 1.0
    alpha_tool: float = 1.0
    # Min-max rescale each corpus's similarities before merging.
    normalize_per_corpus: bool = False

    def __post_init__(self) -> None:
        if not self.k > 0:
            raise ValueError(f"k must be > 0, got {self.k}")
        if self.alpha_agent < 0 or self.alpha_tool < 0:
            raise ValueError("type weights must be nonnegative")
        if self.alpha_agent == 0 and self.alpha_tool == 0:
            raise ValueError("at least one type weight must be positive")

    def alpha(self, node_type: str) -> float:
        return self.alpha_agent if node_type == "agent" else self.alpha_tool

    def scaled(self, c: float) -> "FusionConfig":
        return replace(self, alpha_agent=self.alpha_agent * c, alpha_tool=self.alpha_tool * c)


@dataclass(frozen=True)
class ScoredCandidate(Candidate):
    fused_score: float = 0.0


def _check_k(k: float) -> None:
    if not k > 0:
        raise ValueError(f"k must be > 0, got {k}")


def rrf_score(ranks: Sequence[int], k: float = 60.0) -> float:
    """sum(1 / (k + r)) over the ranks an entity holds in each list."""
    if not ranks:
        raise ValueError("rrf_score needs at least one rank")
    _check_k(k)
    total = 0.0
    for r in ranks:
        if r < 1:
            raise ValueError(f"ranks are 1-based, got {r}")
        total += 1.0 / (k + r)
    return total


def wrrf_score(ranks_with_weights: Sequence[tuple[int, float]], k: float = 60.0) -> float:
    """sum(alpha / (k + r)) over (rank, alpha) pairs."""
    if not ranks_with_weights:
        raise ValueError("wrrf_score needs at least one (rank, alpha) pair")
    _check_k(k)
    total = 0.0
    for r, alpha in ranks_with_weights:
        if r < 1:
            raise ValueError(f"ranks are 1-based, got {r}")
        if alpha < 0:
            raise ValueError(f"weights must be nonnegative, got {alpha}")
        total += alpha / (k + r)
    return total


def _minmax(cands: list[Candidate]) -> dict[tuple[str, str], float]:
    out: dict[tuple[str, str], float] = {}
    for node_type in ("tool", "agent"):
        group = [c for c in cands if c.node_type == node_type]
        if not group:
            continue
        lo = min(c.similarity for c in group)
        hi = max(c.similarity for c in group)
        for c in group:
            out[(c.node_type, c.node_id)] = (c.similarity - lo) / (hi - lo) if hi > lo else 1.0
    return out


def assign_base_ranks(merged: Iterable[Candidate], *, normalize_per_corpus: bool = False) -> list[Candidate]:
    """Consolidate a merged tool+agent list and give each entry a global rank.

    Sort key: similarity descending, then tools before agents, then
    ingestion ordinal. Returns copies with ``base_rank`` = 1..len in order.
    """
    cands = list(merged)
    seen: set[tuple[str, str]] = set()
    for c in cands:
        key = (c.node_type, c.node_id)
        if key in seen:
            raise ValueError(f"duplicate {c.node_type} {c.node_id!r} in merged candidate list")
        seen.add(key)
    if normalize_per_corpus:
        sim = _minmax(cands)
        ordered = sorted(
            cands,
            key=lambda c: (-sim[(c.node_type, c.node_id)], _TYPE_PREFERENCE[c.node_type], c.ingestion_ordinal),
        )
    else:
        ordered = sorted(cands, key=lambda c: (-c.similarity, _TYPE_PREFERENCE[c.node_type], c.ingestion_ordinal))
    return [replace(c, base_rank=i) for i, c in enumerate(ordered, start=1)]


def type_weighted_rank(merged: Iterable[Candidate], cfg: FusionConfig) -> list[ScoredCandidate]:
    """Score every candidate by its type weight over ``k + base_rank`` and sort.

    Base ranks are assigned here if any candidate lacks one. Output is by
    fused score descending, ties broken by the smaller base rank.
    """
    cands = list(merged)
    if any(c.base_rank is None for c in cands):
        cands = assign_base_ranks(cands, normalize_per_corpus=cfg.normalize_per_corpus)
    ranks = [c.base_rank for c in cands]
    if len(set(ranks)) != len(ranks):
        raise ValueError("base ranks must be unique within one fused list")
    scored = [
        ScoredCandidate(
            node_id=c.node_id,
            node_type=c.node_type,
            similarity=c.similarity,
            corpus_rank=c.corpus_rank,
            ingestion_ordinal=c.ingestion_ordinal,
            base_rank=c.base_rank,
            fused_score=cfg.alpha(c.node_type) / (cfg.k + c.base_rank),
        )
        for c in cands
    ]
    scored.sort(key=functools.cmp_to_key(compare_fused))
    return scored


def scores_tie(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=SCORE_REL_TOL, abs_tol=0.0)


def compare_fused(a: ScoredCandidate, b: ScoredCandidate) -> int:
    """Order by fused score descending; near-equal scores by smaller base rank."""
    if scores_tie(a.fused_score, b.fused_score):
        return a.base_rank - b.base_rank
    return -1 if a.fused_score > b.fused_score else 1
