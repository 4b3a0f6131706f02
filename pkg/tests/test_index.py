import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentgraph.catalog import AgentNode, KnowledgeGraph, ToolNode
from agentgraph.embedding import DimensionMismatchError, EmbeddingError, HashingProvider, embed_text
from agentgraph.index import (
    IndexBuildError,
    StaleIndexError,
    TextOptions,
    build_index,
    load_container,
    save_container,
    top_n,
)
from agentgraph.synthetic import random_query_text, synthetic_catalog

from .oracles import full_sort


def tie_heavy_graph(n_agents: int, seed: int) -> KnowledgeGraph:
    # tiny vocabulary so identical texts (exact similarity ties) are common
    rng = random.Random(seed)
    words = ["alpha", "beta", "gamma", "delta", "eps"]
    agents = [AgentNode(f"a{i}", f"ag{i}", " ".join(rng.choice(words) for _ in range(2))) for i in range(n_agents)]
    tools = [ToolNode(f"t{i}", rng.choice(words), rng.choice(["", rng.choice(words)]), f"a{rng.randrange(n_agents)}")
             for i in range(n_agents * 3)]
    return KnowledgeGraph(agents, tools)


def test_build_counts(tiny_graph, provider):
    assert len(build_index(tiny_graph, provider, "tool")) == 3
    ai = build_index(tiny_graph, provider, "agent")
    assert ai.node_ids == ("agent:airbnb", "agent:filesystem")
    assert ai.model_id == provider.model_id and ai.dim == 128


def test_empty_corpus(provider):
    idx = build_index(KnowledgeGraph(), provider, "agent")
    assert len(idx) == 0
    assert top_n(idx, embed_text(provider, "x"), 5) == []


def test_top1_is_argmax(tiny_graph, provider):
    idx = build_index(tiny_graph, provider, "tool")
    q = embed_text(provider, "search files by pattern")
    (c,) = top_n(idx, q, 1)
    sims = idx.similarities(q)
    assert c.corpus_rank == 1 and c.node_id == idx.node_ids[int(np.argmax(sims))]
    assert c.node_type == "tool"


def test_saturation(tiny_graph, provider):
    idx = build_index(tiny_graph, provider, "tool")
    out = top_n(idx, embed_text(provider, "listing"), 50)
    assert sorted(c.node_id for c in out) == sorted(idx.node_ids)
    assert [c.corpus_rank for c in out] == [1, 2, 3]


def test_mismatched_query(tiny_graph, provider):
    idx = build_index(tiny_graph, provider, "tool")
    with pytest.raises(DimensionMismatchError):
        top_n(idx, embed_text(HashingProvider(dim=64), "x"), 3)
    with pytest.raises(DimensionMismatchError):
        top_n(idx, embed_text(HashingProvider(dim=128, seed=5), "x"), 3)
    with pytest.raises(ValueError):
        top_n(idx, embed_text(provider, "x"), 0)


def test_matches_full_sort_oracle_100_nodes(provider):
    g = synthetic_catalog(21, n_agents=20, n_tools=100)
    idx = build_index(g, provider, "tool")
    rng = random.Random(4)
    for _ in range(50):
        q = embed_text(provider, random_query_text(rng, g))
        got = [(c.node_id, c.similarity, c.ingestion_ordinal) for c in top_n(idx, q, 10)]
        assert got == full_sort(idx.entries, q)[:10]


def test_ties_go_to_earlier_ingestion(provider):
    g = tie_heavy_graph(30, 1)
    idx = build_index(g, provider, "tool")
    q = embed_text(provider, "alpha")
    out = top_n(idx, q, len(idx))
    assert [(c.node_id, c.similarity, c.ingestion_ordinal) for c in out] == full_sort(idx.entries, q)
    for a, b in zip(out, out[1:]):
        if a.similarity == b.similarity:
            assert a.ingestion_ordinal < b.ingestion_ordinal


@given(st.integers(0, 500), st.integers(1, 40), st.integers(1, 40))
def test_prefix_consistency(seed, n, m):
    provider = HashingProvider(dim=32)
    g = tie_heavy_graph(8, seed)
    idx = build_index(g, provider, "tool")
    q = embed_text(provider, random_query_text(random.Random(seed), g, 2))
    small, big = sorted((n, m))
    a, b = top_n(idx, q, small), top_n(idx, q, big)
    assert a == b[: len(a)]
    assert [c.corpus_rank for c in b] == list(range(1, len(b) + 1))


def test_text_options_change_vectors(tiny_graph, provider):
    plain = build_index(tiny_graph, provider, "tool")
    schema = build_index(tiny_graph, provider, "tool", options=TextOptions(include_schema=True))
    # only listing_details has a schema
    assert np.array_equal(plain.matrix[0], schema.matrix[0])
    assert not np.array_equal(plain.matrix[1], schema.matrix[1])


def test_parallel_build_matches_serial(provider):
    g = synthetic_catalog(2, 10, 90)
    assert build_index(g, provider, "tool", batch_size=7, workers=4) == build_index(g, provider, "tool")


class Failing:
    model_id = "broken"
    dim = 4

    def embed_batch(self, texts):
        raise EmbeddingError("boom", retryable=True)


def test_provider_failure_names_node(tiny_graph):
    with pytest.raises(IndexBuildError, match="tool:airbnb/search_listings") as err:
        build_index(tiny_graph, Failing(), "tool", batch_size=1)
    assert err.value.node_ids == ["tool:airbnb/search_listings"]


def test_container_round_trip(tmp_path, provider):
    g = synthetic_catalog(9, 70, 527)
    ti, ai = build_index(g, provider, "tool"), build_index(g, provider, "agent")
    p = tmp_path / "c.json"
    v1 = save_container(p, g, ti, ai)
    c = load_container(p)
    assert c.graph == g and c.tool_index == ti and c.agent_index == ai
    assert (len(c.agent_index), len(c.tool_index)) == (70, 527)
    assert c.version == v1
    v2 = save_container(tmp_path / "d.json", g, ti, ai)
    assert v1 == v2 and p.read_bytes() == (tmp_path / "d.json").read_bytes()


def test_container_rejects_stale_model(tmp_path, tiny_graph, provider):
    p = tmp_path / "c.json"
    save_container(p, tiny_graph, build_index(tiny_graph, provider, "tool"), build_index(tiny_graph, provider, "agent"))
    with pytest.raises(StaleIndexError) as err:
        load_container(p, expected_model_id="remote:text-embedding-3-small")
    assert provider.model_id in str(err.value) and "remote:text-embedding-3-small" in str(err.value)


def test_container_rejects_mixed_providers(tmp_path, tiny_graph, provider):
    other = HashingProvider(dim=128, seed=3)
    with pytest.raises(ValueError):
        save_container(tmp_path / "c.json", tiny_graph, build_index(tiny_graph, provider, "tool"),
                       build_index(tiny_graph, other, "agent"))
