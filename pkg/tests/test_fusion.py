import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentgraph.fusion import (
    FusionConfig,
    assign_base_ranks,
    rrf_score,
    type_weighted_rank,
    wrrf_score,
)
from agentgraph.index import Candidate

from .oracles import rrf_exact, wrrf_exact


def cand(node_id, node_type, sim, ordinal=0, rank=1):
    return Candidate(node_id, node_type, sim, rank, ordinal)


def random_merged(rng: random.Random, size: int, tie_rate: float = 0.3) -> list[Candidate]:
    sims = [round(rng.uniform(-1, 1), 2) for _ in range(size)]
    out = []
    for i, s in enumerate(sims):
        if out and rng.random() < tie_rate:
            s = rng.choice(out).similarity
        typ = rng.choice(["tool", "agent"])
        out.append(Candidate(f"{typ[0]}{i}", typ, s, 1, rng.randrange(1000)))
    return out


# -- rank fusion scores -----------------------------------------------------


def test_rrf_examples():
    assert rrf_score([1], 60) == 1 / 61
    assert rrf_score([1], 60) == pytest.approx(0.0163934, abs=1e-7)
    assert rrf_score([1, 1], 60) == 2 / 61
    # exact value 1/62 + 1/65 + 1/69 = 0.046006401...
    assert rrf_score([2, 5, 9], 60) == pytest.approx(float(rrf_exact([2, 5, 9], 60)), abs=1e-15)


def test_wrrf_examples():
    assert wrrf_score([(1, 1.0)], 60) == rrf_score([1], 60)
    assert wrrf_score([(1, 1.5)], 60) == 1.5 / 61
    # exact value 2/63 + 0.5/67 = 0.039208718...
    assert wrrf_score([(3, 2.0), (7, 0.5)], 60) == pytest.approx(float(wrrf_exact([(3, 2.0), (7, 0.5)], 60)),
                                                                 abs=1e-15)


def test_rrf_errors():
    with pytest.raises(ValueError):
        rrf_score([], 60)
    with pytest.raises(ValueError):
        rrf_score([0], 60)
    with pytest.raises(ValueError):
        rrf_score([1], 0)
    with pytest.raises(ValueError):
        wrrf_score([], 60)
    with pytest.raises(ValueError):
        wrrf_score([(1, -1.0)], 60)


@given(st.lists(st.integers(1, 10_000), min_size=1, max_size=6), st.integers(0, 5), st.floats(0.5, 500))
def test_rrf_strictly_decreasing_in_rank(ranks, pos, k):
    pos %= len(ranks)
    worse = list(ranks)
    worse[pos] += 1
    assert rrf_score(worse, k) < rrf_score(ranks, k)


@given(st.lists(st.tuples(st.integers(1, 1000), st.floats(0.01, 10)), min_size=1, max_size=5), st.floats(0.5, 500))
def test_wrrf_strictly_decreasing_in_rank(pairs, k):
    worse = [(pairs[0][0] + 1, pairs[0][1])] + pairs[1:]
    assert wrrf_score(worse, k) < wrrf_score(pairs, k)


# -- config --------------------------------------------------------------------


def test_config_validation():
    assert FusionConfig().k == 60
    with pytest.raises(ValueError):
        FusionConfig(k=0)
    with pytest.raises(ValueError):
        FusionConfig(alpha_agent=0, alpha_tool=0)
    with pytest.raises(ValueError):
        FusionConfig(alpha_agent=-1)
    FusionConfig(alpha_agent=0, alpha_tool=1)


# -- base ranks ----------------------------------------------------------------


def test_base_rank_examples():
    (only,) = assign_base_ranks([cand("t1", "tool", 0.3)])
    assert only.base_rank == 1
    out = assign_base_ranks([cand("t2", "tool", 0.5), cand("a1", "agent", 0.7), cand("t1", "tool", 0.9)])
    assert [(c.node_id, c.base_rank) for c in out] == [("t1", 1), ("a1", 2), ("t2", 3)]


def test_base_rank_similarity_ties():
    out = assign_base_ranks([cand("a", "agent", 0.5, 0), cand("t7", "tool", 0.5, 7), cand("t2", "tool", 0.5, 2)])
    assert [c.node_id for c in out] == ["t2", "t7", "a"]


def test_base_rank_duplicate():
    with pytest.raises(ValueError):
        assign_base_ranks([cand("x", "tool", 0.1), cand("x", "tool", 0.2)])
    # same id in different corpora is fine
    assert len(assign_base_ranks([cand("x", "tool", 0.1), cand("x", "agent", 0.2)])) == 2


def test_base_ranks_match_sort_oracle():
    rng = random.Random(3)
    for _ in range(100):
        merged = random_merged(rng, 40)
        got = [c.node_id for c in assign_base_ranks(merged)]
        # oracle: repeatedly extract the best remaining candidate
        pool = list(merged)
        want = []
        while pool:
            best = pool[0]
            for c in pool[1:]:
                if c.similarity != best.similarity:
                    better = c.similarity > best.similarity
                elif c.node_type != best.node_type:
                    better = c.node_type == "tool"
                else:
                    better = c.ingestion_ordinal < best.ingestion_ordinal
                if better:
                    best = c
            pool.remove(best)
            want.append(best.node_id)
        assert got == want


def test_min_max_normalization_flag():
    merged = [cand("t1", "tool", 0.2, 0), cand("t2", "tool", 0.1, 1), cand("a1", "agent", 0.9, 0),
              cand("a2", "agent", 0.8, 1)]
    plain = [c.node_id for c in assign_base_ranks(merged)]
    norm = [c.node_id for c in assign_base_ranks(merged, normalize_per_corpus=True)]
    assert plain == ["a1", "a2", "t1", "t2"]
    assert norm == ["t1", "a1", "t2", "a2"]


# -- type-weighted ranking -------------------------------------------------


def test_agent_emphasis_flips_order():
    merged = [cand("t", "tool", 0.9), cand("a", "agent", 0.8)]
    out = type_weighted_rank(merged, FusionConfig(60, alpha_agent=1.5, alpha_tool=1.0))
    assert [c.node_id for c in out] == ["a", "t"]
    assert out[0].fused_score == pytest.approx(1.5 / 62, abs=1e-15)
    assert out[0].fused_score == pytest.approx(0.024194, abs=1e-6)
    assert out[1].fused_score == pytest.approx(1 / 61, abs=1e-15)
    assert (out[0].base_rank, out[1].base_rank) == (2, 1)


def test_equal_weights_keep_base_order():
    rng = random.Random(5)
    merged = random_merged(rng, 30)
    base = [c.node_id for c in assign_base_ranks(merged)]
    assert [c.node_id for c in type_weighted_rank(merged, FusionConfig(60, 1, 1))] == base


def test_exact_score_tie_broken_by_base_rank():
    # 1.5 / (60 + 33) == 1.0 / (60 + 2) exactly
    merged = [Candidate(f"n{r}", "agent" if r == 33 else "tool", 1 - r / 100, r, r, base_rank=r) for r in range(1, 40)]
    out = type_weighted_rank(merged, FusionConfig(60, 1.5, 1.0))
    ids = [c.node_id for c in out]
    assert ids.index("n2") < ids.index("n33")
    for c in (0.1, 10.0):
        scaled = type_weighted_rank(merged, FusionConfig(60, 1.5 * c, 1.0 * c))
        assert [x.node_id for x in scaled] == ids


@given(st.integers(0, 10_000), st.floats(0.01, 5), st.floats(0.01, 5), st.sampled_from([0.1, 2.0, 10.0]))
def test_argsort_invariance_property(seed, aa, at, c):
    merged = random_merged(random.Random(seed), 25)
    a = [x.node_id for x in type_weighted_rank(merged, FusionConfig(60, aa, at))]
    b = [x.node_id for x in type_weighted_rank(merged, FusionConfig(60, aa * c, at * c))]
    assert a == b


@given(st.integers(0, 10_000), st.floats(0.01, 5), st.floats(0.01, 5))
def test_within_type_order_preserved(seed, aa, at):
    merged = random_merged(random.Random(seed), 25)
    base = assign_base_ranks(merged)
    out = type_weighted_rank(merged, FusionConfig(60, aa, at))
    for typ in ("tool", "agent"):
        assert [c.node_id for c in out if c.node_type == typ] == [c.node_id for c in base if c.node_type == typ]


@given(st.integers(0, 10_000), st.floats(0.01, 5))
def test_equal_alpha_k_invariant(seed, alpha):
    merged = random_merged(random.Random(seed), 25)
    orders = {tuple(c.node_id for c in type_weighted_rank(merged, FusionConfig(k, alpha, alpha)))
              for k in (1, 60, 1000)}
    assert len(orders) == 1


def test_k_can_change_cross_type_order():
    merged = [cand("t", "tool", 0.9), cand("a", "agent", 0.8)]
    cfg = dict(alpha_agent=1.2, alpha_tool=1.0)
    small_k = [c.node_id for c in type_weighted_rank(merged, FusionConfig(1, **cfg))]
    big_k = [c.node_id for c in type_weighted_rank(merged, FusionConfig(1000, **cfg))]
    # 1.2/3 < 1/2 at k=1; 1.2/1002 > 1/1001 at k=1000
    assert small_k == ["t", "a"] and big_k == ["a", "t"]


def test_scores_follow_formula():
    rng = random.Random(8)
    merged = assign_base_ranks(random_merged(rng, 30))
    cfg = FusionConfig(k=17.5, alpha_agent=2.5, alpha_tool=0.75)
    for c in type_weighted_rank(merged, cfg):
        alpha = 2.5 if c.node_type == "agent" else 0.75
        assert c.fused_score == alpha / (17.5 + c.base_rank)


def test_duplicate_base_ranks_rejected():
    bad = [Candidate("a", "agent", 0.1, 1, 0, base_rank=1), Candidate("t", "tool", 0.2, 1, 0, base_rank=1)]
    with pytest.raises(ValueError):
        type_weighted_rank(bad, FusionConfig())
