import json
import math

import pytest

from agentgraph.evaluation import (
    WEIGHT_GRID,
    EvalQuery,
    convert_livemcpbench,
    evaluate_run,
    format_table,
    load_dataset,
    query_to_record,
    sweep_weights,
)
from agentgraph.fusion import FusionConfig
from agentgraph.retrieval import AgentHit, RetrievalResult
from agentgraph.router import StrategyConfig


def fixed(mapping, default=()):
    def run(text, k):
        return RetrievalResult([AgentHit(a) for a in list(mapping.get(text, default))[:k]])

    return run


def test_ceiling_and_floor(synth_dataset, synth_graph):
    truth = {q.question: sorted(q.relevant_agents) for q in synth_dataset}
    ceiling = evaluate_run(None, synth_dataset, fixed(truth), "direct", ks=(5,))
    assert ceiling.value("recall", 5) == 1.0
    assert ceiling.value("map", 5) == 1.0 and ceiling.value("ndcg", 5) == 1.0
    floor = evaluate_run(None, synth_dataset, fixed({}, ["nobody"]), "direct", ks=(1, 5))
    assert all(floor.value(m, k) == 0.0 for m in ("recall", "map", "ndcg") for k in (1, 5))


def test_aggregate_is_mean_of_per_query(synth_router, synth_dataset):
    rep = evaluate_run(synth_router, synth_dataset, StrategyConfig(), ks=(1, 3, 5))
    for k in (1, 3, 5):
        for m in ("recall", "map", "ndcg"):
            vals = [row["metrics"][str(k)][m] for row in rep.per_query]
            assert abs(rep.value(m, k) - sum(vals) / len(vals)) <= 1e-12
    assert len(rep.per_query) == len(synth_dataset)


def test_per_step_uses_step_truth():
    q = EvalQuery("q", "both", ("s1", "s2"), frozenset({"A", "B"}), (frozenset({"A"}), frozenset({"B"})))
    run = fixed({"s1": ["A"], "s2": ["A"]})
    rep = evaluate_run(None, [q], run, "per_step", ks=(1,))
    # step 1 hits, step 2 misses
    assert rep.value("recall", 1) == 0.5
    union = evaluate_run(None, [q], run, "per_query_union", ks=(2,))
    assert union.value("recall", 2) == 0.5
    direct = evaluate_run(None, [q], fixed({"both": ["B", "A"]}), "direct", ks=(2,))
    assert direct.value("recall", 2) == 1.0


def test_per_step_falls_back_to_question_truth():
    q = EvalQuery("q", "x", ("s1",), frozenset({"A", "B"}))
    rep = evaluate_run(None, [q], fixed({"s1": ["B"]}), "per_step", ks=(1,))
    assert rep.value("recall", 1) == 0.5


def test_union_granularity_orders_by_step():
    q = EvalQuery("q", "x", ("s1", "s2"), frozenset({"C"}))
    rep = evaluate_run(None, [q], fixed({"s1": ["A", "B"], "s2": ["B", "C"]}), "per_query_union", ks=(3,))
    assert rep.per_query[0]["retrieved"]["3"] == ["A", "B", "C"]
    assert rep.value("ndcg", 3) == pytest.approx(0.5, abs=1e-12)


def test_validation(synth_router, synth_dataset):
    with pytest.raises(ValueError):
        evaluate_run(synth_router, [], StrategyConfig())
    with pytest.raises(ValueError):
        evaluate_run(synth_router, synth_dataset, StrategyConfig(), "sideways")
    bad = EvalQuery("q", "x", ("s",), frozenset({"ghost"}))
    with pytest.raises(ValueError, match="ghost"):
        evaluate_run(synth_router, [bad], StrategyConfig())
    no_steps = EvalQuery("q", "x", (), frozenset({"a0"}))
    with pytest.raises(ValueError, match="no steps"):
        evaluate_run(synth_router, [no_steps], StrategyConfig(), "per_step")


def test_report_metadata(synth_router, synth_dataset):
    rep = evaluate_run(synth_router, synth_dataset, StrategyConfig("wrrf"), ks=(5,))
    assert rep.metadata["strategy"] == "wrrf" and rep.metadata["n"] == 50
    assert rep.metadata["provider_model"] == synth_router.model_id
    assert rep.metadata["reconstruction"].startswith("reconstruction")
    bm = evaluate_run(synth_router, synth_dataset, StrategyConfig("bm25"), ks=(5,))
    assert bm.metadata["bm25_corpus"] == "agent"
    assert bm.rows()[0]["strategy"] == "bm25"
    json.dumps(rep.to_dict())


def test_provenance_fractions(synth_router, synth_dataset):
    rep = evaluate_run(synth_router, synth_dataset, StrategyConfig(), ks=(5,))
    p = rep.provenance
    assert p["counts"]["none"] == 0
    assert math.isclose(p["agent_fraction"] + p["tool_fraction"], 1.0)


def test_workers_do_not_change_results(synth_router, synth_dataset):
    a = evaluate_run(synth_router, synth_dataset, StrategyConfig(), ks=(1, 5))
    b = evaluate_run(synth_router, synth_dataset, StrategyConfig(), ks=(1, 5), workers=4)
    assert a.to_dict() == b.to_dict()


def test_every_strategy_runs(synth_router, synth_dataset):
    for name in ("graph", "agent-only", "tool-only", "bm25", "wrrf"):
        rep = evaluate_run(synth_router, synth_dataset, StrategyConfig(name), ks=(1, 3))
        for k in (1, 3):
            assert 0.0 <= rep.value("recall", k) <= 1.0


# -- sweep --------------------------------------------------------------------


def test_sweep_shape(synth_router, synth_dataset):
    res = sweep_weights(synth_router, synth_dataset, ks=(5,))
    rows = res.table(5)
    assert len(rows) == 14
    assert [(r["alpha_agent"], r["alpha_tool"]) for r in rows[::2]] == list(WEIGHT_GRID)
    assert {r["strategy"] for r in rows} == {"graph", "wrrf"}
    s = res.series("recall", 5)
    assert len(s["graph"]) == len(s["wrrf"]) == 7 and s["ratio"][4] == "1.5:1"
    json.dumps(res.to_dict())
    assert "alpha_agent" in format_table(rows)


def test_single_point_sweep_equals_run(synth_router, synth_dataset):
    res = sweep_weights(synth_router, synth_dataset, [(1.5, 1.0)], ks=(1, 5))
    direct = evaluate_run(synth_router, synth_dataset, StrategyConfig(fusion=FusionConfig(60, 1.5, 1.0)), ks=(1, 5))
    assert res.graph[0].metrics == direct.metrics


def test_uniform_scaling_does_not_move_metrics(synth_router, synth_dataset):
    res = sweep_weights(synth_router, synth_dataset, [(1.0, 1.0), (10.0, 10.0)], ks=(1, 3, 5))
    assert res.graph[0].metrics == res.graph[1].metrics
    assert res.wrrf[0].metrics == res.wrrf[1].metrics


def test_empty_grid(synth_router, synth_dataset):
    with pytest.raises(ValueError):
        sweep_weights(synth_router, synth_dataset, [])


# -- datasets -----------------------------------------------------------------


def test_load_dataset_resolves_names(tmp_path, tiny_graph):
    p = tmp_path / "d.json"
    p.write_text(json.dumps([
        {"id": 1, "question": "q", "steps": ["s"], "relevant_agents": ["airbnb", "agent:filesystem"]},
        {"id": 2, "question": "q2", "steps": ["a", "b"], "relevant_agents": ["FileSystem"],
         "relevant_agents_per_step": [["filesystem"], []]},
    ]))
    qs = load_dataset(p, tiny_graph)
    assert qs[0].relevant_agents == {"agent:airbnb", "agent:filesystem"}
    assert qs[1].relevant_agents_per_step == (frozenset({"agent:filesystem"}), frozenset())
    assert qs[1].step_truth(1) == {"agent:filesystem"}


def test_load_dataset_unknown_agent(tmp_path, tiny_graph):
    p = tmp_path / "d.jsonl"
    p.write_text(json.dumps({"id": "x", "question": "q", "relevant_agents": ["weather"]}) + "\n")
    with pytest.raises(ValueError, match="weather"):
        load_dataset(p, tiny_graph)


def test_record_round_trip(tmp_path, synth_dataset):
    p = tmp_path / "d.json"
    p.write_text(json.dumps([query_to_record(q) for q in synth_dataset]))
    assert load_dataset(p) == synth_dataset


def test_query_validation():
    with pytest.raises(ValueError):
        EvalQuery("q", "x", ("a",), frozenset())
    with pytest.raises(ValueError):
        EvalQuery("q", "x", ("a", "b"), frozenset({"A"}), (frozenset({"A"}),))


def test_converter_annotator_metadata():
    rec = {
        "task_id": "t-17",
        "Question": "Find a rental and save the listing to a file",
        "Annotator Metadata": {
            "Steps": "1. Search rentals in Lisbon\n2. Write the result to notes.txt",
            "Tools": "1. airbnb: search_listings\n2. filesystem/write_file\n3. airbnb - listing_details",
        },
    }
    (out,) = convert_livemcpbench([rec])
    assert out == {
        "id": "t-17",
        "question": "Find a rental and save the listing to a file",
        "steps": ["Search rentals in Lisbon", "Write the result to notes.txt"],
        "relevant_agents": ["airbnb", "filesystem"],
    }


def test_converter_explicit_fields_and_errors():
    (out,) = convert_livemcpbench([{"question": "q", "steps": ["a"], "mcp_servers": ["x", "y", "x"]}])
    assert out["id"] == "q0000" and out["relevant_agents"] == ["x", "y"]
    with pytest.raises(ValueError, match="#0"):
        convert_livemcpbench([{"question": "q"}])
