"""Write a seeded synthetic catalog and question set to disk.

    python scripts/make_synthetic.py --out data/synth --agents 70 --tools 527 --queries 95
"""

import argparse
import json
from pathlib import Path

from agentgraph.catalog import graph_to_manifest
from agentgraph.evaluation import query_to_record
from agentgraph.synthetic import synthetic_catalog, synthetic_queries


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/synth")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--agents", type=int, default=70)
    ap.add_argument("--tools", type=int, default=527)
    ap.add_argument("--queries", type=int, default=95)
    ap.add_argument("--max-steps", type=int, default=4)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graph = synthetic_catalog(args.seed, args.agents, args.tools)
    queries = synthetic_queries(graph, args.seed + 1, args.queries, max_steps=args.max_steps)
    (out / "catalog.json").write_text(json.dumps(graph_to_manifest(graph), indent=1))
    (out / "questions.json").write_text(json.dumps([query_to_record(q) for q in queries], indent=1))
    steps = sum(len(q.steps) for q in queries) / len(queries)
    print(f"{len(graph.agents)} agents, {len(graph.tools)} tools, {len(queries)} questions "
          f"({steps:.2f} steps on average) -> {out}")


if __name__ == "__main__":
    main()
