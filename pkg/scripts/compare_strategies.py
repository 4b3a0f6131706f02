"""Evaluate every retrieval strategy on one dataset and print a table."""

import argparse

from agentgraph.catalog import load_manifest
from agentgraph.embedding import HashingProvider, RemoteProvider
from agentgraph.evaluation import evaluate_run, format_table, load_dataset
from agentgraph.fusion import FusionConfig
from agentgraph.router import STRATEGIES, Router, StrategyConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--catalog", required=True)
    ap.add_argument("--dataset", required=True)
    ap.add_argument("--granularity", default="per_step", choices=("per_step", "per_query_union", "direct"))
    ap.add_argument("--alpha-agent", type=float, default=1.5)
    ap.add_argument("--alpha-tool", type=float, default=1.0)
    ap.add_argument("--remote", action="store_true")
    ap.add_argument("--model", default="text-embedding-ada-002")
    ap.add_argument("--dim", type=int, default=256)
    args = ap.parse_args()

    provider = RemoteProvider(args.model) if args.remote else HashingProvider(args.dim)
    graph = load_manifest(args.catalog)
    router = Router.build(graph, provider)
    dataset = load_dataset(args.dataset, graph)
    fusion = FusionConfig(60.0, args.alpha_agent, args.alpha_tool)
    rows = []
    for name in STRATEGIES:
        rep = evaluate_run(router, dataset, StrategyConfig(name, fusion), args.granularity)
        rows += rep.rows()
    print(format_table(rows))


if __name__ == "__main__":
    main()
