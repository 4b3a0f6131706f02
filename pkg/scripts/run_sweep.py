"""Sweep (alpha_agent, alpha_tool) for graph fusion and standard weighted RRF.

Builds the index in memory, evaluates every grid point, prints the K=5
table and optionally saves the Recall@5 series as a plot (needs
matplotlib) and the full reports as JSON.

    python scripts/run_sweep.py --catalog data/synth/catalog.json \\
        --dataset data/synth/questions.json --plot sweep.png
"""

import argparse
from pathlib import Path

from agentgraph.catalog import dump_json, load_manifest
from agentgraph.embedding import HashingProvider, RemoteProvider
from agentgraph.evaluation import WEIGHT_GRID, format_table, load_dataset, sweep_weights
from agentgraph.router import Router


def plot(series: dict, path: Path, metric: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = range(len(series["ratio"]))
    ax.plot(x, series["graph"], marker="o", label="graph fusion")
    ax.plot(x, series["wrrf"], marker="s", linestyle="--", label="weighted RRF")
    ax.set_xticks(list(x), series["ratio"])
    ax.set_xlabel("alpha_agent : alpha_tool")
    ax.set_ylabel(metric)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--catalog", required=True)
    ap.add_argument("--dataset", required=True)
    ap.add_argument("--granularity", default="per_step", choices=("per_step", "per_query_union", "direct"))
    ap.add_argument("--remote", action="store_true", help="use the remote embedding provider")
    ap.add_argument("--model", default="text-embedding-ada-002")
    ap.add_argument("--dim", type=int, default=256)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--plot", type=Path)
    ap.add_argument("--json", type=Path)
    args = ap.parse_args()

    provider = RemoteProvider(args.model) if args.remote else HashingProvider(args.dim)
    graph = load_manifest(args.catalog)
    router = Router.build(graph, provider, workers=args.workers)
    dataset = load_dataset(args.dataset, graph)
    result = sweep_weights(router, dataset, WEIGHT_GRID, granularity=args.granularity, workers=args.workers)

    print(format_table(result.table(5)))
    if args.json:
        args.json.write_bytes(dump_json(result.to_dict()))
    if args.plot:
        plot(result.series("recall", 5), args.plot, "Recall@5")
        print(f"plot -> {args.plot}")


if __name__ == "__main__":
    main()
