"""Command line entry point: ``agentgraph <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from .catalog import CatalogError, dump_json, load_manifest
from .config import ConfigError, RunConfig, request_from_payload, run_query
from .embedding import EmbeddingError
from .evaluation import (
    GRANULARITIES,
    WEIGHT_GRID,
    convert_livemcpbench,
    evaluate_run,
    format_table,
    load_dataset,
    query_from_record,
    query_to_record,
    sweep_weights,
)
from .fusion import FusionConfig
from .index import IndexBuildError, StaleIndexError, build_index, load_container, save_container
from .router import STRATEGIES, Router

log = logging.getLogger("agentgraph")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--catalog", help="agent/tool manifest (JSON or JSON lines)")
    g.add_argument("--index", help="index container path (default: <catalog>.index.json)")
    g.add_argument("--provider", choices=("deterministic", "remote"), default="deterministic")
    g.add_argument("--dim", type=int, default=256, help="dimension of the deterministic provider")
    g.add_argument("--seed", type=int, default=0, help="seed of the deterministic provider")
    g.add_argument("--model", default="text-embedding-ada-002", help="remote embedding model")
    g.add_argument("--endpoint", default="https://api.openai.com/v1/embeddings")
    g.add_argument("--api-key-env", default="OPENAI_API_KEY", help="env var holding the remote API key")
    g.add_argument("--cache-dir", help="embedding cache directory for the remote provider")
    g.add_argument("--alpha-agent", type=float, default=1.0)
    g.add_argument("--alpha-tool", type=float, default=1.0)
    g.add_argument("--rrf-k", type=float, default=60.0)
    g.add_argument("--normalize-per-corpus", action="store_true",
                   help="min-max rescale similarities per corpus before merging")
    g.add_argument("--n", type=int, default=None, help="per-corpus cutoff N (default max(50, 10K))")
    g.add_argument("--k", type=int, default=5, help="number of agents K")
    g.add_argument("--strategy", choices=STRATEGIES, default="graph")
    g.add_argument("--granularity", choices=GRANULARITIES, default=None)
    g.add_argument("--bm25-corpus", choices=("agent", "tool", "both"), default="agent")
    g.add_argument("--include-schema", action="store_true", help="append tool schemas to embedded text")
    g.add_argument("--type-prefix", action="store_true", help="prefix node text with 'agent:'/'tool:'")
    g.add_argument("--output", help="write the structured result here instead of stdout")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="agentgraph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("index", parents=[common], help="build the index container from a manifest")

    q = sub.add_parser("query", parents=[common], help="route one query to agents")
    q.add_argument("--text", default="", help="query text")
    q.add_argument("--step", action="append", default=[], help="a decomposed step (repeatable)")

    e = sub.add_parser("eval", parents=[common], help="evaluate a strategy on a dataset")
    e.add_argument("--dataset", required=True)
    e.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("sweep", parents=[common], help="sweep (alpha_agent, alpha_tool) weights")
    s.add_argument("--dataset", required=True)
    s.add_argument("--grid", default=None, help="comma list of A:T ratios, e.g. '1:3,1:1,1.5:1'")
    s.add_argument("--workers", type=int, default=1)

    c = sub.add_parser("convert-dataset", parents=[common], help="convert LiveMCPBench questions")
    c.add_argument("--input", required=True)

    v = sub.add_parser("serve", parents=[common], help="run the HTTP routing service")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8080)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    try:
        fusion = FusionConfig(args.rrf_k, args.alpha_agent, args.alpha_tool, args.normalize_per_corpus)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(
        catalog=args.catalog,
        index=args.index,
        provider=args.provider,
        dim=args.dim,
        seed=args.seed,
        model=args.model,
        endpoint=args.endpoint,
        api_key_env=args.api_key_env,
        cache_dir=args.cache_dir,
        n=args.n,
        k=args.k,
        fusion=fusion,
        strategy=args.strategy,
        granularity=args.granularity or "per_step",
        bm25_corpus=args.bm25_corpus,
        include_schema=args.include_schema,
        type_prefix=args.type_prefix,
        output=args.output,
    )
    cfg.validate()
    return cfg


def parse_grid(text: str) -> list[tuple[float, float]]:
    grid = []
    for part in text.split(","):
        a, _, t = part.strip().partition(":")
        if not t:
            raise ConfigError(f"grid entry {part!r} is not of the form A:T")
        grid.append((float(a), float(t)))
    return grid


def _emit(cfg: RunConfig, doc: Any, text: str | None = None) -> None:
    if cfg.output:
        Path(cfg.output).write_bytes(dump_json(doc))
        if text:
            print(text)
    else:
        print(text if text is not None else json.dumps(doc, indent=1, sort_keys=True))


def _load_router(cfg: RunConfig) -> Router:
    provider = cfg.make_provider()
    return Router.from_container(load_container(cfg.index_path(), provider.model_id), provider)


def cmd_index(cfg: RunConfig, args: argparse.Namespace) -> int:
    if not cfg.catalog:
        raise ConfigError("--catalog is required")
    graph = load_manifest(cfg.catalog)
    provider = cfg.make_provider()
    tools = build_index(graph, provider, "tool", options=cfg.text_options)
    agents = build_index(graph, provider, "agent", options=cfg.text_options)
    path = cfg.index_path()
    version = save_container(path, graph, tools, agents, cfg.text_options)
    summary = {
        "index": str(path),
        "index_version": version,
        "model_id": provider.model_id,
        "dim": agents.dim,
        "agents": len(graph.agents),
        "tools": len(graph.tools),
        "edges": len(graph.edges),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_query(cfg: RunConfig, args: argparse.Namespace) -> int:
    router = _load_router(cfg)
    payload = {
        "query_text": args.text,
        "steps": args.step,
        "k": cfg.k,
        "n": cfg.n,
        "rrf_k": cfg.fusion.k,
        "alpha_agent": cfg.fusion.alpha_agent,
        "alpha_tool": cfg.fusion.alpha_tool,
        "normalize_per_corpus": cfg.fusion.normalize_per_corpus,
        "strategy": cfg.strategy,
    }
    req, strategy = request_from_payload(payload)
    _emit(cfg, run_query(router, req, strategy))
    return 0


def cmd_eval(cfg: RunConfig, args: argparse.Namespace) -> int:
    router = _load_router(cfg)
    dataset = load_dataset(args.dataset, router.graph)
    # per_query_union is always reported next to the primary granularity
    grans = [args.granularity] if args.granularity else ["per_step", "per_query_union"]
    reports = [evaluate_run(router, dataset, cfg.strategy_config(), g, workers=args.workers) for g in grans]
    rows = [dict(r, granularity=rep.metadata["granularity"]) for rep in reports for r in rep.rows()]
    text = format_table(rows, ["strategy", "granularity", "k", "recall", "map", "ndcg"])
    if "reconstruction" in reports[0].metadata:
        text += f"\n{cfg.strategy}: {reports[0].metadata['reconstruction']}"
    _emit(cfg, {"reports": [r.to_dict() for r in reports]}, text)
    return 0


def cmd_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    router = _load_router(cfg)
    dataset = load_dataset(args.dataset, router.graph)
    grid = parse_grid(args.grid) if args.grid else list(WEIGHT_GRID)
    result = sweep_weights(router, dataset, grid, cfg.strategy_config(), cfg.granularity, workers=args.workers)
    _emit(cfg, result.to_dict(), format_table(result.table(k=5)))
    return 0


def cmd_convert(cfg: RunConfig, args: argparse.Namespace) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = [json.loads(line) for line in text.splitlines() if line.strip()]
    if isinstance(doc, dict):
        doc = doc.get("data") or doc.get("questions") or list(doc.values())
    records = convert_livemcpbench(doc)
    if cfg.catalog:
        # validate and resolve agent names against the catalog
        graph = load_manifest(cfg.catalog)
        records = [query_to_record(query_from_record(r, graph)) for r in records]
    _emit(cfg, records)
    return 0


def cmd_serve(cfg: RunConfig, args: argparse.Namespace) -> int:
    from .service import RoutingService, make_server

    service = RoutingService(cfg.index_path(), cfg.make_provider())
    server = make_server(service, args.host, args.port)
    log.info("serving on http://%s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


COMMANDS = {
    "index": cmd_index,
    "query": cmd_query,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "convert-dataset": cmd_convert,
    "serve": cmd_serve,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg, args)
    except StaleIndexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, CatalogError, IndexBuildError, EmbeddingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
