"""Seeded synthetic catalogs and question sets for tests and offline runs."""

from __future__ import annotations

import random

from .catalog import AgentNode, KnowledgeGraph, ToolNode
from .evaluation import EvalQuery

_SYLLABLES = ["ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "pa", "qu", "de", "fi", "go", "hu", "xa"]
SHARED_WORDS = ["search", "file", "list", "get", "create", "update", "delete", "query", "data", "user"]


def _word(rng: random.Random) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3)))


def synthetic_catalog(
    seed: int,
    n_agents: int = 10,
    n_tools: int = 50,
    *,
    topic_words: int = 8,
    desc_words: int = 6,
) -> KnowledgeGraph:
    """A catalog where each agent has its own topic vocabulary.

    Tools draw mostly from their owner's vocabulary plus a few shared
    words, so tool and agent texts overlap the way real manifests do.
    Every agent gets at least one tool when ``n_tools >= n_agents``.
    """
    rng = random.Random(seed)
    topics = [[_word(rng) for _ in range(topic_words)] for _ in range(n_agents)]
    agents = []
    for i, words in enumerate(topics):
        desc = " ".join(rng.choice(words) for _ in range(desc_words))
        if rng.random() < 0.1:
            desc = ""
        agents.append(AgentNode(id=f"a{i}", name=f"{words[0]}_server", description=desc))
    owners = list(range(n_agents)) if n_tools >= n_agents else []
    owners += [rng.randrange(n_agents) for _ in range(n_tools - len(owners))]
    rng.shuffle(owners)
    tools = []
    for j, o in enumerate(owners):
        words = topics[o]
        picked = [rng.choice(words) for _ in range(rng.randint(2, 5))]
        picked += rng.sample(SHARED_WORDS, rng.randint(0, 2))
        rng.shuffle(picked)
        tools.append(
            ToolNode(
                id=f"t{j}",
                name=f"{rng.choice(SHARED_WORDS)}_{rng.choice(words)}",
                description=" ".join(picked),
                parent_agent_id=f"a{o}",
            )
        )
    return KnowledgeGraph(agents, tools)


def synthetic_queries(graph: KnowledgeGraph, seed: int, n_queries: int = 20, *, max_steps: int = 3) -> list[EvalQuery]:
    """Questions whose steps paraphrase tool descriptions of 1-2 agents."""
    rng = random.Random(seed)
    with_tools = [a.id for a in graph.agents if graph.tools_of(a.id)]
    out = []
    for i in range(n_queries):
        picked = rng.sample(with_tools, min(len(with_tools), rng.randint(1, 2)))
        steps, per_step = [], []
        for _ in range(rng.randint(1, max_steps)):
            a = rng.choice(picked)
            tool = rng.choice(graph.tools_of(a))
            words = tool.description.split() + [_word(rng)]
            rng.shuffle(words)
            steps.append(" ".join(words[: rng.randint(2, len(words))]))
            per_step.append(frozenset([a]))
        out.append(
            EvalQuery(
                id=f"q{i}",
                question=" and ".join(steps),
                steps=tuple(steps),
                relevant_agents=frozenset(picked),
                relevant_agents_per_step=tuple(per_step),
            )
        )
    return out


def random_query_text(rng: random.Random, graph: KnowledgeGraph, words: int = 4) -> str:
    """Bag of words sampled from the catalog's own texts plus noise."""
    vocab = []
    for a in graph.agents:
        vocab += a.description.split() + [a.name]
    for t in graph.tools:
        vocab += t.description.split()
    vocab += SHARED_WORDS
    return " ".join(rng.choice(vocab) if rng.random() < 0.85 else _word(rng) for _ in range(words))
