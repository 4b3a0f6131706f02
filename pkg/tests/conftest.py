from pathlib import Path

import hypothesis
import pytest

from agentgraph import HashingProvider, load_manifest
from agentgraph.router import Router
from agentgraph.synthetic import synthetic_catalog, synthetic_queries

hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("ci")

FIXTURES = Path(__file__).parent / "fixtures"

# (criterion, status, detail) rows collected by test_acceptance.py
ACCEPTANCE: list[tuple[str, str, str]] = []


@pytest.fixture
def tiny_manifest() -> Path:
    return FIXTURES / "tiny_manifest.json"


@pytest.fixture
def tiny_graph(tiny_manifest):
    return load_manifest(tiny_manifest)


@pytest.fixture(scope="session")
def provider():
    return HashingProvider(dim=128, seed=0)


@pytest.fixture(scope="session")
def synth_graph():
    return synthetic_catalog(seed=7, n_agents=12, n_tools=60)


@pytest.fixture(scope="session")
def synth_router(synth_graph, provider):
    return Router.build(synth_graph, provider)


@pytest.fixture(scope="session")
def synth_dataset(synth_graph):
    return synthetic_queries(synth_graph, seed=11, n_queries=25)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in ACCEPTANCE:
        terminalreporter.write_line(f"[{status}] {name}" + (f" -- {detail}" if detail else ""))
