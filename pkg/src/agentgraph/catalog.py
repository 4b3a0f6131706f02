"""Agent/tool catalog as a bipartite knowledge graph.

Agents and tools are separate node sets; the only edges are ownership
edges from a tool to its parent agent. Ingestion order is kept on both
node sets because it is the stable tie-breaker everywhere downstream.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Literal, Mapping

NodeType = Literal["agent", "tool"]

GRAPH_FORMAT_VERSION = 1


class CatalogError(ValueError):
    """Base class for manifest and graph errors."""


class ManifestParseError(CatalogError):
    pass


class CatalogValidationError(CatalogError):
    """A record violates a graph invariant. ``record`` names the offender."""

    def __init__(self, message: str, record: str):
        super().__init__(message)
        self.record = record


class GraphFormatError(CatalogError):
    pass


@dataclass(frozen=True)
class AgentNode:
    id: str
    name: str
    description: str = ""
    metadata: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ToolNode:
    id: str
    name: str
    description: str
    parent_agent_id: str
    schema_text: str | None = None


class KnowledgeGraph:
    """Immutable bipartite graph G = (agents, tools, ownership edges).

    Construction validates every invariant; a constructed graph is safe to
    share across threads.
    """

    def __init__(self, agents: Iterable[AgentNode] = (), tools: Iterable[ToolNode] = ()):
        self._agents = tuple(agents)
        self._tools = tuple(tools)

        agent_pos: dict[str, int] = {}
        for i, a in enumerate(self._agents):
            if not a.name or not a.name.strip():
                raise CatalogValidationError(f"agent {a.id!r} has an empty name", a.id)
            if a.id in agent_pos:
                raise CatalogValidationError(f"duplicate agent id {a.id!r}", a.id)
            agent_pos[a.id] = i

        tool_pos: dict[str, int] = {}
        owner: dict[str, str] = {}
        for i, t in enumerate(self._tools):
            if t.id in tool_pos:
                raise CatalogValidationError(f"duplicate tool id {t.id!r}", t.id)
            if t.parent_agent_id not in agent_pos:
                raise CatalogValidationError(
                    f"orphan tool {t.id!r}: parent agent {t.parent_agent_id!r} does not exist",
                    t.id,
                )
            tool_pos[t.id] = i
            owner[t.id] = t.parent_agent_id

        self._agent_pos = agent_pos
        self._tool_pos = tool_pos
        self._owner = owner

    @property
    def agents(self) -> tuple[AgentNode, ...]:
        return self._agents

    @property
    def tools(self) -> tuple[ToolNode, ...]:
        return self._tools

    @property
    def owner(self) -> Mapping[str, str]:
        return dict(self._owner)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(t.id, t.parent_agent_id) for t in self._tools]

    def agent(self, agent_id: str) -> AgentNode:
        try:
            return self._agents[self._agent_pos[agent_id]]
        except KeyError:
            raise KeyError(f"unknown agent id {agent_id!r}") from None

    def tool(self, tool_id: str) -> ToolNode:
        try:
            return self._tools[self._tool_pos[tool_id]]
        except KeyError:
            raise KeyError(f"unknown tool id {tool_id!r}") from None

    def has_agent(self, agent_id: str) -> bool:
        return agent_id in self._agent_pos

    def has_tool(self, tool_id: str) -> bool:
        return tool_id in self._tool_pos

    def ordinal(self, node_id: str, node_type: NodeType) -> int:
        """Ingestion position of a node within its own corpus."""
        table = self._agent_pos if node_type == "agent" else self._tool_pos
        try:
            return table[node_id]
        except KeyError:
            raise KeyError(f"unknown {node_type} id {node_id!r}") from None

    def tools_of(self, agent_id: str) -> list[ToolNode]:
        self.agent(agent_id)
        return [t for t in self._tools if t.parent_agent_id == agent_id]

    def __len__(self) -> int:
        return len(self._agents) + len(self._tools)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self._agents == other._agents and self._tools == other._tools

    def __repr__(self) -> str:
        return f"KnowledgeGraph(agents={len(self._agents)}, tools={len(self._tools)})"


def owner_of(graph: KnowledgeGraph, node_id: str, node_type: NodeType) -> str:
    """Map a node to the agent that executes it (identity for agents)."""
    if node_type == "agent":
        if not graph.has_agent(node_id):
            raise KeyError(f"unknown agent id {node_id!r}")
        return node_id
    if node_type == "tool":
        return graph.tool(node_id).parent_agent_id
    raise ValueError(f"node_type must be 'agent' or 'tool', got {node_type!r}")


# -- manifests ---------------------------------------------------------------


def _schema_to_text(schema: Any) -> str | None:
    if schema is None:
        return None
    if isinstance(schema, str):
        return schema
    return json.dumps(schema, sort_keys=True, ensure_ascii=False)


def _str_field(rec: Mapping[str, Any], key: str, where: str, default: str | None = None) -> str:
    value = rec.get(key, default)
    if value is None:
        raise ManifestParseError(f"{where}: missing field {key!r}")
    if not isinstance(value, str):
        raise ManifestParseError(f"{where}: field {key!r} must be a string")
    return value


def _iter_tool_records(raw: Any, where: str) -> list[dict[str, Any]]:
    # Tools come either as a list of records or as a name -> record mapping.
    if raw is None:
        return []
    if isinstance(raw, list):
        out = []
        for j, t in enumerate(raw):
            if not isinstance(t, dict):
                raise ManifestParseError(f"{where}, tool #{j}: expected an object")
            out.append(t)
        return out
    if isinstance(raw, dict):
        out = []
        for name, t in raw.items():
            if isinstance(t, str):
                out.append({"name": name, "description": t})
            elif isinstance(t, dict):
                out.append({"name": name, **t})
            else:
                raise ManifestParseError(f"{where}, tool {name!r}: expected an object or string")
        return out
    raise ManifestParseError(f"{where}: 'tools' must be a list or an object")


def graph_from_records(
    records: Iterable[Mapping[str, Any]],
    extra_tools: Iterable[Mapping[str, Any]] = (),
) -> KnowledgeGraph:
    """Build a graph from agent records of the manifest format.

    Each record: ``{"name", "description", "tools": [{"name", "description",
    "schema"?}], "id"?, "metadata"?}``. Missing ids are synthesized as
    ``agent:<name>`` and ``tool:<agent-name>/<tool-name>``. ``extra_tools``
    are standalone tool records that name their parent via ``agent_id``.
    """
    agents: list[AgentNode] = []
    tools: list[ToolNode] = []
    for i, rec in enumerate(records):
        if not isinstance(rec, Mapping):
            raise ManifestParseError(f"agent record #{i}: expected an object")
        where = f"agent record #{i}"
        name = _str_field(rec, "name", where)
        where = f"agent {name!r}"
        agent_id = _str_field(rec, "id", where, default=f"agent:{name}")
        metadata = rec.get("metadata") or {}
        if not isinstance(metadata, Mapping):
            raise ManifestParseError(f"{where}: 'metadata' must be an object")
        agents.append(
            AgentNode(
                id=agent_id,
                name=name,
                description=_str_field(rec, "description", where, default="") or "",
                metadata={str(k): str(v) for k, v in metadata.items()},
            )
        )
        for t in _iter_tool_records(rec.get("tools"), where):
            tname = _str_field(t, "name", where)
            twhere = f"tool {tname!r} of {where}"
            schema = t.get("schema", t.get("inputSchema", t.get("input_schema")))
            tools.append(
                ToolNode(
                    id=_str_field(t, "id", twhere, default=f"tool:{name}/{tname}"),
                    name=tname,
                    description=_str_field(t, "description", twhere, default="") or "",
                    parent_agent_id=_str_field(t, "agent_id", twhere, default=agent_id),
                    schema_text=_schema_to_text(schema),
                )
            )
    names = {a.id: a.name for a in agents}
    for j, t in enumerate(extra_tools):
        if not isinstance(t, Mapping):
            raise ManifestParseError(f"tool record #{j}: expected an object")
        tname = _str_field(t, "name", f"tool record #{j}")
        twhere = f"tool {tname!r}"
        parent = _str_field(t, "agent_id", twhere)
        schema = t.get("schema", t.get("inputSchema", t.get("input_schema")))
        tools.append(
            ToolNode(
                id=_str_field(t, "id", twhere, default=f"tool:{names.get(parent, parent)}/{tname}"),
                name=tname,
                description=_str_field(t, "description", twhere, default="") or "",
                parent_agent_id=parent,
                schema_text=_schema_to_text(schema),
            )
        )
    return KnowledgeGraph(agents, tools)


def parse_manifest(text: str) -> tuple[list[dict[str, Any]], list[dict[str, Any]]]:
    """Parse manifest text into ``(agent_records, standalone_tool_records)``.

    Accepts a JSON document or JSON lines with one agent per line. A
    document may be a list of agent records or an object holding them under
    ``"agents"`` (``"servers"`` is accepted as an alias) plus an optional
    top-level ``"tools"`` list.
    """
    stripped = text.strip()
    if not stripped:
        return [], []
    try:
        doc = json.loads(stripped)
    except json.JSONDecodeError:
        doc = None
        records = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestParseError(f"line {lineno}: {exc.msg}") from exc
            records.append(rec)
        return records, []
    if isinstance(doc, list):
        return doc, []
    if isinstance(doc, dict):
        if "name" in doc:
            return [doc], []
        extra = doc.get("tools") or []
        if not isinstance(extra, list):
            raise ManifestParseError("top-level 'tools' must be a list")
        for key in ("agents", "servers"):
            if key in doc:
                if not isinstance(doc[key], list):
                    raise ManifestParseError(f"{key!r} must be a list")
                return doc[key], extra
        if extra:
            return [], extra
    raise ManifestParseError("manifest must be a list of agent records or an object with 'agents'")


def load_manifest(path: str | os.PathLike[str]) -> KnowledgeGraph:
    text = Path(path).read_text(encoding="utf-8")
    agents, tools = parse_manifest(text)
    return graph_from_records(agents, tools)


# -- persistence -------------------------------------------------------------


def graph_to_dict(graph: KnowledgeGraph) -> dict[str, Any]:
    return {
        "format_version": GRAPH_FORMAT_VERSION,
        "agents": [
            {"id": a.id, "name": a.name, "description": a.description, "metadata": dict(a.metadata)}
            for a in graph.agents
        ],
        "tools": [
            {
                "id": t.id,
                "name": t.name,
                "description": t.description,
                "parent_agent_id": t.parent_agent_id,
                "schema_text": t.schema_text,
            }
            for t in graph.tools
        ],
    }


def graph_to_manifest(graph: KnowledgeGraph) -> dict[str, Any]:
    """Manifest document readable by :func:`load_manifest`.

    Tools are written as standalone records so their ingestion order
    survives even when owners are interleaved.
    """
    tools = []
    for t in graph.tools:
        rec: dict[str, Any] = {"id": t.id, "name": t.name, "description": t.description, "agent_id": t.parent_agent_id}
        if t.schema_text is not None:
            rec["schema"] = t.schema_text
        tools.append(rec)
    return {
        "agents": [
            {"id": a.id, "name": a.name, "description": a.description, "metadata": dict(a.metadata), "tools": []}
            for a in graph.agents
        ],
        "tools": tools,
    }


def graph_from_dict(doc: Mapping[str, Any]) -> KnowledgeGraph:
    version = doc.get("format_version")
    if version != GRAPH_FORMAT_VERSION:
        raise GraphFormatError(
            f"graph format version {version!r} is not supported (expected {GRAPH_FORMAT_VERSION})"
        )
    try:
        agents = [
            AgentNode(a["id"], a["name"], a.get("description", ""), dict(a.get("metadata") or {}))
            for a in doc["agents"]
        ]
        tools = [
            ToolNode(t["id"], t["name"], t.get("description", ""), t["parent_agent_id"], t.get("schema_text"))
            for t in doc["tools"]
        ]
    except (KeyError, TypeError) as exc:
        raise GraphFormatError(f"malformed graph document: {exc}") from exc
    return KnowledgeGraph(agents, tools)


def dump_json(doc: Any) -> bytes:
    """Canonical JSON bytes: sorted keys, fixed separators, trailing newline."""
    return (json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False) + "\n").encode("utf-8")


def atomic_write(path: str | os.PathLike[str], data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def save_graph(graph: KnowledgeGraph, path: str | os.PathLike[str]) -> None:
    atomic_write(path, dump_json(graph_to_dict(graph)))


def load_graph(path: str | os.PathLike[str]) -> KnowledgeGraph:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}: not a graph file ({exc.msg})") from exc
    if not isinstance(doc, dict):
        raise GraphFormatError(f"{path}: not a graph file")
    return graph_from_dict(doc)
