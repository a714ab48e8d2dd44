"""Tree document format: load, save, validate.

Schema version 1, JSON:

    {
      "version": 1,
      "name": "optional label",
      "nodes": [{"id": "...", "kind": "...", "options": {...}}
                | {"id": "...", "include": "other.json"}],
      "edges": [{"parent": "...", "child": "...", "order": 0}],
      "wirings": [{"source": {"node": "...", "name": "..."},
                   "target": {"node": "...", "name": "..."}}]
    }

Wiring sources are outputs and targets are inputs. An include entry is
replaced by the included document's tree, with every inner id prefixed
by ``<id>/``; includes resolve recursively and cycles are rejected.
"""

from __future__ import annotations

import json
import os
from typing import Any

from .dataflow import ParamKey, ParamKind
from .errors import (
    BtError,
    IncludeCycleError,
    ParseError,
    TreeStructureError,
    UnknownNodeError,
    ValidationError,
    WiringError,
)
from .node import NodeRegistry
from .tree import TreeEnvironment
from .typesys import TypeRegistry

SCHEMA_VERSION = 1


def parse_doc(source: str | dict[str, Any]) -> dict[str, Any]:
    """Accept a dict, a JSON string, or a path to a JSON file."""
    if isinstance(source, dict):
        return source
    text = source
    if not source.lstrip().startswith("{"):
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read {source!r}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("tree document must be a JSON object")
    return doc


def _resolve_includes(
    doc: dict[str, Any], base_dir: str, stack: tuple[str, ...]
) -> dict[str, Any]:
    nodes: list[dict[str, Any]] = []
    edges = [dict(e) for e in doc.get("edges", [])]
    wirings = [json.loads(json.dumps(w)) for w in doc.get("wirings", [])]
    for entry in doc.get("nodes", []):
        if not isinstance(entry, dict) or "include" not in entry:
            nodes.append(dict(entry) if isinstance(entry, dict) else entry)
            continue
        prefix = str(entry.get("id", "include"))
        path = os.path.normpath(os.path.join(base_dir, entry["include"]))
        if path in stack:
            raise IncludeCycleError(" -> ".join(stack + (path,)))
        inner = parse_doc(path)
        inner = _resolve_includes(inner, os.path.dirname(path), stack + (path,))
        rename = {n["id"]: f"{prefix}/{n['id']}" for n in inner.get("nodes", [])}
        inner_edges = inner.get("edges", [])
        children_with_parent = {e["child"] for e in inner_edges}
        inner_roots = [n["id"] for n in inner.get("nodes", []) if n["id"] not in children_with_parent]
        for n in inner.get("nodes", []):
            renamed = dict(n)
            renamed["id"] = rename[n["id"]]
            nodes.append(renamed)
        for e in inner_edges:
            edges.append({"parent": rename[e["parent"]], "child": rename[e["child"]],
                          "order": e.get("order")})
        for w in inner.get("wirings", []):
            wirings.append(
                {
                    "source": {"node": rename[w["source"]["node"]], "name": w["source"]["name"]},
                    "target": {"node": rename[w["target"]["node"]], "name": w["target"]["name"]},
                }
            )
        # graft edges that referenced the include entry onto the inner root
        if len(inner_roots) == 1:
            grafted = rename[inner_roots[0]]
            for e in edges:
                if e.get("child") == prefix:
                    e["child"] = grafted
                if e.get("parent") == prefix:
                    e["parent"] = grafted
    out = dict(doc)
    out["nodes"] = nodes
    out["edges"] = edges
    out["wirings"] = wirings
    return out


def build_env(
    doc: dict[str, Any],
    registry: NodeRegistry,
    types: TypeRegistry | None = None,
    *,
    collect: list[str] | None = None,
) -> TreeEnvironment:
    """Build an environment from a resolved document.

    With ``collect`` given, violations are gathered there instead of
    raising on the first one; the returned env is then only meaningful
    when the list stays empty.
    """
    problems = collect if collect is not None else None

    def fail(message: str) -> None:
        if problems is None:
            raise ValidationError([message])
        problems.append(message)

    env = TreeEnvironment(types or TypeRegistry.standard())
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        fail(f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")
    entries = doc.get("nodes", [])
    if not isinstance(entries, list) or not entries:
        fail("document contains no nodes (so no root)")
        entries = []
    for entry in entries:
        if not isinstance(entry, dict) or "id" not in entry:
            fail(f"malformed node entry {entry!r}")
            continue
        node_id = entry["id"]
        kind = entry.get("kind")
        if not registry.has(str(kind)):
            fail(f"node {node_id!r}: unknown kind {kind!r}")
            continue
        try:
            node = registry.create(str(kind), node_id, entry.get("options") or {}, types=env.types)
            env.add_node(node)
        except BtError as exc:
            fail(f"node {node_id!r}: {exc}")
    for edge in doc.get("edges", []):
        try:
            parent, child = edge["parent"], edge["child"]
        except (KeyError, TypeError):
            fail(f"malformed edge entry {edge!r}")
            continue
        if parent not in env.nodes or child not in env.nodes:
            fail(f"edge {parent!r}->{child!r} references an unknown node")
            continue
        try:
            env.add_child(parent, child, edge.get("order"))
        except (TreeStructureError, UnknownNodeError) as exc:
            fail(f"edge {parent!r}->{child!r}: {exc}")
    for wiring in doc.get("wirings", []):
        try:
            source = (wiring["source"]["node"], wiring["source"]["name"])
            target = (wiring["target"]["node"], wiring["target"]["name"])
        except (KeyError, TypeError):
            fail(f"malformed wiring entry {wiring!r}")
            continue
        key = ParamKey(source[0], ParamKind.OUTPUT, source[1])
        tkey = ParamKey(target[0], ParamKind.INPUT, target[1])
        try:
            env.data.wire(key, tkey, env.world, env.types)
        except WiringError as exc:
            fail(f"wiring {key} -> {tkey}: {exc}")
    roots = env.graph.roots()
    if len(roots) != 1:
        fail(f"tree must have exactly one root, found {roots}")
    return env


def load_tree(
    source: str | dict[str, Any],
    registry: NodeRegistry | None = None,
    types: TypeRegistry | None = None,
    *,
    base_dir: str | None = None,
) -> TreeEnvironment:
    """Parse, resolve includes, validate, and build an environment.

    Raises ParseError / IncludeCycleError on malformed input and
    ValidationError carrying every violation found.
    """
    registry = registry or NodeRegistry.standard()
    if base_dir is None:
        base_dir = (
            os.path.dirname(os.path.abspath(source))
            if isinstance(source, str) and not source.lstrip().startswith("{")
            else os.getcwd()
        )
    doc = _resolve_includes(parse_doc(source), base_dir, stack=())
    problems: list[str] = []
    env = build_env(doc, registry, types, collect=problems)
    if problems:
        raise ValidationError(problems)
    return env


def env_to_doc(env: TreeEnvironment, name: str | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {"version": SCHEMA_VERSION}
    if name:
        doc["name"] = name
    doc["nodes"] = [
        {"id": node_id, "kind": env.nodes[node_id].KIND, "options": dict(env.nodes[node_id].options)}
        for node_id in sorted(env.nodes)
    ]
    doc["edges"] = [
        {"parent": parent, "child": child, "order": order}
        for parent, child, order in env.graph.edges()
    ]
    doc["wirings"] = sorted(
        (
            {
                "source": {"node": w.source.node, "name": w.source.name},
                "target": {"node": w.target.node, "name": w.target.name},
            }
            for w in env.data.wirings
        ),
        key=lambda w: (w["source"]["node"], w["source"]["name"], w["target"]["node"], w["target"]["name"]),
    )
    return doc


def save_tree(env: TreeEnvironment, name: str | None = None) -> str:
    return json.dumps(env_to_doc(env, name), indent=2, sort_keys=True)
