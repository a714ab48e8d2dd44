"""Tree structure, world state, and the combined tree environment.

The environment bundles everything a tick needs: the ordered tree
graph, the data graph, the type registry, and the world state holding
node states and parameter values. The world is mutated only through
the engine's update function and the propagation path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

from .dataflow import DataGraph, ParamKey, ParamKind, Parameter, propagate
from .errors import TreeStructureError, UnknownNodeError
from .node import Node
from .protocol import ExecutorDescriptor
from .states import NodeState
from .typesys import TypeRegistry


class TreeGraph:
    """Ordered rooted tree over node ids."""

    def __init__(self) -> None:
        self.node_ids: set[str] = set()
        self._parent: dict[str, str] = {}
        self._order: dict[tuple[str, str], int] = {}

    def add_node(self, node_id: str) -> None:
        if node_id in self.node_ids:
            raise TreeStructureError(f"duplicate node id {node_id!r}")
        self.node_ids.add(node_id)

    def has(self, node_id: str) -> bool:
        return node_id in self.node_ids

    def parent(self, node_id: str) -> Optional[str]:
        return self._parent.get(node_id)

    def children(self, node_id: str) -> list[str]:
        found = [
            (order, child)
            for (parent, child), order in self._order.items()
            if parent == node_id
        ]
        return [child for _, child in sorted(found)]

    def edges(self) -> list[tuple[str, str, int]]:
        return sorted(
            (parent, child, order) for (parent, child), order in self._order.items()
        )

    def order_of(self, parent: str, child: str) -> int:
        return self._order[(parent, child)]

    def add_edge(self, parent: str, child: str, order: int | None = None) -> None:
        if parent not in self.node_ids:
            raise UnknownNodeError(f"unknown parent {parent!r}")
        if child not in self.node_ids:
            raise UnknownNodeError(f"unknown child {child!r}")
        if parent == child:
            raise TreeStructureError(f"self edge on {parent!r}")
        if child in self._parent:
            raise TreeStructureError(f"{child!r} already has a parent")
        # adding parent->child creates a cycle iff child is an ancestor of parent
        cursor: Optional[str] = parent
        while cursor is not None:
            if cursor == child:
                raise TreeStructureError(f"edge {parent!r}->{child!r} would create a cycle")
            cursor = self._parent.get(cursor)
        siblings = {self._order[(parent, c)] for c in self.children(parent)}
        if order is None:
            order = max(siblings) + 1 if siblings else 0
        elif order in siblings:
            raise TreeStructureError(
                f"order {order} already used among children of {parent!r}"
            )
        self._parent[child] = parent
        self._order[(parent, child)] = order

    def roots(self) -> list[str]:
        return sorted(n for n in self.node_ids if n not in self._parent)

    def root(self) -> str:
        roots = self.roots()
        if len(roots) != 1:
            raise TreeStructureError(f"tree must have exactly one root, found {roots}")
        return roots[0]

    def dfs_preorder(self, start: str | None = None) -> Iterator[str]:
        start = start if start is not None else self.root()
        stack = [start]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(self.children(node)))

    def subtree_ids(self, root: str) -> set[str]:
        """Fixed point of repeatedly adding children, starting from root."""
        if root not in self.node_ids:
            raise UnknownNodeError(f"unknown node {root!r}")
        members = {root}
        while True:
            grown = members | {
                child for node in members for child in self.children(node)
            }
            if len(grown) == len(members):
                return members
            members = grown

    def restricted(self, node_ids: set[str]) -> "TreeGraph":
        sub = TreeGraph()
        sub.node_ids = set(node_ids)
        sub._parent = {c: p for c, p in self._parent.items() if c in node_ids and p in node_ids}
        sub._order = {
            (p, c): o for (p, c), o in self._order.items() if p in node_ids and c in node_ids
        }
        return sub


@dataclass
class WorldState:
    """Mutable store of node states, parameter values, and external facts."""

    node_states: dict[str, NodeState] = field(default_factory=dict)
    param_values: dict[ParamKey, Any] = field(default_factory=dict)
    externals: dict[str, Any] = field(default_factory=dict)
    neighbors: list[ExecutorDescriptor] = field(default_factory=list)

    def state(self, node_id: str) -> NodeState:
        try:
            return self.node_states[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node {node_id!r}") from None

    def value(self, key: ParamKey) -> Any:
        return self.param_values.get(key)


class TreeEnvironment:
    """Tree graph + data graph + type registry + world state."""

    def __init__(self, types: TypeRegistry | None = None):
        self.graph = TreeGraph()
        self.data = DataGraph()
        self.types = types or TypeRegistry.standard()
        self.world = WorldState()
        self.nodes: dict[str, Node] = {}
        self.reports: list[Any] = []
        self.cycle = 0

    # -- construction ------------------------------------------------------

    def add_node(self, node: Node) -> Node:
        self.graph.add_node(node.id)
        node._types = self.types
        self.nodes[node.id] = node
        self.world.node_states[node.id] = NodeState.UNINITIALIZED
        for name, spec in node.OPTIONS.items():
            param = Parameter(node.id, ParamKind.OPTION, name, spec)
            self.data.add_param(param)
            self.world.param_values[param.key] = node.options[name]
        for kind, schema in ((ParamKind.INPUT, node.INPUTS), (ParamKind.OUTPUT, node.OUTPUTS)):
            for name, spec in schema.items():
                param = Parameter(node.id, kind, name, spec)
                self.data.add_param(param)
                self.world.param_values[param.key] = None
        return node

    def add_child(self, parent_id: str, child: Node | str, order: int | None = None) -> None:
        child_id = child if isinstance(child, str) else child.id
        if not isinstance(child, str) and child_id not in self.nodes:
            self.add_node(child)
        parent = self.nodes.get(parent_id)
        if parent is None:
            raise UnknownNodeError(f"unknown parent {parent_id!r}")
        limit = parent.MAX_CHILDREN
        if limit is not None and len(self.graph.children(parent_id)) >= limit:
            raise TreeStructureError(
                f"{parent_id!r} ({parent.KIND}) accepts at most {limit} children"
            )
        self.graph.add_edge(parent_id, child_id, order)

    def wire(self, source: tuple[str, str], target: tuple[str, str]) -> None:
        src = ParamKey(source[0], ParamKind.OUTPUT, source[1])
        if src not in self.data.params:
            found = [k for k in self.data.params if k.node == source[0] and k.name == source[1]]
            src = found[0] if found else src
        tgt = ParamKey(target[0], ParamKind.INPUT, target[1])
        if tgt not in self.data.params:
            found = [k for k in self.data.params if k.node == target[0] and k.name == target[1]]
            tgt = found[0] if found else tgt
        self.data.wire(src, tgt, self.world, self.types)

    def unwire(self, source: tuple[str, str], target: tuple[str, str]) -> bool:
        return self.data.unwire(
            ParamKey(source[0], ParamKind.OUTPUT, source[1]),
            ParamKey(target[0], ParamKind.INPUT, target[1]),
        )

    # -- queries -------------------------------------------------------------

    def root_id(self) -> str:
        return self.graph.root()

    def tree_state(self) -> NodeState:
        return self.world.state(self.root_id())

    def state(self, node_id: str) -> NodeState:
        return self.world.state(node_id)

    def children_of(self, node_id: str) -> list[Node]:
        return [self.nodes[c] for c in self.graph.children(node_id)]

    def set_param(self, key: ParamKey, value: Any) -> None:
        """Direct write without propagation (used when injecting values)."""
        self.world.param_values[key] = value

    def propagate(self, key: ParamKey, value: Any) -> None:
        propagate(key, value, self.data, self.world, self.types)

    def snapshot(self) -> dict[str, Any]:
        return {
            "cycle": self.cycle,
            "nodeStates": {
                n: self.world.node_states[n].value for n in sorted(self.world.node_states)
            },
            "paramValues": {
                str(k): v for k, v in sorted(self.world.param_values.items())
            },
        }


def extract_subtree(root_id: str, env: TreeEnvironment) -> TreeEnvironment:
    """Environment of the subtree rooted at ``root_id``.

    The node set is closed under children; the data graph keeps only
    parameters of kept nodes and wirings internal to them. The type
    registry, world state, and node instances carry over by reference.
    """
    members = env.graph.subtree_ids(root_id)
    sub = TreeEnvironment.__new__(TreeEnvironment)
    sub.graph = env.graph.restricted(members)
    sub.data = env.data.filtered(members)
    sub.types = env.types
    sub.world = env.world
    sub.nodes = {n: env.nodes[n] for n in members}
    sub.reports = env.reports
    sub.cycle = env.cycle
    return sub
