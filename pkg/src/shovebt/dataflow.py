"""Typed node parameters, data wirings, and value propagation.

Every node owns a set of parameters (options, inputs, outputs). Inputs
and outputs can be wired output -> input anywhere in the tree; wirings
are type checked when added, and a source write synchronously updates
every wired target.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Any, Iterable, NamedTuple, Optional, Union

from .errors import (
    KindMismatchError,
    TypeMismatchError,
    UnresolvableTypeError,
)
from .typesys import TypeRegistry, ValueType

if TYPE_CHECKING:
    from .tree import WorldState


class ParamKind(str, Enum):
    OPTION = "option"
    INPUT = "input"
    OUTPUT = "output"


class Ref:
    """Type reference that defers to an option of the same node.

    The referenced option's value names the concrete type. The target
    option must itself be concretely typed, so references cannot chain.
    """

    __slots__ = ("option",)

    def __init__(self, option: str):
        self.option = option

    def __repr__(self) -> str:
        return f"Ref({self.option!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Ref) and other.option == self.option

    def __hash__(self) -> int:
        return hash(("Ref", self.option))


#: A parameter type is either a registered type name or a Ref.
TypeSpec = Union[str, Ref]


class ParamKey(NamedTuple):
    node: str
    kind: ParamKind
    name: str

    def __str__(self) -> str:
        return f"{self.node}.{self.kind.value}.{self.name}"


@dataclass(frozen=True)
class Parameter:
    node: str
    kind: ParamKind
    name: str
    type: TypeSpec

    @property
    def key(self) -> ParamKey:
        return ParamKey(self.node, self.kind, self.name)


class Wiring(NamedTuple):
    source: ParamKey
    target: ParamKey


def resolve(
    type_spec: TypeSpec,
    node: str,
    world: "WorldState",
    types: TypeRegistry,
) -> Optional[ValueType]:
    """Resolve a parameter type against the current world.

    Returns None when the type cannot be resolved (unset or ill-typed
    option reference, unregistered name); wiring or valuation against
    an unresolved type is invalid.
    """
    if isinstance(type_spec, Ref):
        value = world.param_values.get(ParamKey(node, ParamKind.OPTION, type_spec.option))
        if not isinstance(value, str):
            return None
        type_spec = value
    try:
        return types.get(type_spec)
    except UnresolvableTypeError:
        return None


def resolve_static(
    type_spec: TypeSpec,
    option_values: dict[str, Any],
    types: TypeRegistry,
) -> Optional[ValueType]:
    """Resolve a type from a node's option dictionary (no world needed)."""
    if isinstance(type_spec, Ref):
        value = option_values.get(type_spec.option)
        if not isinstance(value, str):
            return None
        type_spec = value
    try:
        return types.get(type_spec)
    except UnresolvableTypeError:
        return None


class DataGraph:
    """Parameters of all tree nodes plus the output -> input wirings."""

    def __init__(self) -> None:
        self.params: dict[ParamKey, Parameter] = {}
        self.wirings: set[Wiring] = set()

    def add_param(self, param: Parameter) -> None:
        if param.key in self.params:
            raise ValueError(f"duplicate parameter {param.key}")
        self.params[param.key] = param

    def remove_node_params(self, node_id: str) -> None:
        for key in [k for k in self.params if k.node == node_id]:
            del self.params[key]
        self.wirings = {
            w for w in self.wirings if w.source.node != node_id and w.target.node != node_id
        }

    def node_params(self, node_id: str, kind: ParamKind | None = None) -> list[Parameter]:
        return [
            p
            for p in self.params.values()
            if p.node == node_id and (kind is None or p.kind == kind)
        ]

    def find(self, node_id: str, name: str, kind: ParamKind) -> Optional[Parameter]:
        return self.params.get(ParamKey(node_id, kind, name))

    def wire(
        self,
        source: ParamKey,
        target: ParamKey,
        world: "WorldState",
        types: TypeRegistry,
    ) -> None:
        """Add a wiring after kind and type checks. Duplicates are a no-op."""
        src = self.params.get(source)
        tgt = self.params.get(target)
        if src is None:
            raise KindMismatchError(f"unknown source parameter {source}")
        if tgt is None:
            raise KindMismatchError(f"unknown target parameter {target}")
        if src.kind != ParamKind.OUTPUT:
            raise KindMismatchError(f"wiring source {source} is not an output")
        if tgt.kind != ParamKind.INPUT:
            raise KindMismatchError(f"wiring target {target} is not an input")
        src_type = resolve(src.type, src.node, world, types)
        tgt_type = resolve(tgt.type, tgt.node, world, types)
        if src_type is None or tgt_type is None:
            raise UnresolvableTypeError(
                f"cannot resolve types for wiring {source} -> {target}"
            )
        if src_type.name != tgt_type.name:
            raise TypeMismatchError(
                f"wiring {source} ({src_type.name}) -> {target} ({tgt_type.name})"
            )
        self.wirings.add(Wiring(source, target))
        # Late wiring still sees the source's current value.
        value = world.param_values.get(source)
        if value is not None:
            world.param_values[target] = value

    def unwire(self, source: ParamKey, target: ParamKey) -> bool:
        try:
            self.wirings.remove(Wiring(source, target))
            return True
        except KeyError:
            return False

    def targets_of(self, source: ParamKey) -> list[ParamKey]:
        return sorted(w.target for w in self.wirings if w.source == source)

    def filtered(self, node_ids: Iterable[str]) -> "DataGraph":
        """Restrict to parameters of the given nodes and internal wirings."""
        keep = set(node_ids)
        sub = DataGraph()
        sub.params = {k: p for k, p in self.params.items() if k.node in keep}
        sub.wirings = {
            w for w in self.wirings if w.source.node in keep and w.target.node in keep
        }
        return sub


def propagate(
    source: ParamKey,
    value: Any,
    data: DataGraph,
    world: "WorldState",
    types: TypeRegistry,
) -> None:
    """Write a source parameter and push the value to every wired target."""
    param = data.params.get(source)
    if param is None:
        raise KindMismatchError(f"unknown parameter {source}")
    vt = resolve(param.type, param.node, world, types)
    if vt is None:
        raise UnresolvableTypeError(f"cannot resolve type of {source}")
    if not vt.accepts(value):
        raise TypeMismatchError(f"{source}: {value!r} is not a {vt.name}")
    world.param_values[source] = value
    for target in data.targets_of(source):
        world.param_values[target] = value


def public_io(subtree_nodes: Iterable[str], data: DataGraph) -> set[ParamKey]:
    """Parameters of subtree nodes wired across the subtree boundary."""
    inside = set(subtree_nodes)
    result: set[ParamKey] = set()
    for w in data.wirings:
        if w.source.node in inside and w.target.node not in inside:
            result.add(w.source)
        if w.target.node in inside and w.source.node not in inside:
            result.add(w.target)
    return result


def public_inputs(subtree_nodes: Iterable[str], data: DataGraph) -> list[ParamKey]:
    return sorted(k for k in public_io(subtree_nodes, data) if k.kind == ParamKind.INPUT)


def public_outputs(subtree_nodes: Iterable[str], data: DataGraph) -> list[ParamKey]:
    return sorted(k for k in public_io(subtree_nodes, data) if k.kind == ParamKind.OUTPUT)
