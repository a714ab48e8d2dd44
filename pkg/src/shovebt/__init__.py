"""Distributed behavior-tree runtime with typed data wiring, utility
bounds, and shovable remote subtree execution."""

from .dataflow import DataGraph, ParamKey, ParamKind, Parameter, Ref
from .engine import EngineConfig, TickEngine, TransitionReport, update
from .errors import BtError, ValidationError
from .node import BackgroundTask, Node, NodeClass, NodeRegistry, TaskStatus
from .states import NodeAction, NodeState, allowed_targets
from .tree import TreeEnvironment, TreeGraph, WorldState, extract_subtree
from .treefile import load_tree, save_tree
from .typesys import TypeRegistry
from .utility import (
    Cost,
    UtilityBounds,
    aggregate_fallback,
    aggregate_parallel,
    aggregate_sequence,
    compare_utility,
    cost_add,
    tree_utility,
)

__version__ = "0.1.0"

__all__ = [
    "BackgroundTask",
    "BtError",
    "Cost",
    "DataGraph",
    "EngineConfig",
    "Node",
    "NodeAction",
    "NodeClass",
    "NodeRegistry",
    "NodeState",
    "ParamKey",
    "ParamKind",
    "Parameter",
    "Ref",
    "TaskStatus",
    "TickEngine",
    "TransitionReport",
    "TreeEnvironment",
    "TreeGraph",
    "TypeRegistry",
    "UtilityBounds",
    "ValidationError",
    "WorldState",
    "aggregate_fallback",
    "aggregate_parallel",
    "aggregate_sequence",
    "allowed_targets",
    "compare_utility",
    "cost_add",
    "extract_subtree",
    "load_tree",
    "save_tree",
    "tree_utility",
    "update",
]
