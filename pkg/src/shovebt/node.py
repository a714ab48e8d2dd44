"""Node behavior base class, background tasks, and the node-type registry.

A node type is a ``Node`` subclass declaring its kind name, its maximum
child count, and its parameter schemas. Instances are constructed with
an id and an option dictionary; option values are validated against the
schema and frozen from then on.
"""

from __future__ import annotations

import importlib
import json
import threading
from enum import Enum
from typing import TYPE_CHECKING, Any, Callable, ClassVar, Mapping, Optional

from . import utility
from .dataflow import ParamKey, ParamKind, Ref, TypeSpec, propagate, resolve_static
from .errors import LifecycleError, MissingOptionError, TypeMismatchError
from .states import NodeState
from .typesys import TypeRegistry

if TYPE_CHECKING:
    from .engine import TickContext
    from .tree import TreeEnvironment


class NodeClass(str, Enum):
    LEAF = "leaf"
    DECORATOR = "decorator"
    FLOW_CONTROL = "flow_control"


class TaskStatus(str, Enum):
    RUNNING = "running"
    DONE_SUCCESS = "done-success"
    DONE_FAILURE = "done-failure"
    CANCELLED = "cancelled"


class BackgroundTask:
    """Handle for work that outlives a single tick.

    The handle is a status contract: workers (threads or cycle-driven
    code) mark completion through it, and the engine pauses or cancels
    it when the owning node leaves the running state. Thread-based
    workers must poll ``cancelled``/``paused`` cooperatively.
    """

    def __init__(
        self,
        *,
        pausable: bool = False,
        on_pause: Callable[[], None] | None = None,
        on_resume: Callable[[], None] | None = None,
        on_cancel: Callable[[], None] | None = None,
    ):
        self.status = TaskStatus.RUNNING
        self.pausable = pausable
        self.paused = False
        self._on_pause = on_pause
        self._on_resume = on_resume
        self._on_cancel = on_cancel

    @property
    def live(self) -> bool:
        return self.status == TaskStatus.RUNNING

    def complete(self, success: bool) -> None:
        if self.status == TaskStatus.RUNNING:
            self.status = TaskStatus.DONE_SUCCESS if success else TaskStatus.DONE_FAILURE

    def pause(self) -> None:
        if not self.pausable:
            raise LifecycleError("task is not pausable")
        if self.live and not self.paused:
            self.paused = True
            if self._on_pause:
                self._on_pause()

    def resume(self) -> None:
        if self.live and self.paused:
            self.paused = False
            if self._on_resume:
                self._on_resume()

    def cancel(self) -> None:
        if self.live:
            self.status = TaskStatus.CANCELLED
            if self._on_cancel:
                self._on_cancel()

    @classmethod
    def spawn(cls, fn: Callable[["BackgroundTask"], None], *, pausable: bool = False) -> "BackgroundTask":
        """Run ``fn(task)`` on a daemon thread; fn must poll the handle."""
        task = cls(pausable=pausable)
        thread = threading.Thread(target=fn, args=(task,), daemon=True)
        thread.start()
        return task


class Node:
    """Base class for all node behaviors.

    Subclasses set the class attributes and override the lifecycle
    hooks they need. Hooks never mutate node states directly; they
    return the intended outcome and the engine applies and checks it
    against the transition table.
    """

    KIND: ClassVar[str] = ""
    MAX_CHILDREN: ClassVar[Optional[int]] = 0  # None = unbounded
    OPTIONS: ClassVar[Mapping[str, TypeSpec]] = {}
    OPTION_DEFAULTS: ClassVar[Mapping[str, Any]] = {}
    INPUTS: ClassVar[Mapping[str, TypeSpec]] = {}
    OUTPUTS: ClassVar[Mapping[str, TypeSpec]] = {}
    OPTIONAL_INPUTS: ClassVar[frozenset[str]] = frozenset()

    def __init__(
        self,
        node_id: str,
        options: Mapping[str, Any] | None = None,
        *,
        types: TypeRegistry | None = None,
    ):
        self.id = node_id
        self._types = types or TypeRegistry.standard()
        self.options = self._validate_options(dict(options or {}))
        self._task: BackgroundTask | None = None
        self._in_tick = False

    # -- construction ----------------------------------------------------

    def _validate_options(self, values: dict[str, Any]) -> dict[str, Any]:
        unknown = set(values) - set(self.OPTIONS)
        if unknown:
            raise TypeMismatchError(
                f"{self.id}: unknown options {sorted(unknown)} for kind {self.KIND}"
            )
        merged = dict(self.OPTION_DEFAULTS)
        merged.update(values)
        missing = set(self.OPTIONS) - set(merged)
        if missing:
            raise MissingOptionError(f"{self.id}: missing options {sorted(missing)}")
        # Concretely typed options validate first so Refs can resolve
        # against them.
        for name, spec in sorted(
            self.OPTIONS.items(), key=lambda kv: isinstance(kv[1], Ref)
        ):
            if isinstance(spec, Ref) and isinstance(self.OPTIONS.get(spec.option), Ref):
                raise TypeMismatchError(
                    f"{self.id}: option {name!r} references option {spec.option!r},"
                    " which is itself a reference"
                )
            vt = resolve_static(spec, merged, self._types)
            if vt is None:
                raise TypeMismatchError(
                    f"{self.id}: cannot resolve type of option {name!r}"
                )
            if not vt.accepts(merged[name]):
                raise TypeMismatchError(
                    f"{self.id}: option {name!r}={merged[name]!r} is not a {vt.name}"
                )
        return merged

    # -- derived properties ----------------------------------------------

    @property
    def node_class(self) -> NodeClass:
        if self.MAX_CHILDREN == 0:
            return NodeClass.LEAF
        if self.MAX_CHILDREN == 1:
            return NodeClass.DECORATOR
        return NodeClass.FLOW_CONTROL

    def option(self, name: str) -> Any:
        return self.options[name]

    # -- parameter access -------------------------------------------------

    def input(self, env: "TreeEnvironment", name: str) -> Any:
        return env.world.param_values.get(ParamKey(self.id, ParamKind.INPUT, name))

    def set_output(self, env: "TreeEnvironment", name: str, value: Any) -> None:
        propagate(
            ParamKey(self.id, ParamKind.OUTPUT, name), value, env.data, env.world, env.types
        )

    def missing_required_inputs(self, env: "TreeEnvironment") -> list[str]:
        return [
            name
            for name in self.INPUTS
            if name not in self.OPTIONAL_INPUTS
            and env.world.param_values.get(ParamKey(self.id, ParamKind.INPUT, name)) is None
        ]

    # -- background tasks --------------------------------------------------

    @property
    def task(self) -> BackgroundTask | None:
        return self._task

    def start_background(
        self, env: "TreeEnvironment", task: BackgroundTask | None = None, **kwargs: Any
    ) -> BackgroundTask:
        """Register a background task; only legal while the node runs."""
        state = env.world.node_states.get(self.id)
        if not self._in_tick and state != NodeState.RUNNING:
            raise LifecycleError(
                f"{self.id}: background tasks may only start while running"
            )
        if self._task is not None and self._task.live:
            raise LifecycleError(f"{self.id}: node already holds a live task")
        self._task = task or BackgroundTask(**kwargs)
        return self._task

    def stop_background(self, mode: str = "cancel") -> None:
        if self._task is None:
            return
        if mode == "pause":
            self._task.pause()
        else:
            self._task.cancel()
            self._task = None

    # -- lifecycle hooks (override in subclasses) ---------------------------

    def on_setup(self, ctx: "TickContext") -> None:
        """Acquire resources; runs once per setup."""

    def on_tick(self, ctx: "TickContext") -> NodeState:
        """Produce running/succeeded/failed (IDLE requests deactivation)."""
        return NodeState.SUCCEEDED

    def on_untick(self, ctx: "TickContext") -> NodeState | None:
        """Optionally override the engine's pause-or-idle decision."""
        return None

    def on_reset(self, ctx: "TickContext") -> None:
        """Clear internal memory for a fresh activation."""

    def on_shutdown(self, ctx: "TickContext") -> None:
        """Release resources."""

    def utility(self, env: "TreeEnvironment") -> "utility.UtilityBounds":
        """Estimated execution cost bounds; leaves default to unknown."""
        return utility.UNKNOWN_BOUNDS

    # -- schema export ------------------------------------------------------

    @classmethod
    def schema(cls) -> dict[str, Any]:
        def enc(spec: TypeSpec) -> Any:
            return {"ref": spec.option} if isinstance(spec, Ref) else spec

        return {
            "kind": cls.KIND,
            "maxChildren": cls.MAX_CHILDREN,
            "options": {k: enc(v) for k, v in cls.OPTIONS.items()},
            "inputs": {k: enc(v) for k, v in cls.INPUTS.items()},
            "outputs": {k: enc(v) for k, v in cls.OUTPUTS.items()},
        }

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.id!r}>"


class NodeRegistry:
    """Maps node-type names to Node subclasses."""

    def __init__(self) -> None:
        self._kinds: dict[str, type[Node]] = {}

    def register(self, cls: type[Node]) -> type[Node]:
        if not cls.KIND:
            raise ValueError(f"{cls.__name__} has no KIND")
        if cls.KIND in self._kinds and self._kinds[cls.KIND] is not cls:
            raise ValueError(f"kind {cls.KIND!r} already registered")
        self._kinds[cls.KIND] = cls
        return cls

    def has(self, kind: str) -> bool:
        return kind in self._kinds

    def get(self, kind: str) -> type[Node]:
        try:
            return self._kinds[kind]
        except KeyError:
            raise KeyError(f"unknown node kind {kind!r}") from None

    def create(
        self,
        kind: str,
        node_id: str,
        options: Mapping[str, Any] | None = None,
        *,
        types: TypeRegistry | None = None,
    ) -> Node:
        return self.get(kind)(node_id, options, types=types)

    def kinds(self) -> list[str]:
        return sorted(self._kinds)

    def schemas(self) -> list[dict[str, Any]]:
        return [self._kinds[k].schema() for k in self.kinds()]

    def load_manifest(self, path: str) -> None:
        """Register node types from a manifest listing ``module:Class`` paths."""
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        for entry in doc.get("nodeTypes", []):
            module_name, _, class_name = entry.partition(":")
            module = importlib.import_module(module_name)
            cls = getattr(module, class_name)
            if not (isinstance(cls, type) and issubclass(cls, Node)):
                raise TypeError(f"{entry} is not a Node subclass")
            if not (self.has(cls.KIND) and self._kinds[cls.KIND] is cls):
                self.register(cls)

    @classmethod
    def standard(cls) -> "NodeRegistry":
        """Registry with the flow-control, distribution, and mission libraries."""
        from . import distribution, flow, mission

        reg = cls()
        for node_cls in (
            flow.Sequence,
            flow.Fallback,
            flow.Parallel,
            flow.Inverter,
            flow.ConstantValue,
            distribution.Shovable,
            distribution.RemoteSlot,
            mission.MoveTo,
            mission.OpenDoorService,
            mission.PickupObjectService,
            mission.DoorIsOpen,
        ):
            reg.register(node_cls)
        return reg
