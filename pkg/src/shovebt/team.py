"""Global scheduler for multi-executor simulation runs.

Each cycle interleaves, in a fixed order: scripted scenario events, one
simulator step, every executor's tick cycle in id order, and message
delivery. That ordering, plus the in-process transport, makes whole
team runs reproducible down to the event log bytes.
"""

from __future__ import annotations

import os
from typing import Any, Optional

from .engine import EngineConfig
from .errors import BtError
from .executor import Executor
from .node import NodeRegistry
from .protocol import ExecutorDescriptor
from .sim import EventLog, Scenario, ScenarioEvent, SimHandle, Simulator, load_scenario
from .states import NodeState
from .transport import LocalNetwork
from .treefile import load_tree


class TeamScheduler:
    def __init__(
        self,
        sim: Simulator,
        executors: list[Executor],
        events: list[ScenarioEvent],
        log: EventLog,
        transport: LocalNetwork,
        config: EngineConfig | None = None,
    ):
        self.sim = sim
        self.executors = sorted(executors, key=lambda e: e.id)
        self.events = events
        self.log = log
        self.transport = transport
        self.config = config or EngineConfig()
        self.tick = 0
        self._announced: dict[str, NodeState] = {}
        for executor in self.executors:
            executor._event_sink = self._sink

    def _sink(self, actor: str, event: str, detail: str) -> None:
        self.log.log(self.tick, actor, event, detail)

    # -- scripted events ---------------------------------------------------------

    def _apply_events(self) -> None:
        for event in self.events:
            if event.fired:
                continue
            due = False
            if event.at is not None:
                due = self.tick >= event.at
            elif event.when_door_open is not None:
                if event.armed_at is None and self.sim.door_open(event.when_door_open):
                    event.armed_at = self.tick
                due = event.armed_at is not None and self.tick >= event.armed_at + event.delay
            if due:
                self._fire(event)
                event.fired = True

    def _fire(self, event: ScenarioEvent) -> None:
        if event.action == "forceDoor":
            self.sim.force_door(event.args["door"], bool(event.args.get("open", False)))
        else:
            raise BtError(f"unknown scenario action {event.action!r}")

    # -- cycles ---------------------------------------------------------------------

    def mission_executors(self) -> list[Executor]:
        return [e for e in self.executors if e.mission]

    def done(self) -> bool:
        missions = self.mission_executors()
        return bool(missions) and all(e.resolved() for e in missions)

    def run_cycle(self) -> None:
        self.sim.clock = self.tick
        self._apply_events()
        self.sim.step_moves()
        for executor in self.executors:
            tick_tree = not (executor.mission and executor.resolved())
            executor.run_cycle(tick_tree=tick_tree)
            state = executor.env.tree_state()
            if (
                executor.mission
                and state in (NodeState.SUCCEEDED, NodeState.FAILED)
                and self._announced.get(executor.id) != state
            ):
                self._announced[executor.id] = state
                self.log.log(self.tick, executor.id, "mission_result", f"state={state.value}")
        self.transport.flush()
        self.tick += 1

    def run(self, max_cycles: Optional[int] = None) -> dict[str, str]:
        limit = max_cycles if max_cycles is not None else self.config.max_cycles
        while self.tick < limit and not self.done():
            self.run_cycle()
        results = {e.id: e.env.tree_state().value for e in self.executors}
        for executor in self.executors:
            executor.engine.shutdown()
        return results

    # -- observability ------------------------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        return {
            "cycle": self.tick,
            "treeStates": {e.id: e.env.tree_state().value for e in self.executors},
            "nodeStates": {
                e.id: {n: s.value for n, s in sorted(e.env.world.node_states.items())}
                for e in self.executors
            },
            "paramValues": {
                e.id: {str(k): v for k, v in sorted(e.env.world.param_values.items())}
                for e in self.executors
            },
            "utilityCache": {e.id: e.shove_status() for e in self.executors},
            "slotStatus": {e.id: e.slot_status() for e in self.executors},
            "sim": self.sim.state_json(),
        }


def build_team(
    scenario: Scenario,
    *,
    registry: NodeRegistry | None = None,
    config: EngineConfig | None = None,
    base_dir: str = ".",
    tree_override: str | None = None,
) -> TeamScheduler:
    """Wire a scheduler from a scenario; ``tree_override`` replaces the
    first mission robot's tree document."""
    registry = registry or NodeRegistry.standard()
    config = config or EngineConfig()
    log = EventLog()
    sim = scenario.build_sim(log)
    network = LocalNetwork()
    executors: list[Executor] = []
    overridden = False
    for robot in scenario.robots:
        tree_source = robot.tree
        if tree_override is not None and robot.mission and not overridden:
            tree_source = tree_override
            overridden = True
        if isinstance(tree_source, str) and not tree_source.lstrip().startswith("{"):
            if not os.path.isabs(tree_source):
                tree_source = os.path.join(base_dir, tree_source)
        env = load_tree(tree_source, registry)
        network.register(robot.id)
        executor = Executor(
            robot.id,
            env,
            registry,
            network,
            config=config,
            mission=robot.mission,
        )
        env.world.externals["sim"] = SimHandle(sim, robot.id)
        executors.append(executor)
    ids = [r.id for r in scenario.robots]
    for robot, executor in zip(scenario.robots, executors):
        peer_ids = robot.peers if robot.peers is not None else [i for i in ids if i != robot.id]
        for peer_id in peer_ids:
            executor.add_peer(ExecutorDescriptor(peer_id, peer_id))
    for executor in executors:
        executor.engine.setup()
    return TeamScheduler(sim, executors, scenario.events, log, network, config)


def run_scenario(
    scenario_source: str | dict,
    *,
    tree_override: str | None = None,
    registry: NodeRegistry | None = None,
    config: EngineConfig | None = None,
    max_cycles: Optional[int] = None,
) -> tuple[TeamScheduler, dict[str, str]]:
    base_dir = (
        os.path.dirname(os.path.abspath(scenario_source))
        if isinstance(scenario_source, str) and not scenario_source.lstrip().startswith("{")
        else os.getcwd()
    )
    scenario = load_scenario(scenario_source)
    scheduler = build_team(
        scenario,
        registry=registry,
        config=config,
        base_dir=base_dir,
        tree_override=tree_override,
    )
    results = scheduler.run(max_cycles)
    return scheduler, results
