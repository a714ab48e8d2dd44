"""Deterministic grid-world team simulator.

The world is a fixed grid with walls, doors (impassable while closed),
pickable objects, and robots with per-robot service sets. Robots move
one cell per step along a breadth-first shortest path (4-neighborhood,
tie-broken in N, E, S, W order); a robot whose route is blocked by a
closed door advances as far as the cell in front of it and waits.
Identical scenario scripts produce byte-identical event logs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .errors import ParseError

Cell = tuple[int, int]

# N, E, S, W in grid coordinates (x right, y down)
_DIRECTIONS: tuple[Cell, ...] = ((0, -1), (1, 0), (0, 1), (-1, 0))

#: a robot can use a service on a target at most this far away
PROXIMITY = 1


@dataclass
class Door:
    cell: Cell
    open: bool = False


@dataclass
class SimObject:
    cell: Cell
    picked_up: bool = False


@dataclass
class Robot:
    pose: Cell
    services: set[str] = field(default_factory=set)


@dataclass
class ServiceReply:
    success: bool
    error: str = ""


class EventLog:
    """Append-only ``tick,actor,event,detail`` log."""

    def __init__(self) -> None:
        self.entries: list[tuple[int, str, str, str]] = []

    def log(self, tick: int, actor: str, event: str, detail: str = "") -> None:
        self.entries.append((tick, actor, event, detail))

    def lines(self) -> list[str]:
        return [f"{t},{actor},{event},{detail}" for t, actor, event, detail in self.entries]

    def text(self) -> str:
        return "\n".join(self.lines()) + ("\n" if self.entries else "")

    def find(self, event: str) -> list[tuple[int, str, str, str]]:
        return [e for e in self.entries if e[2] == event]

    def first_tick(self, event: str) -> Optional[int]:
        found = self.find(event)
        return found[0][0] if found else None


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


class Simulator:
    """Grid world plus the door/object services the mission nodes call."""

    def __init__(
        self,
        width: int,
        height: int,
        walls: Iterable[Cell] = (),
        log: EventLog | None = None,
    ):
        self.width = width
        self.height = height
        self.walls: set[Cell] = {tuple(c) for c in walls}
        self.doors: dict[str, Door] = {}
        self.objects: dict[str, SimObject] = {}
        self.robots: dict[str, Robot] = {}
        self.clock = 0
        self.log = log or EventLog()
        self._move_goals: dict[str, Cell] = {}

    # -- construction ---------------------------------------------------------

    def add_door(self, door_id: str, cell: Cell, open: bool = False) -> None:
        cell = tuple(cell)
        self.doors[door_id] = Door(cell, open)
        self.walls.discard(cell)

    def add_object(self, object_id: str, cell: Cell) -> None:
        self.objects[object_id] = SimObject(tuple(cell))

    def add_robot(self, robot_id: str, pose: Cell, services: Iterable[str] = ()) -> None:
        pose = tuple(pose)
        if not self._on_grid(pose):
            raise ValueError(f"robot {robot_id!r} spawns off-grid at {pose}")
        self.robots[robot_id] = Robot(pose, set(services))

    # -- geometry ----------------------------------------------------------------

    def _on_grid(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def passable(self, cell: Cell, doors_open: bool = False) -> bool:
        if not self._on_grid(cell) or cell in self.walls:
            return False
        for door in self.doors.values():
            if door.cell == cell and not door.open and not doors_open:
                return False
        return True

    def shortest_path(self, start: Cell, goal: Cell, doors_open: bool = False) -> Optional[list[Cell]]:
        """BFS path including both endpoints; None when unreachable."""
        if start == goal:
            return [start]
        if not self.passable(goal, doors_open):
            return None
        seen = {start}
        come_from: dict[Cell, Cell] = {}
        frontier = [start]
        while frontier:
            next_frontier = []
            for cell in frontier:
                for dx, dy in _DIRECTIONS:
                    neighbor = (cell[0] + dx, cell[1] + dy)
                    if neighbor in seen or not self.passable(neighbor, doors_open):
                        continue
                    seen.add(neighbor)
                    come_from[neighbor] = cell
                    if neighbor == goal:
                        path = [goal]
                        while path[-1] != start:
                            path.append(come_from[path[-1]])
                        return list(reversed(path))
                    next_frontier.append(neighbor)
            frontier = next_frontier
        return None

    # -- movement -------------------------------------------------------------------

    def request_move(self, robot_id: str, goal: Cell) -> None:
        if robot_id not in self.robots:
            raise KeyError(f"unknown robot {robot_id!r}")
        self._move_goals[robot_id] = tuple(goal)

    def step(self) -> None:
        """Advance every commanded robot one cell and the clock by one."""
        self.step_moves()
        self.clock += 1

    def step_moves(self) -> None:
        """Movement phase only; the caller owns the clock."""
        for robot_id in sorted(self._move_goals):
            goal = self._move_goals[robot_id]
            robot = self.robots[robot_id]
            if robot.pose == goal:
                continue
            path = self.shortest_path(robot.pose, goal)
            if path is None:
                # blocked by closed doors: approach along the unblocked route
                # and wait in front of the first closed door
                path = self.shortest_path(robot.pose, goal, doors_open=True)
            if path is None or len(path) < 2:
                continue
            nxt = path[1]
            if self.passable(nxt):
                robot.pose = nxt
        self._move_goals.clear()

    # -- services -----------------------------------------------------------------------

    def call_open_door(self, robot_id: str, door_id: str) -> ServiceReply:
        door = self.doors.get(door_id)
        if door is None:
            return ServiceReply(False, "unknown-door")
        robot = self.robots[robot_id]
        if "open_door" not in robot.services:
            return ServiceReply(False, "service-unavailable")
        if manhattan(robot.pose, door.cell) > PROXIMITY:
            return ServiceReply(False, "")
        if not door.open:
            door.open = True
            self.log.log(self.clock, robot_id, "door_opened", f"door={door_id}")
        return ServiceReply(True)

    def call_pickup_object(self, robot_id: str, object_id: str) -> ServiceReply:
        obj = self.objects.get(object_id)
        if obj is None:
            return ServiceReply(False, "unknown-object")
        robot = self.robots[robot_id]
        if "pickup_object" not in robot.services:
            return ServiceReply(False, "service-unavailable")
        if obj.picked_up or manhattan(robot.pose, obj.cell) > PROXIMITY:
            return ServiceReply(False, "")
        obj.picked_up = True
        self.log.log(self.clock, robot_id, "object_picked_up", f"object={object_id}")
        return ServiceReply(True)

    def force_door(self, door_id: str, open: bool) -> None:
        door = self.doors.get(door_id)
        if door is None:
            raise KeyError(f"unknown door {door_id!r}")
        if door.open != open:
            door.open = open
            state = "open" if open else "closed"
            self.log.log(self.clock, "sim", "force_door", f"door={door_id} state={state}")
        else:
            self.log.log(self.clock, "sim", "force_door_noop", f"door={door_id}")

    def door_open(self, door_id: str) -> bool:
        door = self.doors.get(door_id)
        if door is None:
            raise KeyError(f"unknown door {door_id!r}")
        return door.open

    def object_counts(self) -> tuple[int, int]:
        present = sum(1 for o in self.objects.values() if not o.picked_up)
        return present, len(self.objects) - present

    def state_json(self) -> dict[str, Any]:
        return {
            "clock": self.clock,
            "doors": {
                d: {"cell": list(door.cell), "open": door.open}
                for d, door in sorted(self.doors.items())
            },
            "objects": {
                o: {"cell": list(obj.cell), "pickedUp": obj.picked_up}
                for o, obj in sorted(self.objects.items())
            },
            "robots": {
                r: {"pose": list(robot.pose), "services": sorted(robot.services)}
                for r, robot in sorted(self.robots.items())
            },
        }


class SimHandle:
    """One robot's view of the simulator, installed into node externals."""

    def __init__(self, sim: Simulator, robot_id: str):
        self.sim = sim
        self.robot_id = robot_id

    @property
    def pose(self) -> Cell:
        return self.sim.robots[self.robot_id].pose

    @property
    def services(self) -> set[str]:
        return self.sim.robots[self.robot_id].services

    def request_move(self, goal: Cell) -> None:
        self.sim.request_move(self.robot_id, goal)

    def open_door(self, door_id: str) -> ServiceReply:
        return self.sim.call_open_door(self.robot_id, door_id)

    def pickup_object(self, object_id: str) -> ServiceReply:
        return self.sim.call_pickup_object(self.robot_id, object_id)

    def door_open(self, door_id: str) -> bool:
        return self.sim.door_open(door_id)


# -- scenario files ---------------------------------------------------------------------


@dataclass
class ScenarioEvent:
    action: str
    args: dict[str, Any]
    at: Optional[int] = None
    when_door_open: Optional[str] = None
    delay: int = 0
    fired: bool = False
    armed_at: Optional[int] = None


@dataclass
class ScenarioRobot:
    id: str
    pose: Cell
    services: list[str]
    tree: str
    mission: bool
    peers: Optional[list[str]] = None


@dataclass
class Scenario:
    width: int
    height: int
    walls: list[Cell]
    doors: dict[str, dict[str, Any]]
    objects: dict[str, dict[str, Any]]
    robots: list[ScenarioRobot]
    events: list[ScenarioEvent]
    config: dict[str, Any]

    def build_sim(self, log: EventLog | None = None) -> Simulator:
        sim = Simulator(self.width, self.height, self.walls, log=log)
        for door_id, spec in sorted(self.doors.items()):
            sim.add_door(door_id, tuple(spec["cell"]), spec.get("open", False))
        for object_id, spec in sorted(self.objects.items()):
            sim.add_object(object_id, tuple(spec["cell"]))
        for robot in self.robots:
            sim.add_robot(robot.id, robot.pose, robot.services)
        return sim


def _expand_segment(seg: dict[str, Any]) -> list[Cell]:
    (x0, y0), (x1, y1) = seg["from"], seg["to"]
    if x0 == x1:
        lo, hi = sorted((y0, y1))
        return [(x0, y) for y in range(lo, hi + 1)]
    if y0 == y1:
        lo, hi = sorted((x0, x1))
        return [(x, y0) for x in range(lo, hi + 1)]
    raise ParseError(f"wall segment must be axis-aligned: {seg}")


def load_scenario(source: str | dict[str, Any]) -> Scenario:
    if isinstance(source, dict):
        doc = source
    else:
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
            raise ParseError(f"invalid scenario JSON: {exc}") from exc
    try:
        grid = doc["map"]
        walls: list[Cell] = [tuple(c) for c in grid.get("walls", [])]
        for seg in grid.get("wallSegments", []):
            walls.extend(_expand_segment(seg))
        doors = doc.get("doors", {})
        door_cells = {tuple(spec["cell"]) for spec in doors.values()}
        walls = [c for c in walls if c not in door_cells]
        robots = [
            ScenarioRobot(
                id=r["id"],
                pose=tuple(r["pose"]),
                services=list(r.get("services", [])),
                tree=r["tree"],
                mission=bool(r.get("mission", True)),
                peers=r.get("peers"),
            )
            for r in doc.get("robots", [])
        ]
        events = []
        for e in doc.get("events", []):
            when = e.get("when", "")
            events.append(
                ScenarioEvent(
                    action=e["action"],
                    args={
                        k: v
                        for k, v in e.items()
                        if k not in ("action", "at", "when", "delay")
                    },
                    at=e.get("at"),
                    when_door_open=when.split(":", 1)[1]
                    if when.startswith("doorOpen:")
                    else None,
                    delay=int(e.get("delay", 0)),
                )
            )
        return Scenario(
            width=int(grid["width"]),
            height=int(grid["height"]),
            walls=walls,
            doors=doors,
            objects=doc.get("objects", {}),
            robots=robots,
            events=events,
            config=doc.get("config", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed scenario: {exc}") from exc
