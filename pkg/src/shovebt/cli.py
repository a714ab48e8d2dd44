"""Operator command line: validate, run, team, serve.

Exit codes are a stable contract: 0 success, 1 mission failure,
2 validation error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from .engine import EngineConfig
from .errors import BtError, ParseError, ValidationError
from .node import NodeRegistry
from .sim import load_scenario
from .states import NodeState
from .team import build_team
from .treefile import load_tree

EXIT_OK = 0
EXIT_MISSION_FAILED = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _registry(args: argparse.Namespace) -> NodeRegistry:
    registry = NodeRegistry.standard()
    if getattr(args, "nodes", None):
        registry.load_manifest(args.nodes)
    return registry


def _engine_config(args: argparse.Namespace, scenario_config: dict | None = None) -> EngineConfig:
    config = EngineConfig()
    scenario_config = scenario_config or {}
    if "maxCycles" in scenario_config:
        config.max_cycles = int(scenario_config["maxCycles"])
    if args.max_cycles is not None:
        config.max_cycles = args.max_cycles
    return config


def _paced_run(scheduler, hz: float, max_cycles: int, stream=None) -> None:
    period = 1.0 / hz if hz > 0 else 0.0
    printed = 0
    while scheduler.tick < max_cycles and not scheduler.done():
        started = time.monotonic()
        scheduler.run_cycle()
        if stream is not None:
            for line in scheduler.log.lines()[printed:]:
                print(line, file=stream)
            printed = len(scheduler.log.entries)
        if period:
            remainder = period - (time.monotonic() - started)
            if remainder > 0:
                time.sleep(remainder)


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        load_tree(args.treefile, _registry(args))
    except ValidationError as exc:
        print(json.dumps({"status": "invalid", "errors": exc.violations}, indent=2))
        return EXIT_VALIDATION
    except (ParseError, BtError) as exc:
        print(json.dumps({"status": "invalid", "errors": [str(exc)]}, indent=2))
        return EXIT_VALIDATION
    print(json.dumps({"status": "ok"}))
    return EXIT_OK


def _build_scheduler(args: argparse.Namespace, tree_override: str | None):
    import os

    scenario = load_scenario(args.scenario)
    base_dir = os.path.dirname(os.path.abspath(args.scenario))
    if tree_override is not None and not tree_override.lstrip().startswith("{"):
        tree_override = os.path.abspath(tree_override)
    config = _engine_config(args, scenario.config)
    scheduler = build_team(
        scenario,
        registry=_registry(args),
        config=config,
        base_dir=base_dir,
        tree_override=tree_override,
    )
    return scheduler, config


def _execute(args: argparse.Namespace, tree_override: str | None, judged: bool) -> int:
    """Shared run/team body; ``judged`` maps the outcome onto exit 0/1."""
    try:
        scheduler, config = _build_scheduler(args, tree_override=tree_override)
    except ValidationError as exc:
        print(json.dumps({"status": "invalid", "errors": exc.violations}, indent=2))
        return EXIT_VALIDATION
    except (ParseError, BtError) as exc:
        print(json.dumps({"status": "invalid", "errors": [str(exc)]}, indent=2))
        return EXIT_VALIDATION
    try:
        _paced_run(scheduler, args.hz, config.max_cycles, stream=sys.stdout)
        results = {e.id: e.env.tree_state() for e in scheduler.executors}
        for executor in scheduler.executors:
            executor.engine.shutdown()
    except BtError as exc:
        print(json.dumps({"status": "error", "error": str(exc)}))
        return EXIT_RUNTIME
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write(scheduler.log.text())
    print(
        json.dumps(
            {
                "status": "done",
                "cycles": scheduler.tick,
                "treeStates": {k: v.value for k, v in results.items()},
            }
        )
    )
    if not judged:
        return EXIT_OK
    mission_states = [results[e.id] for e in scheduler.executors if e.mission]
    if mission_states and all(s == NodeState.SUCCEEDED for s in mission_states):
        return EXIT_OK
    return EXIT_MISSION_FAILED


def cmd_run(args: argparse.Namespace) -> int:
    return _execute(args, tree_override=args.treefile, judged=args.until_result)


def cmd_team(args: argparse.Namespace) -> int:
    return _execute(args, tree_override=None, judged=True)


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import ControlServer

    try:
        scheduler, _ = _build_scheduler(args, tree_override=None)
    except (ValidationError, ParseError, BtError) as exc:
        print(json.dumps({"status": "invalid", "errors": [str(exc)]}, indent=2))
        return EXIT_VALIDATION
    server = ControlServer(scheduler, host=args.host, port=args.port, hz=args.hz)
    print(f"LISTENING {server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.close()
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shovebt",
        description="Distributed behavior-tree runtime and mission simulator",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="validate a tree document")
    p_validate.add_argument("treefile")
    p_validate.add_argument("--nodes", help="node-type manifest JSON")
    p_validate.set_defaults(fn=cmd_validate)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--hz", type=float, default=10.0,
                        help="tick frequency; 0 = as fast as possible")
    common.add_argument("--max-cycles", type=int, default=None)
    common.add_argument("--nodes", help="node-type manifest JSON")
    common.add_argument("--log", help="write the event log to this file")

    p_run = sub.add_parser("run", parents=[common],
                           help="run a mission tree against a scenario")
    p_run.add_argument("treefile")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--until-result", action="store_true",
                       help="exit 0/1 according to the mission outcome")
    p_run.set_defaults(fn=cmd_run)

    p_team = sub.add_parser("team", parents=[common],
                            help="run a multi-executor scenario")
    p_team.add_argument("scenario")
    p_team.set_defaults(fn=cmd_team)

    p_serve = sub.add_parser("serve", help="serve the debugger control API")
    p_serve.add_argument("--scenario", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=0)
    p_serve.add_argument("--hz", type=float, default=10.0)
    p_serve.add_argument("--max-cycles", type=int, default=None)
    p_serve.add_argument("--nodes", help="node-type manifest JSON")
    p_serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
