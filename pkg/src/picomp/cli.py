"""Command line interface.

Exit codes: 0 success or property holds, 1 property fails (deadlock found,
not bisimilar, unauthorized), 2 unknown within exploration bounds, 3 usage
or parse error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .analysis import (
    AgentActive,
    CanFire,
    IsNilLike,
    LabelPattern,
    MatchFired,
    StatePredicate,
    Trace,
    bisimilar,
    find_deadlocks,
    reachable,
    simulate,
)
from .authority import authorize, goals_of, ops_of, roles_of, service_view
from .errors import (
    PicompError,
    StateSpaceExceeded,
    UnauthorizedService,
    UnknownUser,
)
from .generator import CompositionConfig, compose_model_text
from .interchange import export_lts, export_trace, load_aidb, load_wsdb
from .semantics import ExplorationLimits, ExplorationMode, build_lts
from .surface import load_model, parse_model, render_model, render_process
from .terms import DefinitionTable

EXIT_OK = 0
EXIT_FAILS = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 3


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write_output(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _mode(args) -> ExplorationMode:
    return ExplorationMode.OPEN if args.open else ExplorationMode.CLOSED


def _limits(args) -> ExplorationLimits:
    return ExplorationLimits(max_states=args.max_states, max_depth=args.max_depth)


def _add_exploration_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--open", action="store_true", help="explore all labels")
    group.add_argument("--closed", action="store_true", help="internal steps only (default)")
    p.add_argument("--max-states", type=int, default=100_000)
    p.add_argument("--max-depth", type=int, default=10_000)


_PRED_RE = re.compile(r"(nil|can-fire|agent-active|match-fired)\s*(?:\((.*)\))?\Z", re.S)


def parse_predicate(spec: str) -> StatePredicate:
    m = _PRED_RE.match(spec.strip())
    if not m:
        raise ValueError(f"bad predicate {spec!r}")
    head, args = m.group(1), (m.group(2) or "").strip()
    if head == "nil":
        if args:
            raise ValueError("nil takes no arguments")
        return IsNilLike()
    if head == "agent-active":
        if not args:
            raise ValueError("agent-active needs an agent name")
        return AgentActive(args)
    if head == "match-fired":
        parts = [a.strip() for a in args.split(",")]
        if len(parts) != 2 or not all(parts):
            raise ValueError("match-fired needs two names")
        return MatchFired(parts[0], parts[1])
    words = args.split()
    if not words:
        raise ValueError("can-fire needs a label pattern")
    kind = words[0]
    if kind == "tau":
        return CanFire(LabelPattern("tau"))
    if kind in ("emit", "handle"):
        if len(words) != 2:
            raise ValueError(f"can-fire({kind} SIG) needs a signal number")
        return CanFire(LabelPattern(kind, sig=int(words[1])))
    if kind in ("in", "out", "bound-out"):
        channel = words[1] if len(words) > 1 and words[1] != "*" else None
        payload = words[2] if len(words) > 2 and words[2] != "*" else None
        return CanFire(LabelPattern(kind, channel=channel, payload=payload))
    raise ValueError(f"unknown label kind {kind!r}")


def _print_trace(trace: Trace, lts_states=None) -> None:
    print(f"initial {trace.initial[:12]}")
    for label, digest in trace.steps:
        print(f"  {label} -> {digest[:12]}")


# ---------------------------------------------------------------------------
# commands


def cmd_fmt(args) -> int:
    mf = parse_model(_read(args.file))
    _write_output(render_model(mf), args.output)
    return EXIT_OK


def cmd_check(args) -> int:
    mf = load_model(_read(args.file))
    agents = len(mf.defs.agents())
    print(f"ok: {agents} agent(s), {len(mf.channel_decls)} channel(s), "
          f"{len(mf.signal_decls)} signal(s)")
    return EXIT_OK


def cmd_lts(args) -> int:
    mf = load_model(_read(args.file))
    lts = build_lts(mf.main, mf.defs, _mode(args), _limits(args))
    fmt = "dot" if args.dot else "json"
    _write_output(export_lts(lts, fmt), args.output)
    return EXIT_OK


def cmd_deadlocks(args) -> int:
    mf = load_model(_read(args.file))
    lts = build_lts(mf.main, mf.defs, ExplorationMode.CLOSED, _limits(args))
    stuck = find_deadlocks(lts)
    if stuck:
        for digest in sorted(stuck):
            print(f"deadlock {digest[:12]}: {render_process(lts.states[digest])}")
        return EXIT_FAILS
    if lts.truncated:
        print("no deadlock found; unknown within bounds (exploration truncated)")
        return EXIT_UNKNOWN
    print("no deadlocks")
    return EXIT_OK


def cmd_reach(args) -> int:
    pred = parse_predicate(args.pred)
    mf = load_model(_read(args.file))
    lts = build_lts(mf.main, mf.defs, _mode(args), _limits(args))
    trace = reachable(lts, pred)
    if trace is not None:
        print(f"reachable in {len(trace)} step(s)")
        _print_trace(trace)
        return EXIT_OK
    if lts.truncated:
        print("not reached; unknown within bounds (exploration truncated)")
        return EXIT_UNKNOWN
    print("unreachable")
    return EXIT_FAILS


def cmd_simulate(args) -> int:
    mf = load_model(_read(args.file))
    trace = simulate(mf.main, mf.defs, _mode(args), seed=args.seed, max_steps=args.steps)
    if args.json:
        sys.stdout.write(export_trace(trace))
    else:
        _print_trace(trace)
    return EXIT_OK


def _merge_defs(a: DefinitionTable, b: DefinitionTable) -> DefinitionTable:
    entries = dict(a.entries)
    for agent, body in b.entries.items():
        if agent in entries and entries[agent] != body:
            raise PicompError(f"agent '{agent}' defined differently in the two files")
        entries[agent] = body
    return DefinitionTable(entries)


def cmd_bisim(args) -> int:
    mf1 = load_model(_read(args.file1))
    mf2 = load_model(_read(args.file2))
    defs = _merge_defs(mf1.defs, mf2.defs)
    equivalent = bisimilar(
        mf1.main, mf2.main, defs, _limits(args), weak=not args.strong
    )
    kind = "strongly" if args.strong else "weakly"
    if equivalent:
        print(f"{kind} bisimilar")
        return EXIT_OK
    print(f"not {kind} bisimilar")
    return EXIT_FAILS


def cmd_generate(args) -> int:
    aidb = load_aidb(json.loads(_read(args.aidb)))
    wsdb = load_wsdb(json.loads(_read(args.wsdb)))
    cfg = CompositionConfig(
        services=wsdb.services,
        channels=wsdb.channels,
        authority=aidb,
        requester_user=args.user,
        failure_signal=args.signal,
    )
    _write_output(compose_model_text(cfg, literal_seq=args.literal_seq), args.output)
    return EXIT_OK


def cmd_authz(args) -> int:
    aidb = load_aidb(json.loads(_read(args.aidb)))
    if (args.op is None) != (args.obj is None):
        raise ValueError("--op and --obj must be given together")
    if args.op is not None:
        ok = authorize(aidb, args.user, args.op, args.obj)
        print("authorized" if ok else "denied")
        return EXIT_OK if ok else EXIT_FAILS
    print(f"roles: {' '.join(sorted(roles_of(aidb, args.user))) or '-'}")
    print(f"goals: {' '.join(sorted(goals_of(aidb, args.user))) or '-'}")
    print(f"ops: {' '.join(sorted(ops_of(aidb, args.user))) or '-'}")
    view = service_view(aidb, args.user)
    for role, goal in sorted(view.pairs):
        print(f"service: ({role}, {goal})")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="picomp", description="extended pi-calculus composition workbench"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fmt", help="parse and canonically re-render a model file")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_fmt)

    p = sub.add_parser("check", help="static validation, including guardedness")
    p.add_argument("file")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("lts", help="build and export the state space")
    p.add_argument("file")
    _add_exploration_flags(p)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--dot", action="store_true")
    fmt.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_lts)

    p = sub.add_parser("deadlocks", help="find stuck non-terminal states")
    p.add_argument("file")
    _add_exploration_flags(p)
    p.set_defaults(fn=cmd_deadlocks)

    p = sub.add_parser("reach", help="search for a state satisfying a predicate")
    p.add_argument("file")
    p.add_argument(
        "--pred",
        required=True,
        help="nil | can-fire(KIND [CHAN [PAYLOAD]]) | agent-active(AGENT) "
        "| match-fired(NAME, NAME)",
    )
    _add_exploration_flags(p)
    p.set_defaults(fn=cmd_reach)

    p = sub.add_parser("simulate", help="seeded random walk")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--json", action="store_true")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--open", action="store_true")
    group.add_argument("--closed", action="store_true")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("bisim", help="decide behavioral equivalence of two models")
    p.add_argument("file1")
    p.add_argument("file2")
    p.add_argument("--strong", action="store_true")
    p.add_argument("--max-states", type=int, default=100_000)
    p.add_argument("--max-depth", type=int, default=10_000)
    p.set_defaults(fn=cmd_bisim)

    p = sub.add_parser("generate", help="compose a model from WSDB/AIDB declarations")
    p.add_argument("--wsdb", required=True)
    p.add_argument("--aidb", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--signal", type=int, default=1)
    p.add_argument("--literal-seq", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("authz", help="query the authority model")
    p.add_argument("--aidb", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--op")
    p.add_argument("--obj")
    p.set_defaults(fn=cmd_authz)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except StateSpaceExceeded as exc:
        print(f"unknown: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN
    except (UnauthorizedService, UnknownUser) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILS
    except (PicompError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
