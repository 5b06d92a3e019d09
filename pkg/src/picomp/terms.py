"""Term language of the extended pi-calculus and its pure syntactic operations.

A process is an immutable tree built from the constructors below.  Names are
plain strings restricted to ``[A-Za-z_][A-Za-z0-9_.]*`` (dots admit tokens
like ``S_provider.role``); signals are positive integers.  ``Input`` binds
its receive variable in the continuation and ``Restrict`` binds its channel
in the body; nothing else binds.

Recursive behavior is expressed by name: ``AgentCall("X")`` refers to an
entry of a :class:`DefinitionTable`.  Tables reject unresolved calls and
unguarded reference cycles at construction time, and definitions are closed
by policy (their free names are global channel/token vocabulary), which is
what lets substitution leave agent calls symbolic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from typing import Iterator, Mapping, Union

from .errors import SubstitutionIntoAgent, UnguardedRecursion, UnresolvedAgent

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*\Z")
_NAME_PART_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*|[0-9]+)\Z")

#: Words claimed by the concrete syntax; they can never be names (or parts).
RESERVED_WORDS = frozenset({"chan", "sig", "agent", "main", "tau", "new"})

_KNOWN_NAMES: set[str] = set()


def check_name(text: str) -> str:
    """Validate a name, returning it unchanged.  Raises ValueError.

    Dots split a name into parts; each part must be an identifier or a pure
    number, and no part may be a reserved word.  (A part like ``1b`` would
    tokenize as two tokens and could not survive a render/parse round trip.)
    """
    if text in _KNOWN_NAMES:
        return text
    if not isinstance(text, str) or not NAME_RE.match(text):
        raise ValueError(f"invalid name {text!r}")
    parts = text.split(".")
    for part in parts:
        if not _NAME_PART_RE.match(part):
            raise ValueError(f"invalid name {text!r}: bad part {part!r}")
        if part in RESERVED_WORDS:
            raise ValueError(f"{text!r}: {part!r} is a reserved word")
    _KNOWN_NAMES.add(text)
    return text


def check_signal(value: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ValueError(f"signal ids are positive integers, got {value!r}")
    return value


def _term(cls):
    """Frozen dataclass with a lazily cached structural hash.

    Terms are hashed constantly during normalization and exploration;
    caching turns the O(n) recomputation into O(1) after first use.
    """
    cls = dataclass(frozen=True)(cls)
    names = tuple(f.name for f in fields(cls))

    def __hash__(self, _cls_name=cls.__name__, _names=names):
        try:
            return self._h
        except AttributeError:
            h = hash((_cls_name,) + tuple(getattr(self, n) for n in _names))
            object.__setattr__(self, "_h", h)
            return h

    cls.__hash__ = __hash__
    return cls


@_term
class Nil:
    """The inert process 0."""


@_term
class Seq:
    """Sequential composition: run ``first``; when it is congruent to 0, ``second``."""

    first: "Process"
    second: "Process"


@_term
class Output:
    """Send ``payload`` on ``channel``, then continue."""

    channel: str
    payload: str
    then: "Process"

    def __post_init__(self):
        check_name(self.channel)
        check_name(self.payload)


@_term
class Input:
    """Receive on ``channel``, binding the received name as ``binder``."""

    channel: str
    binder: str
    then: "Process"

    def __post_init__(self):
        check_name(self.channel)
        check_name(self.binder)


@_term
class Tau:
    """Internal step."""

    then: "Process"


@_term
class Sum:
    """Nondeterministic choice."""

    left: "Process"
    right: "Process"


@_term
class Par:
    """Parallel composition."""

    left: "Process"
    right: "Process"


@_term
class Restrict:
    """Make ``name`` private to ``body``.

    The binder must not contain dots: the concrete syntax uses ``.`` as the
    prefix separator right after a ``new`` binder, so dotted binders could
    not be re-parsed.
    """

    name: str
    body: "Process"

    def __post_init__(self):
        check_name(self.name)
        if "." in self.name:
            raise ValueError(f"restriction binder {self.name!r} must not contain '.'")


@_term
class Match:
    """Guard: continue only if the two names are the same."""

    lhs: str
    rhs: str
    then: "Process"

    def __post_init__(self):
        check_name(self.lhs)
        check_name(self.rhs)


@_term
class SignalEmit:
    """Produce signal ``sig``, then continue."""

    sig: int
    then: "Process"

    def __post_init__(self):
        check_signal(self.sig)


@_term
class Handler:
    """Run ``body``; on receipt of signal ``sig`` switch to ``fallback``."""

    body: "Process"
    fallback: "Process"
    sig: int

    def __post_init__(self):
        check_signal(self.sig)


@_term
class AgentCall:
    """Reference to a named definition."""

    agent: str

    def __post_init__(self):
        check_name(self.agent)


Process = Union[
    Nil, Seq, Output, Input, Tau, Sum, Par, Restrict, Match, SignalEmit, Handler, AgentCall
]

NIL = Nil()


def subterms(p: Process) -> Iterator[Process]:
    """Pre-order traversal of a term."""
    stack = [p]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(_children(node))


def _children(p: Process) -> tuple[Process, ...]:
    match p:
        case Nil() | AgentCall(_):
            return ()
        case Seq(first, second) | Sum(first, second) | Par(first, second):
            return (first, second)
        case Output(_, _, k) | Input(_, _, k) | Tau(k) | Match(_, _, k) | SignalEmit(_, k):
            return (k,)
        case Restrict(_, body):
            return (body,)
        case Handler(body, fallback, _):
            return (body, fallback)
    raise TypeError(f"not a process: {p!r}")


def agent_references(p: Process) -> frozenset[str]:
    return frozenset(t.agent for t in subterms(p) if isinstance(t, AgentCall))


class DefinitionTable:
    """Immutable map from agent identifiers to closed process definitions.

    Construction verifies that every agent call (in entries and, later, in
    any checked main process) resolves, and that recursion is guarded: on
    every cycle of agent references at least one action prefix intervenes.
    Free names of each definition are computed to a fixpoint over the
    reference graph and cached.
    """

    __slots__ = ("_entries", "_free", "_hash", "_fn_cache", "_all_free")

    def __init__(self, entries: Mapping[str, Process] | None = None):
        items = dict(sorted((entries or {}).items()))
        for agent in items:
            check_name(agent)
        self._entries: dict[str, Process] = items
        self._fn_cache: dict[Process, frozenset[str]] = {}
        self._hash: int | None = None
        self._all_free: frozenset[str] | None = None
        self._check_resolved()
        self._check_guarded()
        self._free = self._free_fixpoint()

    @property
    def entries(self) -> Mapping[str, Process]:
        return dict(self._entries)

    def agents(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def __contains__(self, agent: str) -> bool:
        return agent in self._entries

    def __bool__(self) -> bool:
        return bool(self._entries)

    def resolve(self, agent: str) -> Process:
        try:
            return self._entries[agent]
        except KeyError:
            raise UnresolvedAgent(agent) from None

    def free_of(self, agent: str) -> frozenset[str]:
        if agent not in self._free:
            raise UnresolvedAgent(agent)
        return self._free[agent]

    def definition_free_names(self) -> frozenset[str]:
        """Union of the free names of every definition."""
        if self._all_free is None:
            merged: frozenset[str] = frozenset()
            for names in self._free.values():
                merged = merged | names
            self._all_free = merged
        return self._all_free

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return isinstance(other, DefinitionTable) and self._entries == other._entries

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._entries.items()))
        return self._hash

    def __repr__(self) -> str:
        return f"DefinitionTable({list(self._entries)})"

    def _check_resolved(self) -> None:
        for body in self._entries.values():
            for ref in agent_references(body):
                if ref not in self._entries:
                    raise UnresolvedAgent(ref)

    def _check_guarded(self) -> None:
        # Edge a -> b iff b occurs in a's body at an active position, i.e.
        # reachable without passing an action prefix.  A cycle in this graph
        # would make single-step derivation loop forever.
        graph = {a: sorted(_unguarded_refs(body)) for a, body in self._entries.items()}
        WHITE, GRAY, BLACK = 0, 1, 2
        color = {a: WHITE for a in graph}
        stack_path: list[str] = []

        def visit(a: str) -> None:
            color[a] = GRAY
            stack_path.append(a)
            for b in graph[a]:
                if color[b] == GRAY:
                    cycle = tuple(stack_path[stack_path.index(b):]) + (b,)
                    raise UnguardedRecursion(cycle)
                if color[b] == WHITE:
                    visit(b)
            stack_path.pop()
            color[a] = BLACK

        for a in graph:
            if color[a] == WHITE:
                visit(a)

    def _free_fixpoint(self) -> dict[str, frozenset[str]]:
        free = {a: _syntactic_free(body) for a, body in self._entries.items()}
        refs = {a: agent_references(body) for a, body in self._entries.items()}
        changed = True
        while changed:
            changed = False
            for a in free:
                merged = free[a]
                for b in refs[a]:
                    merged = merged | free[b]
                if merged != free[a]:
                    free[a] = merged
                    changed = True
        return free


EMPTY_DEFS = DefinitionTable()


def _unguarded_refs(p: Process) -> frozenset[str]:
    match p:
        case AgentCall(agent):
            return frozenset({agent})
        case Sum(l, r) | Par(l, r):
            return _unguarded_refs(l) | _unguarded_refs(r)
        case Seq(first, second):
            refs = _unguarded_refs(first)
            if isinstance(first, Nil):
                refs = refs | _unguarded_refs(second)
            return refs
        case Restrict(_, body):
            return _unguarded_refs(body)
        case Match(_, _, then):
            # Conservative: the guard may become true after substitution.
            return _unguarded_refs(then)
        case Handler(body, _, _):
            # The fallback only runs after a Handle step, which is a guard.
            return _unguarded_refs(body)
        case _:
            return frozenset()


def _syntactic_free(p: Process, bound: frozenset[str] = frozenset()) -> frozenset[str]:
    """Free names ignoring agent calls (used to seed the table fixpoint)."""
    match p:
        case Nil() | AgentCall(_):
            return frozenset()
        case Output(c, x, k):
            return frozenset({c, x} - bound) | _syntactic_free(k, bound)
        case Input(c, b, k):
            return frozenset({c} - bound) | _syntactic_free(k, bound | {b})
        case Tau(k) | SignalEmit(_, k):
            return _syntactic_free(k, bound)
        case Seq(l, r) | Sum(l, r) | Par(l, r) | Handler(l, r, _):
            return _syntactic_free(l, bound) | _syntactic_free(r, bound)
        case Restrict(n, body):
            return _syntactic_free(body, bound | {n})
        case Match(x, y, k):
            return frozenset({x, y} - bound) | _syntactic_free(k, bound)
    raise TypeError(f"not a process: {p!r}")


def free_names(p: Process, defs: DefinitionTable | None = None) -> frozenset[str]:
    """Free names of ``p``; agent calls contribute their definition's frees."""
    table = defs if defs is not None else EMPTY_DEFS
    cache = table._fn_cache
    if len(cache) > 1_000_000:
        cache.clear()

    def walk(node: Process) -> frozenset[str]:
        got = cache.get(node)
        if got is not None:
            return got
        match node:
            case Nil():
                result = frozenset()
            case AgentCall(agent):
                result = table.free_of(agent)
            case Output(c, x, k):
                result = frozenset({c, x}) | walk(k)
            case Input(c, b, k):
                result = frozenset({c}) | (walk(k) - {b})
            case Tau(k) | SignalEmit(_, k):
                result = walk(k)
            case Seq(l, r) | Sum(l, r) | Par(l, r) | Handler(l, r, _):
                result = walk(l) | walk(r)
            case Restrict(n, body):
                result = walk(body) - {n}
            case Match(x, y, k):
                result = frozenset({x, y}) | walk(k)
            case _:
                raise TypeError(f"not a process: {node!r}")
        cache[node] = result
        return result

    return walk(p)


_BOUND_CACHE: dict[Process, frozenset[str]] = {}


def bound_names(p: Process) -> frozenset[str]:
    """Names that occur in binding position anywhere in ``p``.

    Agent calls contribute nothing: their definitions' binders are local to
    the definition and alpha-convertible at unfold time.
    """
    got = _BOUND_CACHE.get(p)
    if got is not None:
        return got
    if len(_BOUND_CACHE) > 500_000:
        _BOUND_CACHE.clear()
    match p:
        case Input(_, b, k):
            out = bound_names(k) | {b}
        case Restrict(n, body):
            out = bound_names(body) | {n}
        case _:
            out = frozenset()
            for child in _children(p):
                out = out | bound_names(child)
    _BOUND_CACHE[p] = out
    return out


def name_analysis(
    p: Process, defs: DefinitionTable | None = None
) -> tuple[frozenset[str], frozenset[str]]:
    """(free, bound) name sets of a term.  The sets may overlap."""
    return free_names(p, defs), bound_names(p)


_ALLNAMES_CACHE: dict[Process, frozenset[str]] = {}


def all_names(p: Process) -> frozenset[str]:
    """Every name mentioned anywhere in the term, free or bound."""
    got = _ALLNAMES_CACHE.get(p)
    if got is not None:
        return got
    if len(_ALLNAMES_CACHE) > 500_000:
        _ALLNAMES_CACHE.clear()
    match p:
        case Output(c, x, k):
            out = all_names(k) | {c, x}
        case Input(c, b, k):
            out = all_names(k) | {c, b}
        case Restrict(n, body):
            out = all_names(body) | {n}
        case Match(x, y, k):
            out = all_names(k) | {x, y}
        case _:
            out = frozenset()
            for child in _children(p):
                out = out | all_names(child)
    _ALLNAMES_CACHE[p] = out
    return out


def fresh_name(base: str, avoid: frozenset[str] | set[str]) -> str:
    """Deterministic fresh name: ``base`` if unused, else ``base_1``, ``base_2``, ..."""
    if base not in avoid:
        return base
    i = 1
    while f"{base}_{i}" in avoid:
        i += 1
    return f"{base}_{i}"


def substitute(
    p: Process, from_name: str, to_name: str, defs: DefinitionTable | None = None
) -> Process:
    """Capture-avoiding substitution of ``to_name`` for free ``from_name``.

    Binders that would capture ``to_name`` are renamed first.  Agent calls
    stay symbolic; if ``from_name`` is free in a referenced definition the
    substitution is rejected with :class:`SubstitutionIntoAgent`.
    """
    check_name(from_name)
    check_name(to_name)
    table = defs if defs is not None else EMPTY_DEFS

    def walk(node: Process) -> Process:
        if from_name not in free_names(node, table):
            return node
        match node:
            case Output(c, x, k):
                return Output(
                    to_name if c == from_name else c,
                    to_name if x == from_name else x,
                    walk(k),
                )
            case Input(c, b, k):
                c2 = to_name if c == from_name else c
                if b == from_name:
                    return Input(c2, b, k)
                if b == to_name:
                    b2 = fresh_name(b, free_names(k, table) | {from_name, to_name})
                    k = substitute(k, b, b2, table)
                    return Input(c2, b2, walk(k))
                return Input(c2, b, walk(k))
            case Tau(k):
                return Tau(walk(k))
            case SignalEmit(t, k):
                return SignalEmit(t, walk(k))
            case Seq(l, r):
                return Seq(walk(l), walk(r))
            case Sum(l, r):
                return Sum(walk(l), walk(r))
            case Par(l, r):
                return Par(walk(l), walk(r))
            case Handler(body, fb, t):
                return Handler(walk(body), walk(fb), t)
            case Restrict(n, body):
                # from_name is free here, so n != from_name.
                if n == to_name:
                    n2 = fresh_name(n, free_names(body, table) | {from_name, to_name})
                    body = substitute(body, n, n2, table)
                    return Restrict(n2, walk(body))
                return Restrict(n, walk(body))
            case Match(x, y, k):
                return Match(
                    to_name if x == from_name else x,
                    to_name if y == from_name else y,
                    walk(k),
                )
            case AgentCall(agent):
                raise SubstitutionIntoAgent(agent, from_name)
        raise TypeError(f"not a process: {node!r}")

    return walk(p)


def rename_binders(p: Process, avoid: frozenset[str]) -> Process:
    """Alpha-rename every binder in ``p`` to a name outside ``avoid``.

    Used when unfolding agent definitions into a larger term so that the
    definition's private names can never collide with names already in play.
    """
    taken = set(avoid) | set(all_names(p))

    def pick(base: str) -> str:
        got = fresh_name(base, taken)
        taken.add(got)
        return got

    def walk(node: Process, env: dict[str, str]) -> Process:
        match node:
            case Nil() | AgentCall(_):
                return node
            case Output(c, x, k):
                return Output(env.get(c, c), env.get(x, x), walk(k, env))
            case Input(c, b, k):
                b2 = pick(b)
                return Input(env.get(c, c), b2, walk(k, {**env, b: b2}))
            case Tau(k):
                return Tau(walk(k, env))
            case SignalEmit(t, k):
                return SignalEmit(t, walk(k, env))
            case Seq(l, r):
                return Seq(walk(l, env), walk(r, env))
            case Sum(l, r):
                return Sum(walk(l, env), walk(r, env))
            case Par(l, r):
                return Par(walk(l, env), walk(r, env))
            case Handler(body, fb, t):
                return Handler(walk(body, env), walk(fb, env), t)
            case Restrict(n, body):
                n2 = pick(n)
                return Restrict(n2, walk(body, {**env, n: n2}))
            case Match(x, y, k):
                return Match(env.get(x, x), env.get(y, y), walk(k, env))
        raise TypeError(f"not a process: {node!r}")

    return walk(p, {})


def check_resolved(p: Process, defs: DefinitionTable | None) -> None:
    """Raise UnresolvedAgent if any call in ``p`` lacks a definition."""
    table = defs if defs is not None else EMPTY_DEFS
    for ref in sorted(agent_references(p)):
        if ref not in table:
            raise UnresolvedAgent(ref)
