"""Labeled transition relation and bounded state-space construction.

Single steps come from the prefix, choice, match, parallel, congruence and
restriction rules, extended with the communication rules the composition
models rely on (COM, OPEN, CLOSE), sequencing, and the signal rules:
handlers pass their body's steps through, catch their own signal, and an
emitter can synchronize with a parallel handler into an internal step.

Inputs are instantiated early: a receive on ``c`` yields one ``In(c, v)``
step per candidate ``v`` drawn from the free names of the whole system plus
one fresh name.  Internally a receive is carried around as a lazy
capability and only instantiated at the top level (open mode) or when a
communication partner fixes the payload, which keeps closed-mode
exploration cheap.

The source term is congruence-normalized before rules are applied, which
realizes the congruence rule; restriction binders colliding with any
substitutable name are renamed away up front; and the fresh names that can
appear on labels (the input candidate and the extrusion name) are derived
from free names only, so alpha-variant sources step with identical labels.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Union

from .congruence import normal_form, state_digest
from .terms import (
    AgentCall,
    DefinitionTable,
    EMPTY_DEFS,
    Handler,
    Input,
    Match,
    Nil,
    Output,
    Par,
    Process,
    Restrict,
    Seq,
    SignalEmit,
    Sum,
    Tau,
    _children as _term_children,
    all_names,
    check_resolved,
    free_names,
    fresh_name,
    substitute,
)


@dataclass(frozen=True)
class TauLabel:
    def __str__(self) -> str:
        return "tau"


@dataclass(frozen=True)
class OutLabel:
    channel: str
    payload: str

    def __str__(self) -> str:
        return f"{self.channel}!<{self.payload}>"


@dataclass(frozen=True)
class InLabel:
    channel: str
    payload: str

    def __str__(self) -> str:
        return f"{self.channel}?({self.payload})"


@dataclass(frozen=True)
class BoundOutLabel:
    channel: str
    fresh: str

    def __str__(self) -> str:
        return f"{self.channel}!<new {self.fresh}>"


@dataclass(frozen=True)
class EmitLabel:
    sig: int

    def __str__(self) -> str:
        return f"sig({self.sig})"


@dataclass(frozen=True)
class HandleLabel:
    sig: int

    def __str__(self) -> str:
        return f"handle({self.sig})"


Label = Union[TauLabel, OutLabel, InLabel, BoundOutLabel, EmitLabel, HandleLabel]

TAU = TauLabel()


def label_sort_key(label: Label) -> tuple:
    match label:
        case TauLabel():
            return (0,)
        case InLabel(c, v):
            return (1, c, v)
        case OutLabel(c, v):
            return (2, c, v)
        case BoundOutLabel(c, n):
            return (3, c, n)
        case EmitLabel(t):
            return (4, t)
        case HandleLabel(t):
            return (5, t)
    raise TypeError(f"not a label: {label!r}")


class ExplorationMode(Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass(frozen=True)
class ExplorationLimits:
    max_states: int = 100_000
    max_depth: int = 10_000

    def __post_init__(self):
        if self.max_states < 1:
            raise ValueError("max_states must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")


@dataclass(frozen=True)
class Transition:
    source: str
    label: Label
    target: str
    witness: Process = field(compare=False, repr=False)


@dataclass(frozen=True)
class Lts:
    """Finite fragment of the transition relation, deduplicated by digest."""

    initial: str
    states: dict  # digest -> canonical witness Process
    transitions: tuple  # sorted Transition tuple
    mode: ExplorationMode
    limits: ExplorationLimits
    truncated: bool
    unexpanded: frozenset  # digests whose outgoing steps were cut by a limit
    defs: DefinitionTable

    def outgoing(self, digest: str) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.source == digest)


# ---------------------------------------------------------------------------
# single-step derivation


@dataclass(frozen=True)
class _Action:
    label: Label
    target: Process


@dataclass(frozen=True)
class _InCap:
    """Lazy input capability: instantiate(payload) builds the target."""

    channel: str
    instantiate: Callable[[str], Process]


_Step = Union[_Action, _InCap]


@dataclass(frozen=True)
class _Ctx:
    """Per-derivation context.

    ``candidates`` are every name that may be substituted into a
    continuation (the early-input universe plus the canonical extrusion
    name ``ex``); restriction binders are renamed away from them up front,
    so the lazy input capabilities can be instantiated without capture.
    Label-visible fresh names derive from free names only, which keeps
    labels identical across alpha-variant sources.
    """

    table: DefinitionTable
    candidates: frozenset[str]
    ex: str

    def unfold(self, agent: str) -> Process:
        body = self.table.resolve(agent)
        cache = _UNFOLD_CACHES.setdefault(self.table, {})
        key = (agent, self.candidates)
        got = cache.get(key)
        if got is None:
            if len(cache) > 10_000:
                cache.clear()
            got = _declash(body, self.candidates)
            cache[key] = got
        return got


_UNFOLD_CACHES: dict[DefinitionTable, dict] = {}
_RESTRICT_BINDER_CACHE: dict[Process, frozenset[str]] = {}


def _restrict_binders(p: Process) -> frozenset[str]:
    got = _RESTRICT_BINDER_CACHE.get(p)
    if got is not None:
        return got
    if len(_RESTRICT_BINDER_CACHE) > 500_000:
        _RESTRICT_BINDER_CACHE.clear()
    out = frozenset({p.name}) if isinstance(p, Restrict) else frozenset()
    for child in _term_children(p):
        out = out | _restrict_binders(child)
    _RESTRICT_BINDER_CACHE[p] = out
    return out


def _declash(p: Process, forbidden: frozenset[str]) -> Process:
    """Rename restriction binders that collide with substitutable names.

    Shares structure aggressively: untouched subtrees come back unchanged,
    and the common case (no collision) costs one cached set intersection.
    """
    if not (_restrict_binders(p) & forbidden):
        return p
    taken = set(all_names(p)) | set(forbidden)

    def walk(node: Process, env: dict[str, str]) -> Process:
        if not env and not (_restrict_binders(node) & forbidden):
            return node
        match node:
            case Nil() | AgentCall(_):
                return node
            case Output(c, x, k):
                return Output(env.get(c, c), env.get(x, x), walk(k, env))
            case Input(c, b, k):
                if b in env:
                    env = {k2: v for k2, v in env.items() if k2 != b}
                return Input(env.get(c, c), b, walk(k, env))
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
                if n in forbidden:
                    n2 = fresh_name(n, taken)
                    taken.add(n2)
                    return Restrict(n2, walk(body, {**env, n: n2}))
                if n in env:
                    env = {k2: v for k2, v in env.items() if k2 != n}
                return Restrict(n, walk(body, env))
            case Match(x, y, k):
                return Match(env.get(x, x), env.get(y, y), walk(k, env))
        raise TypeError(f"not a process: {node!r}")

    return walk(p, {})


def _derive(p: Process, ctx: _Ctx) -> list[_Step]:
    match p:
        case Nil():
            return []
        case Tau(k):
            return [_Action(TAU, k)]
        case Output(c, x, k):
            return [_Action(OutLabel(c, x), k)]
        case Input(c, b, k):
            return [_InCap(c, lambda v, _b=b, _k=k, _t=ctx.table: substitute(_k, _b, v, _t))]
        case SignalEmit(t, k):
            return [_Action(EmitLabel(t), k)]
        case Sum(l, r):
            return _derive(l, ctx) + _derive(r, ctx)
        case Match(x, y, k):
            return _derive(k, ctx) if x == y else []
        case Seq(first, second):
            out: list[_Step] = []
            for s in _derive(first, ctx):
                if isinstance(s, _Action):
                    out.append(_Action(s.label, Seq(s.target, second)))
                else:
                    out.append(
                        _InCap(s.channel, lambda v, _i=s.instantiate, _s=second: Seq(_i(v), _s))
                    )
            return out
        case Par(l, r):
            return _derive_par(l, r, ctx)
        case Restrict(n, body):
            return _derive_restrict(n, body, ctx)
        case Handler(body, fb, t):
            out = []
            for s in _derive(body, ctx):
                if isinstance(s, _Action):
                    if isinstance(s.label, HandleLabel) and s.label.sig == t:
                        continue  # the enclosing handler shadows its own signal
                    out.append(_Action(s.label, Handler(s.target, fb, t)))
                else:
                    out.append(
                        _InCap(
                            s.channel,
                            lambda v, _i=s.instantiate, _fb=fb, _t=t: Handler(_i(v), _fb, _t),
                        )
                    )
            out.append(_Action(HandleLabel(t), fb))
            return out
        case AgentCall(agent):
            return _derive(ctx.unfold(agent), ctx)
    raise TypeError(f"not a process: {p!r}")


def _derive_par(l: Process, r: Process, ctx: _Ctx) -> list[_Step]:
    left_steps = _derive(l, ctx)
    right_steps = _derive(r, ctx)
    out: list[_Step] = []

    fn_l: frozenset[str] | None = None
    fn_r: frozenset[str] | None = None

    def fn_of(side: str) -> frozenset[str]:
        nonlocal fn_l, fn_r
        if side == "l":
            if fn_l is None:
                fn_l = free_names(l, ctx.table)
            return fn_l
        if fn_r is None:
            fn_r = free_names(r, ctx.table)
        return fn_r

    # PAR-L / PAR-R with the bound-name side condition.
    for s in left_steps:
        if isinstance(s, _Action):
            if isinstance(s.label, BoundOutLabel) and s.label.fresh in fn_of("r"):
                continue
            out.append(_Action(s.label, Par(s.target, r)))
        else:
            out.append(_InCap(s.channel, lambda v, _i=s.instantiate, _r=r: Par(_i(v), _r)))
    for s in right_steps:
        if isinstance(s, _Action):
            if isinstance(s.label, BoundOutLabel) and s.label.fresh in fn_of("l"):
                continue
            out.append(_Action(s.label, Par(l, s.target)))
        else:
            out.append(_InCap(s.channel, lambda v, _i=s.instantiate, _l=l: Par(_l, _i(v))))

    # COM / CLOSE / signal synchronization across the two sides.
    def pair(send_side: list[_Step], recv_side: list[_Step], sender_left: bool) -> None:
        def compose(st: Process, rt: Process) -> Process:
            return Par(st, rt) if sender_left else Par(rt, st)

        recv_caps = [s for s in recv_side if isinstance(s, _InCap)]
        handles = [
            s for s in recv_side if isinstance(s, _Action) and isinstance(s.label, HandleLabel)
        ]
        for s in send_side:
            if not isinstance(s, _Action):
                continue
            match s.label:
                case OutLabel(c, v):
                    for cap in recv_caps:
                        if cap.channel == c:
                            out.append(_Action(TAU, compose(s.target, cap.instantiate(v))))
                case BoundOutLabel(c, n):
                    idle_fn = fn_of("r") if sender_left else fn_of("l")
                    if n in idle_fn:
                        continue
                    for cap in recv_caps:
                        if cap.channel == c:
                            out.append(
                                _Action(
                                    TAU,
                                    Restrict(n, compose(s.target, cap.instantiate(n))),
                                )
                            )
                case EmitLabel(t):
                    for h in handles:
                        if h.label.sig == t:
                            out.append(_Action(TAU, compose(s.target, h.target)))
                case _:
                    pass

    pair(left_steps, right_steps, True)
    pair(right_steps, left_steps, False)
    return out


def _derive_restrict(n: str, body: Process, ctx: _Ctx) -> list[_Step]:
    out: list[_Step] = []
    for s in _derive(body, ctx):
        if isinstance(s, _InCap):
            if s.channel != n:
                out.append(
                    _InCap(s.channel, lambda v, _i=s.instantiate, _n=n: Restrict(_n, _i(v)))
                )
            continue
        match s.label:
            case OutLabel(c, v):
                if c == n:
                    continue
                if v == n:
                    # OPEN: extrude under the canonical fresh name, so the
                    # label does not depend on the binder's spelling.
                    if n == ctx.ex:
                        out.append(_Action(BoundOutLabel(c, n), s.target))
                    else:
                        out.append(
                            _Action(
                                BoundOutLabel(c, ctx.ex),
                                substitute(s.target, n, ctx.ex, ctx.table),
                            )
                        )
                else:
                    out.append(_Action(s.label, Restrict(n, s.target)))
            case BoundOutLabel(c, m):
                if c != n and m != n:
                    out.append(_Action(s.label, Restrict(n, s.target)))
            case _:
                # Tau, Emit and Handle mention no names; rule 6 lets them pass.
                out.append(_Action(s.label, Restrict(n, s.target)))
    return out


def _make_ctx(
    source: Process,
    table: DefinitionTable,
    extra_universe: frozenset[str],
    extra_avoid: frozenset[str],
) -> tuple[Process, _Ctx, list[str]]:
    """Prepare a state for derivation.

    Returns the declashed source, the context, and the sorted early-input
    universe.  The input candidate and extrusion names are drawn from free
    names only, so alpha-variant sources produce identical labels.
    """
    base = free_names(source, table) | extra_universe | table.definition_free_names()
    avoid = base | extra_avoid
    fresh_in = fresh_name("v", avoid)
    ex = fresh_name("x", avoid | {fresh_in})
    candidates = base | {fresh_in, ex}
    ctx = _Ctx(table=table, candidates=candidates, ex=ex)
    universe = sorted(free_names(source, table) | extra_universe) + [fresh_in]
    return _declash(source, candidates), ctx, universe


def transitions(
    p: Process,
    defs: DefinitionTable | None = None,
    mode: ExplorationMode = ExplorationMode.OPEN,
    *,
    extra_universe: frozenset[str] = frozenset(),
    extra_avoid: frozenset[str] = frozenset(),
) -> frozenset[tuple[Label, Process]]:
    """All single steps of ``p`` under the given exploration mode.

    Closed mode keeps only internal steps (including communications and
    signal synchronizations resolved inside the term); open mode also shows
    sends, early-instantiated receives, bound outputs, emissions and handler
    capabilities as visible labels.  The source is normalized first, which
    realizes the congruence rule.
    """
    table = defs if defs is not None else EMPTY_DEFS
    check_resolved(p, table)
    source, ctx, universe = _make_ctx(
        normal_form(p, table), table, extra_universe, extra_avoid
    )
    out: set[tuple[Label, Process]] = set()
    for s in _derive(source, ctx):
        if isinstance(s, _Action):
            if mode is ExplorationMode.CLOSED and not isinstance(s.label, TauLabel):
                continue
            out.add((s.label, s.target))
        elif mode is ExplorationMode.OPEN:
            for v in universe:
                out.add((InLabel(s.channel, v), s.instantiate(v)))
    return frozenset(out)


def _expand(
    witness: Process,
    table: DefinitionTable,
    mode: ExplorationMode,
    extra_universe: frozenset[str],
    extra_avoid: frozenset[str],
) -> list[tuple[Label, str, Process]]:
    """Ordered (label, target digest, normed target) steps from a normed state."""
    source, ctx, universe = _make_ctx(witness, table, extra_universe, extra_avoid)
    out: dict[tuple, tuple[Label, str, Process]] = {}

    def add(label: Label, target: Process) -> None:
        nt = normal_form(target, table)
        digest = state_digest(nt, table)
        key = (label_sort_key(label), digest)
        if key not in out:
            out[key] = (label, digest, nt)

    for s in _derive(source, ctx):
        if isinstance(s, _Action):
            if mode is ExplorationMode.CLOSED and not isinstance(s.label, TauLabel):
                continue
            add(s.label, s.target)
        elif mode is ExplorationMode.OPEN:
            for v in universe:
                add(InLabel(s.channel, v), s.instantiate(v))
    return [out[key] for key in sorted(out)]


def sorted_transitions(
    p: Process,
    defs: DefinitionTable | None = None,
    mode: ExplorationMode = ExplorationMode.OPEN,
    *,
    extra_universe: frozenset[str] = frozenset(),
    extra_avoid: frozenset[str] = frozenset(),
) -> list[tuple[Label, str, Process]]:
    """Deterministically ordered (label, target digest, normed target) steps."""
    table = defs if defs is not None else EMPTY_DEFS
    check_resolved(p, table)
    witness = normal_form(p, table)
    return _expand(witness, table, mode, extra_universe, extra_avoid)


def build_lts(
    p: Process,
    defs: DefinitionTable | None = None,
    mode: ExplorationMode = ExplorationMode.CLOSED,
    limits: ExplorationLimits = ExplorationLimits(),
    *,
    extra_universe: frozenset[str] = frozenset(),
    extra_avoid: frozenset[str] = frozenset(),
) -> Lts:
    """Breadth-first unfolding of the transition relation from ``p``.

    States are deduplicated by canonical digest.  Hitting either limit sets
    ``truncated`` and records the cut states in ``unexpanded``; transitions
    into never-admitted states are dropped so the graph stays closed.
    """
    table = defs if defs is not None else EMPTY_DEFS
    check_resolved(p, table)
    start_witness = normal_form(p, table)
    start_digest = state_digest(start_witness, table)
    states: dict[str, Process] = {start_digest: start_witness}
    depth: dict[str, int] = {start_digest: 0}
    edges: set[Transition] = set()
    unexpanded: set[str] = set()
    truncated = False
    queue: deque[str] = deque([start_digest])

    while queue:
        digest = queue.popleft()
        witness = states[digest]
        steps = _expand(witness, table, mode, extra_universe, extra_avoid)
        if depth[digest] >= limits.max_depth and steps:
            truncated = True
            unexpanded.add(digest)
            continue
        for label, target_digest, target in steps:
            if target_digest not in states:
                if len(states) >= limits.max_states:
                    truncated = True
                    continue  # transition dropped with its never-admitted target
                states[target_digest] = target
                depth[target_digest] = depth[digest] + 1
                queue.append(target_digest)
            edges.add(Transition(digest, label, target_digest, states[target_digest]))

    ordered = tuple(
        sorted(edges, key=lambda t: (t.source, label_sort_key(t.label), t.target))
    )
    return Lts(
        initial=start_digest,
        states=states,
        transitions=ordered,
        mode=mode,
        limits=limits,
        truncated=truncated,
        unexpanded=frozenset(unexpanded),
        defs=table,
    )
