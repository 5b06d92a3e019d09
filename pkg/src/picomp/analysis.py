"""Analyses over explored state spaces and live terms.

Deadlock detection distinguishes unsuccessful stuck states from successful
termination: a state congruent to 0 finished its work, everything else with
no internal step is stuck.  Reachability returns a shortest witness trace;
on a truncated exploration an absent witness means "unknown within bounds",
which callers surface as a third verdict.  Simulation is a seeded random
walk.  Equivalence checking builds both state spaces over a shared input
universe and runs signature-based partition refinement, tau-abstracted by
default, strong on request.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Union

from .congruence import canonical_state, is_nil_like
from .errors import OpenModeLts, StateSpaceExceeded
from .semantics import (
    ExplorationLimits,
    ExplorationMode,
    Label,
    Lts,
    TauLabel,
    build_lts,
    label_sort_key,
    sorted_transitions,
)
from .terms import (
    AgentCall,
    DefinitionTable,
    Handler,
    Match,
    Nil,
    Par,
    Process,
    Restrict,
    Seq,
    Sum,
    all_names,
    free_names,
)


@dataclass(frozen=True)
class Trace:
    """A path through a state space: labels paired with the states they reach."""

    initial: str
    steps: tuple[tuple[Label, str], ...]
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.steps)


# ---------------------------------------------------------------------------
# state predicates


@dataclass(frozen=True)
class LabelPattern:
    """Match a label by kind with optional field constraints (None = any)."""

    kind: str  # tau | in | out | bound-out | emit | handle
    channel: str | None = None
    payload: str | None = None
    sig: int | None = None

    def matches(self, label: Label) -> bool:
        from .semantics import BoundOutLabel, EmitLabel, HandleLabel, InLabel, OutLabel

        match label:
            case TauLabel():
                return self.kind == "tau"
            case InLabel(c, v):
                return (
                    self.kind == "in"
                    and self.channel in (None, c)
                    and self.payload in (None, v)
                )
            case OutLabel(c, v):
                return (
                    self.kind == "out"
                    and self.channel in (None, c)
                    and self.payload in (None, v)
                )
            case BoundOutLabel(c, n):
                return (
                    self.kind == "bound-out"
                    and self.channel in (None, c)
                    and self.payload in (None, n)
                )
            case EmitLabel(t):
                return self.kind == "emit" and self.sig in (None, t)
            case HandleLabel(t):
                return self.kind == "handle" and self.sig in (None, t)
        return False


@dataclass(frozen=True)
class IsNilLike:
    """State is structurally congruent to 0 (successful termination)."""


@dataclass(frozen=True)
class CanFire:
    """Some step matching the pattern is enabled (judged in open mode)."""

    pattern: LabelPattern


@dataclass(frozen=True)
class AgentActive:
    """An un-unfolded call of the agent sits at an active position."""

    agent: str


@dataclass(frozen=True)
class MatchFired:
    """An enabled guard compares the expected token with itself.

    ``lhs`` names the guard's original binder for display; the decidable
    condition on a state is that an active match has both sides equal to
    ``rhs`` (the binder was substituted away when the message arrived).
    """

    lhs: str
    rhs: str


StatePredicate = Union[IsNilLike, CanFire, AgentActive, MatchFired]


def active_subterms(p: Process):
    """Subterms at active positions: not under a prefix, a failed guard, or
    a handler fallback."""
    stack = [p]
    while stack:
        node = stack.pop()
        yield node
        match node:
            case Par(l, r) | Sum(l, r):
                stack.extend((l, r))
            case Seq(first, second):
                stack.append(first)
                if isinstance(first, Nil):
                    stack.append(second)
            case Restrict(_, body):
                stack.append(body)
            case Match(x, y, then):
                if x == y:
                    stack.append(then)
            case Handler(body, _, _):
                stack.append(body)
            case _:
                pass


def count_active_agents(p: Process, agent: str) -> int:
    return sum(
        1 for node in active_subterms(p) if isinstance(node, AgentCall) and node.agent == agent
    )


def evaluate_predicate(
    pred: StatePredicate, witness: Process, defs: DefinitionTable | None = None
) -> bool:
    match pred:
        case IsNilLike():
            return is_nil_like(witness, defs)
        case CanFire(pattern):
            steps = sorted_transitions(witness, defs, ExplorationMode.OPEN)
            return any(pattern.matches(label) for label, _, _ in steps)
        case AgentActive(agent):
            return count_active_agents(witness, agent) > 0
        case MatchFired(_, rhs):
            for node in active_subterms(witness):
                if isinstance(node, Match) and node.lhs == node.rhs == rhs:
                    return True
            return False
    raise TypeError(f"not a predicate: {pred!r}")


# ---------------------------------------------------------------------------
# LTS analyses


def _adjacency(lts: Lts) -> dict[str, list]:
    adj: dict[str, list] = {digest: [] for digest in lts.states}
    for t in lts.transitions:
        adj[t.source].append(t)
    return adj


def find_deadlocks(lts: Lts) -> frozenset[str]:
    """Expanded states with no internal step that are not successful ends."""
    if lts.mode is not ExplorationMode.CLOSED:
        raise OpenModeLts()
    adj = _adjacency(lts)
    out: set[str] = set()
    for digest, witness in lts.states.items():
        if digest in lts.unexpanded or adj[digest]:
            continue
        if not is_nil_like(witness, lts.defs):
            out.add(digest)
    return frozenset(out)


def reachable(lts: Lts, pred: StatePredicate) -> Trace | None:
    """Shortest trace to a satisfying state, or None.

    On a truncated LTS, None means the predicate was not reached within
    bounds, not that it is unreachable.
    """
    if evaluate_predicate(pred, lts.states[lts.initial], lts.defs):
        return Trace(initial=lts.initial, steps=())
    adj = _adjacency(lts)
    parent: dict[str, tuple[str, Label]] = {}
    seen = {lts.initial}
    queue: deque[str] = deque([lts.initial])
    while queue:
        digest = queue.popleft()
        for t in adj[digest]:
            if t.target in seen:
                continue
            seen.add(t.target)
            parent[t.target] = (digest, t.label)
            if evaluate_predicate(pred, lts.states[t.target], lts.defs):
                steps: list[tuple[Label, str]] = []
                cur = t.target
                while cur != lts.initial:
                    prev, label = parent[cur]
                    steps.append((label, cur))
                    cur = prev
                return Trace(initial=lts.initial, steps=tuple(reversed(steps)))
            queue.append(t.target)
    return None


def simulate(
    p: Process,
    defs: DefinitionTable | None = None,
    mode: ExplorationMode = ExplorationMode.CLOSED,
    seed: int = 0,
    max_steps: int = 100,
) -> Trace:
    """Seeded uniform random walk; identical inputs give identical traces."""
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    rng = random.Random(seed)
    initial = canonical_state(p, defs).digest
    current = p
    steps: list[tuple[Label, str]] = []
    for _ in range(max_steps):
        enabled = sorted_transitions(current, defs, mode)
        if not enabled:
            break
        label, digest, target = enabled[rng.randrange(len(enabled))]
        steps.append((label, digest))
        current = target
    return Trace(initial=initial, steps=tuple(steps), seed=seed)


# ---------------------------------------------------------------------------
# bisimulation


def _tau_closures(order: list[str], adj: dict[str, list]) -> dict[str, frozenset[str]]:
    closures: dict[str, frozenset[str]] = {}
    for s in order:
        seen = {s}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for t in adj[u]:
                if isinstance(t.label, TauLabel) and t.target not in seen:
                    seen.add(t.target)
                    queue.append(t.target)
        closures[s] = frozenset(seen)
    return closures


def _refine(states: list[str], signature) -> dict[str, int]:
    block = {s: 0 for s in states}
    while True:
        sigs = {s: (block[s], signature(s, block)) for s in states}
        canon: dict = {}
        next_block = {}
        for s in states:  # deterministic: first appearance order
            key = sigs[s]
            if key not in canon:
                canon[key] = len(canon)
            next_block[s] = canon[key]
        if next_block == block:
            return block
        block = next_block


def bisimilar(
    p: Process,
    q: Process,
    defs: DefinitionTable | None = None,
    limits: ExplorationLimits = ExplorationLimits(),
    *,
    weak: bool = True,
) -> bool:
    """Decide (weak by default) bisimilarity of two terms.

    Both state spaces are built in open mode over a shared input universe so
    early-instantiated receive labels line up.  Raises StateSpaceExceeded
    when either side does not fit in the limits.
    """
    shared_universe = free_names(p, defs) | free_names(q, defs)
    shared_avoid = all_names(p) | all_names(q)
    sides = []
    for side_tag, term in (("p", p), ("q", q)):
        lts = build_lts(
            term,
            defs,
            ExplorationMode.OPEN,
            limits,
            extra_universe=shared_universe,
            extra_avoid=shared_avoid,
        )
        if lts.truncated:
            raise StateSpaceExceeded(f"side {side_tag} exceeded {limits}")
        sides.append(lts)
    lts_p, lts_q = sides

    states: list[str] = []
    adj: dict[str, list] = {}
    for tag, lts in (("1:", lts_p), ("2:", lts_q)):
        for digest in lts.states:
            states.append(tag + digest)
            adj[tag + digest] = []
        for t in lts.transitions:
            adj[tag + t.source].append(_Edge(tag + t.source, t.label, tag + t.target))

    if weak:
        closures = _tau_closures(states, adj)

        def signature(s: str, block: dict[str, int]) -> frozenset:
            sig = set()
            for u in closures[s]:
                sig.add(((0,), block[u]))  # tau-weak move, possibly empty
                for e in adj[u]:
                    if isinstance(e.label, TauLabel):
                        continue
                    for v in closures[e.target]:
                        sig.add((label_sort_key(e.label), block[v]))
            return frozenset(sig)

    else:

        def signature(s: str, block: dict[str, int]) -> frozenset:
            return frozenset((label_sort_key(e.label), block[e.target]) for e in adj[s])

    block = _refine(states, signature)
    return block["1:" + lts_p.initial] == block["2:" + lts_q.initial]


@dataclass(frozen=True)
class _Edge:
    source: str
    label: Label
    target: str


def weak_bisimilar(
    p: Process,
    q: Process,
    defs: DefinitionTable | None = None,
    limits: ExplorationLimits = ExplorationLimits(),
) -> bool:
    return bisimilar(p, q, defs, limits, weak=True)


def strong_bisimilar(
    p: Process,
    q: Process,
    defs: DefinitionTable | None = None,
    limits: ExplorationLimits = ExplorationLimits(),
) -> bool:
    return bisimilar(p, q, defs, limits, weak=False)
