"""Mechanical construction of composition models from service/channel declarations.

Every declared service becomes one recursive definition: a choice between a
silent idle step, one initiator chain per channel the service sends on, one
responder chain per channel it receives on, and (for the registration
service) a failure-signal emission.  Chains follow the three-phase
handshake: the initiator announces the sending side's role token, waits for
it to be echoed, announces the goal token, waits for the echo, then sends
the forward payload and waits for the backward payload.  Tokens are opaque
dotted names (``<service>.role``, ``<service>.goal``); no structured data
travels on channels.

The generation, selection and execution services are wrapped in a signal
handler whose fallback re-enters service discovery.  The wrapper encloses a
separate loop definition so that recursion re-enters the loop, not the
wrapper; wrapping the whole recursive definition would stack a new handler
on every cycle and blow up the state space.

The top level groups provider-side and requester-side services into S_1 and
S_2 and runs them in parallel.  ``literal_seq=True`` instead chains each
group sequentially, reproducing the source model's ordering for comparison
(under that reading the non-terminating loops never hand control over).
"""

from __future__ import annotations

from dataclasses import dataclass

from .authority import AuthorityModel, goals_of, service_view
from .errors import (
    DanglingChannel,
    EndpointMismatch,
    PicompError,
    UnauthorizedService,
)
from .terms import (
    NIL,
    AgentCall,
    DefinitionTable,
    Handler,
    Input,
    Match,
    Output,
    Par,
    Process,
    Seq,
    SignalEmit,
    Sum,
    Tau,
    check_name,
    fresh_name,
)

MAIN_KINDS = (
    "registration",
    "discovery",
    "generation",
    "selection",
    "execution",
    "authority",
)
SERVICE_KINDS = MAIN_KINDS + ("base", "requester", "provider")

#: Kinds that act on the requesting user's behalf and therefore need their
#: (role, goal) pair inside the requester's service view.
REQUESTER_OWNED_KINDS = frozenset(MAIN_KINDS) | {"requester"}

#: Kinds whose failures reroute through discovery via a signal handler.
HANDLER_WRAPPED_KINDS = frozenset({"generation", "selection", "execution"})

PROVIDER_SIDE_KINDS = ("provider", "registration", "base")
REQUESTER_SIDE_KINDS = (
    "requester",
    "discovery",
    "generation",
    "selection",
    "execution",
    "authority",
)


@dataclass(frozen=True)
class ServiceSpec:
    id: str
    role: str
    goal: str
    kind: str

    def __post_init__(self):
        check_name(self.id)
        check_name(self.role)
        check_name(self.goal)
        if self.kind not in SERVICE_KINDS:
            raise ValueError(f"unknown service kind {self.kind!r}")

    def role_token(self) -> str:
        return f"{self.id}.role"

    def goal_token(self) -> str:
        return f"{self.id}.goal"


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    from_id: str
    to_id: str
    forward_payload: str
    backward_payload: str

    def __post_init__(self):
        check_name(self.name)
        check_name(self.from_id)
        check_name(self.to_id)
        check_name(self.forward_payload)
        check_name(self.backward_payload)
        if self.from_id == self.to_id:
            raise ValueError(f"channel {self.name!r} must connect two distinct services")


@dataclass(frozen=True)
class CompositionConfig:
    services: tuple[ServiceSpec, ...]
    channels: tuple[ChannelSpec, ...]
    authority: AuthorityModel
    requester_user: str
    failure_signal: int = 1


def derive_sets(cfg: CompositionConfig) -> tuple[tuple[ServiceSpec, ...], tuple[ChannelSpec, ...]]:
    """Validate and canonically order the declared service and channel sets."""
    services = tuple(sorted(cfg.services, key=lambda s: s.id))
    ids = [s.id for s in services]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})[0]
        raise PicompError(f"duplicate service id '{dup}'")
    requesters = [s for s in services if s.kind == "requester"]
    if len(requesters) != 1:
        raise PicompError(f"exactly one requester service required, found {len(requesters)}")

    channels = tuple(sorted(cfg.channels, key=lambda c: c.name))
    names = [c.name for c in channels]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})[0]
        raise PicompError(f"duplicate channel name '{dup}'")
    known = set(ids)
    for ch in channels:
        if ch.from_id not in known:
            raise DanglingChannel(ch.name, ch.from_id)
        if ch.to_id not in known:
            raise DanglingChannel(ch.name, ch.to_id)

    view = service_view(cfg.authority, cfg.requester_user)
    for svc in services:
        if svc.kind in REQUESTER_OWNED_KINDS and (svc.role, svc.goal) not in view:
            raise UnauthorizedService(svc.id, svc.role, svc.goal)
    return services, channels


def _chain(steps: list, tail: Process) -> Process:
    proc = tail
    for step in reversed(steps):
        kind = step[0]
        if kind == "out":
            proc = Output(step[1], step[2], proc)
        elif kind == "in":
            proc = Input(step[1], step[2], proc)
        else:
            proc = Match(step[1], step[2], proc)
    return proc


def model_sender(svc: ServiceSpec, ch: ChannelSpec, continue_to: Process = NIL) -> Process:
    """Initiator chain for a channel the service sends on.

    Announce the role token, await its echo, announce the goal token, await
    its echo, send the forward payload, receive the backward payload.
    """
    if svc.id != ch.from_id:
        raise EndpointMismatch(svc.id, ch.name, "sending")
    role = svc.role_token()
    goal = svc.goal_token()
    return _chain(
        [
            ("out", ch.name, role),
            ("in", ch.name, "msg"),
            ("match", "msg", role),
            ("out", ch.name, goal),
            ("in", ch.name, "msg"),
            ("match", "msg", goal),
            ("out", ch.name, ch.forward_payload),
            ("in", ch.name, ch.backward_payload),
        ],
        continue_to,
    )


def model_receiver(svc: ServiceSpec, ch: ChannelSpec, continue_to: Process = NIL) -> Process:
    """Responder chain for a channel the service receives on.

    Tokens name the sending side: receive and match the sender's role token,
    echo it, likewise for the goal token, then accept the forward payload
    and answer with the backward payload.
    """
    if svc.id != ch.to_id:
        raise EndpointMismatch(svc.id, ch.name, "receiving")
    role = f"{ch.from_id}.role"
    goal = f"{ch.from_id}.goal"
    return _chain(
        [
            ("in", ch.name, "msg"),
            ("match", "msg", role),
            ("out", ch.name, role),
            ("in", ch.name, "msg"),
            ("match", "msg", goal),
            ("out", ch.name, goal),
            ("in", ch.name, "msg"),
            ("match", "msg", ch.forward_payload),
            ("out", ch.name, ch.backward_payload),
        ],
        continue_to,
    )


def _authority_answer(
    svc: ServiceSpec, ch: ChannelSpec, goalset_token: str, continue_to: Process
) -> Process:
    """Synthesized authority behavior: answer a role announcement with the
    requester's goal-set token (the source equations omit this service)."""
    role = f"{ch.from_id}.role"
    return _chain(
        [("in", ch.name, "msg"), ("match", "msg", role), ("out", ch.name, goalset_token)],
        continue_to,
    )


def _sum(children: list[Process]) -> Process:
    if not children:
        return NIL
    proc = children[-1]
    for child in reversed(children[:-1]):
        proc = Sum(child, proc)
    return proc


def _group(children: list[Process], sequential: bool) -> Process:
    if not children:
        return NIL
    proc = children[-1]
    for child in reversed(children[:-1]):
        proc = Seq(child, proc) if sequential else Par(child, proc)
    return proc


def compose_model(
    cfg: CompositionConfig, literal_seq: bool = False
) -> tuple[DefinitionTable, Process]:
    """Emit one definition per service plus the grouped top-level process."""
    services, channels = derive_sets(cfg)
    by_kind: dict[str, list[ServiceSpec]] = {}
    for svc in services:
        by_kind.setdefault(svc.kind, []).append(svc)
    discovery = by_kind.get("discovery", [None])[0]
    requester = by_kind["requester"][0]

    taken = {s.id for s in services}
    entries: dict[str, Process] = {}

    for svc in services:
        wrapped = svc.kind in HANDLER_WRAPPED_KINDS and discovery is not None
        if wrapped:
            loop_name = fresh_name(f"{svc.id}_loop", taken)
            taken.add(loop_name)
        else:
            loop_name = svc.id
        again = AgentCall(loop_name)

        summands: list[Process] = [Tau(again)]
        for ch in channels:
            if ch.from_id == svc.id:
                summands.append(model_sender(svc, ch, again))
        for ch in channels:
            if ch.to_id == svc.id:
                summands.append(model_receiver(svc, ch, again))
        if svc.kind == "authority":
            goals_of(cfg.authority, cfg.requester_user)  # validates the user binding
            goalset_token = f"{cfg.requester_user}.goals"
            for ch in channels:
                if ch.to_id == svc.id and _kind_of(ch.from_id, services) == "requester":
                    summands.append(_authority_answer(svc, ch, goalset_token, again))
        if svc.kind == "registration":
            summands.append(SignalEmit(cfg.failure_signal, again))

        body = _sum(summands)
        if wrapped:
            entries[loop_name] = body
            entries[svc.id] = Handler(AgentCall(loop_name), AgentCall(discovery.id), cfg.failure_signal)
        else:
            entries[svc.id] = body

    def side(kinds: tuple[str, ...]) -> list[Process]:
        calls: list[Process] = []
        for kind in kinds:
            for svc in by_kind.get(kind, []):
                calls.append(AgentCall(svc.id))
        return calls

    s1_name = fresh_name("S_1", taken)
    taken.add(s1_name)
    s2_name = fresh_name("S_2", taken)
    entries[s1_name] = _group(side(PROVIDER_SIDE_KINDS), literal_seq)
    entries[s2_name] = _group(side(REQUESTER_SIDE_KINDS), literal_seq)
    main = Par(AgentCall(s1_name), AgentCall(s2_name))
    return DefinitionTable(entries), main


def _kind_of(service_id: str, services: tuple[ServiceSpec, ...]) -> str:
    for svc in services:
        if svc.id == service_id:
            return svc.kind
    raise DanglingChannel("?", service_id)


def compose_model_text(cfg: CompositionConfig, literal_seq: bool = False) -> str:
    """Render the composed model as a model file, byte-deterministically."""
    from .surface import ModelFile, render_model

    defs, main = compose_model(cfg, literal_seq)
    services, channels = derive_sets(cfg)
    mf = ModelFile(
        channel_decls=frozenset(ch.name for ch in channels),
        signal_decls=frozenset({cfg.failure_signal}),
        defs=defs,
        main=main,
    )
    body = render_model(mf).splitlines()
    authority_ids = {svc.id for svc in services if svc.kind == "authority"}
    lines = [
        "# Composition model generated from service and channel declarations.",
        f"# requester user: {cfg.requester_user}",
    ]
    for line in body:
        agent = line.removeprefix("agent ").split(" ", 1)[0] if line.startswith("agent ") else None
        if agent in authority_ids:
            lines.append(f"# the goal-set reply summand of {agent} is generator-invented")
        lines.append(line)
    return "\n".join(lines) + "\n"
