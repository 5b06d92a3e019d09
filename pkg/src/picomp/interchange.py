"""Interchange documents: authority/service databases and LTS/trace export.

The authority database (AIDB) and web service database (WSDB) are strict
JSON objects; unknown keys and malformed shapes are rejected with the JSON
path, dangling ids with the path and the offending id.  LTS and trace
exports are byte-deterministic: keys sorted, lists in canonical order,
no dependence on hash seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Mapping

from .authority import AuthorityModel
from .errors import DanglingReference, SchemaViolation
from .generator import ChannelSpec, ServiceSpec, SERVICE_KINDS
from .semantics import (
    BoundOutLabel,
    EmitLabel,
    ExplorationLimits,
    ExplorationMode,
    HandleLabel,
    InLabel,
    Label,
    Lts,
    OutLabel,
    TauLabel,
    Transition,
    label_sort_key,
)
from .surface import parse_process, render_process
from .terms import DefinitionTable


def _require_object(doc: Any, path: str, keys: tuple[str, ...]) -> None:
    if not isinstance(doc, Mapping):
        raise SchemaViolation(path, "expected a JSON object")
    unknown = set(doc) - set(keys)
    if unknown:
        raise SchemaViolation(f"{path}/{sorted(unknown)[0]}", "unknown key")
    missing = set(keys) - set(doc)
    if missing:
        raise SchemaViolation(path, f"missing key '{sorted(missing)[0]}'")


def _string_list(doc: Any, path: str) -> list[str]:
    if not isinstance(doc, list) or not all(isinstance(x, str) for x in doc):
        raise SchemaViolation(path, "expected a list of strings")
    return list(doc)


def _string(doc: Any, path: str) -> str:
    if not isinstance(doc, str):
        raise SchemaViolation(path, "expected a string")
    return doc


# ---------------------------------------------------------------------------
# AIDB


def load_aidb(document: Mapping) -> AuthorityModel:
    """Validate an authority database document into an AuthorityModel."""
    _require_object(
        document, "", ("users", "roles", "objects", "operations", "permissions", "ua", "pa")
    )
    users = _string_list(document["users"], "/users")
    roles = _string_list(document["roles"], "/roles")
    objects = _string_list(document["objects"], "/objects")
    operations = _string_list(document["operations"], "/operations")

    raw_perms = document["permissions"]
    if not isinstance(raw_perms, Mapping):
        raise SchemaViolation("/permissions", "expected an object of pair lists")
    permissions: dict[str, list[tuple[str, str]]] = {}
    for pid in sorted(raw_perms):
        pairs = raw_perms[pid]
        path = f"/permissions/{pid}"
        if not isinstance(pairs, list):
            raise SchemaViolation(path, "expected a list of [operation, object] pairs")
        out = []
        for i, pair in enumerate(pairs):
            if not (
                isinstance(pair, list)
                and len(pair) == 2
                and all(isinstance(x, str) for x in pair)
            ):
                raise SchemaViolation(f"{path}/{i}", "expected [operation, object]")
            op, ob = pair
            if op not in operations:
                raise DanglingReference(f"{path}/{i}", op)
            if ob not in objects:
                raise DanglingReference(f"{path}/{i}", ob)
            out.append((op, ob))
        permissions[pid] = out

    ua = _assignment(document["ua"], "/ua", users, set(roles))
    pa = _assignment(document["pa"], "/pa", roles, set(permissions))
    return AuthorityModel.build(users, roles, objects, operations, permissions, ua, pa)


def _assignment(
    doc: Any, path: str, owners: list[str], targets: set[str]
) -> dict[str, list[str]]:
    if not isinstance(doc, Mapping):
        raise SchemaViolation(path, "expected an object of id lists")
    out: dict[str, list[str]] = {}
    for key in sorted(doc):
        if key not in owners:
            raise DanglingReference(f"{path}/{key}", key)
        values = _string_list(doc[key], f"{path}/{key}")
        for v in values:
            if v not in targets:
                raise DanglingReference(f"{path}/{key}", v)
        out[key] = values
    return out


# ---------------------------------------------------------------------------
# WSDB


@dataclass(frozen=True)
class WsdbData:
    """Validated service and channel declarations awaiting an authority model."""

    services: tuple[ServiceSpec, ...]
    channels: tuple[ChannelSpec, ...]


def load_wsdb(document: Mapping) -> WsdbData:
    _require_object(document, "", ("services", "channels"))
    raw_services = document["services"]
    if not isinstance(raw_services, list):
        raise SchemaViolation("/services", "expected a list")
    services = []
    ids = set()
    for i, svc in enumerate(raw_services):
        path = f"/services/{i}"
        _require_object(svc, path, ("id", "role", "goal", "kind"))
        kind = _string(svc["kind"], f"{path}/kind")
        if kind not in SERVICE_KINDS:
            raise SchemaViolation(f"{path}/kind", f"unknown kind '{kind}'")
        try:
            spec = ServiceSpec(
                id=_string(svc["id"], f"{path}/id"),
                role=_string(svc["role"], f"{path}/role"),
                goal=_string(svc["goal"], f"{path}/goal"),
                kind=kind,
            )
        except ValueError as exc:
            raise SchemaViolation(path, str(exc)) from exc
        if spec.id in ids:
            raise SchemaViolation(f"{path}/id", f"duplicate service id '{spec.id}'")
        ids.add(spec.id)
        services.append(spec)

    raw_channels = document["channels"]
    if not isinstance(raw_channels, list):
        raise SchemaViolation("/channels", "expected a list")
    channels = []
    names = set()
    for i, ch in enumerate(raw_channels):
        path = f"/channels/{i}"
        _require_object(ch, path, ("name", "from", "to", "forward", "backward"))
        try:
            spec = ChannelSpec(
                name=_string(ch["name"], f"{path}/name"),
                from_id=_string(ch["from"], f"{path}/from"),
                to_id=_string(ch["to"], f"{path}/to"),
                forward_payload=_string(ch["forward"], f"{path}/forward"),
                backward_payload=_string(ch["backward"], f"{path}/backward"),
            )
        except ValueError as exc:
            raise SchemaViolation(path, str(exc)) from exc
        if spec.name in names:
            raise SchemaViolation(f"{path}/name", f"duplicate channel name '{spec.name}'")
        names.add(spec.name)
        if spec.from_id not in ids:
            raise DanglingReference(f"{path}/from", spec.from_id)
        if spec.to_id not in ids:
            raise DanglingReference(f"{path}/to", spec.to_id)
        channels.append(spec)

    return WsdbData(
        services=tuple(sorted(services, key=lambda s: s.id)),
        channels=tuple(sorted(channels, key=lambda c: c.name)),
    )


# ---------------------------------------------------------------------------
# labels


def label_to_json(label: Label) -> dict:
    match label:
        case TauLabel():
            return {"kind": "tau"}
        case InLabel(c, v):
            return {"kind": "in", "channel": c, "payload": v}
        case OutLabel(c, v):
            return {"kind": "out", "channel": c, "payload": v}
        case BoundOutLabel(c, n):
            return {"kind": "bound-out", "channel": c, "fresh": n}
        case EmitLabel(t):
            return {"kind": "emit", "sig": t}
        case HandleLabel(t):
            return {"kind": "handle", "sig": t}
    raise TypeError(f"not a label: {label!r}")


def label_from_json(doc: Mapping) -> Label:
    kind = doc.get("kind")
    if kind == "tau":
        return TauLabel()
    if kind == "in":
        return InLabel(doc["channel"], doc["payload"])
    if kind == "out":
        return OutLabel(doc["channel"], doc["payload"])
    if kind == "bound-out":
        return BoundOutLabel(doc["channel"], doc["fresh"])
    if kind == "emit":
        return EmitLabel(doc["sig"])
    if kind == "handle":
        return HandleLabel(doc["sig"])
    raise SchemaViolation("/label/kind", f"unknown label kind {kind!r}")


# ---------------------------------------------------------------------------
# LTS export


def export_lts(lts: Lts, format: str = "json") -> str:
    if format == "json":
        return _lts_json(lts)
    if format == "dot":
        return _lts_dot(lts)
    raise ValueError(f"unknown export format {format!r}")


def _lts_json(lts: Lts) -> str:
    doc = {
        "initial": lts.initial,
        "mode": lts.mode.value,
        "limits": {"max_states": lts.limits.max_states, "max_depth": lts.limits.max_depth},
        "truncated": lts.truncated,
        "unexpanded": sorted(lts.unexpanded),
        "states": {digest: render_process(p) for digest, p in sorted(lts.states.items())},
        "transitions": [
            {"source": t.source, "label": label_to_json(t.label), "target": t.target}
            for t in lts.transitions
        ],
        "defs": {
            agent: render_process(lts.defs.resolve(agent)) for agent in lts.defs.agents()
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def import_lts(text: str) -> Lts:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("", f"not valid JSON: {exc}") from exc
    _require_object(
        doc, "", ("initial", "mode", "limits", "truncated", "unexpanded", "states", "transitions", "defs")
    )
    states = {digest: parse_process(src) for digest, src in doc["states"].items()}
    defs = DefinitionTable({agent: parse_process(src) for agent, src in doc["defs"].items()})
    transitions = tuple(
        sorted(
            (
                Transition(
                    t["source"],
                    label_from_json(t["label"]),
                    t["target"],
                    states[t["target"]],
                )
                for t in doc["transitions"]
            ),
            key=lambda t: (t.source, label_sort_key(t.label), t.target),
        )
    )
    return Lts(
        initial=doc["initial"],
        states=states,
        transitions=transitions,
        mode=ExplorationMode(doc["mode"]),
        limits=ExplorationLimits(
            max_states=doc["limits"]["max_states"], max_depth=doc["limits"]["max_depth"]
        ),
        truncated=doc["truncated"],
        unexpanded=frozenset(doc["unexpanded"]),
        defs=defs,
    )


def _short(digest: str) -> str:
    return digest[:12]


def _lts_dot(lts: Lts) -> str:
    lines = ["digraph lts {", "  rankdir=LR;"]
    for digest in sorted(lts.states):
        shape = "doublecircle" if digest == lts.initial else "circle"
        lines.append(f'  "{_short(digest)}" [shape={shape}];')
    for t in lts.transitions:
        lines.append(f'  "{_short(t.source)}" -> "{_short(t.target)}" [label="{t.label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# traces


def export_trace(trace) -> str:
    doc = {
        "initial": trace.initial,
        "seed": trace.seed,
        "steps": [
            {"label": label_to_json(label), "state": digest} for label, digest in trace.steps
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
