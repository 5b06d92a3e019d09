"""Exception types shared across the workbench."""

from __future__ import annotations


class PicompError(Exception):
    """Base class for all workbench errors."""


class UnresolvedAgent(PicompError):
    """An agent call has no entry in the definition table."""

    def __init__(self, agent: str):
        super().__init__(f"agent '{agent}' has no definition")
        self.agent = agent


class UnguardedRecursion(PicompError):
    """A cycle of agent references contains no action prefix."""

    def __init__(self, cycle: tuple[str, ...]):
        path = " -> ".join(cycle)
        super().__init__(f"unguarded recursion through {path}")
        self.cycle = cycle


class SubstitutionIntoAgent(PicompError):
    """Substitution would change a name that is free in an agent definition.

    Definitions are closed by policy; rewriting their free names would
    silently change every other call site, so it is rejected instead.
    """

    def __init__(self, agent: str, name: str):
        super().__init__(f"cannot substitute '{name}', it is free in agent '{agent}'")
        self.agent = agent
        self.name = name


class UnknownUser(PicompError):
    def __init__(self, user: str):
        super().__init__(f"unknown user '{user}'")
        self.user = user


class UnauthorizedService(PicompError):
    """A service's (role, goal) pair lies outside the requester's view."""

    def __init__(self, service_id: str, role: str, goal: str):
        super().__init__(
            f"service '{service_id}': ({role}, {goal}) not authorized for the requesting user"
        )
        self.service_id = service_id
        self.role = role
        self.goal = goal


class DanglingChannel(PicompError):
    def __init__(self, name: str, endpoint: str):
        super().__init__(f"channel '{name}' references undeclared service '{endpoint}'")
        self.name = name
        self.endpoint = endpoint


class EndpointMismatch(PicompError):
    def __init__(self, service_id: str, channel: str, expected: str):
        super().__init__(
            f"service '{service_id}' is not the {expected} endpoint of channel '{channel}'"
        )
        self.service_id = service_id
        self.channel = channel


class OpenModeLts(PicompError):
    def __init__(self) -> None:
        super().__init__("analysis requires an LTS built in closed mode")


class StateSpaceExceeded(PicompError):
    def __init__(self, detail: str):
        super().__init__(f"state space exceeded: {detail}")


class ParseError(PicompError):
    """Positioned syntax or static validation error in a model file."""

    def __init__(self, line: int, column: int, message: str, expected: tuple[str, ...] = ()):
        self.line = line
        self.column = column
        self.expected = expected
        detail = message
        if expected:
            detail = f"{message} (expected {', '.join(expected)})"
        super().__init__(f"line {line}, column {column}: {detail}")


class UndeclaredChannel(ParseError):
    def __init__(self, line: int, column: int, name: str):
        super().__init__(line, column, f"channel '{name}' is not declared")
        self.name = name


class UndeclaredSignal(ParseError):
    def __init__(self, line: int, column: int, sig: int):
        super().__init__(line, column, f"signal {sig} is not declared")
        self.sig = sig


class SchemaViolation(PicompError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DanglingReference(PicompError):
    def __init__(self, path: str, ref: str):
        super().__init__(f"{path}: reference to undeclared id '{ref}'")
        self.path = path
        self.ref = ref
