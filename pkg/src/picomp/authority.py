"""Requester authority model: users, roles, permissions, and the service view.

A permission is a set of (operation, object) pairs.  Users map to role
sets, roles map to permission sets, and a user's goal set is the object
projection of every permission reachable through their roles.  The service
view of a user is the full cartesian product of their roles and goals; a
(role, goal) pair outside that product is not a service the user may
request.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import DanglingReference, UnknownUser

Pair = tuple[str, str]  # (operation, object)


@dataclass(frozen=True)
class AuthorityModel:
    users: frozenset[str]
    roles: frozenset[str]
    objects: frozenset[str]
    operations: frozenset[str]
    permissions: tuple[tuple[str, frozenset[Pair]], ...]  # sorted by permission id
    ua: tuple[tuple[str, frozenset[str]], ...]  # sorted by user id
    pa: tuple[tuple[str, frozenset[str]], ...]  # sorted by role id

    @staticmethod
    def build(
        users: Iterable[str],
        roles: Iterable[str],
        objects: Iterable[str],
        operations: Iterable[str],
        permissions: Mapping[str, Iterable[Pair]],
        ua: Mapping[str, Iterable[str]],
        pa: Mapping[str, Iterable[str]],
    ) -> "AuthorityModel":
        """Validate referential integrity and freeze into canonical order.

        Users missing from ``ua`` get an empty role set; roles missing from
        ``pa`` get an empty permission set.
        """
        users_f = frozenset(users)
        roles_f = frozenset(roles)
        objects_f = frozenset(objects)
        operations_f = frozenset(operations)

        perms: list[tuple[str, frozenset[Pair]]] = []
        for pid in sorted(permissions):
            pairs = frozenset((op, ob) for op, ob in permissions[pid])
            for op, ob in sorted(pairs):
                if op not in operations_f:
                    raise DanglingReference(f"permissions/{pid}", op)
                if ob not in objects_f:
                    raise DanglingReference(f"permissions/{pid}", ob)
            perms.append((pid, pairs))
        perm_ids = {pid for pid, _ in perms}

        ua_rows: list[tuple[str, frozenset[str]]] = []
        for user in sorted(ua):
            if user not in users_f:
                raise DanglingReference("ua", user)
            assigned = frozenset(ua[user])
            for role in sorted(assigned):
                if role not in roles_f:
                    raise DanglingReference(f"ua/{user}", role)
            ua_rows.append((user, assigned))
        covered = {u for u, _ in ua_rows}
        for user in sorted(users_f - covered):
            ua_rows.append((user, frozenset()))
        ua_rows.sort()

        pa_rows: list[tuple[str, frozenset[str]]] = []
        for role in sorted(pa):
            if role not in roles_f:
                raise DanglingReference("pa", role)
            granted = frozenset(pa[role])
            for pid in sorted(granted):
                if pid not in perm_ids:
                    raise DanglingReference(f"pa/{role}", pid)
            pa_rows.append((role, granted))
        covered_roles = {r for r, _ in pa_rows}
        for role in sorted(roles_f - covered_roles):
            pa_rows.append((role, frozenset()))
        pa_rows.sort()

        return AuthorityModel(
            users=users_f,
            roles=roles_f,
            objects=objects_f,
            operations=operations_f,
            permissions=tuple(perms),
            ua=tuple(ua_rows),
            pa=tuple(pa_rows),
        )

    def permission_pairs(self, pid: str) -> frozenset[Pair]:
        for got, pairs in self.permissions:
            if got == pid:
                return pairs
        raise DanglingReference("permissions", pid)

    def _ua(self, user: str) -> frozenset[str]:
        for got, assigned in self.ua:
            if got == user:
                return assigned
        return frozenset()

    def _pa(self, role: str) -> frozenset[str]:
        for got, granted in self.pa:
            if got == role:
                return granted
        return frozenset()


@dataclass(frozen=True)
class ServiceView:
    """All (role, goal) services a user may request."""

    pairs: frozenset[Pair]

    def __contains__(self, pair: Pair) -> bool:
        return pair in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)


def roles_of(m: AuthorityModel, user: str) -> frozenset[str]:
    if user not in m.users:
        raise UnknownUser(user)
    return m._ua(user)


def _user_permissions(m: AuthorityModel, user: str) -> frozenset[str]:
    out: set[str] = set()
    for role in roles_of(m, user):
        out |= m._pa(role)
    return frozenset(out)


def goals_of(m: AuthorityModel, user: str) -> frozenset[str]:
    """Object projection of the user's permission closure."""
    out: set[str] = set()
    for pid in _user_permissions(m, user):
        out |= {ob for _, ob in m.permission_pairs(pid)}
    return frozenset(out)


def ops_of(m: AuthorityModel, user: str) -> frozenset[str]:
    """Operation projection of the user's permission closure."""
    out: set[str] = set()
    for pid in _user_permissions(m, user):
        out |= {op for op, _ in m.permission_pairs(pid)}
    return frozenset(out)


def authorize(m: AuthorityModel, user: str, op: str, obj: str) -> bool:
    """True iff some permission reachable from the user grants (op, obj)."""
    if user not in m.users:
        raise UnknownUser(user)
    for pid in _user_permissions(m, user):
        if (op, obj) in m.permission_pairs(pid):
            return True
    return False


def service_view(m: AuthorityModel, user: str) -> ServiceView:
    roles = roles_of(m, user)
    goals = goals_of(m, user)
    return ServiceView(pairs=frozenset((r, g) for r in roles for g in goals))
