"""Alpha normalization, canonical digests, and structural congruence.

Two layers of identity are kept separate:

* :func:`canonicalize` rewrites bound names to positional ``_k`` indices and
  hashes the result.  Alpha-equivalent terms get identical digests; nothing
  else is identified.
* :func:`normal_form` additionally applies the congruence laws (commutative
  monoid laws for ``|`` and ``+`` with unit 0, the ``0; Q = Q`` unit,
  ``new c. 0 = 0``, and scope extension), flattening and sorting composite
  children by canonical digest and pushing each restriction to its minimal
  scope.  :func:`structurally_congruent` compares the canonical digests of
  normal forms.

The positional index base is chosen above any free ``_k``-shaped name, so
renaming can never conflate a binder with a free name, and every binder in
one pass gets a distinct index, so distinct binders never collide either.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from .errors import UnresolvedAgent
from .terms import (
    NIL,
    AgentCall,
    DefinitionTable,
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
    free_names,
)

_POSITIONAL_RE = re.compile(r"_([0-9]+)\Z")


def _lenient_free(p: Process, defs: DefinitionTable | None) -> frozenset[str] | None:
    """Free names, or None when an unresolved agent call makes them unknowable."""
    try:
        return free_names(p, defs)
    except UnresolvedAgent:
        return None


def _index_base(p: Process, defs: DefinitionTable | None) -> int:
    """Smallest k such that no free name of ``p`` is ``_j`` with j >= k.

    Depends only on free names, which alpha-equivalent terms share, so the
    normal forms of alpha-variants coincide.
    """
    free = _lenient_free(p, defs)
    if free is None:
        from .terms import _syntactic_free

        free = _syntactic_free(p)
    base = 0
    for name in free:
        m = _POSITIONAL_RE.match(name)
        if m:
            base = max(base, int(m.group(1)) + 1)
    return base


def alpha_normal(p: Process, defs: DefinitionTable | None = None) -> Process:
    """Rewrite every binder to a positional ``_k`` name in traversal order."""
    counter = _index_base(p, defs)

    def walk(node: Process, env: dict[str, str]) -> Process:
        nonlocal counter
        match node:
            case Nil() | AgentCall(_):
                return node
            case Output(c, x, k):
                return Output(env.get(c, c), env.get(x, x), walk(k, env))
            case Input(c, b, k):
                b2 = f"_{counter}"
                counter += 1
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
                n2 = f"_{counter}"
                counter += 1
                return Restrict(n2, walk(body, {**env, n: n2}))
            case Match(x, y, k):
                return Match(env.get(x, x), env.get(y, y), walk(k, env))
        raise TypeError(f"not a process: {node!r}")

    return walk(p, {})


def alpha_equivalent(p: Process, q: Process, defs: DefinitionTable | None = None) -> bool:
    """True iff the terms differ only in their choice of bound names."""
    return alpha_normal(p, defs) == alpha_normal(q, defs)


def _serialize(p: Process, out: list[str]) -> None:
    match p:
        case Nil():
            out.append("0")
        case Output(c, x, k):
            out.append(f"o({c},{x},")
            _serialize(k, out)
            out.append(")")
        case Input(c, b, k):
            out.append(f"i({c},{b},")
            _serialize(k, out)
            out.append(")")
        case Tau(k):
            out.append("t(")
            _serialize(k, out)
            out.append(")")
        case SignalEmit(t, k):
            out.append(f"e({t},")
            _serialize(k, out)
            out.append(")")
        case Seq(l, r):
            out.append("q(")
            _serialize(l, out)
            out.append(",")
            _serialize(r, out)
            out.append(")")
        case Sum(l, r):
            out.append("s(")
            _serialize(l, out)
            out.append(",")
            _serialize(r, out)
            out.append(")")
        case Par(l, r):
            out.append("p(")
            _serialize(l, out)
            out.append(",")
            _serialize(r, out)
            out.append(")")
        case Restrict(n, body):
            out.append(f"n({n},")
            _serialize(body, out)
            out.append(")")
        case Match(x, y, k):
            out.append(f"m({x},{y},")
            _serialize(k, out)
            out.append(")")
        case Handler(body, fb, t):
            out.append("h(")
            _serialize(body, out)
            out.append(",")
            _serialize(fb, out)
            out.append(f",{t})")
        case AgentCall(agent):
            out.append(f"a({agent})")
        case _:
            raise TypeError(f"not a process: {p!r}")


def serialize(p: Process) -> str:
    """Compact unambiguous text encoding used for hashing."""
    out: list[str] = []
    _serialize(p, out)
    return "".join(out)


@dataclass(frozen=True)
class CanonicalProcess:
    """Alpha-normal representative plus its stable digest."""

    digest: str
    normal_form: Process


_DIGEST_CACHES: dict[DefinitionTable | None, dict[Process, str]] = {}
_EMPTY_ENV: dict[str, int] = {}


def _enc(name: str, env: dict[str, int], depth: int) -> str:
    level = env.get(name)
    if level is None:
        return f"f{len(name)}:{name}"
    return f"b{depth - level}"


def _digest_walk(
    node: Process,
    env: dict[str, int],
    depth: int,
    cache: dict[Process, str],
    defs: DefinitionTable | None,
) -> str:
    if env:
        fn = _lenient_free(node, defs)
        if fn is None or any(name in fn for name in env):
            return _digest_compute(node, env, depth, cache, defs)
    got = cache.get(node)
    if got is None:
        got = _digest_compute(node, _EMPTY_ENV, 0, cache, defs)
        cache[node] = got
    return got


def _digest_compute(
    node: Process,
    env: dict[str, int],
    depth: int,
    cache: dict[Process, str],
    defs: DefinitionTable | None,
) -> str:
    walk = _digest_walk
    match node:
        case Nil():
            payload = "0"
        case Output(c, x, k):
            payload = f"o({_enc(c, env, depth)},{_enc(x, env, depth)},{walk(k, env, depth, cache, defs)})"
        case Input(c, b, k):
            env2 = {**env, b: depth}
            payload = f"i({_enc(c, env, depth)},{walk(k, env2, depth + 1, cache, defs)})"
        case Tau(k):
            payload = f"t({walk(k, env, depth, cache, defs)})"
        case SignalEmit(t, k):
            payload = f"e({t},{walk(k, env, depth, cache, defs)})"
        case Seq(l, r):
            payload = f"q({walk(l, env, depth, cache, defs)},{walk(r, env, depth, cache, defs)})"
        case Sum(l, r):
            payload = f"s({walk(l, env, depth, cache, defs)},{walk(r, env, depth, cache, defs)})"
        case Par(l, r):
            payload = f"p({walk(l, env, depth, cache, defs)},{walk(r, env, depth, cache, defs)})"
        case Restrict(n, body):
            env2 = {**env, n: depth}
            payload = f"n({walk(body, env2, depth + 1, cache, defs)})"
        case Match(x, y, k):
            payload = (
                f"m({_enc(x, env, depth)},{_enc(y, env, depth)},{walk(k, env, depth, cache, defs)})"
            )
        case Handler(body, fb, t):
            payload = f"h({walk(body, env, depth, cache, defs)},{walk(fb, env, depth, cache, defs)},{t})"
        case AgentCall(agent):
            payload = f"a{len(agent)}:{agent}"
        case _:
            raise TypeError(f"not a process: {node!r}")
    return hashlib.sha256(payload.encode("ascii")).hexdigest()


def state_digest(p: Process, defs: DefinitionTable | None = None) -> str:
    """Alpha-invariant sha256 digest (bound names as de Bruijn distances).

    Computed compositionally and memoized per subterm wherever a subterm
    does not reference an enclosing binder, which makes hashing a freshly
    built target term cost only its unshared spine.
    """
    cache = _DIGEST_CACHES.setdefault(defs, {})
    if len(cache) > 1_000_000:
        cache.clear()
    return _digest_walk(p, _EMPTY_ENV, 0, cache, defs)


def canonicalize(p: Process, defs: DefinitionTable | None = None) -> CanonicalProcess:
    """Stable alpha-class identity: digest plus positional normal form."""
    return CanonicalProcess(digest=state_digest(p, defs), normal_form=alpha_normal(p, defs))


def _sort_key(p: Process, defs: DefinitionTable | None) -> str:
    cache = _DIGEST_CACHES.get(defs)
    if cache is not None:
        got = cache.get(p)
        if got is not None:
            return got
    return state_digest(p, defs)


def _flatten_par(p: Process, acc: list[Process]) -> None:
    if isinstance(p, Par):
        _flatten_par(p.left, acc)
        _flatten_par(p.right, acc)
    elif not isinstance(p, Nil):
        acc.append(p)


def _flatten_sum(p: Process, acc: list[Process]) -> None:
    if isinstance(p, Sum):
        _flatten_sum(p.left, acc)
        _flatten_sum(p.right, acc)
    elif not isinstance(p, Nil):
        acc.append(p)


def _fold(children: list[Process], ctor) -> Process:
    if not children:
        return NIL
    result = children[-1]
    for child in reversed(children[:-1]):
        result = ctor(child, result)
    return result


def _is_right_spine(node: Process, ctor) -> bool:
    while isinstance(node, ctor):
        if isinstance(node.left, ctor):
            return False
        node = node.right
    return True


_NORM_CACHES: dict[DefinitionTable | None, dict[Process, Process]] = {}


def normal_form(p: Process, defs: DefinitionTable | None = None) -> Process:
    """Congruence normal form (not alpha-normalized; see module docstring)."""
    cache = _NORM_CACHES.setdefault(defs, {})
    if len(cache) > 500_000:
        cache.clear()

    def norm(node: Process) -> Process:
        got = cache.get(node)
        if got is not None:
            return got
        result = _norm_uncached(node)
        cache[node] = result
        return result

    def _norm_uncached(node: Process) -> Process:
        match node:
            case Nil() | AgentCall(_):
                return node
            case Output(c, x, k):
                nk = norm(k)
                return node if nk is k else Output(c, x, nk)
            case Input(c, b, k):
                nk = norm(k)
                return node if nk is k else Input(c, b, nk)
            case Tau(k):
                nk = norm(k)
                return node if nk is k else Tau(nk)
            case SignalEmit(t, k):
                nk = norm(k)
                return node if nk is k else SignalEmit(t, nk)
            case Match(x, y, k):
                nk = norm(k)
                return node if nk is k else Match(x, y, nk)
            case Handler(body, fb, t):
                nb, nf = norm(body), norm(fb)
                return node if nb is body and nf is fb else Handler(nb, nf, t)
            case Seq(first, second):
                nf = norm(first)
                ns = norm(second)
                if isinstance(nf, Nil):
                    return ns
                return node if nf is first and ns is second else Seq(nf, ns)
            case Sum(_, _):
                return _norm_composite(node, Sum, _flatten_sum)
            case Par(_, _):
                return _norm_composite(node, Par, _flatten_par)
            case Restrict(n, body):
                return _norm_restrict(n, norm(body))
        raise TypeError(f"not a process: {node!r}")

    def _norm_composite(node: Process, ctor, flatten) -> Process:
        # Flatten the whole spine first: norming the nested spine levels one
        # by one would sort each suffix again (quadratic in width).
        raw: list[Process] = []
        flatten(node, raw)
        children: list[Process] = []
        for child in raw:
            nc = norm(child)
            flatten(nc, children)  # a normed child may itself expose a spine
        children.sort(key=lambda ch: _sort_key(ch, defs))
        if (
            len(children) == len(raw)
            and all(a is b for a, b in zip(children, raw))
            and _is_right_spine(node, ctor)
        ):
            return node
        return _fold(children, ctor)

    def _norm_restrict(n: str, body: Process) -> Process:
        if isinstance(body, Nil):
            return NIL
        fn = _lenient_free(body, defs)
        if fn is not None and n not in fn:
            # Derivable from scope extension with a 0 component.
            return body
        if isinstance(body, Par):
            children: list[Process] = []
            _flatten_par(body, children)
            inside = [ch for ch in children if _mentions(ch, n)]
            outside = [ch for ch in children if not _mentions(ch, n)]
            if outside:
                scoped = _norm_restrict(n, _fold(inside, Par))
                merged: list[Process] = []
                _flatten_par(scoped, merged)
                merged.extend(outside)
                merged.sort(key=lambda ch: _sort_key(ch, defs))
                return _fold(merged, Par)
        return Restrict(n, body)

    def _mentions(child: Process, n: str) -> bool:
        fn = _lenient_free(child, defs)
        if fn is None:
            return True  # unknown frees: keep under the restriction
        return n in fn

    return norm(p)


def structurally_congruent(
    p: Process, q: Process, defs: DefinitionTable | None = None
) -> bool:
    """Decide p == q under alpha plus the adopted congruence laws."""
    if p == q:
        return True
    return state_digest(normal_form(p, defs), defs) == state_digest(normal_form(q, defs), defs)


def is_nil_like(p: Process, defs: DefinitionTable | None = None) -> bool:
    """True iff the term is structurally congruent to 0."""
    return isinstance(normal_form(p, defs), Nil)


def canonical_state(p: Process, defs: DefinitionTable | None = None) -> CanonicalProcess:
    """State identity used by exploration: congruence-normal then alpha-normal."""
    return canonicalize(normal_form(p, defs), defs)
