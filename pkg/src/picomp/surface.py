"""Concrete syntax: tokenizer, parser, and canonical renderer for model files.

A model file declares channels and signals, defines named agents, and ends
with a main process::

    chan a
    sig 1
    agent P = tau.P + a!<x>.P
    main = P | [tau.0, a!<y>.0]@1

Operator binding, tightest first: prefixes, then ``;``, then ``|``, then
``+``.  ``#`` starts a comment.  Dots separate a prefix from its
continuation and also appear inside dotted names (``S_provider.role``);
the two never clash because names are only dotted in delimited positions
(payloads, match operands, binders in parentheses, channel heads, agent
identifiers), while a ``new`` binder, which a continuation dot follows
directly, must be a plain identifier.

Parsing checks syntax, agent resolution and guarded recursion;
:func:`validate_model` additionally requires every free channel use and
every signal to be declared.  Rendering is canonical: declarations sorted,
one per line, minimal parentheses.  ``parse(render(m))`` is structurally
equal to ``m``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ParseError, PicompError, UndeclaredChannel, UndeclaredSignal
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
    check_resolved,
)

_PUNCT = set("!?<>()[]=+|;.,@")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"[0-9]+")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | punct | eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in _PUNCT:
            tokens.append(Token("punct", ch, line, col))
            i += 1
            col += 1
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(Token("ident", m.group(), line, col))
            col += len(m.group())
            i = m.end()
            continue
        m = _INT_RE.match(text, i)
        if m:
            tokens.append(Token("int", m.group(), line, col))
            col += len(m.group())
            i = m.end()
            continue
        raise ParseError(line, col, f"unexpected character {ch!r}")
    tokens.append(Token("eof", "", line, col))
    return tokens


@dataclass(frozen=True)
class ModelFile:
    channel_decls: frozenset[str]
    signal_decls: frozenset[int]
    defs: DefinitionTable
    main: Process
    source_spans: dict = field(default_factory=dict, compare=False, repr=False)
    channel_uses: tuple = field(default=(), compare=False, repr=False)
    signal_uses: tuple = field(default=(), compare=False, repr=False)


_KEYWORDS = {"chan", "sig", "agent", "main", "tau", "new"}


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.spans: dict[int, tuple[int, int]] = {}
        # (name, line, col) of channel-position uses and signal uses,
        # with the names bound at each point, for later validation.
        self.channel_uses: list[tuple[str, int, int]] = []
        self.signal_uses: list[tuple[int, int, int]] = []
        self.bound: list[str] = []

    # -- token helpers ----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at_punct(self, ch: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.text == ch

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and tok.text == word

    def expect_punct(self, ch: str) -> Token:
        tok = self.peek()
        if not self.at_punct(ch):
            raise ParseError(tok.line, tok.col, f"found {self._describe(tok)}", (repr(ch),))
        return self.next()

    def expect_int(self) -> tuple[int, Token]:
        tok = self.peek()
        if tok.kind != "int":
            raise ParseError(tok.line, tok.col, f"found {self._describe(tok)}", ("integer",))
        self.next()
        return int(tok.text), tok

    @staticmethod
    def _describe(tok: Token) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.text)

    def _fail(self, expected: tuple[str, ...]) -> ParseError:
        tok = self.peek()
        return ParseError(tok.line, tok.col, f"found {self._describe(tok)}", expected)

    # -- names ------------------------------------------------------------

    def parse_simple_ident(self, what: str) -> tuple[str, Token]:
        tok = self.peek()
        if tok.kind != "ident":
            raise self._fail((what,))
        if tok.text in _KEYWORDS:
            raise ParseError(tok.line, tok.col, f"{tok.text!r} is a reserved word")
        self.next()
        return tok.text, tok

    def parse_name(self) -> tuple[str, Token]:
        """Identifier optionally extended with dotted parts."""
        first, tok = self.parse_simple_ident("name")
        parts = [first]
        while self.at_punct(".") and self.peek(1).kind in ("ident", "int"):
            part = self.peek(1)
            if part.kind == "ident" and part.text in _KEYWORDS:
                break
            self.next()  # dot
            self.next()  # part
            parts.append(part.text)
        return ".".join(parts), tok

    # -- processes --------------------------------------------------------

    def parse_proc(self) -> Process:
        start = self.peek()
        left = self.parse_par()
        if self.at_punct("+"):
            self.next()
            return self._remember(Sum(left, self.parse_proc()), start)
        return left

    def parse_par(self) -> Process:
        start = self.peek()
        left = self.parse_seq()
        if self.at_punct("|"):
            self.next()
            return self._remember(Par(left, self.parse_par()), start)
        return left

    def parse_seq(self) -> Process:
        start = self.peek()
        left = self.parse_prefix()
        if self.at_punct(";"):
            self.next()
            return self._remember(Seq(left, self.parse_seq()), start)
        return left

    def _remember(self, node: Process, tok: Token) -> Process:
        self.spans[id(node)] = (tok.line, tok.col)
        return node

    def _continuation(self) -> Process:
        self.expect_punct(".")
        return self.parse_prefix()

    def parse_prefix(self) -> Process:
        tok = self.peek()
        if tok.kind == "int":
            if tok.text == "0":
                self.next()
                return self._remember(NIL, tok)
            raise ParseError(tok.line, tok.col, f"found {tok.text!r}", ("process",))
        if self.at_punct("("):
            self.next()
            inner = self.parse_proc()
            self.expect_punct(")")
            return inner
        if self.at_punct("["):
            return self._parse_bracket()
        if tok.kind != "ident":
            raise self._fail(("process",))

        if tok.text == "tau":
            self.next()
            return self._remember(Tau(self._continuation()), tok)
        if tok.text == "new":
            self.next()
            binder, _ = self.parse_simple_ident("restriction binder")
            self.bound.append(binder)
            try:
                body = self._continuation()
            finally:
                self.bound.pop()
            return self._remember(Restrict(binder, body), tok)
        if tok.text == "sig":
            self.next()
            self.expect_punct("(")
            sig, sig_tok = self.expect_int()
            self.expect_punct(")")
            self.signal_uses.append((sig, sig_tok.line, sig_tok.col))
            node = SignalEmit(self._check_signal(sig, sig_tok), self._continuation())
            return self._remember(node, tok)
        if tok.text in _KEYWORDS:
            raise ParseError(tok.line, tok.col, f"{tok.text!r} is a reserved word")

        name, name_tok = self.parse_name()
        if self.at_punct("!"):
            self.next()
            self.expect_punct("<")
            payload, _ = self.parse_name()
            self.expect_punct(">")
            if name not in self.bound:
                self.channel_uses.append((name, name_tok.line, name_tok.col))
            return self._remember(Output(name, payload, self._continuation()), name_tok)
        if self.at_punct("?"):
            self.next()
            self.expect_punct("(")
            binder, _ = self.parse_name()
            self.expect_punct(")")
            if name not in self.bound:
                self.channel_uses.append((name, name_tok.line, name_tok.col))
            self.expect_punct(".")
            self.bound.append(binder)
            try:
                then = self.parse_prefix()
            finally:
                self.bound.pop()
            return self._remember(Input(name, binder, then), name_tok)
        return self._remember(AgentCall(name), name_tok)

    def _parse_bracket(self) -> Process:
        # Both the match guard and the handler start with '['; a name
        # followed by '=' means a guard, otherwise rewind and read a handler.
        open_tok = self.next()
        save = self.pos
        if self.peek().kind == "ident" and self.peek().text not in _KEYWORDS:
            try:
                lhs, _ = self.parse_name()
            except ParseError:
                lhs = None
            if lhs is not None and self.at_punct("="):
                self.next()
                rhs, _ = self.parse_name()
                self.expect_punct("]")
                return self._remember(Match(lhs, rhs, self.parse_prefix()), open_tok)
            self.pos = save
        body = self.parse_proc()
        self.expect_punct(",")
        fallback = self.parse_proc()
        self.expect_punct("]")
        self.expect_punct("@")
        sig, sig_tok = self.expect_int()
        self.signal_uses.append((sig, sig_tok.line, sig_tok.col))
        node = Handler(body, fallback, self._check_signal(sig, sig_tok))
        return self._remember(node, open_tok)

    @staticmethod
    def _check_signal(sig: int, tok: Token) -> int:
        if sig < 1:
            raise ParseError(tok.line, tok.col, f"signal ids are positive, got {sig}")
        return sig

    # -- binder tracking for channel-use recording ------------------------
    # Restriction binders also shadow channel names.

    def parse_model(self) -> ModelFile:
        channels: set[str] = set()
        signals: set[int] = set()
        while self.at_keyword("chan"):
            self.next()
            name, _ = self.parse_name()
            channels.add(name)
        while self.at_keyword("sig"):
            # 'sig' opens both declarations and emit prefixes; a declaration
            # is followed by a bare integer.
            if self.peek(1).kind != "int":
                break
            self.next()
            sig, tok = self.expect_int()
            signals.add(self._check_signal(sig, tok))
        entries: dict[str, Process] = {}
        agent_tokens: dict[str, Token] = {}
        while self.at_keyword("agent"):
            self.next()
            name, name_tok = self.parse_name()
            if name in entries:
                raise ParseError(name_tok.line, name_tok.col, f"duplicate agent {name!r}")
            self.expect_punct("=")
            entries[name] = self.parse_proc()
            agent_tokens[name] = name_tok
        if not self.at_keyword("main"):
            raise self._fail(("'main'", "'agent'"))
        self.next()
        self.expect_punct("=")
        main = self.parse_proc()
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(tok.line, tok.col, f"trailing input {self._describe(tok)}")
        try:
            defs = DefinitionTable(entries)
        except PicompError as exc:
            first = next(iter(agent_tokens.values()), Token("eof", "", 1, 1))
            raise ParseError(first.line, first.col, str(exc)) from exc
        try:
            check_resolved(main, defs)
        except PicompError as exc:
            raise ParseError(1, 1, str(exc)) from exc
        return ModelFile(
            channel_decls=frozenset(channels),
            signal_decls=frozenset(signals),
            defs=defs,
            main=main,
            source_spans=self.spans,
            channel_uses=tuple(self.channel_uses),
            signal_uses=tuple(self.signal_uses),
        )


def parse_model(text: str) -> ModelFile:
    """Parse a model file: syntax, agent resolution and guardedness checks."""
    parser = _Parser(text)
    try:
        return parser.parse_model()
    except ValueError as exc:  # invalid name shapes surface as positioned errors
        tok = parser.peek()
        raise ParseError(tok.line, tok.col, str(exc)) from exc


def parse_process(text: str) -> Process:
    """Parse a standalone process expression (used by importers and tests)."""
    parser = _Parser(text)
    try:
        proc = parser.parse_proc()
    except ValueError as exc:
        tok = parser.peek()
        raise ParseError(tok.line, tok.col, str(exc)) from exc
    tok = parser.peek()
    if tok.kind != "eof":
        raise ParseError(tok.line, tok.col, f"trailing input {parser._describe(tok)}")
    return proc


def validate_model(mf: ModelFile) -> None:
    """Require every free channel use and every signal to be declared.

    Channel-position names bound by an enclosing input or restriction are
    exempt; mobility may route traffic through received names.
    """
    for name, line, col in mf.channel_uses:
        if name not in mf.channel_decls:
            raise UndeclaredChannel(line, col, name)
    for sig, line, col in mf.signal_uses:
        if sig not in mf.signal_decls:
            raise UndeclaredSignal(line, col, sig)


def load_model(text: str) -> ModelFile:
    mf = parse_model(text)
    validate_model(mf)
    return mf


# ---------------------------------------------------------------------------
# rendering

_SUM, _PAR, _SEQ, _PREFIX = 0, 1, 2, 3


def _render(p: Process, required: int) -> str:
    match p:
        case Nil():
            text, level = "0", _PREFIX
        case Sum(l, r):
            text, level = f"{_render(l, _PAR)} + {_render(r, _SUM)}", _SUM
        case Par(l, r):
            text, level = f"{_render(l, _SEQ)} | {_render(r, _PAR)}", _PAR
        case Seq(first, second):
            text, level = f"{_render(first, _PREFIX)}; {_render(second, _SEQ)}", _SEQ
        case Tau(k):
            text, level = f"tau.{_render(k, _PREFIX)}", _PREFIX
        case Output(c, x, k):
            text, level = f"{c}!<{x}>.{_render(k, _PREFIX)}", _PREFIX
        case Input(c, b, k):
            text, level = f"{c}?({b}).{_render(k, _PREFIX)}", _PREFIX
        case SignalEmit(t, k):
            text, level = f"sig({t}).{_render(k, _PREFIX)}", _PREFIX
        case Restrict(n, body):
            text, level = f"new {n}.{_render(body, _PREFIX)}", _PREFIX
        case Match(x, y, k):
            text, level = f"[{x} = {y}] {_render(k, _PREFIX)}", _PREFIX
        case Handler(body, fb, t):
            text, level = f"[{_render(body, _SUM)}, {_render(fb, _SUM)}]@{t}", _PREFIX
        case AgentCall(agent):
            text, level = agent, _PREFIX
        case _:
            raise TypeError(f"not a process: {p!r}")
    if level < required:
        return f"({text})"
    return text


def render_process(p: Process) -> str:
    return _render(p, _SUM)


def render_model(mf: ModelFile) -> str:
    """Canonical text: sorted declarations and definitions, one per line."""
    lines: list[str] = []
    for name in sorted(mf.channel_decls):
        lines.append(f"chan {name}")
    for sig in sorted(mf.signal_decls):
        lines.append(f"sig {sig}")
    for agent in mf.defs.agents():
        lines.append(f"agent {agent} = {render_process(mf.defs.resolve(agent))}")
    lines.append(f"main = {render_process(mf.main)}")
    return "\n".join(lines) + "\n"
