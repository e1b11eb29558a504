"""Crash-stop local session types: syntax, semantics and translation to FIFO automata."""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

from .crash import Part
from .model import (CRASH, CRASH_LABEL, Action, Channel, FifoAutomaton, Message,
                    Receive, Send, System, ValidationError, crash_action)


# -- syntax ---------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """External choice: receive one of the labels from ``peer``."""
    peer: str
    branches: tuple  # of (Message, LocalType)


@dataclass(frozen=True)
class Select:
    """Internal choice: send one of the labels to ``peer``."""
    peer: str
    branches: tuple


@dataclass(frozen=True)
class Rec:
    var: str
    body: "LocalType"


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class End:
    pass


@dataclass(frozen=True)
class Stop:
    pass


LocalType = Union[Branch, Select, Rec, Var, End, Stop]
END = End()
STOP = Stop()


def branch(peer: str, *items) -> Branch:
    return Branch(peer, tuple((_msg(m), t) for m, t in items))


def select(peer: str, *items) -> Select:
    return Select(peer, tuple((_msg(m), t) for m, t in items))


def _msg(m) -> Message:
    if isinstance(m, Message):
        return m
    if m == "CRASH":
        return CRASH
    return Message(m)


def format_type(t: LocalType) -> str:
    if isinstance(t, End):
        return "end"
    if isinstance(t, Stop):
        return "stop"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Rec):
        return f"rec {t.var} . {format_type(t.body)}"
    op = "&" if isinstance(t, Branch) else "(+)"
    items = []
    for m, k in t.branches:
        label = "CRASH" if m.is_crash else m.label
        if m.sort:
            label += f"({m.sort})"
        items.append(f"{label}.{format_type(k)}")
    return f"{t.peer} {op} {{ {', '.join(items)} }}"


_TOKEN = re.compile(r"\s*(\(\+\)|⊕|&|\{|\}|\(|\)|,|\.|:|μ|[A-Za-z_][A-Za-z0-9_']*|⚡)")


class TypeSyntaxError(ValueError):
    pass


def _tokens(text: str) -> list[str]:
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise TypeSyntaxError(f"unexpected character {text[pos:pos + 10]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def parse_type(text: str) -> LocalType:
    toks = _tokens(text)
    pos = 0

    def peek(i=0):
        return toks[pos + i] if pos + i < len(toks) else None

    def take(expected=None):
        nonlocal pos
        tok = peek()
        if tok is None or (expected is not None and tok != expected):
            raise TypeSyntaxError(f"expected {expected or 'token'}, found {tok!r}")
        pos += 1
        return tok

    def typ():
        tok = peek()
        if tok in ("rec", "mu", "μ"):
            take()
            var = take()
            take(".")
            return Rec(var, typ())
        if tok == "end":
            take()
            return END
        if tok == "stop":
            take()
            return STOP
        if tok is None or not re.match(r"[A-Za-z_]", tok):
            raise TypeSyntaxError(f"unexpected token {tok!r}")
        name = take()
        op = peek()
        if op in ("&", "(+)", "⊕"):
            take()
            if peek() == "{":
                take("{")
                items = [item()]
                while peek() == ",":
                    take(",")
                    items.append(item())
                take("}")
            else:
                items = [item()]
            cls = Branch if op == "&" else Select
            return cls(name, tuple(items))
        return Var(name)

    def item():
        label = take()
        if label in ("CRASH", "⚡"):
            label = CRASH_LABEL
        sort = None
        if peek() == "(":
            take("(")
            sort = take()
            take(")")
        if peek() == ".":
            take(".")
            cont = typ()
        else:
            cont = END
        return Message(label, sort), cont

    t = typ()
    if pos != len(toks):
        raise TypeSyntaxError(f"trailing input at {toks[pos]!r}")
    return t


def check_type(t: LocalType) -> list[str]:
    """Well-formedness errors (empty when the type is well formed and closed)."""
    errs: list[str] = []
    seen_vars: list[str] = []

    def walk(t, bound):
        if isinstance(t, Var):
            if t.name not in bound:
                errs.append(f"unbound recursion variable {t.name}")
        elif isinstance(t, Rec):
            if t.var in seen_vars:
                errs.append(f"recursion variable {t.var} bound twice")
            seen_vars.append(t.var)
            body = t.body
            while isinstance(body, Rec):
                body = body.body
            if isinstance(body, Var):
                errs.append(f"unguarded recursion on {t.var}")
            walk(t.body, bound | {t.var})
        elif isinstance(t, (Branch, Select)):
            labels = [m for m, _ in t.branches]
            if not labels:
                errs.append("empty choice")
            if len(set(labels)) != len(labels) or \
                    len({m.label for m in labels}) != len(labels):
                errs.append(f"duplicate labels in choice with {t.peer}")
            if isinstance(t, Select) and any(m.is_crash for m in labels):
                errs.append(f"crash label in internal choice to {t.peer}")
            if isinstance(t, Branch) and len(labels) == 1 and labels[0].is_crash:
                errs.append(f"singleton crash branch from {t.peer}")
            for _, k in t.branches:
                walk(k, bound)

    walk(t, frozenset())
    return errs


def peers_of(t: LocalType) -> set[str]:
    if isinstance(t, (Branch, Select)):
        return {t.peer}.union(*(peers_of(k) for _, k in t.branches))
    if isinstance(t, Rec):
        return peers_of(t.body)
    return set()


# -- occurrence ------------------------------------------------------------

def occurs_in(t: LocalType) -> set:
    """Types occurring in ``t``; choices contribute one single-branch type per branch."""
    out: set = set()

    def walk(t):
        if isinstance(t, (Branch, Select)):
            for m, k in t.branches:
                out.add(type(t)(t.peer, ((m, k),)))
                walk(k)
        elif isinstance(t, Rec):
            out.add(t)
            walk(t.body)
        else:
            out.add(t)

    walk(t)
    return out


def subterms(t: LocalType) -> list:
    """Whole subterms in pre-order (duplicates removed)."""
    out: dict = {}

    def walk(t):
        out.setdefault(t, None)
        if isinstance(t, (Branch, Select)):
            for _, k in t.branches:
                walk(k)
        elif isinstance(t, Rec):
            walk(t.body)

    walk(t)
    return list(out)


def type_size(t: LocalType) -> int:
    if isinstance(t, (Branch, Select)):
        return 1 + sum(1 + type_size(k) for _, k in t.branches)
    if isinstance(t, Rec):
        return 1 + type_size(t.body)
    return 1


def strip(t: LocalType) -> LocalType:
    while isinstance(t, Rec):
        t = t.body
    return t


def substitute(t: LocalType, var: str, repl: LocalType) -> LocalType:
    if isinstance(t, Var):
        return repl if t.name == var else t
    if isinstance(t, Rec):
        return t if t.var == var else Rec(t.var, substitute(t.body, var, repl))
    if isinstance(t, (Branch, Select)):
        return type(t)(t.peer, tuple((m, substitute(k, var, repl)) for m, k in t.branches))
    return t


def unfold(t: LocalType) -> LocalType:
    while isinstance(t, Rec):
        t = substitute(t.body, t.var, t)
    return t


# -- LTS -------------------------------------------------------------------

@dataclass(frozen=True)
class Crashing:
    """Part-way through the crash broadcast: ``done`` peers already notified."""
    done: int


def local_steps(t, owner: str, procs: Sequence[str], reliable: Iterable[str] = (),
                unconditional_crash: bool = False) -> list[tuple[Action, object]]:
    """Single-role transitions of a local type against a free environment."""
    peers = sorted(p for p in procs if p != owner)
    if isinstance(t, Crashing):
        if t.done == len(peers):
            return []
        nxt = STOP if t.done + 1 == len(peers) else Crashing(t.done + 1)
        return [(Send(Channel(owner, peers[t.done]), CRASH), nxt)]
    t = unfold(t)
    out: list = []
    if isinstance(t, (End, Stop)):
        return [(Receive(Channel(q, owner), CRASH), t) for q in peers]
    if isinstance(t, Select):
        out += [(Send(Channel(owner, t.peer), m), k) for m, k in t.branches]
    elif isinstance(t, Branch):
        out += [(Receive(Channel(t.peer, owner), m), k) for m, k in t.branches]
    if unconditional_crash or owner not in set(reliable):
        out.append((crash_action(owner), Crashing(0) if peers else STOP))
    return out


@dataclass(frozen=True)
class TypeConfiguration:
    types: tuple  # (process, type) pairs, sorted by process
    buffers: tuple  # (channel, tuple of messages) pairs

    def type_of(self, p: str):
        return dict(self.types)[p]


def type_configuration(types: Mapping[str, LocalType]) -> TypeConfiguration:
    procs = sorted(types)
    chans = [Channel(p, q) for p in procs for q in procs if p != q]
    return TypeConfiguration(tuple((p, types[p]) for p in procs), tuple((c, ()) for c in chans))


def lts_step(gamma: TypeConfiguration, a: Action, reliable: Iterable[str] = (),
             unconditional_crash: bool = False) -> TypeConfiguration | None:
    """Fire ``a`` in a configuration of local types with FIFO channels."""
    procs = [p for p, _ in gamma.types]
    p = a.process
    if p not in procs:
        return None
    bufs = dict(gamma.buffers)
    if isinstance(a, Receive):
        w = bufs.get(a.channel, ())
        if not w or w[0] != a.message:
            return None
    for act, nxt in local_steps(gamma.type_of(p), p, procs, reliable, unconditional_crash):
        if act != a:
            continue
        if isinstance(a, Send):
            bufs[a.channel] = bufs[a.channel] + (a.message,)
        elif isinstance(a, Receive):
            bufs[a.channel] = bufs[a.channel][1:]
        types = tuple((x, nxt if x == p else t) for x, t in gamma.types)
        return TypeConfiguration(types, tuple((c, bufs[c]) for c, _ in gamma.buffers))
    return None


# -- translation -------------------------------------------------------------

@dataclass
class Translation:
    automaton: FifoAutomaton
    state_type: dict  # state name -> LocalType (or None for chain states)
    partition: dict  # state name -> Part


def _binders(t: LocalType) -> dict[str, LocalType]:
    out = {}
    for x in subterms(t):
        if isinstance(x, Rec):
            out[x.var] = x.body
    return out


def translate_full(t0: LocalType, owner: str, procs: Iterable[str],
                   reliable: Iterable[str] = (), *, unconditional_crash: bool = False,
                   literal_chain: bool = False, drop_crash_branches: bool = False) -> Translation:
    """Translate a local type of ``owner`` into a FIFO automaton.

    The crash broadcast chain is emitted only for unreliable owners unless
    ``unconditional_crash``.  By default the chain notifies every peer and ends
    in ``stop``; ``literal_chain`` reproduces the n-1 sends followed by a
    second crash action.  ``drop_crash_branches`` omits crash-symbol
    receptions (a deliberate mutation used in tests).
    """
    errs = check_type(t0)
    if errs:
        raise ValidationError(errs)
    procs = sorted(set(procs))
    if owner not in procs:
        raise ValidationError([f"owner {owner} not among the processes"])
    missing = peers_of(t0) - set(procs)
    if missing:
        raise ValidationError([f"type of {owner} references unknown process {q}"
                               for q in sorted(missing)])
    peers = [q for q in procs if q != owner]
    binders = _binders(t0)

    def target(k: LocalType) -> LocalType:
        if isinstance(k, Var):
            return strip(binders[k.name])
        return strip(k)

    crash_chain = unconditional_crash or owner not in set(reliable)
    init = strip(t0)
    # name states in breadth-first order from the initial type
    order: list = []
    seen = set()
    todo = deque([init])
    while todo:
        x = todo.popleft()
        if x in seen:
            continue
        seen.add(x)
        order.append(x)
        if isinstance(x, (Branch, Select)):
            for _, k in x.branches:
                todo.append(target(k))
    for x in subterms(t0):
        if not isinstance(x, (Var, Rec)) and x not in seen:
            seen.add(x)
            order.append(x)
    # without a live state the chain would be unreachable, so it is left out
    crash_chain = crash_chain and any(not isinstance(x, (End, Stop)) for x in order)
    if crash_chain and STOP not in seen:
        order.append(STOP)
    names: dict = {}
    i = 0
    for x in order:
        if isinstance(x, End):
            names[x] = "end"
        elif isinstance(x, Stop):
            names[x] = "stop"
        else:
            names[x] = f"T{i}"
            i += 1
    trs = []
    for x in order:
        src = names[x]
        if isinstance(x, (Branch, Select)):
            for m, k in x.branches:
                if m.is_crash:
                    if drop_crash_branches:
                        continue
                    trs.append((src, Receive(Channel(x.peer, owner), CRASH), names[target(k)]))
                elif isinstance(x, Select):
                    trs.append((src, Send(Channel(owner, x.peer), m), names[target(k)]))
                else:
                    trs.append((src, Receive(Channel(x.peer, owner), m), names[target(k)]))
        if isinstance(x, (End, Stop)):
            trs += [(src, Receive(Channel(q, owner), CRASH), src) for q in peers]
    state_type = {names[x]: x for x in order}
    partition = {names[x]: (Part.STOPPED if isinstance(x, (End, Stop)) else Part.LIVE)
                 for x in order}
    if crash_chain:
        chain = _chain_states(peers, literal_chain)
        for x in order:
            if not isinstance(x, (End, Stop)):
                trs.append((names[x], crash_action(owner), chain[0] if chain else "stop"))
        if literal_chain:
            for j in range(len(peers) - 1):
                trs.append((chain[j], Send(Channel(owner, peers[j]), CRASH), chain[j + 1]))
            trs.append((chain[-1], crash_action(owner), "stop"))
        else:
            for j, q in enumerate(peers):
                dst = chain[j + 1] if j + 1 < len(chain) else "stop"
                trs.append((chain[j], Send(Channel(owner, q), CRASH), dst))
        for c in chain:
            state_type[c] = None
            partition[c] = Part.BROADCASTING
    states = frozenset(state_type)
    aut = FifoAutomaton(owner, states, tuple(dict.fromkeys(trs)), names[init])
    return Translation(aut, state_type, partition)


def _chain_states(peers: Sequence[str], literal: bool) -> list[str]:
    if literal:
        return ["q_sink"] + [f"q_snd_{r}" for r in peers[:-1]]
    if not peers:
        return []
    return ["q_sink"] + [f"q_snd_{r}" for r in peers[:-1]]


def translate(t0: LocalType, owner: str, procs: Iterable[str], reliable: Iterable[str] = (),
              **kw) -> FifoAutomaton:
    return translate_full(t0, owner, procs, reliable, **kw).automaton


def compose_types(types: Mapping[str, LocalType], reliable: Iterable[str] = (),
                  name: str = "types", **kw) -> System:
    """Translate every role and assemble a system annotated with its crash partition."""
    procs = sorted(types)
    rel = frozenset(reliable)
    errs = [f"reliable process {r} has no type" for r in sorted(rel - set(procs))]
    for p, t in types.items():
        for q in sorted(peers_of(t) - set(procs)):
            errs.append(f"peer mismatch: type of {p} references {q}")
    if errs:
        raise ValidationError(errs)
    automata = {}
    annotations = {}
    for p in procs:
        tr = translate_full(types[p], p, procs, rel, **kw)
        automata[p] = tr.automaton
        annotations[p] = {q: part.value for q, part in tr.partition.items()}
    return System(automata, name, rel, annotations)


# -- bounded trace equivalence -------------------------------------------

@dataclass
class TraceEquivalence:
    equivalent: bool
    trace: list[Action] | None = None
    side: str | None = None  # which side can perform the trace

    def __bool__(self) -> bool:
        return self.equivalent


def bounded_trace_equiv(t0: LocalType, owner: str, procs: Iterable[str],
                        reliable: Iterable[str] = (), depth: int = 8,
                        automaton: FifoAutomaton | None = None,
                        unconditional_crash: bool = False) -> TraceEquivalence:
    """Compare action traces of the type and of its automaton up to ``depth``."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    procs = sorted(set(procs))
    aut = automaton or translate(t0, owner, procs, reliable,
                                 unconditional_crash=unconditional_crash)

    def type_next(states):
        out: dict = {}
        for t in states:
            for a, n in local_steps(t, owner, procs, reliable, unconditional_crash):
                out.setdefault(a, set()).add(n)
        return out

    def aut_next(states):
        out: dict = {}
        for q in states:
            for a, d in aut.outgoing(q):
                out.setdefault(a, set()).add(d)
        return out

    layer = [((), frozenset([t0]), frozenset([aut.initial]))]
    seen = set()
    for _ in range(depth):
        nxt = []
        for trace, ts, qs in layer:
            tn, an = type_next(ts), aut_next(qs)
            for a in sorted(set(tn) | set(an), key=str):
                if a not in an:
                    return TraceEquivalence(False, list(trace) + [a], "type")
                if a not in tn:
                    return TraceEquivalence(False, list(trace) + [a], "automaton")
                key = (frozenset(tn[a]), frozenset(an[a]))
                if key in seen:
                    continue
                seen.add(key)
                nxt.append((trace + (a,), key[0], key[1]))
        layer = nxt
    return TraceEquivalence(True)


# -- structure -------------------------------------------------------------

def structural_check(a: FifoAutomaton) -> list[str]:
    """Determinism, directedness and absence of mixed states (sinks and
    crash-absorbing states exempt)."""
    from .model import StateKind, classify_state

    errs = [f"nondeterministic at {q}" for q in a.nondeterministic_states()]
    for q in sorted(a.states):
        out = a.outgoing(q)
        if out and all(isinstance(x, Receive) and x.message.is_crash and d == q for x, d in out):
            continue
        c = classify_state(a, q)
        if c.sink:
            continue
        if c.kind is StateKind.MIXED:
            errs.append(f"mixed state {q}")
        elif not c.directed:
            errs.append(f"undirected state {q}")
    return errs


# -- files -----------------------------------------------------------------

@dataclass
class TypeFile:
    types: dict
    reliable: frozenset


def parse_types(text: str) -> TypeFile:
    """Role blocks ``NAME: type`` (types may span lines) and ``reliable: A, B``."""
    blocks: dict[str, list[str]] = {}
    reliable: set[str] = set()
    cur = None
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        m = re.match(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*:(.*)$", line)
        if m and m.group(1) == "reliable":
            reliable.update(x for x in re.split(r"[,\s]+", m.group(2)) if x)
            cur = None
            continue
        if m:
            cur = m.group(1)
            if cur in blocks:
                raise TypeSyntaxError(f"role {cur} defined twice")
            blocks[cur] = [m.group(2)]
        elif cur is None:
            raise TypeSyntaxError(f"text outside a role block: {line.strip()!r}")
        else:
            blocks[cur].append(line)
    types = {}
    for role, parts in blocks.items():
        try:
            types[role] = parse_type(" ".join(parts))
        except TypeSyntaxError as exc:
            raise TypeSyntaxError(f"role {role}: {exc}") from None
    return TypeFile(types, frozenset(reliable))


def dump_types(types: Mapping[str, LocalType], reliable: Iterable[str] = ()) -> str:
    lines = []
    rel = sorted(reliable)
    if rel:
        lines.append("reliable: " + ", ".join(rel))
    lines += [f"{p}: {format_type(t)}" for p, t in sorted(types.items())]
    return "\n".join(lines) + "\n"


