"""Processes, channels, actions, FIFO automata and systems."""

from __future__ import annotations

import itertools
import re
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

CRASH_LABEL = "⚡"
CRASH_TAG = "crash"

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.']*$")


class ResourceLimitError(RuntimeError):
    """Raised when an exploration exceeds a configured cap."""

    def __init__(self, what: str, cap: int, k: int | None = None):
        self.what = what
        self.cap = cap
        self.k = k
        where = f" at k={k}" if k is not None else ""
        super().__init__(f"{what} exceeded cap {cap}{where}")


class ValidationError(ValueError):
    """A system description violated one or more invariants."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class Channel(NamedTuple):
    sender: str
    receiver: str

    def __str__(self) -> str:
        return f"{self.sender}>{self.receiver}"


@dataclass(frozen=True)
class Message:
    label: str
    sort: str | None = None

    def __lt__(self, other: "Message") -> bool:
        return (self.label, self.sort or "") < (other.label, other.sort or "")

    def __str__(self) -> str:
        label = "CRASH" if self.label == CRASH_LABEL else self.label
        return label if self.sort is None else f"{label}/{self.sort}"

    @property
    def is_crash(self) -> bool:
        return self.label == CRASH_LABEL


CRASH = Message(CRASH_LABEL)


@dataclass(frozen=True, order=True)
class Send:
    channel: Channel
    message: Message

    @property
    def process(self) -> str:
        return self.channel.sender

    @property
    def peer(self) -> str:
        return self.channel.receiver

    def __str__(self) -> str:
        return f"{self.channel}!{self.message}"


@dataclass(frozen=True, order=True)
class Receive:
    channel: Channel
    message: Message

    @property
    def process(self) -> str:
        return self.channel.receiver

    @property
    def peer(self) -> str:
        return self.channel.sender

    def __str__(self) -> str:
        return f"{self.channel}?{self.message}"


@dataclass(frozen=True, order=True)
class Internal:
    owner: str
    tag: str

    @property
    def process(self) -> str:
        return self.owner

    @property
    def channel(self) -> None:
        return None

    def __str__(self) -> str:
        return f"tau {self.tag}@{self.owner}"


Action = Send | Receive | Internal


def crash_action(p: str) -> Internal:
    return Internal(p, CRASH_TAG)


def send(p: str, q: str, label: str, sort: str | None = None) -> Send:
    return Send(Channel(p, q), Message(label, sort))


def receive(p: str, q: str, label: str, sort: str | None = None) -> Receive:
    """Receive by ``q`` of a message sent by ``p``."""
    return Receive(Channel(p, q), Message(label, sort))


def parse_message(text: str) -> Message:
    text = text.strip()
    label, _, sort = text.partition("/")
    label = label.strip()
    if label == "CRASH":
        label = CRASH_LABEL
    return Message(label, sort.strip() or None)


_LABEL = re.compile(r"^\s*([^\s>!?]+)\s*>\s*([^\s>!?]+)\s*([!?])\s*(\S+)\s*$")
_TAU = re.compile(r"^\s*tau\s+([^\s@]+)\s*(?:@\s*(\S+))?\s*$")


def parse_action(text: str, owner: str | None = None) -> Action:
    """Parse ``p>q!m``, ``p>q?m`` or ``tau tag`` (``tau tag@p`` outside a process block)."""
    m = _TAU.match(text)
    if m:
        proc = m.group(2) or owner
        if proc is None:
            raise ValueError(f"internal action {text!r} needs an owner (tau tag@process)")
        return Internal(proc, m.group(1))
    m = _LABEL.match(text)
    if not m:
        raise ValueError(f"malformed action label {text!r}")
    p, q, kind, msg = m.groups()
    chan = Channel(p, q)
    message = parse_message(msg)
    return Send(chan, message) if kind == "!" else Receive(chan, message)


def format_action(a: Action, with_owner: bool = False) -> str:
    if isinstance(a, Internal):
        return f"tau {a.tag}@{a.owner}" if with_owner else f"tau {a.tag}"
    return str(a)


class StateKind(Enum):
    SENDING = "sending"
    RECEIVING = "receiving"
    MIXED = "mixed"


@dataclass(frozen=True)
class StateClass:
    kind: StateKind
    directed: bool
    sink: bool = False


Transition = tuple[str, Action, str]


@dataclass(frozen=True)
class FifoAutomaton:
    owner: str
    states: frozenset[str]
    transitions: tuple[Transition, ...]
    initial: str
    _out: Mapping[str, tuple[tuple[Action, str], ...]] = field(
        default=None, repr=False, compare=False, hash=False)

    def __post_init__(self):
        out: dict[str, list] = {q: [] for q in self.states}
        for src, a, dst in self.transitions:
            out.setdefault(src, []).append((a, dst))
        object.__setattr__(self, "_out", {q: tuple(v) for q, v in out.items()})

    def outgoing(self, q: str) -> tuple[tuple[Action, str], ...]:
        if q not in self.states:
            raise KeyError(f"unknown state {q!r} of {self.owner}")
        return self._out.get(q, ())

    @property
    def actions(self) -> frozenset[Action]:
        return frozenset(a for _, a, _ in self.transitions)

    def is_deterministic(self) -> bool:
        return not self.nondeterministic_states()

    def nondeterministic_states(self) -> list[str]:
        bad = []
        for q in sorted(self.states):
            labels = [a for a, _ in self.outgoing(q)]
            if len(labels) != len(set(labels)):
                bad.append(q)
        return bad

    def with_transitions(self, transitions: Iterable[Transition],
                         extra_states: Iterable[str] = ()) -> "FifoAutomaton":
        trs = tuple(dict.fromkeys(transitions))
        states = set(self.states) | set(extra_states)
        for s, _, d in trs:
            states.update((s, d))
        return FifoAutomaton(self.owner, frozenset(states), trs, self.initial)


@dataclass(frozen=True)
class System:
    automata: Mapping[str, FifoAutomaton]
    name: str = "system"
    reliable: frozenset[str] | None = None
    annotations: Mapping[str, Mapping[str, str]] | None = None

    @property
    def processes(self) -> tuple[str, ...]:
        return tuple(sorted(self.automata))

    @property
    def channels(self) -> tuple[Channel, ...]:
        ps = self.processes
        return tuple(Channel(p, q) for p in ps for q in ps if p != q)

    @property
    def actions(self) -> frozenset[Action]:
        return frozenset().union(*(a.actions for a in self.automata.values())) \
            if self.automata else frozenset()

    @property
    def messages(self) -> tuple[Message, ...]:
        msgs = {a.message for a in self.actions if not isinstance(a, Internal)}
        return tuple(sorted(msgs))

    def __getitem__(self, p: str) -> FifoAutomaton:
        return self.automata[p]

    def replace(self, **automata: FifoAutomaton) -> "System":
        new = dict(self.automata)
        new.update(automata)
        return System(new, self.name, self.reliable, self.annotations)

    def __eq__(self, other) -> bool:
        if not isinstance(other, System):
            return NotImplemented
        return (self.name == other.name and self.reliable == other.reliable
                and _canon(self) == _canon(other))

    def __hash__(self) -> int:
        return hash((self.name, _canon(self)))


def _canon(s: System):
    return tuple(
        (p, a.initial, tuple(sorted(a.states)),
         tuple(sorted((x, str(act), type(act).__name__, y) for x, act, y in a.transitions)))
        for p, a in sorted(s.automata.items()))


@dataclass(frozen=True)
class Configuration:
    """Control vector plus channel contents, both ordered like the system."""

    processes: tuple[str, ...]
    control: tuple[str, ...]
    channels: tuple[Channel, ...]
    buffers: tuple[tuple[Message, ...], ...]

    def state(self, p: str) -> str:
        return self.control[self.processes.index(p)]

    def buffer(self, c: Channel) -> tuple[Message, ...]:
        return self.buffers[self.channels.index(Channel(*c))]

    @property
    def global_state(self) -> dict[str, str]:
        return dict(zip(self.processes, self.control))

    @property
    def channel_contents(self) -> dict[Channel, tuple[Message, ...]]:
        return dict(zip(self.channels, self.buffers))

    def to_json(self) -> dict:
        return {
            "states": self.global_state,
            "channels": {str(c): [str(m) for m in w]
                         for c, w in zip(self.channels, self.buffers) if w},
        }

    def __str__(self) -> str:
        ctl = ", ".join(f"{p}:{q}" for p, q in zip(self.processes, self.control))
        bufs = ", ".join(f"{c}=[{' '.join(map(str, w))}]"
                         for c, w in zip(self.channels, self.buffers) if w)
        return f"({ctl} | {bufs})"


def initial_configuration(s: System) -> Configuration:
    ps = s.processes
    chans = s.channels
    return Configuration(ps, tuple(s[p].initial for p in ps), chans, tuple(() for _ in chans))


# -- validation -----------------------------------------------------------

def validate_system(raw: Mapping) -> System:
    """Build a System from a raw description, collecting every violation.

    ``raw`` has keys ``name``, ``processes`` (a list of dicts with ``name``,
    ``initial``, optional ``states`` and ``transitions`` as (src, label, dst)
    triples whose label is a string or an Action), and optionally
    ``reliable`` and ``annotations``.
    """
    errors: list[str] = []
    procs = raw.get("processes", [])
    names = [p.get("name") for p in procs]
    for n in names:
        if not n or not _NAME.match(str(n)):
            errors.append(f"invalid process name {n!r}")
    dup = sorted({n for n in names if names.count(n) > 1})
    for n in dup:
        errors.append(f"duplicate process {n!r}")
    known = set(names)
    automata: dict[str, FifoAutomaton] = {}
    for p in procs:
        owner = p.get("name")
        declared = list(p.get("states") or [])
        for q in sorted({q for q in declared if declared.count(q) > 1}):
            errors.append(f"duplicate state id {q!r} in {owner}")
        initial = p.get("initial")
        if initial is None:
            errors.append(f"process {owner}: missing initial state")
        states = set(declared)
        if initial is not None:
            states.add(initial)
        trs = []
        for src, label, dst in p.get("transitions", []):
            states.update((src, dst))
            try:
                act = label if not isinstance(label, str) else _parse_user_label(label, owner)
            except ValueError as exc:
                errors.append(f"process {owner}: {exc}")
                continue
            errors.extend(_check_action(act, owner, known))
            trs.append((src, act, dst))
        if owner in automata or initial is None:
            continue
        automata[owner] = FifoAutomaton(owner, frozenset(states), tuple(dict.fromkeys(trs)), initial)
    reliable = raw.get("reliable")
    if reliable is not None:
        for r in reliable:
            if r not in known:
                errors.append(f"reliable process {r!r} is not a process of the system")
        reliable = frozenset(reliable)
    ann = raw.get("annotations")
    if ann:
        for p, tags in ann.items():
            if p not in automata:
                continue
            for q in tags:
                if q not in automata[p].states:
                    errors.append(f"annotation on unknown state {q!r} of {p}")
    if errors:
        raise ValidationError(errors)
    return System(automata, raw.get("name", "system"), reliable,
                  {p: dict(t) for p, t in ann.items()} if ann else None)


def _parse_user_label(label: str, owner: str) -> Action:
    if CRASH_LABEL in label:
        raise ValueError(f"reserved crash symbol {CRASH_LABEL} in label {label!r} (spell it CRASH)")
    return parse_action(label, owner)


def _check_action(a: Action, owner: str, known: set[str]) -> list[str]:
    errs = []
    if isinstance(a, Internal):
        if a.owner != owner:
            errs.append(f"internal action {a} owned by {a.owner}, not {owner}")
        return errs
    c = a.channel
    for end in c:
        if end not in known:
            errs.append(f"unknown process {end!r} in channel {c}")
    if c.sender == c.receiver:
        errs.append(f"sender ≠ receiver violated on channel {c}")
    if a.process != owner:
        kind = "send" if isinstance(a, Send) else "receive"
        errs.append(f"{kind} {a} owned by wrong process {owner}")
    if not a.message.label:
        errs.append(f"empty message label in {a}")
    return errs


def build_system(name: str, spec: Mapping[str, tuple[str, Sequence[tuple[str, str | Action, str]]]],
                 reliable: Iterable[str] | None = None) -> System:
    """Convenience constructor: ``{process: (initial, [(src, label, dst), ...])}``.

    Labels may spell the crash symbol as ``CRASH``.
    """
    raw = {
        "name": name,
        "processes": [{"name": p, "initial": init, "transitions": list(trs)}
                      for p, (init, trs) in spec.items()],
    }
    if reliable is not None:
        raw["reliable"] = list(reliable)
    return validate_system(raw)


# -- structure ------------------------------------------------------------

def classify_state(a: FifoAutomaton, q: str) -> StateClass:
    """Classify ``q`` as sending/receiving/mixed; internal moves are ignored."""
    out = [act for act, _ in a.outgoing(q)]
    comm = [act for act in out if not isinstance(act, Internal)]
    if not out:
        return StateClass(StateKind.MIXED, False, sink=True)
    if not comm:
        return StateClass(StateKind.SENDING, True)
    if all(isinstance(x, Send) for x in comm):
        return StateClass(StateKind.SENDING, len({x.peer for x in comm}) == 1)
    if all(isinstance(x, Receive) for x in comm):
        return StateClass(StateKind.RECEIVING, len({x.peer for x in comm}) == 1)
    return StateClass(StateKind.MIXED, False)


@dataclass
class CsaReport:
    ok: bool
    nondeterministic: list[tuple[str, str]]
    mixed: list[tuple[str, str]]
    sinks: list[tuple[str, str]]

    def __bool__(self) -> bool:
        return self.ok

    def messages(self) -> list[str]:
        return ([f"nondeterministic at {q} ({p})" for p, q in self.nondeterministic]
                + [f"mixed state {q} ({p})" for p, q in self.mixed])


def is_csa(s: System) -> CsaReport:
    nondet, mixed, sinks = [], [], []
    for p in s.processes:
        a = s[p]
        nondet += [(p, q) for q in a.nondeterministic_states()]
        for q in sorted(a.states):
            c = classify_state(a, q)
            if c.sink:
                sinks.append((p, q))
            elif c.kind is StateKind.MIXED:
                mixed.append((p, q))
    return CsaReport(not nondet and not mixed, nondet, mixed, sinks)


def is_directed(s: System) -> bool:
    for p in s.processes:
        for q in s[p].states:
            c = classify_state(s[p], q)
            if not c.sink and c.kind is not StateKind.MIXED and not c.directed:
                return False
    return True


class Product:
    """Lazy asynchronous product of the automata of a system."""

    def __init__(self, s: System):
        self.system = s
        self.processes = s.processes

    @property
    def initial(self) -> tuple[str, ...]:
        return tuple(self.system[p].initial for p in self.processes)

    def successors(self, vector: Sequence[str]) -> Iterator[tuple[Action, tuple[str, ...]]]:
        for i, p in enumerate(self.processes):
            for act, dst in self.system[p].outgoing(vector[i]):
                v = list(vector)
                v[i] = dst
                yield act, tuple(v)

    def state_count(self) -> int:
        n = 1
        for p in self.processes:
            n *= len(self.system[p].states)
        return n

    def materialize(self, cap: int = 10**6, reachable_only: bool = False):
        """Return (states, transitions); raises ResourceLimitError past ``cap``."""
        if reachable_only:
            seen = {self.initial}
            todo = [self.initial]
            trs = []
            while todo:
                v = todo.pop()
                for act, w in self.successors(v):
                    trs.append((v, act, w))
                    if w not in seen:
                        seen.add(w)
                        if len(seen) > cap:
                            raise ResourceLimitError("product states", cap)
                        todo.append(w)
            return seen, trs
        if self.state_count() > cap:
            raise ResourceLimitError("product states", cap)
        spaces = [sorted(self.system[p].states) for p in self.processes]
        states = set(itertools.product(*spaces))
        trs = [(v, act, w) for v in states for act, w in self.successors(v)]
        return states, trs


def product(s: System) -> Product:
    return Product(s)


def incoming_channels(s: System, p: str) -> list[Channel]:
    return [c for c in s.channels if c.receiver == p]


def outgoing_channels(s: System, p: str) -> list[Channel]:
    return [c for c in s.channels if c.sender == p]


def transitions_by_source(a: FifoAutomaton) -> dict[str, list[tuple[Action, str]]]:
    d = defaultdict(list)
    for x, act, y in a.transitions:
        d[x].append((act, y))
    return d
