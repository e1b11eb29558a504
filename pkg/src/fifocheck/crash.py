"""Crash-stop failures: crash-handling validation, broadcast expansion, augmentation."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .model import (CRASH, CRASH_TAG, Action, Channel, FifoAutomaton, Internal, Receive, Send,
                    System, ValidationError, crash_action)


class Part(Enum):
    LIVE = "live"
    STOPPED = "stop"
    BROADCASTING = "bcast"


def is_crash_action(a: Action) -> bool:
    if isinstance(a, Internal):
        return True
    return a.message.is_crash


def is_crash_internal(a: Action) -> bool:
    return isinstance(a, Internal) and a.tag == CRASH_TAG


def _unreliable(s: System, r: Iterable[str] | None) -> set[str]:
    rel = set(r if r is not None else (s.reliable or ()))
    unknown = rel - set(s.processes)
    if unknown:
        raise ValidationError([f"reliable process {p!r} is not a process of the system"
                               for p in sorted(unknown)])
    return set(s.processes) - rel


def _absorbing(a: FifoAutomaton, q: str) -> bool:
    """No outgoing transitions apart from crash-symbol receive self-loops."""
    return all(isinstance(x, Receive) and x.message.is_crash and d == q for x, d in a.outgoing(q))


def infer_partition(s: System, r: Iterable[str] | None = None) -> dict[str, dict[str, Part]]:
    """Live/Stopped/Broadcasting per state; file annotations take precedence."""
    unrel = _unreliable(s, r)
    out = {}
    for p in s.processes:
        a = s[p]
        chain_targets = {d for x, act, d in a.transitions
                         if is_crash_internal(act) or (isinstance(act, Send) and act.message.is_crash)}
        parts = {}
        for q in a.states:
            sends_crash = any(isinstance(x, Send) and x.message.is_crash for x, _ in a.outgoing(q))
            loops = any(isinstance(x, Receive) and x.message.is_crash and d == q
                        for x, d in a.outgoing(q))
            if q in chain_targets and sends_crash:
                parts[q] = Part.BROADCASTING
            elif _absorbing(a, q) and (q in chain_targets or p in unrel or loops):
                parts[q] = Part.STOPPED
            else:
                parts[q] = Part.LIVE
        tags = (s.annotations or {}).get(p, {})
        for q, t in tags.items():
            parts[q] = Part(t)
        out[p] = parts
    return out


@dataclass
class Violation:
    condition: str
    process: str
    state: str
    detail: str

    def __str__(self) -> str:
        return f"{self.condition} violated at {self.process}.{self.state}: {self.detail}"


@dataclass
class CrashReport:
    ok: bool
    violations: list[Violation] = field(default_factory=list)
    partition: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok

    @property
    def first(self) -> Violation | None:
        return self.violations[0] if self.violations else None

    def conditions(self) -> set[str]:
        return {v.condition for v in self.violations}

    def to_json(self) -> dict:
        return {"property": "crash-handling", "result": self.ok,
                "violations": [{"condition": v.condition, "process": v.process,
                                "state": v.state, "detail": v.detail} for v in self.violations]}


def is_crash_handling(s: System, r: Iterable[str] | None = None,
                      partition: Mapping[str, Mapping[str, Part]] | None = None) -> CrashReport:
    """Check the crash-handling (CI), crash-broadcast (CP) and redundancy (CR) conditions.

    ``r`` defaults to the system's ``reliable`` directive.  Crash-handling is
    checked syntactically on every receive transition, without reachability.
    """
    unrel = _unreliable(s, r)
    parts = partition if partition is not None else infer_partition(s, r)
    viol: list[Violation] = []
    for p in s.processes:
        a = s[p]
        part = parts[p]
        peers = [x for x in s.processes if x != p]
        # partition shape of the plain transitions
        for x, act, d in sorted(a.transitions, key=lambda t: (t[0], str(t[1]), t[2])):
            if is_crash_action(act):
                continue
            if part[x] is not Part.LIVE or part[d] is Part.BROADCASTING:
                viol.append(Violation("partition", p, x,
                                      f"plain transition {act} outside live states"))
        for q in sorted(a.states):
            kind = part[q]
            if kind is Part.LIVE:
                for act, _ in a.outgoing(q):
                    if isinstance(act, Receive) and not act.message.is_crash \
                            and act.peer in unrel:
                        viol.extend(_check_ci(a, q, act.peer, part))
                if p in unrel and not _has_broadcast(a, q, peers, part):
                    viol.append(Violation("CP", p, q, "no complete crash broadcast into a stopped state"))
            elif kind is Part.STOPPED:
                for r_ in peers:
                    if r_ in unrel and (Receive(Channel(r_, p), CRASH), q) not in a.outgoing(q):
                        viol.append(Violation("CR", p, q, f"missing {r_}>{p}?CRASH self-loop"))
    viol = list(dict.fromkeys((v.condition, v.process, v.state, v.detail) for v in viol))
    viol = [Violation(*v) for v in viol]
    return CrashReport(not viol, viol, {p: {q: t.value for q, t in d.items()} for p, d in parts.items()})


def _check_ci(a: FifoAutomaton, q: str, r: str, part) -> list[Violation]:
    branches = [d for act, d in a.outgoing(q)
                if isinstance(act, Receive) and act.peer == r and act.message.is_crash]
    if not branches:
        return [Violation("CI", a.owner, q, f"receive from unreliable {r} without a crash branch")]
    out = []
    for d in branches:
        if part[d] is Part.BROADCASTING:
            out.append(Violation("CI", a.owner, q, f"crash branch enters broadcasting state {d}"))
        bad = _reaches_receive_from(a, d, r)
        if bad:
            out.append(Violation("CI", a.owner, q,
                                 f"crash branch for {r} reaches receive {bad} from the crashed process"))
    return out


def _reaches_receive_from(a: FifoAutomaton, q: str, r: str) -> Action | None:
    seen = {q}
    todo = [q]
    while todo:
        x = todo.pop()
        for act, d in a.outgoing(x):
            if isinstance(act, Receive) and act.peer == r and not act.message.is_crash:
                return act
            if d not in seen:
                seen.add(d)
                todo.append(d)
    return None


def _has_broadcast(a: FifoAutomaton, q: str, peers: Sequence[str], part) -> bool:
    n = len(peers)
    for act, b in a.outgoing(q):
        if not is_crash_internal(act):
            continue
        if n == 0:
            if part[b] is Part.STOPPED:
                return True
            continue
        if part[b] is not Part.BROADCASTING:
            continue
        # depth-first over distinct crash-symbol sends
        stack = [(b, frozenset())]
        while stack:
            x, done = stack.pop()
            for act2, y in a.outgoing(x):
                if not (isinstance(act2, Send) and act2.message.is_crash):
                    continue
                if act2.peer in done:
                    continue
                nd = done | {act2.peer}
                if len(nd) == n:
                    if part[y] is Part.STOPPED:
                        return True
                elif part[y] is Part.BROADCASTING:
                    stack.append((y, nd))
    return False


def expand_broadcast(a: FifoAutomaton, q: str, m, peers: Sequence[str], stop: str | None = None,
                     prefix: str | None = None) -> tuple[FifoAutomaton, list, str]:
    """Add ``crash_p`` then one send of ``m`` per peer from ``q`` into ``stop``.

    Returns the new automaton, the added transitions and the stop state.
    """
    p = a.owner
    prefix = prefix or f"{q}~crash"
    stop = stop or f"{prefix}~stop"
    peers = sorted(peers)
    trs = []
    if not peers:
        trs.append((q, crash_action(p), stop))
    else:
        cur = f"{prefix}0"
        trs.append((q, crash_action(p), cur))
        for i, r in enumerate(peers):
            nxt = stop if i == len(peers) - 1 else f"{prefix}{i + 1}"
            trs.append((cur, Send(Channel(p, r), m), nxt))
            cur = nxt
    new = a.with_transitions(list(a.transitions) + trs)
    return new, trs, stop


SINK = "q_sink"


def augment_crash_handling(s: System, r: Iterable[str] | None = None) -> System:
    """Add crash branches, crash broadcasts and a crash-absorbing sink per process.

    The output carries a state partition as annotations, so it validates
    without relying on inference.
    """
    unrel = _unreliable(s, r)
    reliable = frozenset(s.processes) - unrel
    for act in s.actions:
        if not isinstance(act, Internal) and act.message.is_crash:
            raise ValidationError(["reserved crash symbol already used in the input system"])
        if is_crash_internal(act):
            raise ValidationError([f"reserved internal action {act} already used"])
    if not unrel:
        return System(dict(s.automata), s.name, reliable, s.annotations)
    automata = {}
    annotations = {}
    for p in s.processes:
        a = s[p]
        peers = [x for x in s.processes if x != p]
        sink = SINK
        while sink in a.states:
            sink += "'"
        trs = list(a.transitions)
        tags = {q: Part.LIVE.value for q in a.states}
        used_sink = False
        for x, act, _ in a.transitions:
            if isinstance(act, Receive) and act.peer in unrel:
                trs.append((x, Receive(act.channel, CRASH), sink))
                used_sink = True
        if p in unrel:
            for q in sorted(a.states):
                pre = f"{q}~crash"
                while any(st.startswith(pre) for st in a.states):
                    pre += "'"
                _, chain, _ = expand_broadcast(a, q, CRASH, peers, sink, pre)
                trs += chain
                for _, _, d in chain[:-1]:
                    tags[d] = Part.BROADCASTING.value
                used_sink = True
        if used_sink:
            trs += [(sink, Receive(Channel(x, p), CRASH), sink) for x in peers if x in unrel]
            tags[sink] = Part.STOPPED.value
        automata[p] = FifoAutomaton(p, frozenset(set(a.states) | set(tags)),
                                    tuple(dict.fromkeys(trs)), a.initial)
        annotations[p] = tags
    return System(automata, s.name, reliable, annotations)


def crashed_processes(s: System, control: Mapping[str, str], partition=None) -> set[str]:
    parts = partition or infer_partition(s)
    return {p for p, q in control.items() if parts[p][q] is not Part.LIVE}
