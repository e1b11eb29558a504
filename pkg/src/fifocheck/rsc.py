"""Realisability with synchronous communication under interference (i-RSC).

Executions are sequences of actions indexed from 1.  A communication set is
a frozenset of interactions, each interaction a frozenset of indices: a
matched send/receive pair, an unmatched send, or an internal action.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx

from .interference import Interference, as_mode, enumerate_executions
from .model import (Action, Channel, Internal, Message, Receive, ResourceLimitError, Send,
                    System)
from .nfa import Nfa, shortest_accepted

Interaction = frozenset
CommunicationSet = frozenset


class UncoverableReceive(ValueError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"uncoverable receive at index {index}")


@dataclass(frozen=True)
class MatchingPair:
    send: int
    receive: int
    channel: Channel
    sent: Message
    received: Message
    send_ordinal: int
    receive_ordinal: int

    @property
    def perfect(self) -> bool:
        return self.sent == self.received and self.send_ordinal == self.receive_ordinal

    @property
    def indices(self) -> frozenset[int]:
        return frozenset((self.send, self.receive))


def _ordinals(e: Sequence[Action]) -> list[int]:
    """k such that a_j is the k-th send (or receive) on its channel."""
    counts: dict = {}
    out = []
    for a in e:
        if isinstance(a, Internal):
            out.append(0)
            continue
        key = (type(a), a.channel)
        counts[key] = counts.get(key, 0) + 1
        out.append(counts[key])
    return out


def admissible(mode: Interference, sent: Message, received: Message, k_send: int,
               k_recv: int) -> bool:
    """Whether one pair may be matched under ``mode``."""
    if sent != received and Interference.CORRUPT not in mode:
        return False
    if Interference.OOO in mode:
        return True
    if Interference.LOSSY in mode:
        return k_recv <= k_send
    return k_recv == k_send


def matching_pairs(e: Sequence[Action], mode=Interference.NONE,
                   permissive: bool = False) -> set[MatchingPair]:
    """All i-matching pairs of ``e`` admissible under ``mode`` (or all of them)."""
    mode = as_mode(mode)
    ords = _ordinals(e)
    out = set()
    for j, a in enumerate(e, 1):
        if not isinstance(a, Send):
            continue
        for j2 in range(j + 1, len(e) + 1):
            b = e[j2 - 1]
            if isinstance(b, Receive) and b.channel == a.channel:
                mp = MatchingPair(j, j2, a.channel, a.message, b.message, ords[j - 1], ords[j2 - 1])
                if permissive or admissible(mode, mp.sent, mp.received, mp.send_ordinal,
                                            mp.receive_ordinal):
                    out.add(mp)
    return out


def valid_communications(e: Sequence[Action], mode=Interference.NONE,
                         permissive: bool = False, limit: int = 1_000_000) -> set[CommunicationSet]:
    """Every partition of the indices of ``e`` into admissible interactions.

    Without reordering, pairs on one channel must also be non-crossing: a
    later send cannot be received before an earlier matched one.
    """
    mode = as_mode(mode)
    pairs = matching_pairs(e, mode, permissive)
    by_recv: dict[int, list[MatchingPair]] = {}
    for mp in pairs:
        by_recv.setdefault(mp.receive, []).append(mp)
    receives = [j for j, a in enumerate(e, 1) if isinstance(a, Receive)]
    for j in receives:
        if j not in by_recv:
            raise UncoverableReceive(j)
    ordered = not permissive and Interference.OOO not in mode
    results: set = set()

    def rec(i: int, used: set[int], chosen: list[MatchingPair]):
        if len(results) > limit:
            raise ResourceLimitError("valid communications", limit)
        if i == len(receives):
            inter = [frozenset((mp.send, mp.receive)) for mp in chosen]
            inter += [frozenset((j,)) for j in range(1, len(e) + 1)
                      if j not in used and not isinstance(e[j - 1], Receive)]
            results.add(frozenset(inter))
            return
        for mp in sorted(by_recv[receives[i]], key=lambda m: m.send):
            if mp.send in used:
                continue
            if ordered and any(o.channel == mp.channel and o.send > mp.send for o in chosen):
                continue
            used.add(mp.send)
            used.add(mp.receive)
            chosen.append(mp)
            rec(i + 1, used, chosen)
            chosen.pop()
            used.discard(mp.send)
            used.discard(mp.receive)

    rec(0, set(), [])
    return results


def conflict_graph(e: Sequence[Action], comm: Iterable[Iterable[int]]) -> nx.DiGraph:
    """Edges X1→X2 when some j1∈X1 precedes some j2∈X2 on the same process."""
    comm = [frozenset(x) for x in comm]
    owner = {}
    for x in comm:
        for j in x:
            owner[j] = x
    g = nx.DiGraph()
    g.add_nodes_from(comm)
    n = len(e)
    for j1 in range(1, n + 1):
        for j2 in range(j1 + 1, n + 1):
            x1, x2 = owner[j1], owner[j2]
            if x1 != x2 and e[j1 - 1].process == e[j2 - 1].process:
                g.add_edge(x1, x2)
    return g


def is_irsc_equivalent(e: Sequence[Action], comm) -> bool:
    return nx.is_directed_acyclic_graph(conflict_graph(e, comm))


def is_irsc_execution(e: Sequence[Action], comm) -> bool:
    return all(max(x) == min(x) + 1 for x in comm if len(x) == 2)


def shortest_cycle(g: nx.DiGraph) -> list | None:
    best = None
    for v in sorted(g.nodes, key=lambda x: sorted(x)):
        for w in g.successors(v):
            if w == v:
                return [v]
            try:
                path = nx.shortest_path(g, w, v)
            except nx.NetworkXNoPath:
                continue
            if best is None or len(path) < len(best):
                best = path
    return best


def format_comm(comm) -> list[list[int]]:
    return sorted(sorted(x) for x in comm)


# -- composite alphabet ---------------------------------------------------

@dataclass(frozen=True, order=True)
class Pair:
    """A send immediately followed by its (possibly corrupted) reception."""

    channel: Channel
    sent: Message
    received: Message

    @property
    def processes(self) -> frozenset[str]:
        return frozenset(self.channel)

    def __str__(self) -> str:
        if self.sent == self.received:
            return f"{self.channel}!?{self.sent}"
        return f"{self.channel}!?({self.sent}->{self.received})"


def symbol_processes(sym) -> frozenset[str]:
    if isinstance(sym, Pair):
        return sym.processes
    return frozenset((sym.process,))


def symbol_channel(sym) -> Channel | None:
    return sym.channel


def alphabet_nr(s: System, mode) -> set:
    mode = as_mode(mode)
    acts = s.actions
    sent: dict = {}
    recv: dict = {}
    out: set = set()
    for a in acts:
        if isinstance(a, Send):
            sent.setdefault(a.channel, set()).add(a.message)
            out.add(a)
        elif isinstance(a, Receive):
            recv.setdefault(a.channel, set()).add(a.message)
        else:
            out.add(a)
    for c, ms in sent.items():
        for m in ms:
            for m2 in recv.get(c, ()):
                if m == m2 or Interference.CORRUPT in mode:
                    out.add(Pair(c, m, m2))
    return out


def alphabet_recv(s: System) -> set:
    return {a for a in s.actions if isinstance(a, Receive)}


# -- borderline-violation automaton ---------------------------------------

BV_INIT = "q0"
BV_FINAL = "qf"


def _element_processes(a: Action) -> frozenset[str]:
    # a receive stored in a state stands for the pair it closes
    if isinstance(a, Receive):
        return frozenset(a.channel)
    return frozenset((a.process,))


def _encode(sym) -> Action:
    if isinstance(sym, Pair):
        return Receive(sym.channel, sym.received)
    return sym


class BorderlineAutomaton:
    """Lazy form of the borderline-violation automaton."""

    def __init__(self, s: System, mode):
        self.mode = as_mode(mode)
        self.system = s
        self.ooo = Interference.OOO in self.mode

    def step(self, state, sym) -> list:
        out = []
        if state == BV_FINAL:
            return out
        if isinstance(sym, Receive):
            if state != BV_INIT and state[2] == 1 and sym.channel == state[0] \
                    and sym.process in _element_processes(state[1]):
                out.append(BV_FINAL)
            return out
        if state == BV_INIT:
            out.append(BV_INIT)
            if isinstance(sym, Send):
                out.append((sym.channel, sym, 0))
            return out
        c, a, phase = state
        ch = symbol_channel(sym)
        shares = bool(_element_processes(a) & symbol_processes(sym))
        if phase == 0:
            if not self.ooo and ch != c:
                out.append(state)
            if shares:
                out.append((c, _encode(sym), 1))
        else:
            if ch != c:
                out.append(state)
            if shares:
                out.append((c, _encode(sym), 1))
        return out


def build_a_bv(s: System, mode=Interference.NONE) -> Nfa:
    mode = as_mode(mode)
    bv = BorderlineAutomaton(s, mode)
    acts = sorted(s.actions, key=str)
    sigma = alphabet_nr(s, mode) | alphabet_recv(s)
    states = {BV_INIT, BV_FINAL} | {(c, a, ph) for c in s.channels for a in acts for ph in (0, 1)}
    nfa = Nfa(states, sigma, {}, BV_INIT, {BV_FINAL})
    for q in states:
        for sym in sigma:
            for d in bv.step(q, sym):
                nfa.add(q, sym, d)
    return nfa


# -- i-RSC prefix automaton ----------------------------------------------

RSC_FINAL = "qf"


class RscAutomaton:
    """Lazy automaton over control vectors, a guessed pending send and the set
    of channels holding unmatched sends."""

    def __init__(self, s: System, mode):
        self.system = s
        self.mode = as_mode(mode)
        self.procs = s.processes
        self.lossy = Interference.LOSSY in self.mode
        self.corrupt = Interference.CORRUPT in self.mode
        self.ooo = Interference.OOO in self.mode
        # buffer tracking only matters when neither loss nor reordering can
        # make room for a later pair
        self.track = not (self.lossy or self.ooo)

    @property
    def initial(self):
        return (tuple(self.system[p].initial for p in self.procs), None, frozenset())

    def successors(self, state):
        if state == RSC_FINAL:
            return
        ctrl, chi, pending = state
        for i, p in enumerate(self.procs):
            a = self.system[p]
            for act, dst in a.outgoing(ctrl[i]):
                nctrl = ctrl[:i] + (dst,) + ctrl[i + 1:]
                if isinstance(act, Internal):
                    yield act, (nctrl, chi, pending)
                elif isinstance(act, Send):
                    c = act.channel
                    npend = pending | {c} if self.track else pending
                    yield act, (nctrl, chi, npend)
                    if chi is None and (not self.track or c not in pending):
                        yield act, (nctrl, (c, act.message), npend)
                    yield from self._pairs(i, act, nctrl, chi, pending)
                else:
                    if chi is not None and chi[0] == act.channel and \
                            (self.corrupt or chi[1] == act.message):
                        yield act, RSC_FINAL

    def _pairs(self, i, snd: Send, nctrl, chi, pending):
        c = snd.channel
        if self.track and c in pending:
            return
        if chi is not None and chi[0] == c and not self.ooo:
            return
        j = self.procs.index(c.receiver)
        for act, dst in self.system[c.receiver].outgoing(nctrl[j]):
            if isinstance(act, Receive) and act.channel == c and \
                    (self.corrupt or act.message == snd.message):
                ctrl2 = nctrl[:j] + (dst,) + nctrl[j + 1:]
                yield Pair(c, snd.message, act.message), (ctrl2, chi, pending)


def build_a_rsc(s: System, mode=Interference.NONE, cap: int = 1_000_000) -> Nfa:
    """Materialise the reachable part of the i-RSC prefix automaton."""
    r = RscAutomaton(s, mode)
    nfa = Nfa({r.initial}, alphabet_nr(s, mode) | alphabet_recv(s), {}, r.initial, {RSC_FINAL})
    todo = [r.initial]
    while todo:
        q = todo.pop()
        for sym, d in r.successors(q):
            nfa.add(q, sym, d)
            if d not in nfa.states:
                nfa.states.add(d)
                if len(nfa.states) > cap:
                    raise ResourceLimitError("A_rsc states", cap)
                todo.append(d)
    return nfa


# -- decision procedure ---------------------------------------------------

@dataclass
class RscResult:
    holds: bool
    mode: Interference
    execution: list[Action] = field(default_factory=list)
    communication: frozenset | None = None
    cycle: list | None = None
    word: list | None = None
    bounded: int | None = None

    def __bool__(self) -> bool:
        return self.holds

    def to_json(self) -> dict:
        out = {"property": "i-rsc", "mode": self.mode.label, "result": self.holds}
        if self.bounded is not None:
            out["bounded_length"] = self.bounded
        if not self.holds:
            out["counterexample"] = {
                "trace": [str(a) for a in self.execution],
                "communication": format_comm(self.communication or ()),
                "cycle": [sorted(x) for x in (self.cycle or [])],
            }
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False)


def check_irsc(s: System, mode=Interference.NONE, *, cap: int = 5_000_000,
               any_communication: bool = False, max_length: int = 8) -> RscResult:
    """Decide whether ``s`` is i-RSC; on failure return a shortest borderline violation.

    With ``any_communication`` the weaker reading (some valid communication
    per execution is reorderable) is checked by bounded enumeration of
    executions up to ``max_length``.
    """
    mode = as_mode(mode)
    if any_communication:
        return _check_any(s, mode, max_length)
    rsc = RscAutomaton(s, mode)
    bv = BorderlineAutomaton(s, mode)

    def succ(state):
        rq, bq = state
        for sym, rq2 in rsc.successors(rq):
            for bq2 in bv.step(bq, sym):
                yield sym, (rq2, bq2)

    start = (rsc.initial, BV_INIT)
    word, run = shortest_accepted(start, succ,
                                  lambda st: st[0] == RSC_FINAL and st[1] == BV_FINAL, cap)
    if word is None:
        return RscResult(True, mode)
    # the guessed send is the lone send at which the guess became set
    guess = None
    for pos in range(len(word)):
        before = run[pos][0]
        after = run[pos + 1][0]
        if after != RSC_FINAL and before[1] is None and after[1] is not None:
            guess = pos
    e, comm = decode(word, guess)
    g = conflict_graph(e, comm)
    return RscResult(False, mode, e, comm, shortest_cycle(g), word)


def decode(word: Sequence, guess: int | None) -> tuple[list[Action], frozenset]:
    """Expand composite symbols into an execution and its communication set."""
    e: list[Action] = []
    inter = []
    guess_index = None
    for pos, sym in enumerate(word):
        if isinstance(sym, Pair):
            e += [Send(sym.channel, sym.sent), Receive(sym.channel, sym.received)]
            inter.append(frozenset((len(e) - 1, len(e))))
        elif isinstance(sym, Receive):
            e.append(sym)
            if guess_index is None:
                raise ValueError("final reception without a guessed send")
            inter = [x for x in inter if x != frozenset((guess_index,))]
            inter.append(frozenset((guess_index, len(e))))
        else:
            e.append(sym)
            inter.append(frozenset((len(e),)))
            if pos == guess:
                guess_index = len(e)
    return e, frozenset(inter)


def _check_any(s: System, mode: Interference, max_length: int) -> RscResult:
    for e in enumerate_executions(s, max_length, mode):
        try:
            comms = valid_communications(e, mode)
        except UncoverableReceive:
            continue
        if comms and not any(is_irsc_equivalent(e, c) for c in comms):
            c = min(comms, key=format_comm)
            return RscResult(False, mode, list(e), c,
                             shortest_cycle(conflict_graph(e, c)), None, max_length)
    return RscResult(True, mode, bounded=max_length)


def find_violation_bruteforce(s: System, mode, max_length: int = 8):
    """Definitional search: an execution and communication with a cyclic graph."""
    mode = as_mode(mode)
    for e in enumerate_executions(s, max_length, mode):
        try:
            comms = valid_communications(e, mode)
        except UncoverableReceive:
            continue
        for c in sorted(comms, key=format_comm):
            if not is_irsc_equivalent(e, c):
                return list(e), c
    return None


def interactions_of(e: Sequence[Action], comm) -> list[list[Action]]:
    return [[e[j - 1] for j in sorted(x)] for x in sorted(comm, key=min)]


__all__ = [
    "MatchingPair", "Pair", "UncoverableReceive", "matching_pairs", "valid_communications",
    "conflict_graph", "is_irsc_equivalent", "is_irsc_execution", "build_a_bv", "build_a_rsc",
    "check_irsc", "RscResult", "alphabet_nr", "alphabet_recv", "decode",
    "find_violation_bruteforce", "format_comm", "shortest_cycle", "admissible",
]
