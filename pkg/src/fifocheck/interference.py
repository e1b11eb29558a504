"""Channel interference (loss, corruption, reordering) and bounded reachability.

Exploration works on a compiled integer encoding of configurations.  Channel
contents are kept in a canonical form per mode: under corruption any word can
be rewritten into any other word of the same length, so only the length is
kept (wildcard messages); under reordering contents are sorted multisets;
otherwise they are exact sequences.  Loss is modelled by silent steps that
drop one message, so the explored graph has action edges and silent edges and
its node set is exactly the k-reachability set.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Flag, auto
from typing import Iterable, Sequence

from .model import (Action, Channel, Configuration, Internal, Message, Receive,
                    ResourceLimitError, Send, System, initial_configuration)

WILDCARD = Message("*")
DEFAULT_STATE_CAP = 1_000_000


class Interference(Flag):
    NONE = 0
    LOSSY = auto()
    CORRUPT = auto()
    OOO = auto()

    @classmethod
    def parse(cls, text: str | None) -> "Interference":
        """Parse ``none``, ``lossy``, ``corrupt``, ``ooo`` or comma-joined combinations."""
        mode = cls.NONE
        for part in (text or "").replace("+", ",").split(","):
            part = part.strip().lower()
            if part in ("", "none", "perfect", "no-errors"):
                continue
            aliases = {"lossy": cls.LOSSY, "loss": cls.LOSSY, "lossiness": cls.LOSSY,
                       "corrupt": cls.CORRUPT, "corruption": cls.CORRUPT,
                       "ooo": cls.OOO, "out-of-order": cls.OOO, "outoforder": cls.OOO}
            if part not in aliases:
                raise ValueError(f"unknown interference mode {part!r}")
            mode |= aliases[part]
        return mode

    @property
    def label(self) -> str:
        names = [n for n, f in (("lossy", Interference.LOSSY), ("corrupt", Interference.CORRUPT),
                                ("ooo", Interference.OOO)) if f in self]
        return ",".join(names) or "none"


def as_mode(mode) -> Interference:
    if isinstance(mode, Interference):
        return mode
    if mode is None:
        return Interference.NONE
    if isinstance(mode, str):
        return Interference.parse(mode)
    out = Interference.NONE
    for m in mode:
        out |= as_mode(m)
    return out


# -- the preorder on words ------------------------------------------------

def interference_steps(w: tuple, mode: Interference, alphabet: Sequence) -> set[tuple]:
    """Words obtained from ``w`` by one atomic interference event."""
    out = set()
    n = len(w)
    if Interference.LOSSY in mode:
        out.update(w[:i] + w[i + 1:] for i in range(n))
    if Interference.CORRUPT in mode:
        out.update(w[:i] + (b,) + w[i + 1:] for i in range(n) for b in alphabet if b != w[i])
    if Interference.OOO in mode:
        out.update(w[:i] + (w[i + 1], w[i]) + w[i + 2:] for i in range(n - 1) if w[i] != w[i + 1])
    return out


def interference_closure(w: Sequence, mode, alphabet: Iterable | None = None,
                         max_size: int = 100_000) -> set[tuple]:
    """All words ``w'`` with ``w ⪰ w'`` under ``mode``.

    Corrupted letters range over ``alphabet`` (default: the letters of ``w``).
    """
    mode = as_mode(mode)
    w = tuple(w)
    alpha = sorted(set(alphabet) if alphabet is not None else set(w), key=str)
    seen = {w}
    todo = [w]
    while todo:
        u = todo.pop()
        for v in interference_steps(u, mode, alpha):
            if v not in seen:
                seen.add(v)
                if len(seen) > max_size:
                    raise ResourceLimitError("interference closure", max_size)
                todo.append(v)
    return seen


# -- exact one-step semantics on public configurations ---------------------

def successors(s: System, gamma: Configuration, mode=Interference.NONE, k: int | None = None,
               max_size: int = 100_000) -> set[tuple[Action, Configuration]]:
    """Successor configurations with interference applied on every channel.

    This is the literal one-step relation; exploration uses the cheaper
    silent-step encoding in :func:`explore`.
    """
    mode = as_mode(mode)
    alphabet = s.messages
    chans = gamma.channels
    closures = [interference_closure(w, mode, alphabet, max_size) for w in gamma.buffers]
    out = set()
    for i, p in enumerate(gamma.processes):
        for act, dst in s[p].outgoing(gamma.control[i]):
            ctrl = gamma.control[:i] + (dst,) + gamma.control[i + 1:]
            options = list(closures)
            if isinstance(act, Send):
                j = chans.index(act.channel)
                options[j] = interference_closure(gamma.buffers[j] + (act.message,), mode,
                                                  alphabet, max_size)
            elif isinstance(act, Receive):
                j = chans.index(act.channel)
                options[j] = {u[1:] for u in closures[j] if u and u[0] == act.message}
                # u[1:] ⪰ w' is absorbed by transitivity
                options[j] = set().union(*(interference_closure(v, mode, alphabet, max_size)
                                           for v in options[j])) if options[j] else set()
                if not options[j]:
                    continue
            total = 1
            for o in options:
                total *= len(o)
            if total > max_size:
                raise ResourceLimitError("successor set", max_size)
            for bufs in _cartesian(options):
                if k is not None and any(len(b) > k for b in bufs):
                    continue
                out.add((act, Configuration(gamma.processes, ctrl, chans, bufs)))
    return out


def _cartesian(options):
    result = [()]
    for opt in options:
        result = [r + (o,) for r in result for o in sorted(opt, key=lambda x: tuple(map(str, x)))]
    return result


def canonical(gamma: Configuration, mode) -> Configuration:
    """Canonical representative of ``gamma`` under ``mode``."""
    mode = as_mode(mode)
    bufs = []
    for w in gamma.buffers:
        if Interference.CORRUPT in mode:
            w = (WILDCARD,) * len(w)
        elif Interference.OOO in mode:
            w = tuple(sorted(w))
        bufs.append(tuple(w))
    return Configuration(gamma.processes, gamma.control, gamma.channels, tuple(bufs))


# -- compiled exploration -------------------------------------------------

class Compiled:
    """Integer encoding of a system for fast exploration."""

    def __init__(self, s: System, mode=Interference.NONE):
        self.system = s
        self.mode = as_mode(mode)
        self.procs = s.processes
        self.chans = s.channels
        self.chan_index = {c: i for i, c in enumerate(self.chans)}
        self.msgs = list(s.messages)
        self.msg_index = {m: i for i, m in enumerate(self.msgs)}
        self.state_names: list[list[str]] = []
        self.state_index: list[dict[str, int]] = []
        # transition table: tid -> (proc index, src, action, dst)
        self.transitions: list[tuple[int, int, Action, int]] = []
        self.out: list[list[list[tuple]]] = []
        for pi, p in enumerate(self.procs):
            a = s[p]
            names = sorted(a.states)
            idx = {q: i for i, q in enumerate(names)}
            self.state_names.append(names)
            self.state_index.append(idx)
            table: list[list[tuple]] = [[] for _ in names]
            for src, act, dst in a.transitions:
                tid = len(self.transitions)
                self.transitions.append((pi, idx[src], act, idx[dst]))
                if isinstance(act, Internal):
                    entry = (0, -1, -1, idx[dst], tid)
                else:
                    kind = 1 if isinstance(act, Send) else 2
                    entry = (kind, self.chan_index[act.channel], self.msg_index[act.message],
                             idx[dst], tid)
                table[idx[src]].append(entry)
            self.out.append(table)
        self.lossy = Interference.LOSSY in self.mode
        self.corrupt = Interference.CORRUPT in self.mode
        self.ooo = Interference.OOO in self.mode
        # set when some send overflowed the bound during exploration
        self.bound_hit = False

    # encoding helpers
    def initial(self):
        ctrl = tuple(self.state_index[i][self.system[p].initial] for i, p in enumerate(self.procs))
        return (ctrl, tuple(() for _ in self.chans))

    def encode(self, gamma: Configuration):
        ctrl = tuple(self.state_index[i][gamma.state(p)] for i, p in enumerate(self.procs))
        bufs = []
        for c in self.chans:
            w = gamma.buffer(c)
            bufs.append(self._canon_buf(tuple(-1 if m == WILDCARD else self.msg_index[m] for m in w)))
        return (ctrl, tuple(bufs))

    def decode(self, cfg) -> Configuration:
        ctrl, bufs = cfg
        return Configuration(
            self.procs,
            tuple(self.state_names[i][q] for i, q in enumerate(ctrl)),
            self.chans,
            tuple(tuple(WILDCARD if m < 0 else self.msgs[m] for m in w) for w in bufs))

    def _canon_buf(self, w: tuple) -> tuple:
        if self.corrupt:
            return (-1,) * len(w)
        if self.ooo:
            return tuple(sorted(w))
        return w

    def action(self, tid: int) -> Action:
        return self.transitions[tid][2]

    # one step
    def action_steps(self, cfg, k: int | None):
        """Yield (tid, successor) for every transition firing with its perfect effect."""
        ctrl, bufs = cfg
        for pi, q in enumerate(ctrl):
            for kind, ch, msg, dst, tid in self.out[pi][q]:
                nctrl = ctrl[:pi] + (dst,) + ctrl[pi + 1:]
                if kind == 0:
                    yield tid, (nctrl, bufs)
                elif kind == 1:
                    w = bufs[ch]
                    if self.corrupt:
                        nw = w + (-1,)
                    elif self.ooo:
                        nw = tuple(sorted(w + (msg,)))
                    else:
                        nw = w + (msg,)
                    if k is not None and len(nw) > k:
                        self.bound_hit = True
                        if not self.lossy:
                            continue
                        for lw in _drop_one(nw, self.ooo or self.corrupt):
                            yield tid, (nctrl, bufs[:ch] + (lw,) + bufs[ch + 1:])
                        continue
                    yield tid, (nctrl, bufs[:ch] + (nw,) + bufs[ch + 1:])
                else:
                    w = bufs[ch]
                    if not w:
                        continue
                    if self.corrupt:
                        nw = w[1:]
                    elif self.ooo:
                        if msg not in w:
                            continue
                        i = w.index(msg)
                        nw = w[:i] + w[i + 1:]
                    else:
                        if w[0] != msg:
                            continue
                        nw = w[1:]
                    yield tid, (nctrl, bufs[:ch] + (nw,) + bufs[ch + 1:])

    def silent_steps(self, cfg):
        """Configurations reached by losing one message."""
        if not self.lossy:
            return
        ctrl, bufs = cfg
        for ch, w in enumerate(bufs):
            for lw in _drop_one(w, self.ooo or self.corrupt):
                yield (ctrl, bufs[:ch] + (lw,) + bufs[ch + 1:])


def _drop_one(w: tuple, dedup: bool):
    seen = set()
    for i in range(len(w)):
        v = w[:i] + w[i + 1:]
        if v not in seen:
            seen.add(v)
            yield v


SILENT = -1


@dataclass
class ReachGraph:
    """Explored k-bounded configuration graph.

    ``edges[n]`` lists (tid, target) pairs; tid is SILENT for a loss step.
    ``parent[n]`` is the BFS predecessor (node, tid) giving shortest traces.
    """

    compiled: Compiled
    k: int | None
    nodes: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    edges: list = field(default_factory=list)
    parent: list = field(default_factory=list)
    saturated: bool = False  # no send ever overflowed k, so larger bounds add nothing

    def trace_to(self, n: int) -> list[Action]:
        tids = []
        while self.parent[n] is not None:
            n, tid = self.parent[n]
            if tid != SILENT:
                tids.append(tid)
        return [self.compiled.action(t) for t in reversed(tids)]

    def configuration(self, n: int) -> Configuration:
        return self.compiled.decode(self.nodes[n])

    def reverse(self) -> list[list[tuple[int, int]]]:
        rev: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
        for n, out in enumerate(self.edges):
            for tid, m in out:
                rev[m].append((tid, n))
        return rev

    def __len__(self) -> int:
        return len(self.nodes)


def explore(s: System, k: int | None, mode=Interference.NONE, cap: int = DEFAULT_STATE_CAP,
            compiled: Compiled | None = None) -> ReachGraph:
    """Breadth-first exploration of the k-bounded configuration graph."""
    comp = compiled or Compiled(s, mode)
    comp.bound_hit = False
    g = ReachGraph(comp, k)
    init = comp.initial()
    g.nodes.append(init)
    g.index[init] = 0
    g.parent.append(None)
    g.edges.append([])
    todo = deque([0])
    while todo:
        n = todo.popleft()
        cfg = g.nodes[n]
        out = g.edges[n]
        succ = [(tid, c) for tid, c in comp.action_steps(cfg, k)]
        succ += [(SILENT, c) for c in comp.silent_steps(cfg)]
        for tid, c in succ:
            m = g.index.get(c)
            if m is None:
                m = len(g.nodes)
                if m >= cap:
                    raise ResourceLimitError("reachable configurations", cap, k)
                g.index[c] = m
                g.nodes.append(c)
                g.parent.append((n, tid))
                g.edges.append([])
                todo.append(m)
            out.append((tid, m))
    g.saturated = not comp.bound_hit
    return g


@dataclass
class BoundedReachSet:
    k: int
    mode: Interference
    configurations: frozenset[Configuration]
    graph: ReachGraph | None = None

    def __contains__(self, gamma: Configuration) -> bool:
        return canonical(gamma, self.mode) in self.configurations

    def __len__(self) -> int:
        return len(self.configurations)

    def __iter__(self):
        return iter(self.configurations)


def reach_k(s: System, k: int, mode=Interference.NONE, cap: int = DEFAULT_STATE_CAP) -> BoundedReachSet:
    if k < 1:
        raise ValueError("k must be at least 1")
    mode = as_mode(mode)
    g = explore(s, k, mode, cap)
    confs = frozenset(g.configuration(n) for n in range(len(g)))
    return BoundedReachSet(k, mode, confs, g)


# -- executions -----------------------------------------------------------

@dataclass
class ExecutionCheck:
    ok: bool
    witness: list[Configuration]
    failed_at: int | None = None

    def __bool__(self) -> bool:
        return self.ok


def is_execution(s: System, e: Sequence[Action], mode=Interference.NONE,
                 k: int | None = None, cap: int = DEFAULT_STATE_CAP) -> ExecutionCheck:
    """Decide ``e ∈ exec(S)`` under ``mode``; the witness lists the configuration
    before each action and the final one (1 + len(e) entries)."""
    comp = Compiled(s, as_mode(mode))
    wanted = list(e)
    layer = [comp.initial()]
    steps = []  # per action: (origin of each pre-action configuration, post -> pre)
    for i, a in enumerate(wanted):
        origin = {c: c for c in layer}
        stack = list(layer)
        while stack:
            c = stack.pop()
            for d in comp.silent_steps(c):
                if d not in origin:
                    origin[d] = origin[c]
                    stack.append(d)
                    if len(origin) > cap:
                        raise ResourceLimitError("execution frontier", cap)
        nxt = {}
        for c in origin:
            for tid, d in comp.action_steps(c, k):
                if comp.action(tid) == a and d not in nxt:
                    nxt[d] = c
        if not nxt:
            return ExecutionCheck(False, [], i + 1)
        steps.append((origin, nxt))
        layer = list(nxt)
    post = layer[0]
    chain = [post]
    for origin, nxt in reversed(steps):
        pre = nxt[post]
        chain.append(pre)
        post = origin[pre]
    chain.reverse()
    return ExecutionCheck(True, [comp.decode(c) for c in chain])


def initial(s: System) -> Configuration:
    return initial_configuration(s)


def enumerate_executions(s: System, max_length: int, mode=Interference.NONE,
                         cap: int = 2_000_000):
    """Yield every execution of length ≤ max_length (each distinct sequence once)."""
    comp = Compiled(s, as_mode(mode))
    count = 0

    def close(configs):
        seen = set(configs)
        stack = list(configs)
        while stack:
            c = stack.pop()
            for d in comp.silent_steps(c):
                if d not in seen:
                    seen.add(d)
                    stack.append(d)
        return seen

    def rec(prefix, configs):
        nonlocal count
        count += 1
        if count > cap:
            raise ResourceLimitError("enumerated executions", cap)
        yield tuple(prefix)
        if len(prefix) == max_length:
            return
        children: dict = {}
        for c in close(configs):
            for tid, d in comp.action_steps(c, None):
                children.setdefault(comp.action(tid), set()).add(d)
        for a in sorted(children, key=str):
            prefix.append(a)
            yield from rec(prefix, children[a])
            prefix.pop()

    yield from rec([], {comp.initial()})
