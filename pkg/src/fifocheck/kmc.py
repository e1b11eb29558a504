"""k-bounded multiparty compatibility: eventual reception, progress, exhaustivity."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

from .interference import (SILENT, Compiled, Interference, ReachGraph, as_mode, explore,
                           DEFAULT_STATE_CAP)
from .model import (Action, Configuration, Internal, Receive, ResourceLimitError, Send,
                    StateKind, System, classify_state, is_csa)


class NotCsaError(ValueError):
    pass


@dataclass
class Counterexample:
    configuration: Configuration
    trace: list[Action]
    explanation: str

    def to_json(self) -> dict:
        return {"trace": [str(a) for a in self.trace],
                "configuration": self.configuration.to_json(),
                "explanation": self.explanation}


@dataclass
class KmcVerdict:
    k: int
    mode: Interference
    k_exhaustive: bool
    k_er: bool
    k_pg: bool | None
    counterexamples: dict[str, Counterexample] = field(default_factory=dict)
    states: int = 0
    saturated: bool = False

    @property
    def kwmc(self) -> bool:
        return self.k_exhaustive and self.k_er

    @property
    def kmc(self) -> bool:
        return self.kwmc and bool(self.k_pg)

    def to_json(self) -> list[dict]:
        out = []
        for prop, val in (("k-exhaustive", self.k_exhaustive), ("k-er", self.k_er),
                          ("k-pg", self.k_pg)):
            if val is None:
                continue
            entry = {"property": prop, "k": self.k, "mode": self.mode.label, "result": val}
            if prop in self.counterexamples:
                entry["counterexample"] = self.counterexamples[prop].to_json()
            out.append(entry)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False)


def find_orphan(s: System, k: int, mode=Interference.NONE, cap: int = DEFAULT_STATE_CAP
                ) -> Counterexample | None:
    """On-the-fly search for a k-reachable configuration holding a message its
    receiver can no longer consume from its current local state.

    Such a configuration refutes k-ER for k and every larger bound, so this is
    usable when the full graph is out of reach.  Returns None when the whole
    k-reachability set was explored without finding one.
    """
    comp = Compiled(s, as_mode(mode))
    # per process and local state: (chan, msg) pairs receivable later on; msg -1 = any
    future = []
    for pi in range(len(comp.procs)):
        nstates = len(comp.state_names[pi])
        succ = [set() for _ in range(nstates)]
        here = [set() for _ in range(nstates)]
        for q in range(nstates):
            for kind, ch, msg, dst, _ in comp.out[pi][q]:
                succ[q].add(dst)
                if kind == 2:
                    here[q].add((ch, msg))
                    here[q].add((ch, -1))
        reach = []
        for q in range(nstates):
            seen, todo, acc = {q}, [q], set()
            while todo:
                x = todo.pop()
                acc |= here[x]
                for y in succ[x]:
                    if y not in seen:
                        seen.add(y)
                        todo.append(y)
            reach.append(acc)
        future.append(reach)
    receiver = [comp.procs.index(c.receiver) for c in comp.chans]
    parent = {comp.initial(): None}
    todo = deque([comp.initial()])
    while todo:
        cfg = todo.popleft()
        ctrl, bufs = cfg
        for ch, w in enumerate(bufs):
            if not w:
                continue
            fut = future[receiver[ch]][ctrl[receiver[ch]]]
            for h in (set(w) if comp.ooo else {w[0]}):
                if (ch, h) not in fut:
                    trace = []
                    x = cfg
                    while parent[x] is not None:
                        x, tid = parent[x]
                        if tid != SILENT:
                            trace.append(comp.action(tid))
                    msg = "any message" if h < 0 else str(comp.msgs[h])
                    return Counterexample(comp.decode(cfg), trace[::-1],
                                          f"{msg} on channel {comp.chans[ch]} can no longer be "
                                          f"received by {comp.procs[receiver[ch]]}")
        succ = [(tid, c) for tid, c in comp.action_steps(cfg, k)]
        succ += [(SILENT, c) for c in comp.silent_steps(cfg)]
        for tid, c in succ:
            if c not in parent:
                if len(parent) >= cap:
                    raise ResourceLimitError("reachable configurations", cap, k)
                parent[c] = (cfg, tid)
                todo.append(c)
    return None


class _Analysis:
    """Backward-reachability queries over an explored configuration graph."""

    def __init__(self, g: ReachGraph, ignore_self_loops: bool = False):
        self.g = g
        self.comp: Compiled = g.compiled
        self.rev = g.reverse()
        self._cache: dict = {}
        s = self.comp.system
        self.kind = []
        for pi, p in enumerate(self.comp.procs):
            a = s[p]
            kinds = []
            for q in self.comp.state_names[pi]:
                kinds.append(_kind(a, q, ignore_self_loops))
            self.kind.append(kinds)

    def can_reach(self, key, pred) -> set[int]:
        """Nodes from which some edge satisfying ``pred(tid)`` is reachable."""
        if key in self._cache:
            return self._cache[key]
        seeds = [n for n, out in enumerate(self.g.edges)
                 if any(t != SILENT and pred(t) for t, _ in out)]
        seen = set(seeds)
        todo = deque(seeds)
        while todo:
            n = todo.popleft()
            for _, m in self.rev[n]:
                if m not in seen:
                    seen.add(m)
                    todo.append(m)
        self._cache[key] = seen
        return seen

    def within_one_step(self, key, pred) -> set[int]:
        enabled = set(n for n, out in enumerate(self.g.edges)
                      if any(t != SILENT and pred(t) for t, _ in out))
        # allow silent (loss) steps on both sides of the single action step
        closure = self._silent_back(enabled)
        one = set()
        for n in closure:
            for t, m in self.rev[n]:
                if t != SILENT:
                    one.add(m)
        return self._silent_back(closure | one)

    def _silent_back(self, nodes: set[int]) -> set[int]:
        seen = set(nodes)
        todo = list(nodes)
        while todo:
            n = todo.pop()
            for t, m in self.rev[n]:
                if t == SILENT and m not in seen:
                    seen.add(m)
                    todo.append(m)
        return seen

    def counterexample(self, n: int, why: str) -> Counterexample:
        return Counterexample(self.g.configuration(n), self.g.trace_to(n), why)


def _kind(a, q, ignore_self_loops: bool) -> StateKind | None:
    """Sending/receiving kind used by the checks; None for sinks and mixed states."""
    if ignore_self_loops:
        out = [(x, d) for x, d in a.outgoing(q) if not (isinstance(x, Receive) and d == q)]
        if not out:
            return None
        comm = [x for x, _ in out if not isinstance(x, Internal)]
        if all(isinstance(x, Send) for x in comm):
            return StateKind.SENDING
        if all(isinstance(x, Receive) for x in comm):
            return StateKind.RECEIVING
        return None
    c = classify_state(a, q)
    return None if c.sink or c.kind is StateKind.MIXED else c.kind


def _require_csa(s: System, require_csa: bool) -> None:
    if require_csa:
        rep = is_csa(s)
        if not rep:
            raise NotCsaError("system is not a CSA: " + "; ".join(rep.messages()))


def _check_er(an: _Analysis) -> Counterexample | None:
    comp = an.comp
    for n, (ctrl, bufs) in enumerate(an.g.nodes):
        for ch, w in enumerate(bufs):
            if not w:
                continue
            heads = set(w) if comp.ooo else {w[0]}
            for h in heads:
                if h < 0:
                    key = ("er", ch, None)
                    pred = _recv_on(comp, ch, None)
                else:
                    key = ("er", ch, h)
                    pred = _recv_on(comp, ch, h)
                if n not in an.can_reach(key, pred):
                    msg = "any message" if h < 0 else str(comp.msgs[h])
                    return an.counterexample(
                        n, f"{msg} on channel {comp.chans[ch]} is never received")
    return None


def _recv_on(comp: Compiled, ch: int, msg: int | None):
    chan = comp.chans[ch]
    m = None if msg is None else comp.msgs[msg]

    def pred(tid: int) -> bool:
        a = comp.transitions[tid][2]
        return isinstance(a, Receive) and a.channel == chan and (m is None or a.message == m)
    return pred


def _check_pg(an: _Analysis, single_step: bool) -> Counterexample | None:
    comp = an.comp
    for n, (ctrl, _) in enumerate(an.g.nodes):
        for pi, q in enumerate(ctrl):
            if an.kind[pi][q] is not StateKind.RECEIVING:
                continue

            def pred(tid, pi=pi):
                pj, _, a, _ = comp.transitions[tid]
                return pj == pi and isinstance(a, Receive)
            key = ("pg1" if single_step else "pg", pi)
            reach = an.within_one_step(key, pred) if single_step else an.can_reach(key, pred)
            if n not in reach:
                p = comp.procs[pi]
                return an.counterexample(
                    n, f"{p} is stuck in receiving state {comp.state_names[pi][q]}")
    return None


def _check_exh(an: _Analysis) -> Counterexample | None:
    comp = an.comp
    for n, (ctrl, _) in enumerate(an.g.nodes):
        for pi, q in enumerate(ctrl):
            if an.kind[pi][q] is not StateKind.SENDING:
                continue
            for kind, _, _, _, tid in comp.out[pi][q]:
                if kind != 1:
                    continue
                if n not in an.can_reach(("exh", tid), lambda t, tid=tid: t == tid):
                    a = comp.transitions[tid][2]
                    return an.counterexample(
                        n, f"send {a} of {comp.procs[pi]} at {comp.state_names[pi][q]} "
                           f"cannot fire within the bound")
    return None


def _analyse(s, k, mode, cap, ignore_self_loops=False) -> _Analysis:
    if k < 1:
        raise ValueError("k must be at least 1")
    g = explore(s, k, as_mode(mode), cap)
    return _Analysis(g, ignore_self_loops)


def check_k_er(s: System, k: int, mode=Interference.NONE, *, cap=DEFAULT_STATE_CAP,
               require_csa=True):
    _require_csa(s, require_csa)
    ce = _check_er(_analyse(s, k, mode, cap))
    return ce is None, ce


def check_k_pg(s: System, k: int, mode=Interference.NONE, *, cap=DEFAULT_STATE_CAP,
               require_csa=True, single_step=False):
    _require_csa(s, require_csa)
    ce = _check_pg(_analyse(s, k, mode, cap), single_step)
    return ce is None, ce


def check_k_exhaustive(s: System, k: int, mode=Interference.NONE, *, cap=DEFAULT_STATE_CAP,
                       require_csa=True):
    _require_csa(s, require_csa)
    ce = _check_exh(_analyse(s, k, mode, cap))
    return ce is None, ce


def check_kmc(s: System, k: int, mode=Interference.NONE, *, weak=False, cap=DEFAULT_STATE_CAP,
              require_csa=True, single_step=False, ignore_self_loops=False) -> KmcVerdict:
    """All components at bound ``k``; with ``weak`` the progress check is skipped."""
    _require_csa(s, require_csa)
    mode = as_mode(mode)
    an = _analyse(s, k, mode, cap, ignore_self_loops)
    ces = {}
    results = {}
    checks = [("k-exhaustive", lambda: _check_exh(an)), ("k-er", lambda: _check_er(an))]
    if not weak:
        checks.append(("k-pg", lambda: _check_pg(an, single_step)))
    for name, fn in checks:
        ce = fn()
        results[name] = ce is None
        if ce is not None:
            ces[name] = ce
    return KmcVerdict(k, mode, results["k-exhaustive"], results["k-er"], results.get("k-pg"),
                      ces, len(an.g), an.g.saturated)


def check_kwmc(s: System, k: int, mode=Interference.NONE, **kw) -> KmcVerdict:
    return check_kmc(s, k, mode, weak=True, **kw)


@dataclass
class LeastK:
    k: int | None
    verdict: KmcVerdict | None
    verdicts: list[KmcVerdict]

    @property
    def found(self) -> bool:
        return self.k is not None


def find_least_k(s: System, k_max: int = 10, mode=Interference.NONE, weak: bool = False,
                 **kw) -> LeastK:
    """Smallest k ≤ k_max at which the (weak) property holds.

    The search stops early once the bound no longer constrains exploration,
    since every larger k then yields the same configuration graph.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    verdicts = []
    for k in range(1, k_max + 1):
        try:
            v = check_kmc(s, k, mode, weak=weak, **kw)
        except ResourceLimitError as exc:
            raise ResourceLimitError(exc.what, exc.cap, k) from exc
        verdicts.append(v)
        if (v.kwmc if weak else v.kmc):
            return LeastK(k, v, verdicts)
        if v.saturated:
            break
    return LeastK(None, verdicts[-1] if verdicts else None, verdicts)
