"""Random system generators shared by the property tests."""

from __future__ import annotations

import random

from fifocheck.model import Channel, Internal, Message, Receive, Send, System, FifoAutomaton


def random_dag_system(rng: random.Random, n_procs: int = 2, max_depth: int = 8,
                      labels=("a", "b"), internal: bool = False) -> System:
    """Acyclic automata whose total transition depth is at most ``max_depth``."""
    procs = [chr(ord("p") + i) for i in range(n_procs)]
    budget = max_depth
    automata = {}
    for i, p in enumerate(procs):
        depth = rng.randint(1, max(1, budget - (n_procs - i - 1))) if budget > 0 else 0
        if i == n_procs - 1:
            depth = max(0, budget)
        depth = min(depth, budget)
        budget -= depth
        states = [f"{p}0"]
        trs = []
        layer = [f"{p}0"]
        for d in range(depth):
            nxt = []
            for q in layer:
                for _ in range(rng.choice((1, 1, 2))):
                    dst = f"{p}{len(states)}"
                    states.append(dst)
                    trs.append((q, _random_action(rng, p, procs, labels, internal), dst))
                    nxt.append(dst)
            layer = nxt[:2]
        automata[p] = FifoAutomaton(p, frozenset(states), tuple(dict.fromkeys(trs)), f"{p}0")
    return System(automata, "random")


def random_system(rng: random.Random, n_procs: int = 2, n_states: int = 3, n_trans: int = 4,
                  labels=("a", "b"), internal: bool = False) -> System:
    procs = [chr(ord("p") + i) for i in range(n_procs)]
    automata = {}
    for p in procs:
        states = [f"{p}{i}" for i in range(n_states)]
        trs = []
        for _ in range(rng.randint(1, n_trans)):
            trs.append((rng.choice(states), _random_action(rng, p, procs, labels, internal),
                        rng.choice(states)))
        automata[p] = FifoAutomaton(p, frozenset(states), tuple(dict.fromkeys(trs)), states[0])
    return System(automata, "random")


def _random_action(rng, p, procs, labels, internal):
    peers = [q for q in procs if q != p]
    if internal and rng.random() < 0.15:
        return Internal(p, "t")
    q = rng.choice(peers)
    m = Message(rng.choice(labels))
    if rng.random() < 0.5:
        return Send(Channel(p, q), m)
    return Receive(Channel(q, p), m)


def random_directed_csa(rng: random.Random, n_procs: int = 3, max_states: int = 6,
                        labels=("a", "b", "c")) -> System:
    """Deterministic, directed, mixed-state-free automata."""
    procs = [chr(ord("p") + i) for i in range(n_procs)]
    automata = {}
    for p in procs:
        n = rng.randint(1, max_states)
        states = [f"{p}{i}" for i in range(n)]
        trs = []
        peers = [q for q in procs if q != p]
        for q in states:
            kind = rng.choice(("send", "recv", "recv", "sink"))
            if kind == "sink":
                continue
            peer = rng.choice(peers)
            for lab in rng.sample(labels, rng.randint(1, 2)):
                dst = rng.choice(states)
                act = Send(Channel(p, peer), Message(lab)) if kind == "send" \
                    else Receive(Channel(peer, p), Message(lab))
                trs.append((q, act, dst))
        automata[p] = FifoAutomaton(p, frozenset(states), tuple(trs), states[0])
    return System(automata, "random-csa")


def _dual(a: FifoAutomaton, owner: str, peer: str) -> FifoAutomaton:
    trs = []
    for src, act, dst in a.transitions:
        if isinstance(act, Send):
            trs.append((src, Receive(Channel(peer, owner), act.message), dst))
        else:
            trs.append((src, Send(Channel(owner, peer), act.message), dst))
    return FifoAutomaton(owner, a.states, tuple(trs), a.initial)


def random_dual_csa(rng: random.Random, n_pairs: int = 1, max_states: int = 6,
                    labels=("a", "b", "c"), mutate: float = 0.5) -> System:
    """Pairs of mutually dual automata, optionally with one retargeted or deleted edge.

    Duals are safe, so these populate the safe side of the k-safety
    implication that plain random CSAs rarely reach.
    """
    procs = [chr(ord("p") + i) for i in range(2 * n_pairs)]
    automata = {}
    for i in range(n_pairs):
        p, q = procs[2 * i], procs[2 * i + 1]
        half = random_directed_csa(rng, 2, max_states, labels)
        # keep only the first process and point it at its partner
        src = half[chr(ord("p"))]
        trs = []
        for a, act, b in src.transitions:
            if isinstance(act, Send):
                trs.append((a.replace("p", p, 1), Send(Channel(p, q), act.message),
                            b.replace("p", p, 1)))
            else:
                trs.append((a.replace("p", p, 1), Receive(Channel(q, p), act.message),
                            b.replace("p", p, 1)))
        states = frozenset(x.replace("p", p, 1) for x in src.states)
        left = FifoAutomaton(p, states, tuple(trs), src.initial.replace("p", p, 1))
        right = _dual(left, q, p)
        right = FifoAutomaton(q, frozenset(x.replace(p, q, 1) for x in right.states),
                              tuple((a.replace(p, q, 1), act, b.replace(p, q, 1))
                                    for a, act, b in right.transitions),
                              right.initial.replace(p, q, 1))
        automata[p], automata[q] = left, right
    if rng.random() < mutate:
        victim = rng.choice(procs)
        a = automata[victim]
        trs = list(a.transitions)
        if trs:
            j = rng.randrange(len(trs))
            if rng.random() < 0.5:
                del trs[j]
            else:
                s0, act, _ = trs[j]
                trs[j] = (s0, act, rng.choice(sorted(a.states)))
            automata[victim] = FifoAutomaton(victim, a.states, tuple(trs), a.initial)
    return System(automata, "random-dual")
