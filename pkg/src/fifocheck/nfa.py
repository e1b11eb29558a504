"""A small explicit NFA plus lazy product emptiness with shortest witnesses."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable

from .model import ResourceLimitError


@dataclass
class Nfa:
    states: set
    alphabet: set
    transitions: dict = field(default_factory=dict)   # state -> symbol -> set of states
    initial: Hashable = None
    accepting: set = field(default_factory=set)

    def add(self, src, symbol, dst) -> None:
        self.transitions.setdefault(src, {}).setdefault(symbol, set()).add(dst)

    def step(self, src, symbol) -> set:
        return self.transitions.get(src, {}).get(symbol, set())

    def successors(self, src) -> Iterable[tuple[Hashable, Hashable]]:
        for sym, dsts in self.transitions.get(src, {}).items():
            for d in dsts:
                yield sym, d

    @property
    def transition_count(self) -> int:
        return sum(len(d) for row in self.transitions.values() for d in row.values())

    def accepts(self, word) -> bool:
        cur = {self.initial}
        for sym in word:
            cur = set().union(*(self.step(q, sym) for q in cur)) if cur else set()
            if not cur:
                return False
        return bool(cur & self.accepting)

    def shortest_word(self):
        """A shortest accepted word, or None when the language is empty."""
        return shortest_accepted(self.initial, lambda q: self.successors(q),
                                 lambda q: q in self.accepting)[0]


def shortest_accepted(initial, successors: Callable, accepting: Callable,
                      cap: int = 5_000_000):
    """BFS for a shortest accepted word in an implicitly given automaton.

    Returns (word, states along the run) or (None, None).
    """
    parent = {initial: None}
    todo = deque([initial])
    while todo:
        q = todo.popleft()
        if accepting(q):
            word, run = [], [q]
            while parent[q] is not None:
                q, sym = parent[q]
                word.append(sym)
                run.append(q)
            return word[::-1], run[::-1]
        for sym, d in successors(q):
            if d not in parent:
                parent[d] = (q, sym)
                if len(parent) > cap:
                    raise ResourceLimitError("product states", cap)
                todo.append(d)
    return None, None
