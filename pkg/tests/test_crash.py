import random

import pytest

from fifocheck.crash import (Part, augment_crash_handling, crashed_processes, expand_broadcast,
                             infer_partition, is_crash_action, is_crash_handling)
from fifocheck.io import dump_system, parse_system
from fifocheck.model import (CRASH, Channel, FifoAutomaton, Internal, Receive, Send, System,
                             ValidationError, build_system)

from randsys import random_system


def drop(s: System, p: str, pred) -> System:
    a = s[p]
    kept = tuple(t for t in a.transitions if not pred(t))
    assert len(kept) == len(a.transitions) - 1
    return System({**s.automata, p: FifoAutomaton(p, a.states, kept, a.initial)}, s.name,
                  s.reliable, s.annotations)


def crash_free(s: System) -> System:
    automata = {}
    for p, a in s.automata.items():
        trs = tuple(t for t in a.transitions if not is_crash_action(t[1]))
        states = {a.initial} | {x for x, _, _ in trs} | {y for _, _, y in trs}
        automata[p] = FifoAutomaton(p, frozenset(states), trs, a.initial)
    return System(automata, s.name + "-base")


def test_fig4a_is_crash_handling(fig4a):
    rep = is_crash_handling(fig4a, ["s"])
    assert rep.ok, [str(v) for v in rep.violations]
    assert rep.partition["c"]["c3"] == "bcast"


def test_everyone_reliable_is_vacuous(fig1, fig3):
    assert is_crash_handling(fig1, ["r", "s"])
    assert is_crash_handling(fig3, fig3.processes)


def test_missing_crash_branch_breaks_ci(fig4a):
    m = drop(fig4a, "s", lambda t: isinstance(t[1], Receive) and t[1].message.is_crash)
    rep = is_crash_handling(m, ["s"])
    assert not rep.ok and rep.conditions() == {"CI"}
    assert (rep.first.process, rep.first.state) == ("s", "s0")


def test_missing_broadcast_edge_breaks_cp(fig4a):
    m = drop(fig4a, "c", lambda t: isinstance(t[1], Send) and t[1].message.is_crash)
    rep = is_crash_handling(m, ["s"])
    assert not rep.ok and "CP" in rep.conditions()


def test_missing_absorbing_loop_breaks_cr(fig4a):
    aug = augment_crash_handling(crash_free(fig4a), ["s"])
    assert is_crash_handling(aug, ["s"])
    m = drop(aug, "s", lambda t: isinstance(t[1], Receive) and t[1].message.is_crash
             and t[0] == t[2])
    rep = is_crash_handling(m, ["s"])
    assert not rep.ok and rep.conditions() == {"CR"}


def test_unknown_reliable_process(fig4a):
    with pytest.raises(ValidationError):
        is_crash_handling(fig4a, ["zz"])


def test_reliable_default_comes_from_the_file(fig4a):
    assert is_crash_handling(fig4a).ok


@pytest.mark.parametrize("n", [0, 1, 2])
def test_broadcast_chain_lengths(n):
    peers = ["r1", "r2"][:n]
    a = FifoAutomaton("p", frozenset({"q"}), (), "q")
    _, trs, stop = expand_broadcast(a, "q", CRASH, peers)
    assert isinstance(trs[0][1], Internal) and trs[0][0] == "q"
    sends = [t for t in trs if isinstance(t[1], Send)]
    assert [t[1].channel for t in sends] == [Channel("p", r) for r in peers]
    assert trs[-1][2] == stop
    assert len(trs) == 1 + n


def test_augment_fig1(fig1):
    aug = augment_crash_handling(fig1, ["s"])
    assert is_crash_handling(aug, ["s"])
    assert parse_system(dump_system(aug)) == aug


def test_augment_with_everyone_reliable(fig1):
    assert augment_crash_handling(fig1, fig1.processes).automata == fig1.automata


def test_augment_fig3_adds_full_chains(fig3):
    aug = augment_crash_handling(fig3, [])
    for p in fig3.processes:
        added = set(aug[p].transitions) - set(fig3[p].transitions)
        crashes = [t for t in added if isinstance(t[1], Internal)]
        sends = [t for t in added if isinstance(t[1], Send)]
        assert len(crashes) == len(fig3[p].states)
        assert len(sends) == 3 * len(fig3[p].states)
    assert is_crash_handling(aug, [])


def test_augment_refuses_reserved_symbols(fig4a):
    with pytest.raises(ValidationError):
        augment_crash_handling(fig4a, ["s"])


def test_augment_random_systems():
    rng = random.Random(4)
    for _ in range(100):
        s = random_system(rng, rng.choice((2, 3, 4)), 3, 5, internal=True)
        r = rng.sample(s.processes, rng.randint(0, len(s.processes)))
        rep = is_crash_handling(augment_crash_handling(s, r), r)
        assert rep.ok, [str(v) for v in rep.violations]


def test_partition_inference(fig4a):
    parts = infer_partition(fig4a, ["s"])
    assert parts["c"]["c0"] is Part.LIVE
    assert parts["c"]["c3"] is Part.BROADCASTING
    assert parts["c"]["c4"] is Part.STOPPED
    assert crashed_processes(fig4a, {"c": "c4", "s": "s0"}, parts) == {"c"}


def test_plain_transition_from_stopped_state_is_reported():
    s = build_system("x", {"p": ("0", [("0", "tau crash", "1"), ("1", "p>q!CRASH", "2"),
                                       ("2", "p>q!late", "3")]),
                           "q": ("0", [])}, reliable=["q"])
    ann = {"p": {"0": "live", "1": "bcast", "2": "stop", "3": "stop"}}
    s = System(s.automata, s.name, s.reliable, ann)
    rep = is_crash_handling(s, ["q"])
    assert "partition" in rep.conditions()
