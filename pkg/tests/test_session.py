import random

import networkx as nx
import pytest

from fifocheck.crash import is_crash_handling
from fifocheck.io import dump_system, parse_system
from fifocheck.model import CRASH, Channel, Message, Receive, Send, ValidationError, is_csa
from fifocheck.session import (END, crash_action, STOP, Branch, Rec, Select, TypeSyntaxError, Var,
                               bounded_trace_equiv, branch, check_type, compose_types, dump_types,
                               format_type, local_steps, lts_step, occurs_in, parse_type,
                               parse_types, select, strip, structural_check, translate,
                               translate_full, type_configuration, type_size, unfold)

from typegen import random_type

EXAMPLE = ("rec t . B & { sig(S). A & { commit.t, CRASH.end }, "
           "save(S). A & { finish.end, CRASH.end } }")
PROCS = ["A", "B", "C"]


@pytest.fixture
def t_c():
    return parse_type(EXAMPLE)


def test_parse_and_format_round_trip(t_c):
    assert parse_type(format_type(t_c)) == t_c
    assert parse_type("μt . B & { x.t }") == parse_type("rec t . B & x.t")
    assert parse_type("A ⊕ { go }") == select("A", ("go", END))
    assert parse_type("A & { a.end, ⚡.stop }") == branch("A", ("a", END), (CRASH, STOP))


@pytest.mark.parametrize("text", ["", "A & {", "A & { a.end, }", "rec . A & a", "A ? x"])
def test_syntax_errors(text):
    with pytest.raises(TypeSyntaxError):
        parse_type(text)


@pytest.mark.parametrize("text,fragment", [
    ("A & { a.t }", "unbound"),
    ("rec t . t", "unguarded"),
    ("rec t . rec u . t", "unguarded"),
    ("A & { a.end, a.end }", "duplicate labels"),
    ("A (+) { a.end, CRASH.end }", "crash label in internal choice"),
    ("A & { CRASH.end }", "singleton crash branch"),
    ("rec t . A & { a. rec t . B & { b.t } }", "bound twice"),
])
def test_well_formedness(text, fragment):
    assert any(fragment in e for e in check_type(parse_type(text)))


def test_occurrence_set_of_the_worked_example(t_c):
    body = t_c.body
    t1 = parse_type("A & { commit.t, CRASH.end }")
    t2 = parse_type("A & { finish.end, CRASH.end }")
    want = {
        t_c,
        Branch("B", ((Message("sig", "S"), t1),)),
        Branch("A", ((Message("commit"), Var("t")),)),
        Branch("B", ((Message("save", "S"), t2),)),
        Branch("A", ((CRASH, END),)),
        Branch("A", ((Message("finish"), END),)),
        END,
        Var("t"),
    }
    occ = occurs_in(t_c)
    assert len(occ) == 8 and occ == want
    assert strip(t_c) == body


def test_occurrence_edge_cases():
    assert occurs_in(END) == {END}
    t = parse_type("rec t . q (+) { m.t }")
    assert occurs_in(t) == {t, t.body, Var("t")}


def test_strip_only_removes_leading_binders():
    b = parse_type("A & { a.end }")
    assert strip(Rec("t", Rec("u", b))) == b
    assert strip(END) == END


def test_occurrence_set_is_finite_and_small():
    rng = random.Random(1)
    for _ in range(200):
        t = random_type(rng, rng.choice(PROCS))
        assert len(occurs_in(t)) <= type_size(t)


def test_crash_branch_step(t_c):
    steps = dict(local_steps(strip(t_c).branches[0][1], "C", PROCS, ["B", "C"]))
    assert steps[Receive(Channel("A", "C"), CRASH)] == END


def test_end_absorbs_crash_notifications():
    steps = local_steps(END, "C", PROCS, ["C"])
    assert steps == [(Receive(Channel("A", "C"), CRASH), END),
                     (Receive(Channel("B", "C"), CRASH), END)]


def test_rec_steps_equal_unfolded_steps(t_c):
    assert local_steps(t_c, "C", PROCS, ["C"]) == local_steps(unfold(t_c), "C", PROCS, ["C"])


def test_unreliable_role_can_crash_and_broadcast():
    t = parse_type("B (+) { go.end }")
    steps = dict((str(a), n) for a, n in local_steps(t, "A", PROCS))
    nxt = steps["tau crash@A"]
    first = local_steps(nxt, "A", PROCS)
    assert [str(a) for a, _ in first] == ["A>B!CRASH"]
    (_, last), = first
    assert local_steps(last, "A", PROCS)[0][1] == STOP


def test_lts_with_channels(t_c):
    g = type_configuration({"A": END, "B": END, "C": t_c})
    assert lts_step(g, Receive(Channel("B", "C"), Message("sig", "S")), ["B", "C"]) is None
    g = type_configuration({"A": parse_type("C (+) { commit.end }"),
                            "B": parse_type("C (+) { sig(S).end }"), "C": t_c})
    g = lts_step(g, Send(Channel("B", "C"), Message("sig", "S")), ["B", "C"])
    g = lts_step(g, Receive(Channel("B", "C"), Message("sig", "S")), ["B", "C"])
    assert g is not None and g.type_of("C") == unfold(t_c).branches[0][1]
    g = lts_step(g, Send(Channel("A", "C"), Message("commit")), ["B", "C"])
    g = lts_step(g, Receive(Channel("A", "C"), Message("commit")), ["B", "C"])
    assert g.type_of("C") == t_c and g.type_of("A") == END


def fig4b_graph():
    g = nx.MultiDiGraph()
    for src, lab, dst in [("T0", "B>C?sig/S", "T1"), ("T1", "A>C?commit", "T0"),
                          ("T1", "A>C?CRASH", "T3"), ("T0", "B>C?save/S", "T2"),
                          ("T2", "A>C?finish", "T3"), ("T2", "A>C?CRASH", "T3")]:
        g.add_edge(src, dst, label=lab)
    return g


def automaton_graph(a, skip=lambda src, act, dst: False):
    g = nx.MultiDiGraph()
    g.add_nodes_from(a.states)
    for src, act, dst in a.transitions:
        if not skip(src, act, dst):
            g.add_edge(src, dst, label=str(act))
    return g


def end_absorption(src, act, dst):
    return src == dst == "end" and isinstance(act, Receive) and act.message.is_crash


def test_translation_matches_the_drawn_automaton(t_c):
    a = translate(t_c, "C", PROCS, ["B", "C"])
    assert a.initial == "T0"
    em = lambda x, y: sorted(d["label"] for d in x.values()) == sorted(
        d["label"] for d in y.values())
    assert nx.is_isomorphic(automaton_graph(a, end_absorption), fig4b_graph(), edge_match=em)
    # the only additions are the absorbing self-loops at end, one per peer
    extra = [t for t in a.transitions if end_absorption(*t)]
    assert sorted(str(t[1]) for t in extra) == ["A>C?CRASH", "B>C?CRASH"]


def test_end_alone_translates_to_one_absorbing_state():
    for rel in ([], ["A"]):
        a = translate(END, "A", PROCS, rel)
        assert a.states == {"end"}
        assert {str(x) for _, x, _ in a.transitions} == {"B>A?CRASH", "C>A?CRASH"}


def test_guarded_chain_only_for_unreliable_roles(t_c):
    rel = translate(t_c, "C", PROCS, ["B", "C"])
    assert not any(str(x).startswith("tau crash") for _, x, _ in rel.transitions)
    unrel = translate(t_c, "C", PROCS, ["B"])
    sends = [(s, str(x), d) for s, x, d in unrel.transitions if isinstance(x, Send)]
    assert sends == [("q_sink", "C>A!CRASH", "q_snd_A"), ("q_snd_A", "C>B!CRASH", "stop")]
    forced = translate(t_c, "C", PROCS, ["B", "C"], unconditional_crash=True)
    assert set(forced.transitions) == set(unrel.transitions)


def test_literal_chain_variant(t_c):
    a = translate(t_c, "C", PROCS, ["B"], literal_chain=True)
    sends = [x for _, x, _ in a.transitions if isinstance(x, Send)]
    assert len(sends) == 1
    # the last peer is never notified and a second crash action ends the chain
    assert ("q_snd_A", crash_action("C"), "stop") in a.transitions


def test_trace_equivalence_of_the_worked_example(t_c):
    for rel in (["B", "C"], ["B"], []):
        assert bounded_trace_equiv(t_c, "C", PROCS, rel, 8)
    assert bounded_trace_equiv(END, "C", PROCS, [], 5)


def test_dropping_crash_branches_is_caught(t_c):
    bad = translate(t_c, "C", PROCS, ["B", "C"], drop_crash_branches=True)
    res = bounded_trace_equiv(t_c, "C", PROCS, ["B", "C"], 8, automaton=bad)
    assert not res and res.side == "type"
    assert res.trace[-1].message.is_crash


def test_bad_depth(t_c):
    with pytest.raises(ValueError):
        bounded_trace_equiv(t_c, "C", PROCS, [], 0)


def test_translation_errors():
    with pytest.raises(ValidationError, match="unbound"):
        translate(parse_type("A & { a.t }"), "C", PROCS)
    with pytest.raises(ValidationError, match="unknown process"):
        translate(parse_type("Z & { a.end }"), "C", PROCS)
    with pytest.raises(ValidationError, match="not among"):
        translate(END, "Q", PROCS)


def test_random_types_translate_to_session_automata():
    rng = random.Random(2024)
    for _ in range(200):
        owner = rng.choice(PROCS)
        t = random_type(rng, owner)
        rel = rng.sample(PROCS, rng.randint(0, 3))
        tr = translate_full(t, owner, PROCS, rel)
        assert structural_check(tr.automaton) == [], format_type(t)


def test_random_types_are_trace_equivalent():
    rng = random.Random(77)
    for _ in range(100):
        owner = rng.choice(PROCS)
        t = random_type(rng, owner, depth=3)
        rel = rng.sample(PROCS, rng.randint(0, 3))
        res = bounded_trace_equiv(t, owner, PROCS, rel, 8)
        assert res, (format_type(t), res.trace)


def test_no_crash_symbol_without_crash_branches():
    rng = random.Random(5)
    for _ in range(50):
        t = random_type(rng, "A", crash_branches=False)
        a = translate(t, "A", PROCS, ["A"])
        for src, act, dst in a.transitions:
            if not isinstance(act, (Send, Receive)) or not act.message.is_crash:
                continue
            assert src == dst == "end" or src == dst == "stop"


def test_compose_the_three_roles(corpus):
    tf = parse_types((corpus / "commit_types.types").read_text())
    assert tf.reliable == {"B", "C"}
    s = compose_types(tf.types, tf.reliable, name="commit_types")
    assert is_csa(s)
    assert is_crash_handling(s, tf.reliable).ok
    assert parse_system(dump_system(s)) == s
    assert parse_types(dump_types(tf.types, tf.reliable)).types == tf.types


def test_compose_degenerate_cases():
    s = compose_types({"A": END, "B": END}, [])
    assert all(s[p].states == {"end"} for p in "AB")
    assert is_crash_handling(s, [])
    one = compose_types({"A": END})
    assert one.channels == () or all(c.sender != c.receiver for c in one.channels)


def test_compose_peer_mismatch():
    with pytest.raises(ValidationError, match="peer mismatch"):
        compose_types({"A": parse_type("Z (+) { x.end }")})
    with pytest.raises(ValidationError, match="no type"):
        compose_types({"A": END}, ["B"])


def test_types_file_errors():
    with pytest.raises(TypeSyntaxError, match="twice"):
        parse_types("A: end\nA: end\n")
    with pytest.raises(TypeSyntaxError, match="outside"):
        parse_types("end\n")
    with pytest.raises(TypeSyntaxError, match="role A"):
        parse_types("A: B & {\n")
