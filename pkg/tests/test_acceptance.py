"""Acceptance run: one PASS/FAIL line per criterion.

Run with ``pytest -s tests/test_acceptance.py`` or as a script.  A criterion
that cannot be met fails here on purpose; the reasons are recorded in the
project notes, not hidden behind loosened thresholds.
"""

from __future__ import annotations

import random
import shutil
import sys
import tempfile
import time
from pathlib import Path

import networkx as nx
import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from fifocheck.bench import run_bench  # noqa: E402
from fifocheck.crash import augment_crash_handling, is_crash_handling  # noqa: E402
from fifocheck.interference import Interference, is_execution, reach_k  # noqa: E402
from fifocheck.io import load_system, parse_trace  # noqa: E402
from fifocheck.kmc import find_least_k  # noqa: E402
from fifocheck.model import Receive, Send  # noqa: E402
from fifocheck.rsc import (check_irsc, conflict_graph, is_irsc_equivalent,  # noqa: E402
                           valid_communications)
from fifocheck.session import (bounded_trace_equiv, occurs_in, parse_type,  # noqa: E402
                               structural_check, translate, translate_full)

import suites  # noqa: E402
from randsys import random_system  # noqa: E402
from test_crash import crash_free, drop  # noqa: E402
from test_session import EXAMPLE, automaton_graph, end_absorption, fig4b_graph  # noqa: E402
from typegen import random_type  # noqa: E402

CORPUS = HERE.parent / "src" / "fifocheck" / "corpus"
L, C, O = Interference.LOSSY, Interference.CORRUPT, Interference.OOO


def _timed(fn):
    t0 = time.monotonic()
    ok, detail = fn()
    return ok, detail, time.monotonic() - t0


# 1 ------------------------------------------------------------------------

def criterion_1():
    e = parse_trace("p>q!a\nq>p!b\nq>p?b\np>q!c\np>q?c\n")
    c1 = frozenset(map(frozenset, ({1, 5}, {2, 3}, {4})))
    c2 = frozenset(map(frozenset, ({1}, {2, 3}, {4, 5})))
    comms = valid_communications(e, L | C)
    n15, n23, n4 = frozenset({1, 5}), frozenset({2, 3}), frozenset({4})
    drawn = {(n15, n23), (n23, n15), (n23, n4)}
    edges = set(conflict_graph(e, c1).edges)
    parts = {
        "two communications": comms == {c1, c2},
        "C1 not equivalent": not is_irsc_equivalent(e, c1),
        "C2 equivalent": is_irsc_equivalent(e, c2),
        "conflict graph is exactly the 3 drawn edges": edges == drawn,
    }
    extra = sorted((sorted(a), sorted(b)) for a, b in edges - drawn)
    return all(parts.values()), f"{parts}; extra edges {extra}"


# 2 ------------------------------------------------------------------------

E_C = "s>r!start\ns>r?start\ns>r!data\ns>r?end\nr>s!ack\ns>r!data\n"
E_L = "s>r!start\ns>r?start\ns>r!data\ns>r?data\ns>r!end\n"
E_O = "s>r!start\ns>r?start\ns>r!data\ns>r!end\ns>r?end\nr>s!ack\nr>s?ack\ns>r?data\n"


def criterion_2():
    fig1 = load_system(CORPUS / "fig1.sys")
    out = {}
    for name, text, mode in (("e_c", E_C, C), ("e_l", E_L, L), ("e_o", E_O, O)):
        e = parse_trace(text)
        out[name] = (is_execution(fig1, e, mode).ok, is_execution(fig1, e).ok)
    ok = all(under and not perfect for under, perfect in out.values())
    return ok, "(own mode, no interference): " + str(out)


# 3 ------------------------------------------------------------------------

def criterion_3():
    fig3 = load_system(CORPUS / "fig3.sys")
    lk = find_least_k(fig3, 10)
    ahead_max = 0
    uneven = 0
    for g in reach_k(fig3, 3):
        sent = 1 if g.state("s") == "s1" else 0
        ahead_max = max(ahead_max, sent - len(g.buffer(("s", "p"))) + len(g.buffer(("s", "q"))))
        fills = {len(g.buffer(("s", x))) for x in "pqr"}
        uneven += len(fills) > 1
    ok = lk.found and lk.k == 1 and lk.verdict.kmc and ahead_max <= 1 and uneven > 0
    return ok, f"k={lk.k} kmc={lk.verdict.kmc if lk.verdict else None} " \
               f"max lead={ahead_max} uneven configurations={uneven}"


# 4 ------------------------------------------------------------------------

EXPECTED = {
    ("alternating_bit", "none"): {"kmc": True},
    ("alternating_bit", "lossy"): {"kexh": True, "ker": True, "kpg": False},
    ("alternating_bit", "corrupt"): {"kpg": False},
    ("commit", "lossy"): {"ker": False},
    ("client_server_logger", "none"): {"kmc": True, "rsc": False},
    ("paxos_2p3a", "none"): {"kmc": True, "rsc": True},
    ("paxos_2p3a", "lossy"): {"kexh": True, "ker": True, "kpg": True},
    ("paxos_2p3a", "corrupt"): {"ker": False},
}


def criterion_4():
    files = {p for p, _ in EXPECTED}
    mismatches = []
    with tempfile.TemporaryDirectory() as d:
        for p in sorted(files):
            shutil.copy(CORPUS / f"{p}.sys", d)
        rows = []
        for p in sorted(files):
            modes = [m for q, m in EXPECTED if q == p]
            rows += run_bench([Path(d) / f"{p}.sys"], kmax=10, timeout=300, modes=modes)
    for r in rows:
        for key, want in EXPECTED[r.protocol, r.mode].items():
            got = getattr(r, key)
            if got != want:
                why = " (timeout)" if r.timeout else " (cap)" if r.kmc_capped else ""
                mismatches.append(f"{r.protocol}/{r.mode} {key}={got}{why}, expected {want}")
    return not mismatches, "; ".join(mismatches) or "all cells match"


# 5-7 ----------------------------------------------------------------------

def criterion_5():
    r = suites.safety_implies_exhaustivity(200)
    return r.ok, f"{r.total} systems, {r.stats}, counterexamples {len(r.failures)}"


def criterion_6():
    r = suites.irsc_matches_oracle(100)
    return r.ok, f"{r.total - len(r.failures)}/{r.total} agree, {r.stats}"


def criterion_7():
    r = suites.abv_size_law(20)
    return r.ok, f"{r.total - len(r.failures)}/{r.total} match"


# 8 ------------------------------------------------------------------------

def criterion_8():
    t = parse_type(EXAMPLE)
    procs = ["A", "B", "C"]
    occ = occurs_in(t)
    a = translate(t, "C", procs, ["B", "C"])
    same = lambda x, y: sorted(d["label"] for d in x.values()) == sorted(
        d["label"] for d in y.values())
    iso = nx.is_isomorphic(automaton_graph(a, end_absorption), fig4b_graph(), edge_match=same)
    loops = sorted(str(x) for s, x, d in a.transitions if end_absorption(s, x, d))
    equiv = bool(bounded_trace_equiv(t, "C", procs, ["B", "C"], 8))
    rng = random.Random(2024)
    bad = 0
    for _ in range(200):
        owner = rng.choice(procs)
        tr = translate_full(random_type(rng, owner), owner, procs,
                            rng.sample(procs, rng.randint(0, 3)))
        bad += bool(structural_check(tr.automaton))
    ok = len(occ) == 8 and iso and equiv and bad == 0
    return ok, (f"|occurs|={len(occ)} isomorphic modulo end loops {loops}={iso} "
                f"trace-equivalent={equiv} structural failures={bad}/200")


# 9 ------------------------------------------------------------------------

def criterion_9():
    fig4a = load_system(CORPUS / "fig4a.sys")
    base = is_crash_handling(fig4a, ["s"]).ok
    ci = is_crash_handling(drop(fig4a, "s", lambda t: isinstance(t[1], Receive)
                                and t[1].message.is_crash), ["s"])
    cp = is_crash_handling(drop(fig4a, "c", lambda t: isinstance(t[1], Send)
                                and t[1].message.is_crash), ["s"])
    aug = augment_crash_handling(crash_free(fig4a), ["s"])
    cr = is_crash_handling(drop(aug, "s", lambda t: isinstance(t[1], Receive)
                                and t[1].message.is_crash and t[0] == t[2]), ["s"])
    named = (not ci.ok and "CI" in ci.conditions(), not cp.ok and "CP" in cp.conditions(),
             not cr.ok and "CR" in cr.conditions())
    rng = random.Random(4)
    good = 0
    for _ in range(100):
        s = random_system(rng, rng.choice((2, 3, 4)), 3, 5, internal=True)
        r = rng.sample(s.processes, rng.randint(0, len(s.processes)))
        good += is_crash_handling(augment_crash_handling(s, r), r).ok
    ok = base and all(named) and good == 100
    return ok, f"fig4a={base} mutations flagged (CI, CP, CR)={named} augmented ok={good}/100"


# 10 -----------------------------------------------------------------------

def criterion_10():
    px = load_system(CORPUS / "paxos_2p3a.sys")
    t0 = time.monotonic()
    r = check_irsc(px)
    took = time.monotonic() - t0
    return took < 300, f"check_irsc on {px.name} took {took:.1f} s (holds={r.holds})"


LIMITS = {1: 1, 2: 3, 3: 10, 4: 600, 5: 300, 6: 600, 7: 60, 8: 120, 9: 120, 10: 300}
CRITERIA = {n: globals()[f"criterion_{n}"] for n in LIMITS}


def report(n: int) -> tuple[bool, str]:
    ok, detail, took = _timed(CRITERIA[n])
    in_time = took <= LIMITS[n]
    ok = ok and in_time
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail} [{took:.1f} s / {LIMITS[n]} s]"
    return ok, line


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    ok, line = report(n)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [report(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
