"""Generate the bounded Paxos model (proposers x acceptors, fixed retries).

Broadcasts and quorum waits are unrolled into single sends and receives.
Acceptors cannot compare ballot numbers in a finite automaton, so each
request is answered by a nondeterministic choice between a positive reply
and a rejection.  Ballots are ordered by increasing number: proposers take
turns via a ``turn`` token, one ballot per turn.  A proposer collects one
reply from every acceptor and moves on with a majority.  ``chosenN`` and
the final ``halt`` are acknowledged by every acceptor before the token
moves, so no request of a later ballot can overtake them.  Acceptors stop
after a ``halt`` from every proposer.

Usage: python3 demos/build_paxos.py [retries] [proposers] [acceptors] > out.sys
"""

import sys


def proposer(i: int, nprop: int, accs: list[str], retries: int) -> list[str]:
    p = f"p{i}"
    nxt = f"p{i % nprop + 1}"
    prv = f"p{(i - 2) % nprop + 1}"
    quorum = len(accs) // 2 + 1
    full = (1 << len(accs)) - 1
    lines = [f"process {p}", "initial u0_go" if i == 1 else "initial u0"]

    def bcast(prefix: str, label: str, after: str) -> None:
        for j, a in enumerate(accs):
            dst = after if j == len(accs) - 1 else f"{prefix}{j + 1}"
            lines.append(f"{prefix}{j} -> {dst} : {p}>{a}!{label}")

    def acks(prefix: str, after: str) -> None:
        # any arrival order; states prefix<mask>
        for mask in range(full):
            for j, a in enumerate(accs):
                if mask >> j & 1:
                    continue
                m2 = mask | 1 << j
                dst = after if m2 == full else f"{prefix}{m2}"
                lines.append(f"{prefix}{mask} -> {dst} : {a}>{p}?ack")

    def wait(prefix: str, good: str, bad: str, win: str, lose: str) -> None:
        # states prefix_<mask>_<positives>
        for mask in range(full):
            for pos in range(bin(mask).count("1") + 1):
                for j, a in enumerate(accs):
                    if mask >> j & 1:
                        continue
                    m2 = mask | 1 << j
                    for label, d in ((good, 1), (bad, 0)):
                        npos = pos + d
                        if m2 == full:
                            dst = win if npos >= quorum else lose
                        else:
                            dst = f"{prefix}_{m2}_{npos}"
                        lines.append(f"{prefix}_{mask}_{pos} -> {dst} : {a}>{p}?{label}")

    def finish(src: str, t: int, tag: str) -> None:
        # leave turn t: halt everybody on the last turn, then hand the token on
        if t == retries - 1:
            lines.append(f"{src} -> {tag}halt0 : tau end")
            bcast(f"{tag}halt", "halt", f"{tag}hack0")
            acks(f"{tag}hack", f"{tag}pass")
            src = f"{tag}pass"
            if i == nprop:
                lines.append(f"{src} -> stopped : tau end")
            else:
                lines.append(f"{src} -> stopped : {p}>{nxt}!turn")
        else:
            nxt_state = f"{'d' if tag.startswith('d') or tag.startswith('w') else 'u'}{t + 1}"
            lines.append(f"{src} -> {nxt_state} : {p}>{nxt}!turn")

    for t in range(retries):
        n = i + nprop * t
        if not (t == 0 and i == 1):
            lines.append(f"u{t} -> u{t}_go : {prv}>{p}?turn")
        # undecided: run ballot n
        lines.append(f"u{t}_go -> b{n}_prep0 : tau ballot{n}")
        bcast(f"b{n}_prep", f"prep{n}", f"b{n}_w1_0_0")
        wait(f"b{n}_w1", f"prom{n}", f"rej{n}", f"b{n}_acc0", f"b{n}_lost")
        bcast(f"b{n}_acc", f"acc{n}", f"b{n}_w2_0_0")
        wait(f"b{n}_w2", f"accd{n}", f"rej{n}", f"b{n}_chosen0", f"b{n}_lost")
        bcast(f"b{n}_chosen", f"chosen{n}", f"b{n}_cack0")
        acks(f"b{n}_cack", f"b{n}_won")
        finish(f"b{n}_lost", t, f"l{t}_")
        finish(f"b{n}_won", t, f"w{t}_")
        # decided earlier: only hand the token on
        if t > 0:
            lines.append(f"d{t} -> d{t}_go : {prv}>{p}?turn")
            finish(f"d{t}_go", t, f"d{t}_")
    return lines


def acceptor(a: str, nprop: int, retries: int) -> list[str]:
    props = [f"p{i}" for i in range(1, nprop + 1)]
    lines = [f"process {a}", "initial idle"]

    def name(fin: frozenset) -> str:
        return "idle" + "".join(f"_{p}" for p in sorted(fin))

    subsets = [frozenset(p for k, p in enumerate(props) if m >> k & 1)
               for m in range(1 << nprop)]
    for fin in subsets:
        if len(fin) == nprop:
            continue
        q = name(fin)
        for i, p in enumerate(props, start=1):
            if p in fin:
                continue
            for r in range(retries):
                n = i + nprop * r
                for req, good in ((f"prep{n}", f"prom{n}"), (f"acc{n}", f"accd{n}")):
                    mid = f"{q}~{req}"
                    lines.append(f"{q} -> {mid} : {p}>{a}?{req}")
                    lines.append(f"{mid} -> {q} : {a}>{p}!{good}")
                    lines.append(f"{mid} -> {q} : {a}>{p}!rej{n}")
                lines.append(f"{q} -> {q}~chosen{n} : {p}>{a}?chosen{n}")
                lines.append(f"{q}~chosen{n} -> {q} : {a}>{p}!ack")
            lines.append(f"{q} -> {q}~halt{p} : {p}>{a}?halt")
            lines.append(f"{q}~halt{p} -> {name(fin | {p})} : {a}>{p}!ack")
    return lines


def build(retries: int = 2, nprop: int = 2, nacc: int = 3) -> str:
    accs = [f"a{j}" for j in range(1, nacc + 1)]
    name = f"paxos_{nprop}p{nacc}a" if retries == 2 else f"paxos{retries}_{nprop}p{nacc}a"
    out = [f"# Bounded Paxos: {retries} ballots per proposer, {nprop} proposers, "
           f"{nacc} acceptors (generated by demos/build_paxos.py).",
           f"system {name}", ""]
    for i in range(1, nprop + 1):
        out += proposer(i, nprop, accs, retries) + [""]
    for a in accs:
        out += acceptor(a, nprop, retries) + [""]
    return "\n".join(out)


if __name__ == "__main__":
    args = [int(x) for x in sys.argv[1:4]]
    sys.stdout.write(build(*args))
