"""Evaluation transformations and the benchmark runner behind ``fifocheck bench``."""

from __future__ import annotations

import csv
import io
import multiprocessing as mp
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .interference import DEFAULT_STATE_CAP, Interference
from .io import load_system
from .kmc import check_kmc, find_orphan
from .model import FifoAutomaton, Receive, ResourceLimitError, Send, System
from .rsc import check_irsc

MODES = ("none", "ooo", "lossy", "corrupt")
CSV_COLUMNS = ("protocol", "mode", "k", "kexh", "ker", "kpg", "kmc", "kwmc", "rsc",
               "millis", "timeout")
DEFAULT_TIMEOUT = 300.0
DEFAULT_ENCODING = {"lossy": "semantic", "corrupt": "transform"}


def _alphabet(s: System) -> list:
    return [m for m in s.messages if not m.is_crash]


def transform_lossy(s: System) -> System:
    """Add a consume-and-discard receive self-loop for every incoming channel and
    message at every state."""
    sigma = _alphabet(s)
    automata = {}
    for p in s.processes:
        a = s[p]
        trs = list(a.transitions)
        have = set(trs)
        for q in sorted(a.states):
            for c in s.channels:
                if c.receiver != p:
                    continue
                for m in sigma:
                    t = (q, Receive(c, m), q)
                    if t not in have:
                        have.add(t)
                        trs.append(t)
        automata[p] = FifoAutomaton(p, a.states, tuple(trs), a.initial)
    return System(automata, s.name, s.reliable, s.annotations)


def channel_alphabet(s: System) -> dict:
    """Messages that some transition sends or receives on each channel."""
    out: dict = {c: set() for c in s.channels}
    for a in s.automata.values():
        for act in a.actions:
            if isinstance(act, (Send, Receive)) and not act.message.is_crash:
                out[act.channel].add(act.message)
    return {c: sorted(ms) for c, ms in out.items()}


def transform_corrupt(s: System, per_channel: bool = False) -> System:
    """Let every send transition carry any message of the alphabet.

    With ``per_channel`` a send may only turn into messages that the
    protocol uses on the same channel.
    """
    sigma = _alphabet(s)
    by_chan = channel_alphabet(s) if per_channel else None
    automata = {}
    for p in s.processes:
        a = s[p]
        trs = list(a.transitions)
        have = set(trs)
        for src, act, dst in a.transitions:
            if not isinstance(act, Send) or act.message.is_crash:
                continue
            for m in (by_chan[act.channel] if per_channel else sigma):
                t = (src, Send(act.channel, m), dst)
                if t not in have:
                    have.add(t)
                    trs.append(t)
        automata[p] = FifoAutomaton(p, a.states, tuple(trs), a.initial)
    return System(automata, s.name, s.reliable, s.annotations)


def encode(s: System, mode: str, encoding: dict | None = None) -> tuple[System, Interference, bool]:
    """System, semantic mode and self-loop flag used for one benchmark column.

    ``encoding`` maps ``lossy``/``corrupt`` to ``semantic`` (interference
    semantics) or ``transform`` (the syntactic transformation checked
    without interference).
    """
    enc = dict(DEFAULT_ENCODING, **(encoding or {}))
    if mode in ("none", "ooo"):
        return s, Interference.parse(mode), False
    if mode not in enc:
        raise ValueError(f"unknown benchmark mode {mode!r}")
    if enc[mode] == "semantic":
        return s, Interference.parse(mode), False
    if enc[mode] != "transform":
        raise ValueError(f"unknown encoding {enc[mode]!r} for {mode}")
    if mode == "lossy":
        return transform_lossy(s), Interference.NONE, True
    return transform_corrupt(s), Interference.NONE, False


# -- rows ------------------------------------------------------------------

@dataclass
class BenchRow:
    protocol: str
    mode: str
    k: int | None = None
    kexh: bool | None = None
    ker: bool | None = None
    kpg: bool | None = None
    rsc: bool | None = None
    millis: int = 0
    kmc_timeout: bool = False
    rsc_timeout: bool = False
    kmc_capped: bool = False
    rsc_capped: bool = False
    error: str | None = None
    notes: list = field(default_factory=list)

    @property
    def kmc(self) -> bool | None:
        return _conj(self.kexh, self.ker, self.kpg)

    @property
    def kwmc(self) -> bool | None:
        return _conj(self.kexh, self.ker)

    @property
    def timeout(self) -> bool:
        return self.kmc_timeout or self.rsc_timeout

    def csv_row(self) -> list[str]:
        def b(v):
            return "" if v is None else str(v).lower()
        return [self.protocol, self.mode, "" if self.k is None else str(self.k),
                b(self.kexh), b(self.ker), b(self.kpg), b(self.kmc), b(self.kwmc), b(self.rsc),
                str(self.millis), b(self.timeout)]


def _conj(*vals) -> bool | None:
    if any(v is False for v in vals):
        return False
    if any(v is None for v in vals):
        return None
    return True


def _least_k_cell(s: System, mode: Interference, loops: bool, kmax: int, cap: int):
    """Verdicts at the least k where kMC holds, else where kWMC holds, else at the last k.

    Returns (k, verdict dict, notes).
    """
    first_weak = None
    last = None
    notes = []
    for k in range(1, kmax + 1):
        try:
            v = check_kmc(s, k, mode, cap=cap, require_csa=False, ignore_self_loops=loops)
        except ResourceLimitError as exc:
            notes.append(str(exc))
            if last is not None:
                notes.append(f"verdicts from k={last.k}")
                break
            # no bound completed: an orphaned message still refutes k-ER for every k
            ce = find_orphan(s, k, mode, cap)
            if ce is None:
                raise
            notes.append(f"k-ER refuted on the fly: {ce.explanation}")
            return None, {"kexh": None, "ker": False, "kpg": None}, notes
        last = v
        if v.kmc:
            return k, _verdicts(v), notes
        if v.kwmc and first_weak is None:
            first_weak = k, _verdicts(v), notes
        if v.saturated:
            break
    if first_weak:
        return first_weak
    return None, _verdicts(last), notes


def _verdicts(v) -> dict:
    return {"kexh": v.k_exhaustive, "ker": v.k_er, "kpg": v.k_pg}


def _kmc_job(path: str, mode: str, encoding: dict, kmax: int, cap: int):
    s, sem, loops = encode(load_system(path), mode, encoding)
    k, verdicts, notes = _least_k_cell(s, sem, loops, kmax, cap)
    return dict(verdicts, k=k, notes=notes)


def _rsc_job(path: str, mode: str, encoding: dict, kmax: int, cap: int):
    s, sem, _ = encode(load_system(path), mode, encoding)
    return {"rsc": check_irsc(s, sem, cap=cap).holds}


def _worker(fn, args, conn):
    try:
        conn.send(("ok", fn(*args)))
    except ResourceLimitError as exc:
        conn.send(("cap", str(exc)))
    except Exception as exc:  # reported in the row, the run goes on
        conn.send(("error", f"{type(exc).__name__}: {exc}"))
    finally:
        conn.close()


@dataclass
class _Job:
    row: BenchRow
    kind: str
    fn: object
    args: tuple


def _run_jobs(jobs: list[_Job], timeout: float, workers: int) -> None:
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    pending = list(jobs)
    running: list = []
    while pending or running:
        while pending and len(running) < workers:
            job = pending.pop(0)
            recv, send = ctx.Pipe(duplex=False)
            proc = ctx.Process(target=_worker, args=(job.fn, job.args, send), daemon=True)
            proc.start()
            send.close()
            running.append((job, proc, recv, time.monotonic()))
        still = []
        for job, proc, recv, start in running:
            elapsed = time.monotonic() - start
            # a worker may finish between the two checks, so poll again once it is dead
            if recv.poll() or (not proc.is_alive() and recv.poll()):
                try:
                    status, payload = recv.recv()
                except EOFError:
                    status, payload = "error", "worker exited without a result"
                proc.join()
                _record(job, status, payload, elapsed)
            elif not proc.is_alive():
                _record(job, "error", f"worker died with code {proc.exitcode}", elapsed)
            elif elapsed > timeout:
                proc.terminate()
                proc.join()
                _record(job, "timeout", None, elapsed)
            else:
                still.append((job, proc, recv, start))
        running = still
        if running:
            time.sleep(0.01)


def _record(job: _Job, status: str, payload, elapsed: float) -> None:
    row = job.row
    row.millis += int(elapsed * 1000)
    if status == "ok":
        for key, val in payload.items():
            if key == "notes":
                row.notes += [f"{job.kind}: {n}" for n in val]
            else:
                setattr(row, key, val)
    elif status == "timeout":
        setattr(row, f"{job.kind}_timeout", True)
    elif status == "cap":
        setattr(row, f"{job.kind}_capped", True)
        row.notes.append(f"{job.kind}: {payload}")
    else:
        row.error = payload


def corpus_files(corpus: str | Path) -> list[Path]:
    path = Path(corpus)
    if path.is_file():
        return [path]
    return sorted(path.glob("*.sys"))


def run_bench(corpus: str | Path | Sequence, kmax: int = 10, timeout: float = DEFAULT_TIMEOUT,
              modes: Iterable[str] = MODES, *, encoding: dict | None = None,
              cap: int = DEFAULT_STATE_CAP, workers: int | None = None) -> list[BenchRow]:
    """Run kMC/kWMC and i-RSC for each protocol and mode, one isolated job per check."""
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    modes = list(modes)
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown benchmark mode {m!r}")
    files = corpus_files(corpus) if isinstance(corpus, (str, Path)) else [Path(c) for c in corpus]
    systems = [(load_system(f).name, str(f)) for f in files]
    rows = []
    jobs = []
    for name, path in sorted(systems):
        for m in modes:
            row = BenchRow(name, m)
            rows.append(row)
            args = (path, m, dict(encoding or {}), kmax, cap)
            jobs.append(_Job(row, "kmc", _kmc_job, args))
            jobs.append(_Job(row, "rsc", _rsc_job, args))
    _run_jobs(jobs, timeout, workers or max(1, min(4, mp.cpu_count())))
    return rows


# -- reports -----------------------------------------------------------------

def to_csv(rows: Iterable[BenchRow], timings: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = CSV_COLUMNS if timings else tuple(c for c in CSV_COLUMNS if c != "millis")
    w.writerow(cols)
    for r in rows:
        cells = r.csv_row()
        if not timings:
            del cells[CSV_COLUMNS.index("millis")]
        w.writerow(cells)
    return buf.getvalue()


def glyph(value: bool | None, timed_out: bool = False, capped: bool = False) -> str:
    if timed_out:
        return "TO"
    if value is None:
        return "CAP" if capped else "?"
    return "✓" if value else "✗"


def to_markdown(rows: Iterable[BenchRow]) -> str:
    """Table with the column layout of the usual kMC/RSC evaluation table."""
    rows = list(rows)
    protocols = list(dict.fromkeys(r.protocol for r in rows))
    modes = [m for m in MODES if any(r.mode == m for r in rows)]
    by = {(r.protocol, r.mode): r for r in rows}
    head = ["Protocol"]
    for m in modes:
        if m in ("none", "ooo"):
            head += [f"{m} kmc", f"{m} rsc"]
        else:
            head += [f"{m} k-exh", f"{m} k-ER", f"{m} k-PG", f"{m} rsc"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for p in protocols:
        cells = [p]
        for m in modes:
            r = by.get((p, m))
            if r is None:
                cells += ["", ""] if m in ("none", "ooo") else ["", "", "", ""]
                continue
            to, cap = r.kmc_timeout, r.kmc_capped
            if m in ("none", "ooo"):
                cells.append(glyph(r.kmc, to, cap))
            else:
                cells += [glyph(r.kexh, to, cap), glyph(r.ker, to, cap), glyph(r.kpg, to, cap)]
            cells.append(glyph(r.rsc, r.rsc_timeout, r.rsc_capped))
        lines.append("| " + " | ".join(cells) + " |")
    notes = [f"- {r.protocol}/{r.mode}: {n}" for r in rows for n in r.notes]
    notes += [f"- {r.protocol}/{r.mode}: error: {r.error}" for r in rows if r.error]
    if notes:
        lines += ["", "CAP: state cap reached; ?: not determined.", ""] + notes
    return "\n".join(lines) + "\n"


# -- encoding cross-check ----------------------------------------------------

@dataclass
class Divergence:
    k: int
    semantic: bool
    transformed: bool


def compare_lossy_encodings(s: System, kmax: int = 3, cap: int = DEFAULT_STATE_CAP) -> list[Divergence]:
    """kWMC under lossy semantics versus the self-loop transformation, per k."""
    t = transform_lossy(s)
    out = []
    for k in range(1, kmax + 1):
        a = check_kmc(s, k, Interference.LOSSY, weak=True, cap=cap, require_csa=False).kwmc
        b = check_kmc(t, k, Interference.NONE, weak=True, cap=cap, require_csa=False,
                      ignore_self_loops=True).kwmc
        if a != b:
            out.append(Divergence(k, a, b))
    return out
