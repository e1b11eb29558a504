"""Command-line front end.

Exit codes: 0 the property holds (or the command succeeded), 1 it fails and a
JSON witness is printed, 2 bad input or usage, 3 a resource cap or timeout.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
from contextlib import contextmanager
from pathlib import Path

from . import bench as bench_mod
from .crash import is_crash_handling
from .interference import DEFAULT_STATE_CAP, Interference, is_execution
from .io import dump_system, load_system, load_trace
from .kmc import NotCsaError, check_kmc, find_least_k
from .model import ResourceLimitError, ValidationError
from .rsc import check_irsc
from .session import TypeSyntaxError, check_type, compose_types, parse_types

OK, FAILS, BAD_INPUT, RESOURCE = 0, 1, 2, 3


class _Timeout(Exception):
    pass


@contextmanager
def _deadline(seconds: float | None):
    if not seconds or not hasattr(signal, "SIGALRM"):
        yield
        return

    def fire(signum, frame):
        raise _Timeout()

    old = signal.signal(signal.SIGALRM, fire)
    signal.setitimer(signal.ITIMER_REAL, seconds)
    try:
        yield
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        signal.signal(signal.SIGALRM, old)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, ensure_ascii=False))


def _mode(text: str | None) -> Interference:
    return Interference.parse(text)


def _names(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [x for x in (p.strip() for p in text.split(",")) if x]


# -- subcommands -------------------------------------------------------------

def cmd_verify_irsc(args) -> int:
    s = load_system(args.file)
    r = check_irsc(s, _mode(args.interference), cap=args.cap,
                   any_communication=args.any_communication, max_length=args.max_length)
    _emit(r.to_json())
    return OK if r.holds else FAILS


def cmd_verify_kmc(args) -> int:
    s = load_system(args.file)
    mode = _mode(args.interference)
    kw = dict(cap=args.cap, require_csa=not args.no_csa_check)
    if args.k is not None:
        v = check_kmc(s, args.k, mode, weak=args.weak, **kw)
        holds = v.kwmc if args.weak else v.kmc
        _emit({"k": args.k, "property": "kwmc" if args.weak else "kmc", "result": holds,
               "checks": v.to_json()})
        return OK if holds else FAILS
    res = find_least_k(s, args.kmax, mode, weak=args.weak, **kw)
    out = {"kmax": args.kmax, "property": "kwmc" if args.weak else "kmc", "result": res.found,
           "k": res.k}
    if res.verdict is not None:
        out["checks"] = res.verdict.to_json()
    _emit(out)
    return OK if res.found else FAILS


def cmd_verify_crash(args) -> int:
    s = load_system(args.file)
    rel = _names(args.reliable)
    rep = is_crash_handling(s, rel)
    out = rep.to_json()
    out["reliable"] = sorted(rel if rel is not None else (s.reliable or ()))
    _emit(out)
    return OK if rep.ok else FAILS


def cmd_translate(args) -> int:
    tf = parse_types(Path(args.types).read_text(encoding="utf-8"))
    errs = [f"{p}: {e}" for p, t in sorted(tf.types.items()) for e in check_type(t)]
    if errs:
        raise ValidationError(errs)
    rel = _names(args.reliable)
    rel = tf.reliable if rel is None else frozenset(rel)
    name = args.name or Path(args.types).stem
    s = compose_types(tf.types, rel, name=name, unconditional_crash=args.unconditional_crash)
    text = dump_system(s)
    if args.output and args.output != "-":
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return OK


def cmd_bench(args) -> int:
    modes = _names(args.modes) or list(bench_mod.MODES)
    encoding = {"lossy": args.lossy_encoding, "corrupt": args.corrupt_encoding}
    rows = bench_mod.run_bench(args.dir, args.kmax, args.timeout, modes, encoding=encoding,
                               cap=args.cap, workers=args.workers)
    csv_text = bench_mod.to_csv(rows)
    md = bench_mod.to_markdown(rows)
    if args.csv:
        Path(args.csv).write_text(csv_text, encoding="utf-8")
    if args.markdown:
        Path(args.markdown).write_text(md, encoding="utf-8")
    if not args.csv and not args.markdown:
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(md)
    for r in rows:
        if r.error:
            print(f"{r.protocol}/{r.mode}: {r.error}", file=sys.stderr)
    return OK


def cmd_trace(args) -> int:
    s = load_system(args.file)
    e = load_trace(args.exec)
    res = is_execution(s, e, _mode(args.interference), args.k, cap=args.cap)
    out = {"property": "execution", "mode": _mode(args.interference).label, "result": res.ok,
           "length": len(e)}
    if res.ok:
        out["configurations"] = [c.to_json() for c in res.witness]
    else:
        out["failed_at"] = res.failed_at
        out["action"] = str(e[res.failed_at - 1])
    _emit(out)
    return OK if res.ok else FAILS


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fifocheck", description=__doc__.splitlines()[0])
    ap.add_argument("--timeout", type=float, default=None,
                    help="wall-clock limit in seconds for verify/trace (exit 3 when exceeded)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, interference=True):
        p.add_argument("file")
        if interference:
            p.add_argument("--interference", default="none",
                           help="none, lossy, corrupt, ooo or a comma-joined combination")
        p.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP,
                       help="state cap for explorations")

    verify = sub.add_parser("verify", help="check a property of a system file")
    vsub = verify.add_subparsers(dest="property", required=True)

    p = vsub.add_parser("irsc", help="i-RSC membership")
    common(p)
    p.add_argument("--any-communication", action="store_true",
                   help="bounded check of the existential reading")
    p.add_argument("--max-length", type=int, default=8)
    p.set_defaults(fn=cmd_verify_irsc)

    p = vsub.add_parser("kmc", help="k-MC / k-WMC")
    common(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--k", type=int)
    g.add_argument("--kmax", type=int, default=10)
    p.add_argument("--weak", action="store_true", help="check k-WMC instead of k-MC")
    p.add_argument("--no-csa-check", action="store_true")
    p.set_defaults(fn=cmd_verify_kmc)

    p = vsub.add_parser("crash", help="crash-handling conditions")
    common(p, interference=False)
    p.add_argument("--reliable", default=None, help="comma-separated reliable processes")
    p.set_defaults(fn=cmd_verify_crash)

    p = sub.add_parser("translate", help="translate local types into a system file")
    p.add_argument("types")
    p.add_argument("--reliable", default=None)
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--name", default=None)
    p.add_argument("--unconditional-crash", action="store_true",
                   help="emit the crash chain for reliable roles too")
    p.set_defaults(fn=cmd_translate)

    p = sub.add_parser("bench", help="run the benchmark table over a corpus directory")
    p.add_argument("dir")
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--timeout", type=float, default=bench_mod.DEFAULT_TIMEOUT, dest="cell_timeout")
    p.add_argument("--modes", default=",".join(bench_mod.MODES))
    p.add_argument("--csv", default=None)
    p.add_argument("--markdown", default=None)
    p.add_argument("--lossy-encoding", choices=("semantic", "transform"),
                   default=bench_mod.DEFAULT_ENCODING["lossy"])
    p.add_argument("--corrupt-encoding", choices=("semantic", "transform"),
                   default=bench_mod.DEFAULT_ENCODING["corrupt"])
    p.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("trace", help="check that a trace is an execution")
    common(p)
    p.add_argument("--exec", required=True, help="trace file, one action per line")
    p.add_argument("--k", type=int, default=None, help="channel bound")
    p.set_defaults(fn=cmd_trace)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return BAD_INPUT if exc.code else OK
    if args.command == "bench":
        args.timeout = args.cell_timeout
    try:
        if args.command == "bench":
            return args.fn(args)
        with _deadline(args.timeout):
            return args.fn(args)
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: cannot read {exc.filename}", file=sys.stderr)
        return BAD_INPUT
    except (ValidationError, TypeSyntaxError, NotCsaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    except ResourceLimitError as exc:
        _emit({"result": None, "error": str(exc)})
        return RESOURCE
    except _Timeout:
        _emit({"result": None, "error": f"timeout after {args.timeout} s"})
        return RESOURCE


if __name__ == "__main__":
    sys.exit(main())
