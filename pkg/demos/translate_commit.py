"""Walk through the local-type translation on the three-role commit example.

Prints the occurrence set of role C, its automaton with and without the
crash chain, and the crash-handling verdict of the composed system.
"""

from pathlib import Path

from fifocheck.crash import is_crash_handling
from fifocheck.io import dump_system
from fifocheck.session import (bounded_trace_equiv, compose_types, format_type, occurs_in,
                               parse_types, translate)

CORPUS = Path(__file__).resolve().parent.parent / "src" / "fifocheck" / "corpus"


def show(a):
    for src, act, dst in a.transitions:
        print(f"  {src:>8} --{act}--> {dst}")


def main():
    tf = parse_types((CORPUS / "commit_types.types").read_text(encoding="utf-8"))
    procs = sorted(tf.types)
    c = tf.types["C"]
    print("type of C:", format_type(c))
    print(f"occurs in ({len(occurs_in(c))} terms):")
    for t in sorted(occurs_in(c), key=format_type):
        print("  ", format_type(t))

    print("\nC with R = {B, C} (no crash chain):")
    show(translate(c, "C", procs, ["B", "C"]))
    print("\nC assumed unreliable (chain appended):")
    show(translate(c, "C", procs, ["B"]))
    print("\ntrace equivalent to depth 8:", bool(bounded_trace_equiv(c, "C", procs, ["B", "C"], 8)))

    s = compose_types(tf.types, tf.reliable, name="commit_types")
    print("\ncomposed system is crash-handling:", is_crash_handling(s, tf.reliable).ok)
    print()
    print(dump_system(s))


if __name__ == "__main__":
    main()
