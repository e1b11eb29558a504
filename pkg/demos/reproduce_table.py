"""Regenerate the benchmark table for the bundled corpus.

Writes demos/out/table.csv and demos/out/table.md and prints the markdown.
About four minutes on one core; pass a smaller timeout to trade cells for TO.

    python3 demos/reproduce_table.py [timeout-seconds]
"""

import sys
from pathlib import Path

from fifocheck.bench import run_bench, to_csv, to_markdown

HERE = Path(__file__).resolve().parent
CORPUS = HERE.parent / "src" / "fifocheck" / "corpus"


def main():
    timeout = float(sys.argv[1]) if len(sys.argv) > 1 else 300.0
    rows = run_bench(CORPUS, kmax=10, timeout=timeout)
    out = HERE / "out"
    out.mkdir(exist_ok=True)
    (out / "table.csv").write_text(to_csv(rows), encoding="utf-8")
    md = to_markdown(rows)
    (out / "table.md").write_text(md, encoding="utf-8")
    print(md)


if __name__ == "__main__":
    main()
