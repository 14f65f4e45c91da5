"""Mean sentence length (tokens) of one or more text files, one sentence per line.

    python scripts/length_stats.py refs.txt system_a.txt system_b.txt [--language en]
"""
import argparse
from pathlib import Path

from umrtk.metrics import length_table, read_lines, tokenize


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("files", nargs="+")
    ap.add_argument("--language", default="en")
    args = ap.parse_args(argv)
    sets = {
        f: [tokenize(s, args.language) for s in read_lines(Path(f).read_text(encoding="utf-8"))]
        for f in args.files
    }
    for name, mean in length_table(sets).items():
        print(f"{name}\t{mean:.2f}")


if __name__ == "__main__":
    main()
