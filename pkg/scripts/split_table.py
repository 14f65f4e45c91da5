"""Split a UMR release 70/10/20 per language and print the sizes table.

    python scripts/split_table.py UMR_DIR [--exclude held_out.ids] [--seed 0] [--out splits/]

Cells read ``total (document-level)``.
"""
import argparse
import sys

from umrtk.cli import load_corpus
from umrtk.corpus import SectionHeaders, corpus_stats, exclude_ids, read_id_list, split_corpus


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("umr_dir")
    ap.add_argument("--exclude")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--contiguous", action="store_true")
    ap.add_argument("--out", help="write id manifests here")
    args = ap.parse_args(argv)

    corpus = load_corpus([args.umr_dir], None, SectionHeaders(), lenient=True)
    if args.exclude:
        res = exclude_ids(corpus, read_id_list(args.exclude))
        print(f"excluded {res.removed}; {len(res.missing)} ids not found", file=sys.stderr)
        corpus = list(res.kept)
    split = split_corpus(corpus, seed=args.seed, contiguous=args.contiguous)
    if args.out:
        split.write_manifests(args.out)
    sys.stdout.write(corpus_stats(split).as_wide())


if __name__ == "__main__":
    main()
