"""Convert held-out UMR sentences and score them against gold AMR with Smatch.

    python scripts/validate_converter.py UMR_FILES... --ids held_out.ids --gold gold.amr \
        [--rules my.rules] [--averaging macro|micro] [--seed 0]

``gold.amr`` holds one AMR per id, in the order of the id list. Gold graphs
may carry ``# ::id`` lines; when they do, they are matched by id instead.
"""
import argparse
import sys
from pathlib import Path

from umrtk.cli import load_corpus
from umrtk.convert import convert, default_rules, load_rules
from umrtk.corpus import SectionHeaders, read_id_list
from umrtk.graph import read_penman_blocks
from umrtk.smatch import corpus_smatch


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("umr", nargs="+")
    ap.add_argument("--ids", required=True)
    ap.add_argument("--gold", required=True)
    ap.add_argument("--rules")
    ap.add_argument("--language", default="en")
    ap.add_argument("--averaging", choices=("macro", "micro"), default="macro")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rules = load_rules(args.rules) if args.rules else default_rules()
    by_id = {a.sentence_id: a for a in
             load_corpus(args.umr, args.language, SectionHeaders(), lenient=False)}
    ids = read_id_list(args.ids)
    gold = read_penman_blocks(Path(args.gold).read_text(encoding="utf-8"))
    gold_by_id = {g.metadata["id"]: g for g in gold if "id" in g.metadata}
    if len(gold_by_id) == len(gold):
        gold = [gold_by_id[i] for i in ids]
    elif len(gold) != len(ids):
        sys.exit(f"{len(ids)} ids but {len(gold)} gold graphs")

    pairs = []
    for sid, g in zip(ids, gold):
        amr, _ = convert(by_id[sid].sentence_graph, rules)
        pairs.append((amr, g))
    res = corpus_smatch(pairs, seed=args.seed, averaging=args.averaging)
    for sid, r in zip(ids, res.per_pair):
        print(f"{sid}\t{r.f1:.4f}")
    print(f"pairs\t{len(pairs)}")
    print(f"smatch_{args.averaging}\t{res.average_f1:.4f}")


if __name__ == "__main__":
    main()
