"""Command-line entry point: ``umrtk <subcommand> ...``.

Exit status is 0 on success, 1 when an input fails to parse, convert or
score, and 2 on usage errors. Every run that has an output directory writes
``manifest.json`` there (arguments, resolved config, input and output
hashes); ``umrtk --manifest PATH`` replays such a run.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .convert import (REPORT_HEADER, ConversionReport, DisconnectedAfterConversion, RuleError,
                      convert, default_rules, load_rules)
from .corpus import (PARTITIONS, BadRatios, CorpusSplit, EmptyCorpus, SectionHeaders,
                     UmrAnnotation, UmrFormatError, corpus_stats, exclude_ids,
                     parse_umr_file_with_diagnostics, read_id_list, split_corpus)
from .graph import GraphError, SemGraph, read_penman_blocks, serialize_penman
from .metrics import EvalPair, evaluate, read_lines
from .scorer_client import ScorerEndpoint
from .smatch import corpus_smatch

log = logging.getLogger("umrtk")

UMR_SUFFIXES = (".txt", ".umr")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


@dataclass
class PipelineConfig:
    subcommand: str
    inputs: list[str] = field(default_factory=list)
    output_dir: str | None = None
    rules: str | None = None
    headers: dict[str, str] = field(default_factory=dict)
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    seed: int = 0
    contiguous: bool = False
    restarts: int = 4
    averaging: str = "macro"
    smoothing: str = "add-one"
    language: str | None = None
    strict: bool = False
    lenient: bool = False
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        for p in self.inputs:
            if not Path(p).exists():
                raise UsageError(f"input not found: {p}")
        if self.rules is not None and not Path(self.rules).is_file():
            raise UsageError(f"rule file not found: {self.rules}")
        if self.jobs < 1:
            raise UsageError("--jobs must be at least 1")


# ---------------------------------------------------------------------------
# helpers

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _input_files(paths: Sequence[str]) -> list[Path]:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(f for f in p.rglob("*") if f.is_file()))
        else:
            out.append(p)
    return out


def _write_manifest(cfg: PipelineConfig, argv: Sequence[str], outputs: Sequence[Path]) -> Path | None:
    if cfg.output_dir is None:
        return None
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "umrtk",
        "version": __version__,
        "python": platform.python_version(),
        "argv": list(argv),
        "config": asdict(cfg),
        "inputs": {str(p): _sha256(p) for p in _input_files(cfg.inputs)},
        "outputs": {str(p): _sha256(p) for p in outputs if p.exists()},
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if cfg.rules:
        manifest["inputs"][cfg.rules] = _sha256(Path(cfg.rules))
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _language_for(path: Path, root: Path, override: str | None) -> str:
    if override:
        return override
    rel = path.relative_to(root) if root.is_dir() else Path(path.name)
    if len(rel.parts) > 1:
        return rel.parts[0]
    stem = path.stem
    for sep in ("_", "-", "."):
        if sep in stem:
            return stem.split(sep, 1)[0]
    return stem


def load_corpus(paths: Sequence[str], language: str | None, headers: SectionHeaders,
                lenient: bool) -> list[UmrAnnotation]:
    """Read UMR files (or directories of them) in sorted path order.

    Without ``language``, a file's language is its first directory under the
    given root, or else the file-name prefix before ``_``/``-``.
    """
    corpus: list[UmrAnnotation] = []
    for root in map(Path, paths):
        files = (sorted(f for f in root.rglob("*") if f.is_file() and f.suffix in UMR_SUFFIXES)
                 if root.is_dir() else [root])
        for f in files:
            lang = _language_for(f, root, language)
            anns, diags = parse_umr_file_with_diagnostics(
                f.read_text(encoding="utf-8"), lang, document=f.stem, headers=headers,
                lenient=lenient,
            )
            for d in diags:
                print(f"{f}: {d}", file=sys.stderr)
            corpus.extend(anns)
    return corpus


def _looks_like_umr(text: str, headers: SectionHeaders) -> bool:
    return headers.sentence_graph.lower() in text.lower()


def _read_graphs(path: Path, fmt: str, cfg: PipelineConfig, headers: SectionHeaders):
    """(id, text, graph) triples from a UMR or PENMAN file."""
    text = path.read_text(encoding="utf-8")
    if fmt == "auto":
        fmt = "umr" if _looks_like_umr(text, headers) else "penman"
    if fmt == "umr":
        lang = cfg.language or _language_for(path, path, None)
        anns, diags = parse_umr_file_with_diagnostics(
            text, lang, document=path.stem, headers=headers, lenient=cfg.lenient)
        for d in diags:
            print(f"{path}: {d}", file=sys.stderr)
        return [(a.sentence_id, a.text, a.sentence_graph) for a in anns]
    graphs = read_penman_blocks(text)
    return [(g.metadata.get("id", f"{path.stem}:{n}"), g.metadata.get("snt", ""), g)
            for n, g in enumerate(graphs, 1)]


def _parse_ratios(s: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(x) for x in s.split(","))
    except ValueError:
        raise UsageError(f"--ratios expects three comma-separated numbers, got {s!r}")
    if len(parts) != 3:
        raise UsageError(f"--ratios expects three comma-separated numbers, got {s!r}")
    return parts


def _parse_headers(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--header expects key=value, got {item!r}")
        out[key.strip()] = value
    return out


def _headers(cfg: PipelineConfig) -> SectionHeaders:
    try:
        return SectionHeaders.from_overrides(cfg.headers)
    except ValueError as err:
        raise UsageError(str(err))


# ---------------------------------------------------------------------------
# subcommands

def cmd_validate(args, cfg: PipelineConfig) -> tuple[int, list[Path]]:
    headers = _headers(cfg)
    bad = 0
    lines = []
    for f in _input_files(cfg.inputs):
        try:
            graphs = _read_graphs(f, args.format, cfg, headers)
        except (GraphError, UmrFormatError) as err:
            bad += 1
            lines.append(f"{f}\tERROR\t{err}")
            continue
        lines.append(f"{f}\tOK\t{len(graphs)} graphs")
    print("\n".join(lines))
    outputs = []
    if cfg.output_dir:
        out = Path(cfg.output_dir) / "validate.tsv"
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")
        outputs.append(out)
    return (1 if bad else 0), outputs


def _convert_one(item):
    sid, text, graph, rules, strict = item
    try:
        amr, report = convert(graph, rules, strict=strict)
    except DisconnectedAfterConversion as err:
        return sid, text, None, str(err)
    return sid, text, amr, report


def cmd_convert(args, cfg: PipelineConfig) -> tuple[int, list[Path]]:
    if cfg.output_dir is None:
        raise UsageError("convert needs -o OUTDIR")
    rules = load_rules(cfg.rules) if cfg.rules else default_rules()
    headers = _headers(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[Path] = []
    status = 0
    report_rows = []
    for f in _input_files(cfg.inputs):
        items = [(sid, text, g, rules, cfg.strict) for sid, text, g in
                 _read_graphs(f, args.format, cfg, headers)]
        if cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                results = list(pool.map(_convert_one, items, chunksize=16))
        else:
            results = list(map(_convert_one, items))
        blocks = []
        total = ConversionReport()
        for sid, text, amr, report in results:
            if amr is None:
                print(f"{f}: {sid}: {report}", file=sys.stderr)
                status = 1
                continue
            header = [f"# ::id {sid}"] + ([f"# ::snt {text}"] if text else [])
            blocks.append("\n".join(header + [serialize_penman(amr)]))
            report_rows.extend(report.rows(sid))
            total.merge(report)
        amr_path = out / f"{f.stem}.amr"
        amr_path.write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
        outputs.append(amr_path)
        log.info("%s: %d graphs, %d pronoun substitutions", f, len(blocks),
                 len(total.pronoun_substitutions))
    report_path = Path(args.report) if args.report else out / "conversion_report.tsv"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(
        "\n".join("\t".join(r) for r in [REPORT_HEADER, *report_rows]) + "\n", encoding="utf-8")
    outputs.append(report_path)
    return status, outputs


def cmd_smatch(args, cfg: PipelineConfig) -> tuple[int, list[Path]]:
    test_path, gold_path = map(Path, cfg.inputs)
    tests = read_penman_blocks(test_path.read_text(encoding="utf-8"))
    golds = read_penman_blocks(gold_path.read_text(encoding="utf-8"))
    if len(tests) != len(golds):
        raise InputError(f"{test_path} has {len(tests)} graphs but {gold_path} has {len(golds)}")
    res = corpus_smatch(list(zip(tests, golds)), restarts=cfg.restarts, seed=cfg.seed,
                        averaging=cfg.averaging, jobs=cfg.jobs)
    print(f"Pairs: {len(golds)}")
    print(f"Precision: {res.precision:.4f}")
    print(f"Recall: {res.recall:.4f}")
    print(f"F1: {res.average_f1:.4f} ({cfg.averaging})")
    outputs = []
    per_pair = args.per_pair or (str(Path(cfg.output_dir) / "smatch.tsv") if cfg.output_dir else None)
    if per_pair:
        rows = ["index\tprecision\trecall\tf1\tmatched\ttest_triples\tgold_triples"]
        for i, r in enumerate(res.per_pair):
            rows.append(f"{i}\t{r.precision:.6f}\t{r.recall:.6f}\t{r.f1:.6f}\t"
                        f"{r.matched_triples}\t{r.test_triples}\t{r.gold_triples}")
        p = Path(per_pair)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text("\n".join(rows) + "\n", encoding="utf-8")
        outputs.append(p)
    return 0, outputs


def _load_and_exclude(args, cfg: PipelineConfig) -> list[UmrAnnotation]:
    corpus = load_corpus(cfg.inputs, cfg.language, _headers(cfg), cfg.lenient)
    if getattr(args, "exclude", None):
        res = exclude_ids(corpus, read_id_list(args.exclude))
        print(f"excluded {res.removed} annotations; {len(res.missing)} ids not found",
              file=sys.stderr)
        corpus = list(res.kept)
    return corpus


def cmd_split(args, cfg: PipelineConfig) -> tuple[int, list[Path]]:
    if cfg.output_dir is None:
        raise UsageError("split needs -o OUTDIR")
    corpus = _load_and_exclude(args, cfg)
    split = split_corpus(corpus, cfg.ratios, cfg.seed, contiguous=cfg.contiguous)
    outputs = split.write_manifests(cfg.output_dir)
    stats_path = Path(cfg.output_dir) / "stats.tsv"
    stats_path.write_text(corpus_stats(split).to_tsv(), encoding="utf-8")
    outputs.append(stats_path)
    for lang, sizes in split.sizes().items():
        print(f"{lang}\t" + "\t".join(map(str, sizes)))
    return 0, outputs


def _split_from_manifests(corpus: list[UmrAnnotation], split_dir: Path) -> CorpusSplit:
    by_id = {a.sentence_id: a for a in corpus}
    partitions: dict[str, dict[str, tuple[UmrAnnotation, ...]]] = {}
    for f in sorted(split_dir.glob("*.ids")):
        lang, _, part = f.stem.rpartition(".")
        ids = read_id_list(f)
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise InputError(f"{f}: {len(missing)} ids not in corpus, e.g. {missing[0]}")
        partitions.setdefault(lang, {})[part] = tuple(by_id[i] for i in ids)
    return CorpusSplit(partitions, (0.0, 0.0, 0.0), 0)


def cmd_stats(args, cfg: PipelineConfig) -> tuple[int, list[Path]]:
    corpus = _load_and_exclude(args, cfg)
    if args.splits:
        table = corpus_stats(_split_from_manifests(corpus, Path(args.splits)))
    else:
        table = corpus_stats(corpus)
    text = table.as_wide() if args.layout == "table" else table.to_tsv()
    sys.stdout.write(text)
    outputs = []
    if cfg.output_dir:
        p = Path(cfg.output_dir) / "stats.tsv"
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        outputs.append(p)
    return 0, outputs


def _read_eval_pairs(args, cfg: PipelineConfig) -> list[EvalPair]:
    lang = cfg.language or "en"
    if len(cfg.inputs) == 1:
        pairs = []
        for n, line in enumerate(read_lines(Path(cfg.inputs[0]).read_text(encoding="utf-8")), 1):
            cols = line.split("\t")
            if n == 1 and [c.lower() for c in cols[:3]] == ["id", "candidate", "reference"]:
                continue
            if len(cols) != 3:
                raise InputError(f"{cfg.inputs[0]}:{n}: expected id<TAB>candidate<TAB>reference")
            pairs.append(EvalPair.from_text(cols[1], cols[2], lang, cols[0]))
        return pairs
    cands = read_lines(Path(cfg.inputs[0]).read_text(encoding="utf-8"))
    refs = read_lines(Path(cfg.inputs[1]).read_text(encoding="utf-8"))
    if len(cands) != len(refs):
        raise InputError(f"{len(cands)} candidates but {len(refs)} references")
    return [EvalPair.from_text(c, r, lang, str(i)) for i, (c, r) in enumerate(zip(cands, refs))]


def cmd_eval_text(args, cfg: PipelineConfig) -> tuple[int, list[Path]]:
    if len(cfg.inputs) not in (1, 2):
        raise UsageError("eval-text takes CANDIDATES REFERENCES or a single TSV")
    pairs = _read_eval_pairs(args, cfg)
    if not pairs:
        raise InputError("no sentence pairs to evaluate")
    scorers = []
    for spec in args.scorer or ():
        name, sep, url = spec.partition("=")
        if not sep:
            raise UsageError(f"--scorer expects NAME=URL, got {spec!r}")
        scorers.append(ScorerEndpoint(name, url, batch_size=args.batch_size,
                                      max_concurrency=args.max_concurrency))
    report = evaluate(pairs, smoothing=cfg.smoothing, scorers=scorers)
    text = (json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
            if args.json else report.to_tsv())
    sys.stdout.write(text)
    outputs = []
    if cfg.output_dir:
        p = Path(cfg.output_dir) / ("metrics.json" if args.json else "metrics.tsv")
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        outputs.append(p)
    return (1 if report.external_failures else 0), outputs


COMMANDS = {
    "validate": cmd_validate,
    "convert": cmd_convert,
    "smatch": cmd_smatch,
    "split": cmd_split,
    "stats": cmd_stats,
    "eval-text": cmd_eval_text,
}


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="umrtk", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"umrtk {__version__}")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for per-graph work")
    ap.add_argument("--manifest", metavar="PATH", help="replay the run recorded in a manifest")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command")

    def common(p, umr=True):
        p.add_argument("-o", "--output", metavar="DIR", help="output directory (gets manifest.json)")
        if umr:
            p.add_argument("--language", help="language code for all inputs")
            p.add_argument("--lenient", action="store_true", help="skip malformed blocks")
            p.add_argument("--header", action="append", metavar="KEY=TEXT",
                           help="override a section header string (sentence_marker, "
                                "sentence_graph, alignment, document_graph)")

    p = sub.add_parser("validate", help="parse UMR or PENMAN files and report errors")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--format", choices=("auto", "umr", "penman"), default="auto")
    common(p)

    p = sub.add_parser("convert", help="convert sentence-level UMR graphs to AMR")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--rules", metavar="FILE", help="rule file (default: bundled rules)")
    p.add_argument("--strict", action="store_true", help="fail when a removal disconnects the graph")
    p.add_argument("--report", metavar="FILE", help="conversion report TSV path")
    p.add_argument("--format", choices=("auto", "umr", "penman"), default="auto")
    common(p)

    p = sub.add_parser("smatch", help="Smatch between two files of aligned PENMAN graphs")
    p.add_argument("inputs", nargs=2, metavar="FILE")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--averaging", choices=("macro", "micro"), default="macro")
    p.add_argument("--per-pair", metavar="OUT.tsv")
    common(p, umr=False)

    p = sub.add_parser("split", help="train/dev/test split manifests per language")
    p.add_argument("inputs", nargs="+", metavar="CORPUS")
    p.add_argument("--ratios", default="0.7,0.1,0.2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--contiguous", action="store_true", help="keep corpus order (no shuffling)")
    p.add_argument("--exclude", metavar="FILE", help="sentence ids to drop, one per line")
    common(p)

    p = sub.add_parser("stats", help="sentence and document-level counts")
    p.add_argument("inputs", nargs="+", metavar="CORPUS")
    p.add_argument("--splits", metavar="DIR", help="split manifests written by 'split'")
    p.add_argument("--exclude", metavar="FILE")
    p.add_argument("--layout", choices=("long", "table"), default="long")
    common(p)

    p = sub.add_parser("eval-text", help="BLEU, METEOR-lite, lengths and external scorers")
    p.add_argument("inputs", nargs="+", metavar="FILE",
                   help="CANDIDATES REFERENCES (one sentence per line) or one id/candidate/reference TSV")
    p.add_argument("--language", default=None)
    p.add_argument("--smoothing", choices=("add-one", "none"), default="add-one")
    p.add_argument("--scorer", action="append", metavar="NAME=URL")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-concurrency", type=int, default=4)
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output", metavar="DIR")
    return ap


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig(
        subcommand=args.command,
        inputs=[str(Path(p)) for p in args.inputs],
        output_dir=getattr(args, "output", None),
        jobs=args.jobs,
        language=getattr(args, "language", None),
        lenient=getattr(args, "lenient", False),
        headers=_parse_headers(getattr(args, "header", None)),
    )
    if args.command == "convert":
        cfg.rules = args.rules
        cfg.strict = args.strict
    elif args.command == "smatch":
        if args.restarts < 1:
            raise UsageError("--restarts must be positive")
        cfg.restarts, cfg.seed, cfg.averaging = args.restarts, args.seed, args.averaging
    elif args.command == "split":
        cfg.ratios = _parse_ratios(args.ratios)
        cfg.seed, cfg.contiguous = args.seed, args.contiguous
    elif args.command == "eval-text":
        cfg.smoothing = args.smoothing
    cfg.validate()
    return cfg


def _replay_argv(manifest_path: str) -> list[str]:
    path = Path(manifest_path)
    if not path.is_file():
        raise UsageError(f"manifest not found: {manifest_path}")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    for p, digest in manifest.get("inputs", {}).items():
        if not Path(p).exists():
            raise UsageError(f"replay input missing: {p}")
        if _sha256(Path(p)) != digest:
            print(f"warning: {p} changed since the recorded run", file=sys.stderr)
    return list(manifest["argv"])


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.manifest:
            argv = _replay_argv(args.manifest)
            args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 2
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _config(args)
        status, outputs = COMMANDS[args.command](args, cfg)
        _write_manifest(cfg, argv, outputs)
        return status
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except UsageError as err:
        print(f"umrtk: usage error: {err}", file=sys.stderr)
        return 2
    except (InputError, GraphError, UmrFormatError, RuleError, BadRatios, EmptyCorpus,
            DisconnectedAfterConversion, OSError, ValueError) as err:
        print(f"umrtk: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
