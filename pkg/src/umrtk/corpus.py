"""UMR annotation files, document-level coverage, corpus splits and tallies.

The reader understands the block layout of the UMR v1.0 release::

    # meta-info :: sent_id = u_tree-cs-s1-root
    # :: snt1	He was searching for a clue
    Index: 1 2 3 4 5 6
    Words: He was searching for a clue

    # sentence level graph:
    (s1s / search-01 ...)

    # alignment:
    s1s: 3-3
    s1p: 1-1

    # document level annotation:
    (s1s0 / sentence
        :temporal ((document-creation-time :before s1s)))

Alignment spans are 1-based in the file and stored 0-based; ``0-0`` and
``-1--1`` are the null span.
"""
from __future__ import annotations

import logging
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

from .graph import GraphError, SemGraph, _tokenize, parse_penman

log = logging.getLogger(__name__)

PARTITIONS = ("train", "dev", "test")
DEFAULT_RATIOS = (0.7, 0.1, 0.2)


class UmrFormatError(ValueError):
    """A malformed sentence block. ``block`` is the 0-based block index."""

    def __init__(self, message: str, block: int | None = None, line: int | None = None):
        where = []
        if block is not None:
            where.append(f"block {block}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.block = block
        self.line = line


class MissingSentenceGraph(UmrFormatError):
    pass


class UnrecognizedSectionHeader(UmrFormatError):
    pass


class GraphParseError(UmrFormatError):
    """A graph-core parse failure inside a sentence block."""

    def __init__(self, cause: GraphError, block: int | None = None):
        line = getattr(cause, "line", None)
        super().__init__(f"{cause}", block, None)
        self.cause = cause
        self.line = line


class MalformedAlignment(UmrFormatError):
    pass


class BadRatios(ValueError):
    pass


class EmptyCorpus(ValueError):
    pass


@dataclass(frozen=True)
class SectionHeaders:
    """Header strings of a sentence block, matched case-insensitively."""

    sentence_marker: str = "# :: snt"
    sentence_graph: str = "sentence level graph"
    alignment: str = "alignment"
    document_graph: str = "document level annotation"

    @classmethod
    def from_overrides(cls, overrides: Mapping[str, str]) -> "SectionHeaders":
        unknown = set(overrides) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown header keys: {sorted(unknown)}")
        return cls(**overrides)


class Alignment(NamedTuple):
    variable: str
    # 0-based inclusive token span, None for the null span
    span: tuple[int, int] | None


class DocTriple(NamedTuple):
    source: str
    relation: str
    target: str


@dataclass(frozen=True)
class UmrAnnotation:
    sentence_id: str
    language: str
    tokens: tuple[str, ...]
    sentence_graph: SemGraph
    alignments: tuple[Alignment, ...] = ()
    doc_triples: tuple[DocTriple, ...] = ()
    document: str = ""
    text: str = ""


@dataclass(frozen=True)
class Diagnostic:
    block: int | None
    message: str
    severity: str = "error"

    def __str__(self):
        where = f"block {self.block}: " if self.block is not None else ""
        return f"{self.severity}: {where}{self.message}"


_HEADER_RE = re.compile(r"^#\s*([^:#][^:]*?)\s*:\s*$")
_META_RE = re.compile(r"^#\s*meta-info\b.*?sent_id\s*=\s*(\S+)")
_SPAN_RE = re.compile(r"^(-?\d+)\s*-\s*(-?\d+)$")


def _norm_header(s: str) -> str:
    return " ".join(s.lower().split())


def _split_blocks(lines: list[str], headers: SectionHeaders) -> list[tuple[int, list[str]]]:
    """Group lines into sentence blocks; returns (first line number, lines)."""
    marker = headers.sentence_marker.lower()
    blocks: list[tuple[int, list[str]]] = []
    pending: list[tuple[int, str]] = []  # meta-info lines preceding a marker
    current: list[str] | None = None
    for n, line in enumerate(lines, 1):
        stripped = line.strip()
        if _META_RE.match(stripped) or re.fullmatch(r"#{5,}", stripped):
            if _META_RE.match(stripped):
                pending.append((n, stripped))
            continue
        if stripped.lower().startswith(marker):
            start = pending[0][0] if pending else n
            current = [p for _, p in pending] + [line]
            blocks.append((start, current))
            pending = []
            continue
        if current is not None:
            current.append(line)
    return blocks


def _parse_alignments(lines: list[tuple[int, str]], block: int, n_tokens: int) -> list[Alignment]:
    out = []
    for lineno, line in lines:
        var, sep, spans = line.partition(":")
        if not sep or not var.strip():
            raise MalformedAlignment(f"cannot read alignment line {line!r}", block, lineno)
        for chunk in spans.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            m = _SPAN_RE.match(chunk)
            if not m:
                raise MalformedAlignment(f"bad span {chunk!r}", block, lineno)
            start, end = int(m.group(1)), int(m.group(2))
            if start <= 0 and end <= 0:
                out.append(Alignment(var.strip(), None))
                continue
            if start < 1 or end < start or (n_tokens and end > n_tokens):
                raise MalformedAlignment(
                    f"span {chunk} outside tokens 1..{n_tokens}", block, lineno
                )
            out.append(Alignment(var.strip(), (start - 1, end - 1)))
    return out


def _sexpr(text: str):
    """Read a parenthesized expression into nested lists of token strings."""
    toks = _tokenize(text)
    stack: list[list] = [[]]
    for tok in toks:
        if tok.kind == "lparen":
            stack.append([])
        elif tok.kind == "rparen":
            if len(stack) == 1:
                raise UmrFormatError(f"unmatched ')' at line {tok.line}, column {tok.col}")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok.text)
    if len(stack) != 1:
        raise UmrFormatError("unbalanced parentheses in document-level annotation")
    return stack[0]


def parse_doc_graph(text: str) -> list[DocTriple]:
    """Normalize a document-level annotation to (source, relation, target) triples.

    Both the grouped triple-list encoding (``:temporal ((a :before b) ...)``)
    and plain PENMAN sub-nodes are accepted. A bare ``(s / sentence)`` yields
    an empty list.
    """
    if not text.strip():
        return []
    top = _sexpr(text)
    if len(top) != 1 or not isinstance(top[0], list):
        raise UmrFormatError("document-level annotation must be one parenthesized graph")
    triples: list[DocTriple] = []

    def node(items: list) -> str:
        if len(items) < 3 or items[1] != "/":
            raise UmrFormatError(f"malformed document-level node {items!r}")
        var = items[0]
        rest = items[3:]
        i = 0
        while i < len(rest):
            role = rest[i]
            if not isinstance(role, str) or not role.startswith(":") or i + 1 >= len(rest):
                raise UmrFormatError(f"malformed document-level branch near {role!r}")
            value = rest[i + 1]
            i += 2
            if isinstance(value, str):
                triples.append(DocTriple(var, role, value))
            elif len(value) >= 2 and value[1] == "/":
                triples.append(DocTriple(var, role, node(value)))
            else:
                for item in value:
                    if isinstance(item, list) and len(item) == 3 and all(isinstance(x, str) for x in item):
                        triples.append(DocTriple(*item))
                    else:
                        raise UmrFormatError(f"malformed document-level triple {item!r}")
        return var

    node(top[0])
    return triples


def parse_umr_file_with_diagnostics(
    text: str,
    language: str,
    *,
    document: str = "",
    headers: SectionHeaders = SectionHeaders(),
    lenient: bool = False,
) -> tuple[list[UmrAnnotation], list[Diagnostic]]:
    """Read every sentence block of a UMR file, in file order.

    In strict mode the first malformed block raises; with ``lenient`` it is
    skipped and reported as a diagnostic. Alignments naming a variable absent
    from the sentence graph are kept and reported as warnings.
    """
    wanted = {
        _norm_header(headers.sentence_graph): "graph",
        _norm_header(headers.alignment): "alignment",
        _norm_header(headers.document_graph): "document",
    }
    annotations: list[UmrAnnotation] = []
    diagnostics: list[Diagnostic] = []
    marker = headers.sentence_marker.lower()

    for index, (start, block_lines) in enumerate(_split_blocks(text.split("\n"), headers)):
        try:
            ann, warnings = _parse_block(
                index, start, block_lines, language, document, wanted, marker, lenient
            )
        except UmrFormatError as err:
            if not lenient:
                raise
            diagnostics.append(Diagnostic(index, str(err)))
            log.warning("skipping block %d: %s", index, err)
            continue
        annotations.append(ann)
        diagnostics.extend(warnings)
    return annotations, diagnostics


def _parse_block(index, start, block_lines, language, document, wanted, marker, lenient):
    sections: dict[str, list[tuple[int, str]]] = {"head": []}
    current = "head"
    sent_id = None
    for offset, line in enumerate(block_lines):
        lineno = start + offset
        stripped = line.strip()
        meta = _META_RE.match(stripped)
        if meta:
            sent_id = meta.group(1)
            continue
        m = _HEADER_RE.match(stripped)
        if m and not stripped.lower().startswith(marker):
            name = wanted.get(_norm_header(m.group(1)))
            if name is None:
                if not lenient:
                    raise UnrecognizedSectionHeader(
                        f"unrecognized section header {stripped!r}", index, lineno
                    )
                current = "ignored"
                sections.setdefault(current, [])
                continue
            current = name
            sections.setdefault(current, [])
            continue
        sections[current].append((lineno, line))

    head = [(n, ln) for n, ln in sections["head"] if ln.strip()]
    marker_line = head[0][1].strip()
    snt_rest = marker_line[len(marker):]
    snt_num, _, snt_text = snt_rest.strip().partition("\t")
    if not snt_text:
        snt_num, _, snt_text = snt_rest.strip().partition(" ")
    snt_num = snt_num.strip()
    tokens: list[str] | None = None
    for _, ln in head[1:]:
        key, sep, value = ln.strip().partition(":")
        if sep and key.strip().lower() == "words":
            tokens = value.split()
    if tokens is None:
        tokens = snt_text.split()

    graph_lines = sections.get("graph")
    if not graph_lines or not any(ln.strip() for _, ln in graph_lines):
        raise MissingSentenceGraph("block has no sentence-level graph", index, start)
    graph_text = "\n".join(ln for _, ln in graph_lines)
    try:
        graph = parse_penman(graph_text, first_line=graph_lines[0][0])
    except GraphError as err:
        raise GraphParseError(err, index) from err

    align_lines = [(n, ln.strip()) for n, ln in sections.get("alignment", []) if ln.strip()]
    alignments = _parse_alignments(align_lines, index, len(tokens))

    doc_text = "\n".join(ln for _, ln in sections.get("document", []))
    try:
        doc_triples = parse_doc_graph(doc_text)
    except UmrFormatError as err:
        raise UmrFormatError(str(err), index, start) from err

    if sent_id is None:
        sent_id = f"{document}:snt{snt_num}" if document else f"snt{snt_num}"
    warnings = [
        Diagnostic(index, f"alignment names unknown variable {a.variable!r}", "warning")
        for a in alignments
        if a.variable not in graph.instances
    ]
    ann = UmrAnnotation(
        sentence_id=sent_id,
        language=language,
        tokens=tuple(tokens),
        sentence_graph=graph,
        alignments=tuple(alignments),
        doc_triples=tuple(doc_triples),
        document=document,
        text=snt_text.strip(),
    )
    return ann, warnings


def parse_umr_file(text: str, language: str, **kwargs) -> list[UmrAnnotation]:
    """Like :func:`parse_umr_file_with_diagnostics`, dropping the diagnostics."""
    return parse_umr_file_with_diagnostics(text, language, **kwargs)[0]


def is_document_level(a: UmrAnnotation) -> bool:
    # doc_triples is already empty for a bare (s / sentence) placeholder
    return bool(a.alignments) and bool(a.doc_triples)


# ---------------------------------------------------------------------------
# splits

def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def partition_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    """dev and test are rounded half-up from their ratios; train takes the rest."""
    _check_ratios(ratios)
    dev = _round_half_up(n * ratios[1])
    test = _round_half_up(n * ratios[2])
    return n - dev - test, dev, test


def _check_ratios(ratios: Sequence[float]) -> None:
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must be three non-negative fractions summing to 1, got {ratios}")


def group_by_language(corpus: Iterable[UmrAnnotation]) -> dict[str, list[UmrAnnotation]]:
    grouped: dict[str, list[UmrAnnotation]] = {}
    for a in corpus:
        grouped.setdefault(a.language, []).append(a)
    return grouped


@dataclass(frozen=True)
class CorpusSplit:
    partitions: Mapping[str, Mapping[str, tuple[UmrAnnotation, ...]]]
    ratios: tuple[float, float, float]
    seed: int
    contiguous: bool = False

    def sizes(self) -> dict[str, tuple[int, int, int]]:
        return {
            lang: tuple(len(parts[p]) for p in PARTITIONS)
            for lang, parts in self.partitions.items()
        }

    def ids(self, language: str, partition: str) -> list[str]:
        return [a.sentence_id for a in self.partitions[language][partition]]

    def write_manifests(self, out_dir: str | Path) -> list[Path]:
        """One ``<language>.<partition>.ids`` file per partition, one id per line."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for lang in sorted(self.partitions):
            for part in PARTITIONS:
                path = out / f"{lang}.{part}.ids"
                ids = self.ids(lang, part)
                path.write_text("".join(i + "\n" for i in ids), encoding="utf-8")
                written.append(path)
        return written


def split_corpus(
    corpus: Mapping[str, Sequence[UmrAnnotation]] | Iterable[UmrAnnotation],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
    contiguous: bool = False,
) -> CorpusSplit:
    """Partition each language into train/dev/test.

    By default each language is shuffled with a generator seeded from
    ``(seed, language)``; ``contiguous`` keeps corpus order instead so that
    documents stay together.
    """
    _check_ratios(ratios)
    grouped = dict(corpus) if isinstance(corpus, Mapping) else group_by_language(corpus)
    if not grouped or not any(grouped.values()):
        raise EmptyCorpus("cannot split an empty corpus")
    partitions = {}
    for lang in sorted(grouped):
        items = list(grouped[lang])
        n_train, n_dev, _ = partition_sizes(len(items), ratios)
        if not contiguous:
            random.Random(f"{seed}:{lang}").shuffle(items)
        partitions[lang] = {
            "train": tuple(items[:n_train]),
            "dev": tuple(items[n_train:n_train + n_dev]),
            "test": tuple(items[n_train + n_dev:]),
        }
    return CorpusSplit(partitions, tuple(ratios), seed, contiguous)


@dataclass(frozen=True)
class ExclusionResult:
    kept: tuple[UmrAnnotation, ...]
    removed: int
    missing: tuple[str, ...] = field(default_factory=tuple)


def exclude_ids(corpus: Iterable[UmrAnnotation], id_list: Iterable[str]) -> ExclusionResult:
    """Drop annotations whose ``sentence_id`` is listed; unknown ids are warned about."""
    wanted = set(id_list)
    kept, seen = [], set()
    removed = 0
    for a in corpus:
        if a.sentence_id in wanted:
            seen.add(a.sentence_id)
            removed += 1
        else:
            kept.append(a)
    missing = tuple(sorted(wanted - seen))
    for m in missing:
        log.warning("excluded id %r not found in corpus", m)
    return ExclusionResult(tuple(kept), removed, missing)


def read_id_list(path: str | Path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]


# ---------------------------------------------------------------------------
# statistics

class StatsRow(NamedTuple):
    language: str
    partition: str
    total: int
    document_level: int


@dataclass(frozen=True)
class StatsTable:
    rows: tuple[StatsRow, ...]

    def to_tsv(self) -> str:
        lines = ["language\tpartition\ttotal\tdocument_level"]
        lines += [f"{r.language}\t{r.partition}\t{r.total}\t{r.document_level}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def cell(self, language: str, partition: str) -> tuple[int, int]:
        for r in self.rows:
            if r.language == language and r.partition == partition:
                return r.total, r.document_level
        raise KeyError((language, partition))

    def as_wide(self) -> str:
        """Wide layout: one row per language, ``total (document-level)`` cells."""
        parts = [p for p in PARTITIONS if any(r.partition == p for r in self.rows)]
        parts += sorted({r.partition for r in self.rows} - set(parts))
        langs = list(dict.fromkeys(r.language for r in self.rows))
        out = ["language\t" + "\t".join(parts)]
        for lang in langs:
            cells = []
            for p in parts:
                try:
                    t, d = self.cell(lang, p)
                    cells.append(f"{t} ({d})")
                except KeyError:
                    cells.append("")
            out.append(lang + "\t" + "\t".join(cells))
        return "\n".join(out) + "\n"


def corpus_stats(
    corpus: CorpusSplit | Mapping[str, Mapping[str, Sequence[UmrAnnotation]]] | Iterable[UmrAnnotation],
) -> StatsTable:
    """Per-language, per-partition totals and document-level counts.

    A flat iterable of annotations is tallied as a single ``all`` partition.
    """
    if isinstance(corpus, CorpusSplit):
        nested = corpus.partitions
    elif isinstance(corpus, Mapping):
        nested = corpus
    else:
        nested = {lang: {"all": items} for lang, items in group_by_language(corpus).items()}
    rows = []
    for lang in sorted(nested):
        for part, items in nested[lang].items():
            items = list(items)
            rows.append(StatsRow(lang, part, len(items), sum(map(is_document_level, items))))
    return StatsTable(tuple(rows))
