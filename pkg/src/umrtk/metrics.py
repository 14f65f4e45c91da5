"""Text-generation metrics: corpus BLEU, a reduced METEOR, output lengths.

Tokens are opaque symbols. English (and any language not listed in
:data:`CHARACTER_LANGUAGES`) is split on whitespace; Chinese is split into
characters with whitespace dropped.
"""
from __future__ import annotations

import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

CHARACTER_LANGUAGES = frozenset({"zh", "zho", "cmn", "chinese"})
STEM_LANGUAGES = frozenset({"en", "eng", "english"})
SMOOTHING_METHODS = ("add-one", "none")


class EmptyCorpus(ValueError):
    pass


def tokenize(text: str, language: str = "en") -> tuple[str, ...]:
    if language.casefold() in CHARACTER_LANGUAGES:
        return tuple(ch for ch in text if not ch.isspace())
    return tuple(text.split())


def tokenization_policy(language: str) -> str:
    return "character" if language.casefold() in CHARACTER_LANGUAGES else "whitespace"


@dataclass(frozen=True)
class EvalPair:
    candidate: tuple[str, ...]
    reference: tuple[str, ...]
    language: str = "en"
    id: str = ""

    @classmethod
    def from_text(cls, candidate: str, reference: str, language: str = "en", id: str = ""):
        return cls(tokenize(candidate, language), tokenize(reference, language), language, id)

    @property
    def candidate_text(self) -> str:
        sep = "" if tokenization_policy(self.language) == "character" else " "
        return sep.join(self.candidate)

    @property
    def reference_text(self) -> str:
        sep = "" if tokenization_policy(self.language) == "character" else " "
        return sep.join(self.reference)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


@dataclass(frozen=True)
class BleuStats:
    matches: tuple[int, ...]
    totals: tuple[int, ...]
    candidate_length: int
    reference_length: int


def bleu_stats(pairs: Sequence[EvalPair], max_n: int = 4) -> BleuStats:
    matches = [0] * max_n
    totals = [0] * max_n
    c_len = r_len = 0
    for pair in pairs:
        c_len += len(pair.candidate)
        r_len += len(pair.reference)
        for n in range(1, max_n + 1):
            cand = _ngrams(pair.candidate, n)
            ref = _ngrams(pair.reference, n)
            matches[n - 1] += sum((cand & ref).values())
            totals[n - 1] += max(len(pair.candidate) - n + 1, 0)
    return BleuStats(tuple(matches), tuple(totals), c_len, r_len)


def bleu(pairs: Sequence[EvalPair], max_n: int = 4, smoothing: str = "add-one") -> float:
    """Corpus BLEU with uniform weights and a brevity penalty.

    Clipped n-gram matches and lengths are pooled over the corpus before the
    precisions are formed. ``add-one`` adds one to the numerator and
    denominator of every precision with n > 1; ``none`` leaves them raw, so
    any zero precision gives a score of zero.
    """
    if not pairs:
        raise EmptyCorpus("BLEU needs at least one pair")
    if smoothing not in SMOOTHING_METHODS:
        raise ValueError(f"unknown smoothing {smoothing!r}; choose from {SMOOTHING_METHODS}")
    st = bleu_stats(pairs, max_n)
    if st.candidate_length == 0:
        return 0.0
    log_p = 0.0
    for n, (m, t) in enumerate(zip(st.matches, st.totals), 1):
        if smoothing == "add-one" and n > 1:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_p += math.log(m / t) / max_n
    c, r = st.candidate_length, st.reference_length
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return min(1.0, bp * math.exp(log_p))


# ---------------------------------------------------------------------------
# reduced METEOR

_SUFFIXES = ("ingly", "edly", "ness", "ment", "ings", "ing", "ies", "ied", "ed", "es", "ly", "s")


def suffix_stem(token: str) -> str:
    """Strip one common English suffix, keeping a stem of at least 3 characters."""
    low = token.casefold()
    for suf in _SUFFIXES:
        if low.endswith(suf) and len(low) - len(suf) >= 3:
            stem = low[: -len(suf)]
            return stem + "y" if suf in ("ies", "ied") else stem
    return low


@dataclass(frozen=True)
class MeteorStats:
    matches: int
    chunks: int
    candidate_length: int
    reference_length: int
    matched_pairs: int = 0


def _align(cand: Sequence[str], ref: Sequence[str], stem: bool) -> list[tuple[int, int]]:
    """Exact stage, then a stem stage over what is left; earliest free reference wins."""
    used_c: set[int] = set()
    used_r: set[int] = set()
    pairs: list[tuple[int, int]] = []
    stages = [lambda t: t]
    if stem:
        stages.append(suffix_stem)
    for key in stages:
        ref_keys = [key(t) for t in ref]
        for i, tok in enumerate(cand):
            if i in used_c:
                continue
            k = key(tok)
            for j, rk in enumerate(ref_keys):
                if j not in used_r and rk == k:
                    pairs.append((i, j))
                    used_c.add(i)
                    used_r.add(j)
                    break
    return sorted(pairs)


def _chunks(alignment: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_stats(pairs: Sequence[EvalPair]) -> MeteorStats:
    m = ch = c_len = r_len = matched_pairs = 0
    for pair in pairs:
        stem = pair.language.casefold() in STEM_LANGUAGES
        al = _align(pair.candidate, pair.reference, stem)
        m += len(al)
        ch += _chunks(al)
        c_len += len(pair.candidate)
        r_len += len(pair.reference)
        matched_pairs += bool(al)
    return MeteorStats(m, ch, c_len, r_len, matched_pairs)


def meteor_lite(pairs: Sequence[EvalPair], alpha: float = 0.9, beta: float = 3.0,
                gamma: float = 0.5) -> float:
    """Unigram F-mean weighted towards recall, times a fragmentation penalty.

    Matching uses exact tokens, then suffix-stripped stems for English; there
    is no synonym stage, so scores are not comparable with full METEOR. The
    fragmentation is (chunks - 1) / (matches - 1), which is zero for a single
    contiguous chunk and one when no two matches are adjacent in both strings.
    """
    if not pairs:
        raise EmptyCorpus("METEOR needs at least one pair")
    st = meteor_stats(pairs)
    if st.matches == 0:
        return 0.0
    p = st.matches / st.candidate_length
    r = st.matches / st.reference_length
    fmean = p * r / (alpha * p + (1 - alpha) * r)
    # pooled over the corpus: every pair with a match has one unavoidable chunk
    denom = st.matches - st.matched_pairs
    frag = (st.chunks - st.matched_pairs) / denom if denom > 0 else 0.0
    return fmean * (1 - gamma * frag ** beta)


# ---------------------------------------------------------------------------
# lengths

def length_stats(candidates: Sequence[Sequence[str]]) -> float:
    """Mean token count; 0.0 (with a warning) for an empty set."""
    if not candidates:
        warnings.warn("length_stats called with no sentences", RuntimeWarning, stacklevel=2)
        return 0.0
    return sum(len(c) for c in candidates) / len(candidates)


def length_table(sets: Mapping[str, Sequence[Sequence[str]]]) -> dict[str, float]:
    return {name: length_stats(sents) for name, sents in sets.items()}


@dataclass
class MetricReport:
    bleu: float
    meteor_lite: float
    length_stats: tuple[float, float]
    external_scores: dict[str, float] = field(default_factory=dict)
    # name -> reason, for scorers that failed; never filled with a score
    external_failures: dict[str, str] = field(default_factory=dict)
    n_pairs: int = 0

    def to_tsv(self) -> str:
        rows = [("metric", "value"), ("pairs", str(self.n_pairs)), ("bleu", f"{self.bleu:.6f}"),
                ("meteor_lite", f"{self.meteor_lite:.6f}"),
                ("mean_candidate_length", f"{self.length_stats[0]:.4f}"),
                ("mean_reference_length", f"{self.length_stats[1]:.4f}")]
        rows += [(f"external:{k}", f"{v:.6f}") for k, v in sorted(self.external_scores.items())]
        rows += [(f"external:{k}", f"unavailable ({v})") for k, v in sorted(self.external_failures.items())]
        return "\n".join("\t".join(r) for r in rows) + "\n"

    def to_json(self) -> dict:
        return {
            "pairs": self.n_pairs,
            "bleu": self.bleu,
            "meteor_lite": self.meteor_lite,
            "length_stats": {"candidate": self.length_stats[0], "reference": self.length_stats[1]},
            "external_scores": dict(self.external_scores),
            "external_failures": dict(self.external_failures),
        }


def evaluate(pairs: Sequence[EvalPair], smoothing: str = "add-one",
             scorers: Iterable = ()) -> MetricReport:
    """All in-process metrics, plus any external scorers (see :mod:`umrtk.scorer_client`).

    A failing external scorer is recorded in ``external_failures`` and has no
    entry in ``external_scores``.
    """
    from .scorer_client import ScorerError, external_score

    report = MetricReport(
        bleu=bleu(pairs, smoothing=smoothing),
        meteor_lite=meteor_lite(pairs),
        length_stats=(length_stats([p.candidate for p in pairs]),
                      length_stats([p.reference for p in pairs])),
        n_pairs=len(pairs),
    )
    for endpoint in scorers:
        try:
            report.external_scores.update(external_score(pairs, endpoint))
        except ScorerError as err:
            report.external_failures[endpoint.name] = f"{type(err).__name__}: {err}"
    return report


_LINE_RE = re.compile(r"\r?\n")


def read_lines(text: str) -> list[str]:
    lines = _LINE_RE.split(text)
    if lines and lines[-1] == "":
        lines.pop()
    return lines
