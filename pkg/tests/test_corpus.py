import logging

import pytest
from hypothesis import given, strategies as st

from conftest import read_fixture
from umrtk.corpus import (Alignment, BadRatios, DocTriple, EmptyCorpus, GraphParseError,
                          MalformedAlignment, MissingSentenceGraph, SectionHeaders,
                          UmrAnnotation, UnrecognizedSectionHeader, corpus_stats, exclude_ids,
                          is_document_level, parse_doc_graph, parse_umr_file,
                          parse_umr_file_with_diagnostics, partition_sizes, read_id_list,
                          split_corpus)
from umrtk.graph import parse_penman

SAMPLE = read_fixture("sample.umr")
MALFORMED = read_fixture("malformed.umr")
G = parse_penman("(x / thing)")


def synth(n, lang="en", doc_every=3):
    """n annotations; every ``doc_every``-th one carries document-level content."""
    out = []
    for i in range(n):
        doc = i % doc_every == 0
        out.append(UmrAnnotation(
            sentence_id=f"{lang}-{i}", language=lang, tokens=("t",), sentence_graph=G,
            alignments=(Alignment("x", (0, 0)),) if doc or i % 2 else (),
            doc_triples=(DocTriple("root", ":modal", "author"),) if doc else (),
        ))
    return out


# ---------------------------------------------------------------------------
# reading

def test_sample_file():
    anns = parse_umr_file(SAMPLE, "en")
    assert [a.sentence_id for a in anns] == ["sample-s1", "sample-s2", "sample-s3"]
    s1 = anns[0]
    assert s1.tokens == ("He", "was", "searching", "for", "a", "clue")
    assert s1.text == "He was searching for a clue"
    assert s1.alignments == (Alignment("s1s", (2, 2)), Alignment("s1p", (0, 0)),
                             Alignment("s1c", (5, 5)))
    assert s1.doc_triples == (
        DocTriple("document-creation-time", ":before", "s1s"),
        DocTriple("root", ":modal", "author"),
        DocTriple("author", ":full-affirmative", "s1s"),
    )
    assert anns[1].alignments[1] == Alignment("s2s", None)
    assert anns[2].doc_triples == (DocTriple("s3p", ":same-entity", "s1p"),)
    assert {a.language for a in anns} == {"en"}


def test_document_level_flags():
    anns = parse_umr_file(SAMPLE, "en")
    # s2 is aligned but its document graph is an empty placeholder
    assert [is_document_level(a) for a in anns] == [True, False, True]


def test_default_ids_without_meta_info():
    text = "\n".join(ln for ln in SAMPLE.splitlines() if "meta-info" not in ln)
    assert [a.sentence_id for a in parse_umr_file(text, "en")] == ["snt1", "snt2", "snt3"]
    ids = [a.sentence_id for a in parse_umr_file(text, "en", document="d7")]
    assert ids == ["d7:snt1", "d7:snt2", "d7:snt3"]


def test_strict_mode_raises_on_bad_graph():
    with pytest.raises(GraphParseError) as info:
        parse_umr_file(MALFORMED, "en")
    assert info.value.block == 2
    assert "line 63" in str(info.value)


def test_lenient_mode_skips_and_reports(caplog):
    with caplog.at_level(logging.WARNING):
        anns, diags = parse_umr_file_with_diagnostics(MALFORMED, "en", lenient=True)
    assert [a.sentence_id for a in anns] == ["sample-s1", "sample-s2"]
    assert len(diags) == 1 and diags[0].block == 2 and diags[0].severity == "error"
    assert "s3c" in caplog.text


def test_unknown_header():
    text = SAMPLE.replace("# alignment:", "# alignments table:", 1)
    with pytest.raises(UnrecognizedSectionHeader):
        parse_umr_file(text, "en")
    anns, _ = parse_umr_file_with_diagnostics(text, "en", lenient=True)
    assert len(anns) == 3 and anns[0].alignments == ()


def test_header_overrides():
    text = SAMPLE.replace("# alignment:", "# word alignment:")
    headers = SectionHeaders.from_overrides({"alignment": "word alignment"})
    anns = parse_umr_file(text, "en", headers=headers)
    assert anns[0].alignments[0] == Alignment("s1s", (2, 2))


def test_missing_sentence_graph():
    text = SAMPLE.replace("(s1s / search-01", "", 1)
    cut = text.index("# sentence level graph:")
    text = text[:cut] + "# alignment:\ns1s: 3-3\n\n" + text[text.index("################", cut):]
    with pytest.raises(MissingSentenceGraph):
        parse_umr_file(text, "en")


def test_bad_alignment_span():
    with pytest.raises(MalformedAlignment):
        parse_umr_file(SAMPLE.replace("s1c: 6-6", "s1c: 9-9"), "en")
    with pytest.raises(MalformedAlignment):
        parse_umr_file(SAMPLE.replace("s1c: 6-6", "s1c: six"), "en")


def test_alignment_to_unknown_variable_is_a_warning():
    anns, diags = parse_umr_file_with_diagnostics(SAMPLE.replace("s1c: 6-6", "s1q: 6-6"), "en")
    assert len(anns) == 3
    assert [d.severity for d in diags] == ["warning"]


def test_doc_graph_encodings():
    assert parse_doc_graph("(s2s0 / sentence)") == []
    assert parse_doc_graph("") == []
    nested = parse_doc_graph("(s / sentence :temporal ((a :before b) (b :contained c)))")
    assert nested == [DocTriple("a", ":before", "b"), DocTriple("b", ":contained", "c")]


@given(st.booleans(), st.booleans(), st.booleans(), st.booleans())
def test_document_level_is_monotone(a1, d1, a2, d2):
    def ann(has_a, has_d):
        return UmrAnnotation("x", "en", (), G,
                             (Alignment("x", (0, 0)),) if has_a else (),
                             (DocTriple("a", ":r", "b"),) if has_d else ())
    # adding content never turns a document-level sentence off
    if is_document_level(ann(a1, d1)):
        assert is_document_level(ann(a1 or a2, d1 or d2))
    assert is_document_level(ann(a1, d1)) == (a1 and d1)


# ---------------------------------------------------------------------------
# splits

@pytest.mark.parametrize("n, sizes", [
    (143, (100, 14, 29)),
    (358, (250, 36, 72)),
    (10, (7, 1, 2)),
    (1, (1, 0, 0)),
    (0, (0, 0, 0)),
    (5, (3, 1, 1)),  # 0.5 and 1.0 both round up
])
def test_partition_sizes(n, sizes):
    assert partition_sizes(n, (0.7, 0.1, 0.2)) == sizes


@pytest.mark.parametrize("ratios", [(0.5, 0.5), (0.7, 0.2, 0.2), (1.2, -0.1, -0.1)])
def test_bad_ratios(ratios):
    with pytest.raises(BadRatios):
        partition_sizes(10, ratios)


def test_split_is_deterministic_and_exhaustive():
    corpus = synth(143, "en") + synth(40, "zh")
    a = split_corpus(corpus, seed=3)
    b = split_corpus(list(reversed(corpus))[::-1], seed=3)
    assert a.sizes() == {"en": (100, 14, 29), "zh": (28, 4, 8)}
    for lang in ("en", "zh"):
        parts = [set(a.ids(lang, p)) for p in ("train", "dev", "test")]
        assert not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])
        assert set().union(*parts) == {x.sentence_id for x in corpus if x.language == lang}
        for p in ("train", "dev", "test"):
            assert a.ids(lang, p) == b.ids(lang, p)
    assert split_corpus(corpus, seed=4).ids("en", "test") != a.ids("en", "test")


def test_contiguous_split_keeps_order():
    corpus = synth(10)
    s = split_corpus(corpus, contiguous=True)
    assert s.ids("en", "train") == [f"en-{i}" for i in range(7)]
    assert s.ids("en", "test") == ["en-8", "en-9"]


def test_split_empty_corpus():
    with pytest.raises(EmptyCorpus):
        split_corpus([])


@given(st.integers(0, 400), st.integers(0, 2**16))
def test_split_sizes_match_policy(n, seed):
    s = split_corpus({"xx": synth(n, "xx")}, seed=seed) if n else None
    if s:
        assert s.sizes()["xx"] == partition_sizes(n, (0.7, 0.1, 0.2))
        assert sum(s.sizes()["xx"]) == n


def test_manifests(tmp_path):
    s = split_corpus(synth(10), seed=1)
    paths = s.write_manifests(tmp_path)
    assert sorted(p.name for p in paths) == ["en.dev.ids", "en.test.ids", "en.train.ids"]
    assert read_id_list(tmp_path / "en.test.ids") == s.ids("en", "test")


# ---------------------------------------------------------------------------
# exclusion and stats

def test_exclusion(caplog):
    corpus = synth(209)
    drop = [f"en-{i}" for i in range(0, 132, 2)]
    assert len(drop) == 66
    res = exclude_ids(corpus, drop)
    assert len(res.kept) == 143 and res.removed == 66 and res.missing == ()
    assert exclude_ids(corpus, []).kept == tuple(corpus)
    with caplog.at_level(logging.WARNING):
        res = exclude_ids(corpus, ["en-0", "nope"])
    assert res.missing == ("nope",) and "nope" in caplog.text


def test_stats():
    s = split_corpus(synth(30), seed=0, contiguous=True)
    table = corpus_stats(s)
    # contiguous: train = 0..20, dev = 21..23, test = 24..29; doc-level every 3rd
    assert table.cell("en", "train") == (21, 7)
    assert table.cell("en", "dev") == (3, 1)
    assert table.cell("en", "test") == (6, 2)
    tsv = table.to_tsv().splitlines()
    assert tsv[0] == "language\tpartition\ttotal\tdocument_level"
    assert tsv[1] == "en\ttrain\t21\t7"
    assert table.as_wide().splitlines()[1] == "en\t21 (7)\t3 (1)\t6 (2)"


def test_stats_flat_and_empty():
    assert corpus_stats(parse_umr_file(SAMPLE, "en")).cell("en", "all") == (3, 2)
    assert corpus_stats([]).rows == ()
    assert corpus_stats({"en": {"train": []}}).cell("en", "train") == (0, 0)
