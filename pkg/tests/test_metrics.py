import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import bleu_reference
from umrtk.metrics import (EmptyCorpus, EvalPair, bleu, evaluate, length_stats, length_table,
                           meteor_lite, meteor_stats, read_lines, suffix_stem, tokenize)

WORDS = ["the", "boy", "wants", "to", "go", "girl", "a", "clue", "searched", "he"]


def pair(c, r, lang="en"):
    return EvalPair.from_text(c, r, lang)


def random_pairs(rng, n, vocab=WORDS):
    out = []
    for _ in range(n):
        ref = [rng.choice(vocab) for _ in range(rng.randint(1, 12))]
        cand = [t if rng.random() < 0.6 else rng.choice(vocab) for t in ref]
        if rng.random() < 0.3:
            cand = cand[: rng.randint(1, len(cand))]
        out.append(EvalPair(tuple(cand), tuple(ref)))
    return out


# ---------------------------------------------------------------------------
# tokenization

def test_tokenize():
    assert tokenize("He was  searching\tfor a clue") == ("He", "was", "searching", "for", "a", "clue")
    assert tokenize("他在 找线索", "zh") == ("他", "在", "找", "线", "索")
    assert tokenize("他在找", "cmn") == ("他", "在", "找")
    assert EvalPair.from_text("他在", "他", "zh").candidate_text == "他在"


def test_read_lines():
    assert read_lines("a b\r\nc\n") == ["a b", "c"]
    assert read_lines("a\n\nb") == ["a", "", "b"]


# ---------------------------------------------------------------------------
# BLEU

def test_bleu_identical_and_disjoint():
    p = [pair("the boy wants to go", "the boy wants to go")]
    assert bleu(p) == pytest.approx(1.0)
    assert bleu(p, smoothing="none") == pytest.approx(1.0)
    assert bleu([pair("x y z", "a b c")]) == 0.0


def test_bleu_hand_computed():
    # unigrams 3/4, bigrams (1+1)/(3+1), trigrams (0+1)/(2+1), 4-grams (0+1)/(1+1); c = r
    p = [pair("the boy go now", "the boy went now")]
    expected = math.exp((math.log(3 / 4) + math.log(2 / 4) + math.log(1 / 3) + math.log(1 / 2)) / 4)
    assert bleu(p) == pytest.approx(expected)
    assert bleu(p, smoothing="none") == 0.0


def test_brevity_penalty():
    p = [pair("the boy", "the boy wants to go")]
    full = bleu(p, max_n=1)
    assert full == pytest.approx(math.exp(1 - 5 / 2))


def test_bleu_matches_oracle():
    rng = random.Random(0)
    for _ in range(50):
        pairs = random_pairs(rng, rng.randint(1, 8))
        raw = [(list(p.candidate), list(p.reference)) for p in pairs]
        assert bleu(pairs) == pytest.approx(bleu_reference(raw), abs=1e-6)
        assert bleu(pairs, smoothing="none") == pytest.approx(
            bleu_reference(raw, smooth=False), abs=1e-6)


def test_bleu_errors():
    with pytest.raises(EmptyCorpus):
        bleu([])
    with pytest.raises(ValueError):
        bleu([pair("a", "a")], smoothing="floor")


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_bleu_relabel_invariance(seed):
    rng = random.Random(seed)
    pairs = random_pairs(rng, 4)
    perm = dict(zip(WORDS, rng.sample([f"w{i}" for i in range(len(WORDS))], len(WORDS))))
    relabeled = [EvalPair(tuple(perm[t] for t in p.candidate), tuple(perm[t] for t in p.reference))
                 for p in pairs]
    assert bleu(relabeled) == pytest.approx(bleu(pairs))
    assert 0.0 <= bleu(pairs) <= 1.0


# ---------------------------------------------------------------------------
# METEOR-lite

def test_meteor_identical_and_disjoint():
    assert meteor_lite([pair("the boy wants to go", "the boy wants to go")]) == pytest.approx(1.0)
    assert meteor_lite([pair("a", "a")]) == pytest.approx(1.0)
    assert meteor_lite([pair("x y", "a b")]) == 0.0


def test_meteor_reversed():
    # 4 matches in 4 chunks: frag = 1, penalty 0.5
    assert meteor_lite([pair("a b c d", "d c b a")]) == pytest.approx(0.5)


def test_meteor_hand_computed():
    # 2 matches, 1 chunk; P = 2/3, R = 2/2
    p, r = 2 / 3, 1.0
    fmean = p * r / (0.9 * p + 0.1 * r)
    assert meteor_lite([pair("the boy left", "the boy")]) == pytest.approx(fmean)


def test_meteor_stem_stage_english_only():
    assert suffix_stem("searched") == suffix_stem("searching") == "search"
    assert meteor_lite([pair("he searched", "he searching")]) == pytest.approx(1.0)
    st = meteor_stats([EvalPair(("he", "searched"), ("he", "searching"), "fr")])
    assert st.matches == 1


def test_meteor_corpus_pooling():
    pairs = [pair("a b", "a b"), pair("c d", "c d")]
    # two pairs with one chunk each: no fragmentation
    assert meteor_lite(pairs) == pytest.approx(1.0)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_meteor_bounds(seed):
    pairs = random_pairs(random.Random(seed), 5)
    assert 0.0 <= meteor_lite(pairs) <= 1.0


# ---------------------------------------------------------------------------
# lengths and reports

def test_length_stats():
    sents = [tokenize(s) for s in ["a b c", "a", "a b c d e f g h"]]
    assert length_stats(sents) == pytest.approx(4.0)
    with pytest.warns(RuntimeWarning):
        assert length_stats([]) == 0.0
    assert length_table({"umr": sents, "amr": sents[:1]}) == {"umr": 4.0, "amr": 3.0}


def test_length_is_a_sentence_weighted_mean():
    a = [("x",) * 2] * 3
    b = [("x",) * 10]
    assert length_stats(a + b) == pytest.approx((3 * 2 + 10) / 4)


def test_evaluate_report():
    pairs = [pair("the boy wants to go", "the boy wants to go")]
    rep = evaluate(pairs)
    assert rep.n_pairs == 1 and rep.bleu == pytest.approx(1.0)
    assert rep.length_stats == (5.0, 5.0)
    tsv = rep.to_tsv()
    assert tsv.splitlines()[0] == "metric\tvalue"
    assert "bleu\t1.000000" in tsv
    assert rep.to_json()["external_scores"] == {}
