"""Smatch: F1 over graph triples under the best injective variable mapping.

Triples come from :func:`umrtk.graph.to_triples`, so the synthetic top triple
takes part in matching. Roles are compared after case-folding; concepts and
constants compare exactly. Duplicate triples count as a multiset: a triple
repeated k times in one graph and j times in the other contributes min(k, j).

When both graphs have at most :data:`EXHAUSTIVE_LIMIT` variables the optimum
is found by enumeration. Larger pairs use restart hill-climbing whose first
restart is seeded greedily from matching concepts.
"""
from __future__ import annotations

import itertools
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .graph import INSTANCE, RELATION, SemGraph, to_triples

EXHAUSTIVE_LIMIT = 6
DEFAULT_RESTARTS = 4


class EmptyPairList(ValueError):
    pass


@dataclass(frozen=True)
class SmatchResult:
    precision: float
    recall: float
    f1: float
    mapping: Mapping[str, str]
    matched_triples: int
    test_triples: int
    gold_triples: int
    restarts_used: int
    exhaustive: bool = False


def f_score(matched: int, n_test: int, n_gold: int) -> tuple[float, float, float]:
    p = matched / n_test if n_test else 0.0
    r = matched / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


class _Problem:
    """Match-count bookkeeping for one graph pair.

    Variables are indexed; ``unary[i][j]`` is the score from triples that
    involve only variable i (instances, attributes, top, self-loops) when i
    maps to j. Relations between two distinct variables are kept as keys and
    looked up against the gold relation counts.
    """

    def __init__(self, test: SemGraph, gold: SemGraph):
        self.test_vars = list(test.instances)
        self.gold_vars = list(gold.instances)
        self.n_test = len(to_triples(test))
        self.n_gold = len(to_triples(gold))
        ti = {v: i for i, v in enumerate(self.test_vars)}
        gi = {v: j for j, v in enumerate(self.gold_vars)}

        t_unary, t_rel = _keyed(test, ti)
        g_unary, g_rel = _keyed(gold, gi)
        g_unary_by_var: dict[int, Counter] = {}
        for (j, label), c in g_unary.items():
            g_unary_by_var.setdefault(j, Counter())[label] = c

        n, m = len(self.test_vars), len(self.gold_vars)
        self.unary = [[0] * m for _ in range(n)]
        for (i, label), c in t_unary.items():
            for j, labels in g_unary_by_var.items():
                if label in labels:
                    self.unary[i][j] += min(c, labels[label])

        self.rels = list(t_rel.items())  # ((i, role, k), count)
        self.gold_rels = g_rel
        self.rels_of: list[list[int]] = [[] for _ in range(n)]
        for idx, ((i, _, k), _) in enumerate(self.rels):
            self.rels_of[i].append(idx)
            self.rels_of[k].append(idx)

    def rel_score(self, idx: int, mapping: list[int | None]) -> int:
        (i, role, k), c = self.rels[idx]
        a, b = mapping[i], mapping[k]
        if a is None or b is None:
            return 0
        return min(c, self.gold_rels.get((a, role, b), 0))

    def score(self, mapping: list[int | None]) -> int:
        total = sum(self.unary[i][j] for i, j in enumerate(mapping) if j is not None)
        return total + sum(self.rel_score(idx, mapping) for idx in range(len(self.rels)))

    def local(self, mapping: list[int | None], changed: Sequence[int]) -> int:
        total = sum(self.unary[i][mapping[i]] for i in changed if mapping[i] is not None)
        rels = set()
        for i in changed:
            rels.update(self.rels_of[i])
        return total + sum(self.rel_score(idx, mapping) for idx in rels)


def _keyed(graph: SemGraph, index: Mapping[str, int]):
    unary: Counter = Counter()
    rel: Counter = Counter()
    for t in to_triples(graph):
        role = t.role.casefold()
        if t.kind == RELATION:
            s, o = index[t.source], index[t.target]
            if s == o:
                unary[(s, ("self", role))] += 1
            else:
                rel[(s, role, o)] += 1
        else:
            kind = "instance" if t.kind == INSTANCE else "attribute"
            unary[(index[t.source], (kind, role, t.target))] += 1
    return unary, rel


def _exhaustive(prob: _Problem) -> tuple[int, list[int | None]]:
    # scores never go down when an unmapped variable is paired with an unused
    # one, so total injections from the smaller side cover the optimum
    n, m = len(prob.test_vars), len(prob.gold_vars)
    best, best_map = -1, [None] * n
    if n <= m:
        for perm in itertools.permutations(range(m), n):
            mapping = list(perm)
            s = prob.score(mapping)
            if s > best:
                best, best_map = s, mapping
    else:
        for chosen in itertools.permutations(range(n), m):
            mapping: list[int | None] = [None] * n
            for j, i in enumerate(chosen):
                mapping[i] = j
            s = prob.score(mapping)
            if s > best:
                best, best_map = s, mapping
    return best, best_map


def _smart_init(prob: _Problem) -> list[int | None]:
    """Greedy: give each test variable the unused gold variable with the best unary score."""
    mapping: list[int | None] = [None] * len(prob.test_vars)
    used: set[int] = set()
    order = sorted(range(len(prob.test_vars)), key=lambda i: -max(prob.unary[i], default=0))
    for i in order:
        best_j, best_s = None, 0
        for j, s in enumerate(prob.unary[i]):
            if j not in used and s > best_s:
                best_j, best_s = j, s
        if best_j is not None:
            mapping[i] = best_j
            used.add(best_j)
    return mapping


def _random_init(prob: _Problem, rng: random.Random) -> list[int | None]:
    gold = list(range(len(prob.gold_vars)))
    rng.shuffle(gold)
    mapping: list[int | None] = [None] * len(prob.test_vars)
    order = list(range(len(prob.test_vars)))
    rng.shuffle(order)
    for i, j in zip(order, gold):
        mapping[i] = j
    return mapping


def _climb(prob: _Problem, mapping: list[int | None]) -> tuple[int, list[int | None]]:
    """Steepest ascent over reassignments and swaps until no move improves."""
    n, m = len(prob.test_vars), len(prob.gold_vars)
    score = prob.score(mapping)
    while True:
        best_gain, best_move = 0, None
        used = {j: i for i, j in enumerate(mapping) if j is not None}
        for i in range(n):
            before = prob.local(mapping, (i,))
            old = mapping[i]
            for j in range(m):
                if j == old or j in used:
                    continue
                mapping[i] = j
                gain = prob.local(mapping, (i,)) - before
                if gain > best_gain:
                    best_gain, best_move = gain, ("move", i, j)
            mapping[i] = old
        for i, k in itertools.combinations(range(n), 2):
            if mapping[i] == mapping[k]:
                continue
            before = prob.local(mapping, (i, k))
            mapping[i], mapping[k] = mapping[k], mapping[i]
            gain = prob.local(mapping, (i, k)) - before
            mapping[i], mapping[k] = mapping[k], mapping[i]
            if gain > best_gain:
                best_gain, best_move = gain, ("swap", i, k)
        if best_move is None:
            return score, mapping
        kind, i, x = best_move
        if kind == "move":
            mapping[i] = x
        else:
            mapping[i], mapping[x] = mapping[x], mapping[i]
        score += best_gain


def hill_climb(test: SemGraph, gold: SemGraph, restarts: int = DEFAULT_RESTARTS,
               seed: int = 0) -> SmatchResult:
    """Restart hill-climbing regardless of graph size."""
    prob = _Problem(test, gold)
    return _hill_climb(prob, restarts, seed)


def _hill_climb(prob: _Problem, restarts: int, seed: int) -> SmatchResult:
    if restarts < 1:
        raise ValueError("restarts must be positive")
    rng = random.Random(seed)
    ceiling = min(prob.n_test, prob.n_gold)
    best, best_map, used = -1, None, 0
    for r in range(restarts):
        start = _smart_init(prob) if r == 0 else _random_init(prob, rng)
        score, mapping = _climb(prob, start)
        used += 1
        if score > best:
            best, best_map = score, list(mapping)
        if best == ceiling:
            break
    return _result(prob, best, best_map, used, exhaustive=False)


def _result(prob: _Problem, matched: int, mapping, restarts_used: int, exhaustive: bool):
    p, r, f = f_score(matched, prob.n_test, prob.n_gold)
    named = {
        prob.test_vars[i]: prob.gold_vars[j] for i, j in enumerate(mapping) if j is not None
    }
    return SmatchResult(p, r, f, named, matched, prob.n_test, prob.n_gold, restarts_used, exhaustive)


def smatch(test: SemGraph, gold: SemGraph, restarts: int = DEFAULT_RESTARTS,
           seed: int = 0) -> SmatchResult:
    """Score *test* against *gold*; precision is relative to *test*."""
    prob = _Problem(test, gold)
    if len(prob.test_vars) <= EXHAUSTIVE_LIMIT and len(prob.gold_vars) <= EXHAUSTIVE_LIMIT:
        matched, mapping = _exhaustive(prob)
        return _result(prob, matched, mapping, 0, exhaustive=True)
    return _hill_climb(prob, restarts, seed)


def match_count(test: SemGraph, gold: SemGraph, mapping: Mapping[str, str]) -> int:
    """Matched triples under an explicit mapping (test variable -> gold variable)."""
    prob = _Problem(test, gold)
    gi = {v: j for j, v in enumerate(prob.gold_vars)}
    return prob.score([gi.get(mapping.get(v)) if v in mapping else None for v in prob.test_vars])


@dataclass(frozen=True)
class CorpusSmatch:
    average_f1: float
    per_pair: tuple[SmatchResult, ...]
    averaging: str = "macro"
    precision: float = field(default=0.0)
    recall: float = field(default=0.0)


def _pair_seed(seed: int, index: int) -> int:
    return seed * 1_000_003 + index


def _score_pair(args):
    test, gold, restarts, seed = args
    return smatch(test, gold, restarts, seed)


def corpus_smatch(pairs: Sequence[tuple[SemGraph, SemGraph]], restarts: int = DEFAULT_RESTARTS,
                  seed: int = 0, averaging: str = "macro", jobs: int = 1) -> CorpusSmatch:
    """Score aligned (test, gold) pairs.

    ``macro`` averages per-pair F1; ``micro`` pools matched and total triple
    counts before computing F1. Pair *i* is scored with a seed derived from
    ``seed`` and *i*, so results do not depend on ``jobs``.
    """
    if not pairs:
        raise EmptyPairList("no graph pairs to score")
    if averaging not in ("macro", "micro"):
        raise ValueError(f"averaging must be 'macro' or 'micro', got {averaging!r}")
    work = [(t, g, restarts, _pair_seed(seed, i)) for i, (t, g) in enumerate(pairs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = tuple(pool.map(_score_pair, work, chunksize=8))
    else:
        results = tuple(map(_score_pair, work))
    matched = sum(r.matched_triples for r in results)
    p, r, micro_f = f_score(
        matched, sum(x.test_triples for x in results), sum(x.gold_triples for x in results)
    )
    avg = sum(x.f1 for x in results) / len(results) if averaging == "macro" else micro_f
    return CorpusSmatch(avg, results, averaging, p, r)
