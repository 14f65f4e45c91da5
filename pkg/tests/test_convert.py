import pytest
from hypothesis import given, settings

from conftest import read_fixture
from gen import random_umr_graph, umr_graphs
from umrtk.convert import (ConversionRuleSet, DisconnectedAfterConversion, PronounPolicy,
                           RuleConflict, RuleError, RuleFileSyntax, convert, default_rules,
                           parse_rules, resolve_pronoun)
from umrtk.graph import parse_penman, to_triples, triple_multiset
from umrtk.smatch import smatch

RULES = default_rules()


def conv(text, **kw):
    return convert(parse_penman(text), RULES, **kw)


def test_search_clue():
    g, report = conv(read_fixture("search_clue_umr.penman"))
    assert sorted(to_triples(g)) == sorted(to_triples(parse_penman(
        "(s / search-01 :ARG0 (p / they) :ARG1 (c / clue))"
    )))
    assert report.pronoun_substitutions == [("p", "they")]
    assert report.removed_role_count == {
        ":aspect": 1, ":modstr": 1, ":refer-person": 1, ":refer-number": 2,
    }
    assert report.renamed_role_count == {(":Arg0", ":ARG0"): 1, (":Arg1", ":ARG1"): 1}


def test_pleasure_matches_expected_amr():
    g, _ = conv(read_fixture("pleasure_umr.penman"))
    gold = parse_penman(read_fixture("pleasure_amr_converted.penman"))
    assert triple_multiset(g) == triple_multiset(gold)
    assert smatch(g, gold).f1 == 1.0


def test_single_node_is_unchanged():
    g, report = conv("(p / pleasure)")
    assert triple_multiset(g) == triple_multiset(parse_penman("(p / pleasure)"))
    assert report.is_empty()


def test_wiki_and_renames():
    g, report = conv('(c / city :wiki "Q60" :place (s / state) :temporal (d / date-entity) '
                     ':material (w / wood))')
    roles = {e.role for e in g.edges} | {a.role for a in g.attributes}
    assert roles == {":location", ":time", ":consist-of"}
    assert report.removed_role_count == {":wiki": 1}


def test_inverse_and_stage0_roles():
    g, _ = conv("(e / eat-01 :actor (p / person) :undergoer (f / food) :place-of (r / room))")
    assert {e.role for e in g.edges} == {":ARG0", ":ARG1", ":location-of"}


def test_concept_renames():
    g, report = conv("(h / have-91 :ARG1 (u / umr-unknown))")
    assert dict(g.instances) == {"h": "have-03", "u": "amr-unknown"}
    assert report.renamed_concept_count[("have-91", "have-03")] == 1


def test_person_without_refer_is_kept():
    g, report = conv("(p / person :ARG0-of (w / work-01))")
    assert g.instances["p"] == "person"
    assert not report.pronoun_substitutions


def test_person_keeps_other_children():
    g, _ = conv("(p / person :refer-person 1st :refer-number plural :mod (a / all))")
    assert g.instances["p"] == "we"
    assert ("p", ":mod", "a") in g.edges


@pytest.mark.parametrize("person, number, pron", [
    ("1st", "singular", "i"), ("1st", "Singular", "i"), ("1st", None, "i"),
    ("1st", "plural", "we"), ("1st", "dual", "we"), ("1st", "paucal", "we"),
    ("1st", "trial", "we"),
    ("2nd", "singular", "you"), ("2nd", "plural", "you"),
    ("3rd", "singular", "they"), ("3rd", "plural", "they"),
    (None, None, "they"), ("fourth", "many", "they"),
])
def test_resolve_pronoun(person, number, pron):
    assert resolve_pronoun(person, number) == pron


def test_pronoun_policy_is_total():
    with pytest.raises(RuleError):
        PronounPolicy({("1st", "singular"): "i"})
    custom = PronounPolicy().with_overrides({("3rd", "singular"): "he"})
    assert resolve_pronoun("3rd", "singular", custom) == "he"
    assert resolve_pronoun("3rd", "plural", custom) == "they"


def test_removed_edge_drops_subtree():
    text = "(s / say-01 :ARG0 (p / person) :quot (g / go-02 :ARG0 p :time (n / now)))"
    g, report = conv(text)
    assert set(g.instances) == {"s", "p"}
    assert sorted(report.dropped_subtrees) == ["g", "n"]
    # g, n instances; g :ARG0 p and g :time n
    assert report.dropped_triple_count == 4
    with pytest.raises(DisconnectedAfterConversion) as info:
        conv(text, strict=True)
    assert sorted(info.value.orphans) == ["g", "n"]


def test_default_rules_contents():
    assert RULES.removed_roles == {":aspect", ":modstr", ":modpred", ":quot"}
    assert RULES.role_renames[":place"] == ":location"
    assert RULES.role_renames[":actor"] == ":ARG0"
    assert RULES.concept_renames["have-91"] == "have-03"
    assert RULES.strip_wiki and RULES.normalize_arg_case


@pytest.mark.parametrize("text", [
    "[RENAME-ROLE]\n:a -> :b\n:b -> :c\n",           # chain
    "[RENAME-ROLE]\n:a -> :b\n:b -> :a\n",           # cycle
    "[RENAME-ROLE]\n:a -> :A\n",                     # identity up to case
    "[REMOVE]\n:a\n[RENAME-ROLE]\n:b -> :a\n",       # into a removed role
    "[REMOVE]\n:a\n[RENAME-ROLE]\n:a -> :b\n",       # removed and renamed
    "[RENAME-ROLE]\n:a -> :b\n:a -> :c\n",           # renamed twice
    "[RENAME-CONCEPT]\nthey -> person\n",            # pronoun concept renamed
])
def test_rule_conflicts(text):
    with pytest.raises(RuleConflict):
        parse_rules(text)


@pytest.mark.parametrize("text, line", [
    (":aspect\n", 1),
    ("[NOPE]\n", 1),
    ("[REMOVE]\n\n:aspect :modstr\n", 3),
    ("[RENAME-ROLE]\nplace -> location\n", 2),
    ("[RENAME-CONCEPT]\na b\n", 2),
    ("[PRONOUN]\n4th singular -> x\n", 2),
    ("[OPTIONS]\nstrip_wiki = maybe\n", 2),
])
def test_rule_file_syntax(text, line):
    with pytest.raises(RuleFileSyntax) as info:
        parse_rules(text)
    assert info.value.line == line


def test_rule_options_and_pronoun_wildcards():
    rules = parse_rules("[PRONOUN]\n3rd * -> she\n[OPTIONS]\nstrip_wiki = false\n")
    assert not rules.strip_wiki
    g, _ = convert(parse_penman('(p / person :refer-person 3rd :wiki "x")'), rules)
    assert g.instances["p"] == "she"
    assert g.attributes == (("p", ":wiki", '"x"'),)


def test_empty_rules_only_consume_refer_attributes():
    g, _ = convert(parse_penman("(s / see-01 :aspect state :Arg0 (p / person))"),
                   ConversionRuleSet(normalize_arg_case=False))
    assert triple_multiset(g) == triple_multiset(
        parse_penman("(s / see-01 :aspect state :Arg0 (p / person))"))


# ---------------------------------------------------------------------------
# properties over random UMR-shaped graphs

@settings(max_examples=300)
@given(umr_graphs())
def test_idempotent(g):
    once, _ = convert(g, RULES)
    twice, report = convert(once, RULES)
    assert triple_multiset(twice) == triple_multiset(once)
    assert report.is_empty()


@settings(max_examples=300)
@given(umr_graphs())
def test_no_removed_roles_survive(g):
    out, _ = convert(g, RULES)
    roles = {e.role.casefold() for e in out.edges} | {a.role.casefold() for a in out.attributes}
    assert not roles & (RULES.removed_roles | {":wiki", ":refer-person", ":refer-number",
                                               ":ref-person", ":ref-number"})
    assert not roles & set(RULES.role_renames)


@settings(max_examples=300)
@given(umr_graphs())
def test_triple_accounting(g):
    out, report = convert(g, RULES)
    lost = len(to_triples(g)) - len(to_triples(out))
    assert lost == sum(report.removed_role_count.values()) + report.dropped_triple_count


@settings(max_examples=300)
@given(umr_graphs())
def test_reentrancies_preserved(g):
    out, report = convert(g, RULES)
    if report.dropped_subtrees:
        return
    # kept re-entrant edges stay re-entrant, up to role renaming
    kept = {(e.source, e.target) for e in out.reentrant_edges()}
    removed = RULES.removed_roles | {":wiki"}
    for e in g.reentrant_edges():
        if e.role.casefold() not in removed and sum(
            1 for x in g.edges if x.target == e.target and x.role.casefold() not in removed
        ) > 1:
            assert (e.source, e.target) in kept


def test_strict_never_drops():
    import random
    rng = random.Random(5)
    for _ in range(300):
        g = random_umr_graph(rng)
        try:
            out, report = convert(g, RULES, strict=True)
        except DisconnectedAfterConversion as err:
            assert err.orphans
            continue
        assert not report.dropped_subtrees
        assert set(out.instances) == set(g.instances)
