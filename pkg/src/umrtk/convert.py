"""Rule-based conversion of sentence-level UMR graphs into AMR graphs.

The conversion removes UMR-only roles, renames roles and concepts, strips
``:wiki`` and collapses ``person`` nodes annotated with person/number
attributes into an English pronoun concept. The rules live in a plain-text
file (see ``data/default.rules`` for the grammar); this module only applies
them.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .graph import Attribute, Edge, SemGraph

PERSONS = ("1st", "2nd", "3rd", "unspecified")
NUMBERS = ("singular", "dual", "paucal", "plural", "unspecified")

PERSON_ROLES = frozenset({":refer-person", ":ref-person"})
NUMBER_ROLES = frozenset({":refer-number", ":ref-number"})
REFER_ROLES = PERSON_ROLES | NUMBER_ROLES

_PERSON_VALUES = {
    "1st": "1st", "first": "1st", "1": "1st",
    "2nd": "2nd", "second": "2nd", "2": "2nd",
    "3rd": "3rd", "third": "3rd", "3": "3rd",
}
_NUMBER_VALUES = {
    "singular": "singular", "sg": "singular",
    "dual": "dual", "du": "dual",
    "paucal": "paucal", "trial": "paucal",
    "plural": "plural", "pl": "plural", "non-singular": "plural", "greater-plural": "plural",
}

_ARG_RE = re.compile(r"^:arg(\d+)(-of)?$", re.IGNORECASE)


class RuleError(ValueError):
    pass


class RuleConflict(RuleError):
    pass


class RuleFileSyntax(RuleError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"{message} (line {line})" if line is not None else message)
        self.line = line


class DisconnectedAfterConversion(ValueError):
    def __init__(self, orphans: list[str]):
        super().__init__(f"conversion disconnected variables {orphans} from the root")
        self.orphans = orphans


def _default_pronoun_table() -> dict[tuple[str, str], str]:
    table = {}
    for number in NUMBERS:
        table[("1st", number)] = "i" if number in ("singular", "unspecified") else "we"
        table[("2nd", number)] = "you"
        table[("3rd", number)] = "they"
        # nouns are third person in English
        table[("unspecified", number)] = "they"
    return table


@dataclass(frozen=True)
class PronounPolicy:
    table: Mapping[tuple[str, str], str] = field(default_factory=_default_pronoun_table)

    def __post_init__(self):
        table = dict(self.table)
        missing = [(p, n) for p in PERSONS for n in NUMBERS if (p, n) not in table]
        if missing:
            raise RuleError(f"pronoun table is not total; missing {missing}")
        extra = set(table) - {(p, n) for p in PERSONS for n in NUMBERS}
        if extra:
            raise RuleError(f"pronoun table has entries outside the domain: {sorted(extra)}")
        object.__setattr__(self, "table", MappingProxyType(table))

    def with_overrides(self, overrides: Mapping[tuple[str, str], str]) -> "PronounPolicy":
        table = dict(self.table)
        table.update(overrides)
        return PronounPolicy(table)


def normalize_person(value: str | None) -> str:
    if value is None:
        return "unspecified"
    return _PERSON_VALUES.get(value.strip('"').casefold(), "unspecified")


def normalize_number(value: str | None) -> str:
    if value is None:
        return "unspecified"
    return _NUMBER_VALUES.get(value.strip('"').casefold(), "unspecified")


def resolve_pronoun(person: str | None, number: str | None,
                    policy: PronounPolicy | None = None) -> str:
    """Pronoun concept for a person/number pair; raw attribute values are accepted."""
    policy = policy or PronounPolicy()
    return policy.table[(normalize_person(person), normalize_number(number))]


@dataclass(frozen=True)
class ConversionRuleSet:
    removed_roles: frozenset[str] = frozenset()
    role_renames: Mapping[str, str] = field(default_factory=dict)
    concept_renames: Mapping[str, str] = field(default_factory=dict)
    strip_wiki: bool = True
    pronoun_policy: PronounPolicy = field(default_factory=PronounPolicy)
    normalize_arg_case: bool = True

    def __post_init__(self):
        removed = frozenset(r.casefold() for r in self.removed_roles)
        roles = {k.casefold(): v for k, v in self.role_renames.items()}
        concepts = dict(self.concept_renames)
        overlap = removed & set(roles)
        if overlap:
            raise RuleConflict(f"roles both removed and renamed: {sorted(overlap)}")
        _check_renames("role", roles, str.casefold)
        _check_renames("concept", concepts, lambda s: s)
        into_removed = [(s, d) for s, d in roles.items() if d.casefold() in removed]
        if into_removed:
            raise RuleConflict(f"roles renamed into removed roles: {into_removed}")
        pronouns = set(self.pronoun_policy.table.values())
        if pronouns & set(concepts):
            raise RuleConflict(f"pronoun concepts are renamed: {sorted(pronouns & set(concepts))}")
        object.__setattr__(self, "removed_roles", removed)
        object.__setattr__(self, "role_renames", MappingProxyType(roles))
        object.__setattr__(self, "concept_renames", MappingProxyType(concepts))


def _check_renames(kind: str, mapping: Mapping[str, str], key) -> None:
    sources = {key(k) for k in mapping}
    for src, dst in mapping.items():
        if key(src) == key(dst):
            raise RuleConflict(f"identity {kind} rename {src} -> {dst}")
        # a target that is also a source makes a chain or a cycle
        if key(dst) in sources:
            raise RuleConflict(f"{kind} rename {src} -> {dst} chains into another rename")


# ---------------------------------------------------------------------------
# rule files

_SECTIONS = ("REMOVE", "RENAME-ROLE", "RENAME-CONCEPT", "PRONOUN", "OPTIONS")


def parse_rules(text: str) -> ConversionRuleSet:
    removed: list[str] = []
    role_renames: dict[str, str] = {}
    concept_renames: dict[str, str] = {}
    pronouns: dict[tuple[str, str], str] = {}
    options: dict[str, bool] = {}
    section = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z-]+)\s*\]", line)
        if m:
            section = m.group(1).upper()
            if section not in _SECTIONS:
                raise RuleFileSyntax(f"unknown section [{m.group(1)}]", lineno)
            continue
        if section is None:
            raise RuleFileSyntax("rule outside of any section", lineno)

        if section == "REMOVE":
            if " " in line or not line.startswith(":"):
                raise RuleFileSyntax(f"expected a single role, got {line!r}", lineno)
            removed.append(line)
        elif section in ("RENAME-ROLE", "RENAME-CONCEPT"):
            lhs, rhs = _mapping(line, lineno)
            if section == "RENAME-ROLE":
                if not (lhs.startswith(":") and rhs.startswith(":")):
                    raise RuleFileSyntax("role renames must map :role -> :role", lineno)
                target = role_renames
            else:
                target = concept_renames
            if lhs in target and target[lhs] != rhs:
                raise RuleConflict(f"{lhs} renamed twice (line {lineno})")
            target[lhs] = rhs
        elif section == "PRONOUN":
            lhs, rhs = _mapping(line, lineno)
            parts = lhs.split()
            if len(parts) != 2:
                raise RuleFileSyntax("pronoun rules read '<person> <number> -> <concept>'", lineno)
            person, number = (p.casefold() for p in parts)
            persons = PERSONS if person == "*" else (person,)
            numbers = NUMBERS if number == "*" else (number,)
            for p in persons:
                if p not in PERSONS:
                    raise RuleFileSyntax(f"unknown person {p!r}", lineno)
                for n in numbers:
                    if n not in NUMBERS:
                        raise RuleFileSyntax(f"unknown number {n!r}", lineno)
                    pronouns[(p, n)] = rhs
        else:
            key, sep, value = line.partition("=")
            value = value.strip().lower()
            if not sep or value not in ("true", "false"):
                raise RuleFileSyntax("options read 'name = true|false'", lineno)
            key = key.strip()
            if key not in ("strip_wiki", "normalize_arg_case"):
                raise RuleFileSyntax(f"unknown option {key!r}", lineno)
            options[key] = value == "true"

    return ConversionRuleSet(
        removed_roles=frozenset(removed),
        role_renames=role_renames,
        concept_renames=concept_renames,
        pronoun_policy=PronounPolicy().with_overrides(pronouns),
        **options,
    )


def _mapping(line: str, lineno: int) -> tuple[str, str]:
    lhs, sep, rhs = line.partition("->")
    lhs, rhs = lhs.strip(), rhs.strip()
    if not sep or not lhs or not rhs or " " in rhs:
        raise RuleFileSyntax(f"expected 'source -> target', got {line!r}", lineno)
    return lhs, rhs


def load_rules(path: str | Path) -> ConversionRuleSet:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as err:
        raise RuleFileSyntax(f"{path}: not UTF-8 text") from err
    return parse_rules(text)


def default_rules_text() -> str:
    return resources.files("umrtk").joinpath("data/default.rules").read_text(encoding="utf-8")


def default_rules() -> ConversionRuleSet:
    return parse_rules(default_rules_text())


# ---------------------------------------------------------------------------
# conversion

@dataclass
class ConversionReport:
    removed_role_count: Counter = field(default_factory=Counter)
    renamed_role_count: Counter = field(default_factory=Counter)
    renamed_concept_count: Counter = field(default_factory=Counter)
    pronoun_substitutions: list[tuple[str, str]] = field(default_factory=list)
    dropped_subtrees: list[str] = field(default_factory=list)
    dropped_triple_count: int = 0

    def is_empty(self) -> bool:
        return not (
            self.removed_role_count or self.renamed_role_count or self.renamed_concept_count
            or self.pronoun_substitutions or self.dropped_subtrees
        )

    def rows(self, sentence_id: str = "") -> list[tuple[str, str, str, str]]:
        out = []
        for role, n in sorted(self.removed_role_count.items()):
            out.append((sentence_id, "removed-role", role, str(n)))
        for (old, new), n in sorted(self.renamed_role_count.items()):
            out.append((sentence_id, "renamed-role", f"{old} -> {new}", str(n)))
        for (old, new), n in sorted(self.renamed_concept_count.items()):
            out.append((sentence_id, "renamed-concept", f"{old} -> {new}", str(n)))
        for var, pron in self.pronoun_substitutions:
            out.append((sentence_id, "pronoun", var, pron))
        for var in self.dropped_subtrees:
            out.append((sentence_id, "dropped-variable", var, ""))
        return out

    def merge(self, other: "ConversionReport") -> None:
        self.removed_role_count.update(other.removed_role_count)
        self.renamed_role_count.update(other.renamed_role_count)
        self.renamed_concept_count.update(other.renamed_concept_count)
        self.pronoun_substitutions.extend(other.pronoun_substitutions)
        self.dropped_subtrees.extend(other.dropped_subtrees)
        self.dropped_triple_count += other.dropped_triple_count


REPORT_HEADER = ("sentence_id", "kind", "item", "value")


def _rename_role(role: str, rules: ConversionRuleSet, report: ConversionReport) -> str:
    new = role
    if rules.normalize_arg_case:
        m = _ARG_RE.match(role)
        if m:
            new = f":ARG{m.group(1)}{'-of' if m.group(2) else ''}"
    new = rules.role_renames.get(new.casefold(), new)
    if new != role:
        report.renamed_role_count[(role, new)] += 1
    return new


def convert(umr: SemGraph, rules: ConversionRuleSet | None = None,
            strict: bool = False) -> tuple[SemGraph, ConversionReport]:
    """Convert one sentence-level UMR graph; returns the AMR graph and a report.

    Variable ids are kept, so re-entrancies survive. Removing a role can
    leave part of the graph unreachable from the root: that part is dropped
    and listed in the report, or :class:`DisconnectedAfterConversion` is
    raised when ``strict``.
    """
    rules = rules if rules is not None else default_rules()
    report = ConversionReport()

    def removable(role: str) -> bool:
        folded = role.casefold()
        return folded in rules.removed_roles or (rules.strip_wiki and folded == ":wiki")

    edges = []
    for e in umr.edges:
        if removable(e.role):
            report.removed_role_count[e.role] += 1
        else:
            edges.append(Edge(e.source, _rename_role(e.role, rules, report), e.target))

    refer: dict[str, dict[str, str]] = {}
    attributes = []
    for a in umr.attributes:
        folded = a.role.casefold()
        if removable(a.role):
            report.removed_role_count[a.role] += 1
        elif folded in REFER_ROLES:
            report.removed_role_count[a.role] += 1
            kind = "person" if folded in PERSON_ROLES else "number"
            refer.setdefault(a.source, {}).setdefault(kind, a.value)
        else:
            attributes.append(Attribute(a.source, _rename_role(a.role, rules, report), a.value))

    instances = {}
    for var, concept in umr.instances.items():
        if concept == "person" and var in refer:
            pron = resolve_pronoun(
                refer[var].get("person"), refer[var].get("number"), rules.pronoun_policy
            )
            report.pronoun_substitutions.append((var, pron))
            instances[var] = pron
        elif concept in rules.concept_renames:
            new = rules.concept_renames[concept]
            report.renamed_concept_count[(concept, new)] += 1
            instances[var] = new
        else:
            instances[var] = concept

    reachable = _reachable(umr.root, edges)
    orphans = [v for v in instances if v not in reachable]
    if orphans:
        if strict:
            raise DisconnectedAfterConversion(orphans)
        dropped = set(orphans)
        kept_edges = [e for e in edges if e.source not in dropped]
        kept_attrs = [a for a in attributes if a.source not in dropped]
        report.dropped_triple_count = (
            len(dropped) + (len(edges) - len(kept_edges)) + (len(attributes) - len(kept_attrs))
        )
        report.dropped_subtrees = orphans
        edges, attributes = kept_edges, kept_attrs
        instances = {v: c for v, c in instances.items() if v not in dropped}
        report.pronoun_substitutions = [p for p in report.pronoun_substitutions if p[0] not in dropped]

    return SemGraph(umr.root, instances, edges, attributes, umr.metadata), report


def _reachable(root: str, edges) -> set[str]:
    children: dict[str, list[str]] = {}
    for e in edges:
        children.setdefault(e.source, []).append(e.target)
    seen, stack = {root}, [root]
    while stack:
        for nxt in children.get(stack.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen
