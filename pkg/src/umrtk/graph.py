"""Rooted, directed, labeled semantic graphs and their PENMAN text form.

A :class:`SemGraph` holds variables with concepts, relation edges between
variables, and attribute leaves carrying constants. Graphs are immutable once
built; every transformation in the package returns a new graph.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, NamedTuple

__all__ = [
    "Attribute",
    "DanglingVariableReference",
    "DuplicateVariableDefinition",
    "Edge",
    "EmptyGraph",
    "GraphError",
    "GraphInvariantError",
    "PenmanSyntaxError",
    "SemGraph",
    "Triple",
    "UnbalancedParens",
    "parse_penman",
    "read_penman_blocks",
    "serialize_penman",
    "to_triples",
    "triple_multiset",
]

INSTANCE = "instance"
RELATION = "relation"
ATTRIBUTE = "attribute"
INSTANCE_ROLE = "instance"
# No parsed role can collide with this: parsed roles always start with ":".
TOP_ROLE = "TOP"
TOP_VALUE = "top"

# Shapes that mark a bare token as an intended variable reference. Used only
# to report dangling references; ids themselves are opaque.
DEFAULT_VARIABLE_SHAPE = re.compile(r"^(?:[a-z]\d*|s\d+[a-z]+\d*)$")


class Edge(NamedTuple):
    source: str
    role: str
    target: str


class Attribute(NamedTuple):
    source: str
    role: str
    value: str


class Triple(NamedTuple):
    kind: str
    source: str
    role: str
    target: str


class GraphError(ValueError):
    """Base class for graph parse and validation failures."""


class PenmanSyntaxError(GraphError):
    """A parse failure with a 1-based source position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.reason = message
        self.line = line
        self.column = column


class UnbalancedParens(PenmanSyntaxError):
    pass


class DuplicateVariableDefinition(PenmanSyntaxError):
    pass


class DanglingVariableReference(PenmanSyntaxError):
    pass


class EmptyGraph(PenmanSyntaxError):
    pass


class GraphInvariantError(GraphError):
    """Raised when a constructed graph violates a structural invariant."""


@dataclass(frozen=True)
class SemGraph:
    root: str
    instances: Mapping[str, str]
    edges: tuple[Edge, ...] = ()
    attributes: tuple[Attribute, ...] = ()
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "instances", MappingProxyType(dict(self.instances)))
        object.__setattr__(self, "edges", tuple(Edge(*e) for e in self.edges))
        object.__setattr__(
            self, "attributes", tuple(Attribute(*a) for a in self.attributes)
        )
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))
        self._check()

    def __reduce__(self):
        return (SemGraph, (self.root, dict(self.instances), self.edges, self.attributes,
                           dict(self.metadata)))

    def _check(self) -> None:
        if self.root not in self.instances:
            raise GraphInvariantError(f"root {self.root!r} has no instance")
        for var, concept in self.instances.items():
            if not var or not concept:
                raise GraphInvariantError(f"empty variable or concept: {var!r}/{concept!r}")
        for e in self.edges:
            for end in (e.source, e.target):
                if end not in self.instances:
                    raise GraphInvariantError(f"edge {e} references unknown variable {end!r}")
        for a in self.attributes:
            if a.source not in self.instances:
                raise GraphInvariantError(f"attribute {a} on unknown variable {a.source!r}")
            if not a.value:
                raise GraphInvariantError(f"attribute {a} has an empty constant")
        unreachable = set(self.instances) - self.reachable()
        if unreachable:
            raise GraphInvariantError(
                f"variables not reachable from root {self.root!r}: {sorted(unreachable)}"
            )

    def reachable(self) -> set[str]:
        children: dict[str, list[str]] = {}
        for e in self.edges:
            children.setdefault(e.source, []).append(e.target)
        seen = {self.root}
        stack = [self.root]
        while stack:
            for nxt in children.get(stack.pop(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def __eq__(self, other):
        if not isinstance(other, SemGraph):
            return NotImplemented
        return (
            self.root == other.root
            and dict(self.instances) == dict(other.instances)
            and self.edges == other.edges
            and self.attributes == other.attributes
            and dict(self.metadata) == dict(other.metadata)
        )

    def __hash__(self):
        return hash((self.root, tuple(self.instances.items()), self.edges, self.attributes))

    def __str__(self):
        return serialize_penman(self)

    def variables(self) -> list[str]:
        return list(self.instances)

    def reentrant_edges(self) -> set[Edge]:
        """Edges whose target is the target of more than one edge, or the root."""
        counts = Counter(e.target for e in self.edges)
        counts[self.root] += 1
        return {e for e in self.edges if counts[e.target] > 1}


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<slash>/)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<role>:[^\s()"]*)
  | (?P<symbol>[^\s()/:"][^\s()/"]*)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


class _Tok(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, first_line: int = 1) -> list[_Tok]:
    toks = []
    line, line_start = first_line, 0
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        col = m.start() - line_start + 1
        if kind == "ws":
            chunk = m.group()
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = m.start() + chunk.rfind("\n") + 1
            continue
        if kind == "bad":
            if m.group() == '"':
                raise PenmanSyntaxError("unterminated string literal", line, col)
            raise PenmanSyntaxError(f"unexpected character {m.group()!r}", line, col)
        toks.append(_Tok(kind, m.group(), line, col))
    return toks


def _split_comments(text: str) -> tuple[dict[str, str], str, int]:
    """Peel leading '#' lines off *text*; return (metadata, body, body_line)."""
    metadata: dict[str, str] = {}
    free: list[str] = []
    lines = text.split("\n")
    i = 0
    while i < len(lines):
        stripped = lines[i].strip()
        if stripped.startswith("#"):
            content = stripped.lstrip("#").strip()
            if content.startswith("::"):
                for key, value in _metadata_pairs(content):
                    metadata[key] = value
            elif content:
                free.append(content)
            i += 1
        elif not stripped:
            i += 1
        else:
            break
    if free:
        metadata.setdefault("comment", "\n".join(free))
    return metadata, "\n".join(lines[i:]), i + 1


def _metadata_pairs(content: str) -> Iterator[tuple[str, str]]:
    # "::id x ::snt Some text" -> ("id", "x"), ("snt", "Some text")
    for part in content.split("::")[1:]:
        part = part.strip()
        if not part:
            continue
        key, _, value = part.partition(" ")
        yield key, value.strip()


class _Parser:
    def __init__(self, toks: list[_Tok], end_line: int, end_col: int):
        self.toks = toks
        self.i = 0
        self.end = (end_line, end_col)
        self.instances: dict[str, str] = {}
        self.defined_at: dict[str, _Tok] = {}
        # (source, role, target token, is_subtree) in textual order; targets
        # are resolved to edges or constants after the whole graph is read
        self.branches: list = []

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise UnbalancedParens("unexpected end of input; missing ')'", *self.end)
        self.i += 1
        return tok

    def node(self) -> str:
        open_tok = self.take()
        if open_tok.kind != "lparen":
            raise PenmanSyntaxError(
                f"expected '(' but found {open_tok.text!r}", open_tok.line, open_tok.col
            )
        var_tok = self.take()
        if var_tok.kind != "symbol":
            raise PenmanSyntaxError(
                f"expected a variable after '(' but found {var_tok.text!r}",
                var_tok.line,
                var_tok.col,
            )
        var = var_tok.text
        if var in self.instances:
            first = self.defined_at[var]
            raise DuplicateVariableDefinition(
                f"variable {var!r} already defined at line {first.line}, column {first.col}",
                var_tok.line,
                var_tok.col,
            )
        slash = self.take()
        if slash.kind != "slash":
            raise PenmanSyntaxError(
                f"expected '/' after variable {var!r}", slash.line, slash.col
            )
        concept = self.take()
        if concept.kind not in ("symbol", "string"):
            raise PenmanSyntaxError(
                f"expected a concept after '/' but found {concept.text!r}",
                concept.line,
                concept.col,
            )
        self.instances[var] = concept.text
        self.defined_at[var] = var_tok
        while True:
            tok = self.take()
            if tok.kind == "rparen":
                return var
            if tok.kind != "role":
                raise PenmanSyntaxError(
                    f"expected a role or ')' but found {tok.text!r}", tok.line, tok.col
                )
            if tok.text == ":":
                raise PenmanSyntaxError("empty role label", tok.line, tok.col)
            nxt = self.peek()
            if nxt is None:
                raise UnbalancedParens("unexpected end of input; missing ')'", *self.end)
            if nxt.kind == "lparen":
                slot = len(self.branches)
                self.branches.append(None)
                child = self.node()
                self.branches[slot] = (var, tok.text, _Tok("var", child, nxt.line, nxt.col), True)
            elif nxt.kind in ("symbol", "string"):
                self.take()
                self.branches.append((var, tok.text, nxt, False))
            else:
                raise PenmanSyntaxError(
                    f"role {tok.text} has no target", nxt.line, nxt.col
                )


def parse_penman(text: str, variable_shape: re.Pattern | None = DEFAULT_VARIABLE_SHAPE,
                 first_line: int = 1) -> SemGraph:
    """Parse one PENMAN graph, optionally preceded by ``#`` comment lines.

    ``# ::key value`` lines become metadata entries; other comment lines are
    joined under the ``comment`` key. A bare target token is an edge when it
    names a variable defined anywhere in the graph and a constant otherwise.
    If it is undefined but has the shape of a variable (``variable_shape``)
    it is reported as :class:`DanglingVariableReference`; pass ``None`` to
    disable that check.
    """
    metadata, body, body_line = _split_comments(text)
    toks = _tokenize(body, first_line + body_line - 1)
    lines = text.split("\n")
    end = (first_line + len(lines) - 1, len(lines[-1]) + 1)
    if not toks:
        raise EmptyGraph("no graph found", *end)
    parser = _Parser(toks, *end)
    root = parser.node()
    extra = parser.peek()
    if extra is not None:
        if extra.kind == "rparen":
            raise UnbalancedParens("unmatched ')'", extra.line, extra.col)
        raise PenmanSyntaxError(
            f"trailing content after graph: {extra.text!r}", extra.line, extra.col
        )

    edges: list[Edge] = []
    attributes: list[Attribute] = []
    for source, role, tok, is_node in parser.branches:
        if is_node or tok.text in parser.instances:
            edges.append(Edge(source, role, tok.text))
        elif (
            variable_shape is not None
            and tok.kind == "symbol"
            and variable_shape.match(tok.text)
        ):
            raise DanglingVariableReference(
                f"{tok.text!r} looks like a variable but is never defined",
                tok.line,
                tok.col,
            )
        else:
            attributes.append(Attribute(source, role, tok.text))
    return SemGraph(root, parser.instances, edges, attributes, metadata)


def read_penman_blocks(text: str, **kwargs) -> list[SemGraph]:
    """Parse a file of graphs separated by blank lines.

    Blocks without any ``(`` (e.g. a file header comment) are skipped. Parse
    errors report line numbers relative to the whole file.
    """
    graphs = []
    for first_line, block in _blocks(text):
        if "(" not in _strip_comment_lines(block):
            continue
        graphs.append(parse_penman(block, first_line=first_line, **kwargs))
    return graphs


def _strip_comment_lines(block: str) -> str:
    return "\n".join(ln for ln in block.split("\n") if not ln.lstrip().startswith("#"))


def _blocks(text: str) -> Iterator[tuple[int, str]]:
    current: list[str] = []
    start = 1
    for n, line in enumerate(text.split("\n"), 1):
        if line.strip():
            if not current:
                start = n
            current.append(line)
        elif current:
            yield start, "\n".join(current)
            current = []
    if current:
        yield start, "\n".join(current)


# ---------------------------------------------------------------------------
# serialization

def serialize_penman(graph: SemGraph, indent: int = 4, metadata: bool = False) -> str:
    """Render *graph* as PENMAN text.

    Each variable's concept is printed at its first depth-first mention and
    later mentions are bare variables. ``indent=0`` puts the whole graph on
    one line.
    """
    out_edges: dict[str, list[Edge]] = {}
    for e in graph.edges:
        out_edges.setdefault(e.source, []).append(e)
    out_attrs: dict[str, list[Attribute]] = {}
    for a in graph.attributes:
        out_attrs.setdefault(a.source, []).append(a)

    printed: set[str] = set()

    def render(var: str, depth: int) -> str:
        printed.add(var)
        parts = [f"({var} / {graph.instances[var]}"]
        sep = " " if indent == 0 else "\n" + " " * (indent * (depth + 1))
        for e in out_edges.get(var, ()):
            if e.target in printed:
                parts.append(f"{sep}{e.role} {e.target}")
            else:
                parts.append(f"{sep}{e.role} {render(e.target, depth + 1)}")
        for a in out_attrs.get(var, ()):
            parts.append(f"{sep}{a.role} {a.value}")
        return "".join(parts) + ")"

    body = render(graph.root, 0)
    if metadata and graph.metadata:
        header = [f"# ::{k} {v}".rstrip() for k, v in graph.metadata.items() if k != "comment"]
        return "\n".join(header + [body])
    return body


# ---------------------------------------------------------------------------
# triples

def to_triples(graph: SemGraph) -> list[Triple]:
    """Instance triples, the synthetic top triple, relations, then attributes."""
    triples = [Triple(INSTANCE, v, INSTANCE_ROLE, c) for v, c in graph.instances.items()]
    triples.append(Triple(ATTRIBUTE, graph.root, TOP_ROLE, TOP_VALUE))
    triples.extend(Triple(RELATION, *e) for e in graph.edges)
    triples.extend(Triple(ATTRIBUTE, *a) for a in graph.attributes)
    return triples


def triple_multiset(graph: SemGraph) -> Counter:
    return Counter(to_triples(graph))


def from_triples(triples: Iterable[Triple], metadata: Mapping[str, str] | None = None) -> SemGraph:
    """Rebuild a graph from its triples (inverse of :func:`to_triples`)."""
    instances: dict[str, str] = {}
    edges, attributes = [], []
    root = None
    for t in triples:
        if t.kind == INSTANCE:
            instances[t.source] = t.target
        elif t.kind == RELATION:
            edges.append(Edge(t.source, t.role, t.target))
        elif t.role == TOP_ROLE:
            root = t.source
        else:
            attributes.append(Attribute(t.source, t.role, t.target))
    if root is None:
        raise GraphInvariantError("triples carry no top marker")
    return SemGraph(root, instances, edges, attributes, metadata or {})
