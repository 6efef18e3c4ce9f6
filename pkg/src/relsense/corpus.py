"""Readers for shared-task discourse relation data and bracketed constituency parses.

The relations file is UTF-8, one JSON object per line.  The parses file is a
single JSON document keyed by document id, holding one bracketed tree string
and per-token POS tags for every sentence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable


class RelType(Enum):
    EXPLICIT = "Explicit"
    IMPLICIT = "Implicit"
    ENTREL = "EntRel"
    ALTLEX = "AltLex"


#: Relation types routed to the non-explicit classifier.
NON_EXPLICIT_TYPES = (RelType.IMPLICIT, RelType.ENTREL, RelType.ALTLEX)


@dataclass
class Token:
    surface: str
    pos: str = ""
    sent_index: int = 0
    tok_index: int = 0


@dataclass
class Relation:
    """One discourse relation instance with gold sense labels (empty at predict time)."""

    doc_id: str
    rel_id: int
    arg1_tokens: list[Token]
    arg2_tokens: list[Token]
    connective_tokens: list[Token]
    rel_type: RelType
    senses: list[str] = field(default_factory=list)

    @property
    def is_explicit(self) -> bool:
        return self.rel_type is RelType.EXPLICIT


@dataclass(frozen=True)
class ParseTree:
    """Constituency tree node; a leaf has a non-empty label and no children."""

    label: str
    children: tuple["ParseTree", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def is_preterminal(self) -> bool:
        return len(self.children) == 1 and self.children[0].is_leaf

    def leaves(self) -> list[str]:
        if self.is_leaf:
            return [self.label]
        out: list[str] = []
        for child in self.children:
            out.extend(child.leaves())
        return out


@dataclass
class SentenceParse:
    """Per-sentence parse: tree may be None for the format's empty-parse marker."""

    tree: ParseTree | None
    tokens: list[tuple[str, str]]  # (surface, pos), pos may be ""


class ParseIndex(dict):
    """doc_id -> list of SentenceParse, plus a counter of missing POS tags."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.missing_pos = 0


# ---------------------------------------------------------------------------
# Bracketed tree parsing
# ---------------------------------------------------------------------------

_ATOM_END = {"(", ")", " ", "\t", "\n", "\r"}


def parse_ptb(s: str) -> ParseTree:
    """Parse one bracketed constituency tree.

    Labels and leaves are whitespace-delimited; parentheses delimit nodes.
    Raises ValueError with a character offset on unbalanced or empty input.
    """
    i = _skip_ws(s, 0)
    if i == len(s):
        raise ValueError("empty tree string at offset 0")
    node, i = _parse_node(s, i)
    i = _skip_ws(s, i)
    if i != len(s):
        raise ValueError(f"trailing content at offset {i}")
    return node


def _skip_ws(s: str, i: int) -> int:
    while i < len(s) and s[i].isspace():
        i += 1
    return i


def _read_atom(s: str, i: int) -> tuple[str, int]:
    start = i
    while i < len(s) and s[i] not in _ATOM_END:
        i += 1
    return s[start:i], i


def _parse_node(s: str, i: int) -> tuple[ParseTree, int]:
    if s[i] != "(":
        atom, j = _read_atom(s, i)
        if not atom:
            raise ValueError(f"expected label at offset {i}")
        return ParseTree(atom), j
    open_at = i
    i = _skip_ws(s, i + 1)
    label = ""
    if i < len(s) and s[i] not in ("(", ")"):
        label, i = _read_atom(s, i)
    children: list[ParseTree] = []
    i = _skip_ws(s, i)
    while i < len(s) and s[i] != ")":
        child, i = _parse_node(s, i)
        children.append(child)
        i = _skip_ws(s, i)
    if i >= len(s):
        raise ValueError(f"unbalanced parentheses at offset {len(s)}")
    if not label and not children:
        raise ValueError(f"empty node at offset {open_at}")
    i += 1
    if not children:
        # "(X)" degenerates to a bare leaf
        return ParseTree(label), i
    return ParseTree(label, tuple(children)), i


def tree_to_string(t: ParseTree) -> str:
    """Inverse of parse_ptb up to whitespace."""
    if t.is_leaf:
        return t.label
    inner = " ".join(tree_to_string(c) for c in t.children)
    if t.label:
        return f"({t.label} {inner})"
    return f"({inner})"


def production_rules(t: ParseTree) -> set[str]:
    """Grammar rewrites read off internal nodes, lexical productions excluded.

    A node contributes "LHS->RHS1 RHS2 ..." unless all of its children are
    leaves (which covers preterminal->word rules).
    """
    rules: set[str] = set()
    _collect_rules(t, rules)
    return rules


def _collect_rules(t: ParseTree, rules: set[str]) -> None:
    if t.is_leaf:
        return
    if not all(c.is_leaf for c in t.children):
        rules.add(t.label + "->" + " ".join(c.label for c in t.children))
    for child in t.children:
        _collect_rules(child, rules)


def covering_subtree(t: ParseTree, lo: int, hi: int) -> ParseTree:
    """Deepest node whose leaf span contains token positions [lo, hi).

    Positions index the tree's leaves left to right.  Out-of-range spans are
    clipped to the available leaves.
    """
    n = len(t.leaves())
    lo = max(0, lo)
    hi = min(n, hi)
    if lo >= hi:
        return t
    node = t
    while True:
        child, offset = _child_covering(node, lo, hi)
        if child is None:
            return node
        node = child
        lo -= offset
        hi -= offset


def _child_covering(t: ParseTree, lo: int, hi: int) -> tuple[ParseTree | None, int]:
    pos = 0
    for child in t.children:
        width = len(child.leaves())
        if pos <= lo and hi <= pos + width and not child.is_leaf:
            return child, pos
        pos += width
    return None, 0


# ---------------------------------------------------------------------------
# Relations file
# ---------------------------------------------------------------------------

def read_relations(lines: Iterable[str]) -> list[Relation]:
    """Read one Relation per non-blank JSON line; order-preserving."""
    relations = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
        try:
            relations.append(_relation_from_json(obj))
        except (KeyError, TypeError, IndexError) as exc:
            raise ValueError(f"line {lineno}: malformed relation object ({exc})") from exc
    return relations


def read_relations_file(path: str) -> list[Relation]:
    with open(path, encoding="utf-8") as fh:
        return read_relations(fh)


def _relation_from_json(obj: dict) -> Relation:
    rel_id = int(obj["ID"])
    try:
        rel_type = RelType(obj["Type"])
    except ValueError:
        raise ValueError(f"relation {rel_id}: unknown relation type {obj['Type']!r}")
    arg1 = _span_tokens(obj["Arg1"])
    arg2 = _span_tokens(obj["Arg2"])
    if not arg1 or not arg2:
        raise ValueError(f"relation {rel_id}: empty argument span")
    connective = _span_tokens(obj.get("Connective", {}))
    if rel_type is RelType.EXPLICIT and not connective:
        raise ValueError(f"relation {rel_id}: explicit relation without connective")
    return Relation(
        doc_id=str(obj["DocID"]),
        rel_id=rel_id,
        arg1_tokens=arg1,
        arg2_tokens=arg2,
        connective_tokens=connective,
        rel_type=rel_type,
        senses=[str(s) for s in obj.get("Sense", [])],
    )


def _span_tokens(span: dict) -> list[Token]:
    token_list = span.get("TokenList", [])
    surfaces = str(span.get("RawText", "")).split()
    if len(surfaces) != len(token_list):
        # Raw text does not split into one piece per token; degraded surfaces
        # get a placeholder that attach_pos may later replace.
        surfaces = (surfaces + ["_"] * len(token_list))[: len(token_list)]
    tokens = []
    for surface, entry in zip(surfaces, token_list):
        # entry layout: [charBegin, charEnd, docTokenOffset, sentOffset, sentTokenOffset]
        tokens.append(Token(surface=surface, sent_index=int(entry[3]), tok_index=int(entry[4])))
    return tokens


# ---------------------------------------------------------------------------
# Parses file
# ---------------------------------------------------------------------------

EMPTY_PARSE_MARKER = "(())"


def read_parses(data: dict) -> ParseIndex:
    """Build the per-document parse index from the decoded parses JSON."""
    index = ParseIndex()
    for doc_id, doc in data.items():
        sentences = []
        for sent_no, sent in enumerate(doc.get("sentences", [])):
            tree_str = (sent.get("parsetree") or "").strip()
            if not tree_str or tree_str == EMPTY_PARSE_MARKER:
                tree = None
            else:
                try:
                    tree = parse_ptb(tree_str)
                except ValueError as exc:
                    raise ValueError(f"doc {doc_id} sentence {sent_no}: {exc}") from exc
                tree = _unwrap_root(tree)
            tokens = []
            for word in sent.get("words", []):
                surface = str(word[0])
                attrs = word[1] if len(word) > 1 and isinstance(word[1], dict) else {}
                pos = str(attrs.get("PartOfSpeech", ""))
                if not pos:
                    index.missing_pos += 1
                tokens.append((surface, pos))
            sentences.append(SentenceParse(tree=tree, tokens=tokens))
        index[doc_id] = sentences
    return index


def read_parses_file(path: str) -> ParseIndex:
    with open(path, encoding="utf-8") as fh:
        return read_parses(json.load(fh))


def _unwrap_root(t: ParseTree) -> ParseTree:
    # shared-task trees arrive wrapped as "( (S ...) )"
    while t.label == "" and len(t.children) == 1:
        t = t.children[0]
    return t


def attach_pos(relations: list[Relation], parses: ParseIndex) -> int:
    """Fill token POS tags from the parse index; returns the number of misses."""
    misses = 0
    for rel in relations:
        sentences = parses.get(rel.doc_id)
        for token in rel.arg1_tokens + rel.arg2_tokens + rel.connective_tokens:
            entry = None
            if sentences is not None and 0 <= token.sent_index < len(sentences):
                toks = sentences[token.sent_index].tokens
                if 0 <= token.tok_index < len(toks):
                    entry = toks[token.tok_index]
            if entry is None:
                misses += 1
                continue
            surface, pos = entry
            token.pos = pos
            if token.surface == "_":
                token.surface = surface
    return misses
