"""Sparse surface features for explicit and non-explicit relations.

Feature names carry a namespace prefix: "conn=", "sent=", "tri1=", "tri2="
for the explicit branch; "wp=", "pp=", "pr=", "adv=" plus the trigram
namespaces for the non-explicit branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import ParseIndex, Relation, Token, covering_subtree, production_rules
from .embeddings import ClusterModel, cluster_of

NEGATORS = {"not", "never", "no", "n't"}
ADVERB_TAGS = {"RB", "RBR", "RBS"}

#: All feature namespaces, explicit branch first.
EXPLICIT_NAMESPACES = ("conn", "sent", "tri1", "tri2")
NONEXPLICIT_NAMESPACES = ("tri1", "tri2", "wp", "pp", "pr", "adv")


@dataclass
class SparseFeatureVector:
    """Named features with real values; current features are all binary 1.0."""

    entries: dict[str, float] = field(default_factory=dict)

    def add(self, name: str, value: float = 1.0) -> None:
        self.entries[name] = value

    def names(self) -> Iterable[str]:
        return self.entries.keys()

    def namespaces(self) -> set[str]:
        return {name.split("=", 1)[0] for name in self.entries}

    def restrict(self, namespaces: Iterable[str]) -> "SparseFeatureVector":
        allowed = set(namespaces)
        return SparseFeatureVector(
            {n: v for n, v in self.entries.items() if n.split("=", 1)[0] in allowed}
        )

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class FeatureVocab:
    """Frozen feature-name -> column index map fitted on training data."""

    index: dict[str, int]
    min_count: int = 2

    @property
    def dim(self) -> int:
        return len(self.index)

    def names_in_order(self) -> list[str]:
        out = [""] * len(self.index)
        for name, col in self.index.items():
            out[col] = name
        return out


def sentiment_score(tokens: Sequence[str], lexicon: Mapping[str, float]) -> float:
    """Sum of lexicon polarities; a negator within the 2 previous tokens flips."""
    lowered = [t.lower() for t in tokens]
    total = 0.0
    for i, word in enumerate(lowered):
        polarity = lexicon.get(word)
        if polarity is None:
            continue
        if any(prev in NEGATORS for prev in lowered[max(0, i - 2) : i]):
            polarity = -polarity
        total += polarity
    return total


def load_lexicon(path: str) -> dict[str, float]:
    """Sentiment lexicon file: UTF-8 lines "word<TAB>polarity"."""
    lexicon: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            word, value = line.rstrip("\n").split("\t")
            lexicon[word] = float(value)
    return lexicon


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def _trigram_features(rel: Relation, vec: SparseFeatureVector) -> None:
    last3 = [t.surface.lower() for t in rel.arg1_tokens[-3:]]
    first3 = [t.surface.lower() for t in rel.arg2_tokens[:3]]
    vec.add("tri1=" + "_".join(last3))
    vec.add("tri2=" + "_".join(first3))


def explicit_features(rel: Relation, lexicon: Mapping[str, float]) -> SparseFeatureVector:
    """Connective text, same/different sentiment, and boundary trigrams."""
    if not rel.is_explicit:
        raise ValueError(f"wrong branch: relation {rel.rel_id} is {rel.rel_type.value}")
    vec = SparseFeatureVector()
    conn = " ".join(t.surface for t in rel.connective_tokens).lower().replace(" ", "_")
    vec.add("conn=" + conn)
    s1 = sentiment_score([t.surface for t in rel.arg1_tokens], lexicon)
    s2 = sentiment_score([t.surface for t in rel.arg2_tokens], lexicon)
    vec.add("sent=same" if _sign(s1) == _sign(s2) else "sent=diff")
    _trigram_features(rel, vec)
    return vec


def nonexplicit_features(rel: Relation, clusters: ClusterModel | None,
                         parses: ParseIndex | None,
                         lexicon: Mapping[str, float] | None = None) -> SparseFeatureVector:
    """Cluster word pairs, POS pairs, production-rule pairs, adverb pairs, trigrams.

    The lexicon argument is accepted for interface symmetry with the explicit
    branch; no sentiment feature is emitted here.
    """
    if rel.is_explicit:
        raise ValueError(f"wrong branch: relation {rel.rel_id} is Explicit")
    vec = SparseFeatureVector()
    _trigram_features(rel, vec)

    if clusters is not None:
        ids1 = sorted({cluster_of(clusters, t.surface) for t in rel.arg1_tokens})
        ids2 = sorted({cluster_of(clusters, t.surface) for t in rel.arg2_tokens})
        for a in ids1:
            for b in ids2:
                vec.add(f"wp={a}|{b}")

    tags1 = sorted({t.pos for t in rel.arg1_tokens if t.pos})
    tags2 = sorted({t.pos for t in rel.arg2_tokens if t.pos})
    for a in tags1:
        for b in tags2:
            vec.add(f"pp={a}|{b}")

    if parses is not None:
        rules1 = sorted(_argument_rules(rel.doc_id, rel.arg1_tokens, parses))
        rules2 = sorted(_argument_rules(rel.doc_id, rel.arg2_tokens, parses))
        for a in rules1:
            for b in rules2:
                vec.add(f"pr={a}|{b}")

    advs1 = sorted({t.surface.lower() for t in rel.arg1_tokens if t.pos in ADVERB_TAGS})
    advs2 = sorted({t.surface.lower() for t in rel.arg2_tokens if t.pos in ADVERB_TAGS})
    if advs1 and advs2:
        for a in advs1:
            for b in advs2:
                vec.add(f"adv={a}|{b}")
    elif advs1:
        for a in advs1:
            vec.add(f"adv={a}|NONE")
    elif advs2:
        for b in advs2:
            vec.add(f"adv=NONE|{b}")
    return vec


def _argument_rules(doc_id: str, tokens: list[Token], parses: ParseIndex) -> set[str]:
    """Production rules from the minimal subtree covering the argument tokens,
    per sentence the argument touches."""
    sentences = parses.get(doc_id)
    if sentences is None:
        return set()
    by_sent: dict[int, list[int]] = {}
    for tok in tokens:
        by_sent.setdefault(tok.sent_index, []).append(tok.tok_index)
    rules: set[str] = set()
    for sent_index, positions in by_sent.items():
        if not (0 <= sent_index < len(sentences)):
            continue
        tree = sentences[sent_index].tree
        if tree is None:
            continue
        sub = covering_subtree(tree, min(positions), max(positions) + 1)
        rules |= production_rules(sub)
    return rules


def fit_vocab(vectors: Iterable[SparseFeatureVector], min_count: int = 2) -> FeatureVocab:
    """Index features seen at least min_count times, in lexicographic order."""
    counts: dict[str, int] = {}
    for vec in vectors:
        for name in vec.names():
            counts[name] = counts.get(name, 0) + 1
    kept = sorted(name for name, c in counts.items() if c >= min_count)
    return FeatureVocab(index={name: i for i, name in enumerate(kept)}, min_count=min_count)


def vectorize(vec: SparseFeatureVector, vocab: FeatureVocab) -> np.ndarray:
    """Dense float64 vector; features missing from the vocab are ignored."""
    out = np.zeros(vocab.dim, dtype=np.float64)
    for name, value in vec.entries.items():
        col = vocab.index.get(name)
        if col is not None:
            out[col] = value
    return out
