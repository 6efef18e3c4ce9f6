"""Synthetic corpus, embedding, and lexicon builders shared by the tests.

The generated data is label-revealing by construction: for non-explicit
relations a marker token at the start of arg2 determines the sense; for
explicit relations the connective does.
"""

from __future__ import annotations

import json

import numpy as np

from relsense import corpus, embeddings, neural, pipeline

SENSES = ["Comparison.Contrast", "Contingency.Cause.Reason", "Expansion.Conjunction"]
MARKERS = ["alpha", "beta", "gamma"]
CONNECTIVES = ["however", "because", "and"]
FILLERS = [f"w{i}" for i in range(10)]
SENTIMENT_WORDS = ["good", "bad"]
ALL_WORDS = FILLERS + MARKERS + CONNECTIVES + SENTIMENT_WORDS + ["not"]


def pos_of(word: str) -> str:
    if word in MARKERS:
        return "JJ"
    if word in CONNECTIVES:
        return "CC"
    if word in FILLERS[5:]:
        return "RB"
    return "NN"


def build_table(dim: int = 8, seed: int = 0, uniform_markers: bool = False):
    """Random embedding table over the synthetic vocabulary.

    With uniform_markers=True all marker tokens share one vector, so the
    distributed path carries no label signal.
    """
    rng = np.random.default_rng(seed)
    vecs = [rng.normal(0, 0.5, dim).astype(np.float32) for _ in ALL_WORDS]
    if uniform_markers:
        base = vecs[ALL_WORDS.index(MARKERS[0])]
        for m in MARKERS[1:]:
            vecs[ALL_WORDS.index(m)] = base.copy()
    return embeddings.EmbeddingTable(
        dim=dim, vocab={w: i for i, w in enumerate(ALL_WORDS)},
        vectors=np.vstack(vecs), oov_vector=np.zeros(dim, np.float32))


def _sentence_entry(words: list[str]) -> dict:
    tree = "( (S " + " ".join(f"({pos_of(w)} {w})" for w in words) + ") )"
    return {"parsetree": tree,
            "words": [[w, {"PartOfSpeech": pos_of(w)}] for w in words]}


def synth_corpus(n: int, seed: int, kinds: tuple[str, ...] = ("Implicit",),
                 id_offset: int = 0, fixed_body: bool = False) -> tuple[list[str], dict]:
    """Relation JSON lines plus the matching parses document.

    kinds cycles over the requested relation types; Explicit relations get a
    label-revealing connective, the others a marker token heading arg2.
    EntRel relations carry the conventional "EntRel" sense with a dedicated
    marker position.  With fixed_body=True every arg2 shares one filler body,
    so boundary-trigram features recur across relations.
    """
    rng = np.random.default_rng(seed)
    lines, parse_docs = [], {}
    for i in range(n):
        kind = kinds[i % len(kinds)]
        rel_id = id_offset + i
        doc = f"doc{rel_id}"
        li = int(rng.integers(len(SENSES)))
        arg1 = [FILLERS[int(rng.integers(10))] for _ in range(int(rng.integers(2, 5)))]
        if fixed_body:
            body = [FILLERS[0]]
        else:
            body = [FILLERS[int(rng.integers(10))] for _ in range(int(rng.integers(1, 4)))]
        if rng.random() < 0.4:
            arg1 = arg1 + [SENTIMENT_WORDS[int(rng.integers(2))]]
        if kind == "Explicit":
            connective = [CONNECTIVES[li]]
            arg2 = body
            senses = [SENSES[li]]
        elif kind == "EntRel":
            connective = []
            arg2 = [MARKERS[0]] + body  # marker slot kept, sense is fixed
            senses = ["EntRel"]
        else:
            connective = []
            arg2 = [MARKERS[li]] + body
            senses = [SENSES[li]]
        sent1 = connective + arg2
        conn_len = len(connective)
        lines.append(json.dumps({
            "DocID": doc, "ID": rel_id, "Type": kind, "Sense": senses,
            "Arg1": {"RawText": " ".join(arg1),
                     "TokenList": [[0, 0, j, 0, j] for j in range(len(arg1))]},
            "Arg2": {"RawText": " ".join(arg2),
                     "TokenList": [[0, 0, j, 1, conn_len + j] for j in range(len(arg2))]},
            "Connective": {"RawText": " ".join(connective),
                           "TokenList": [[0, 0, j, 1, j] for j in range(conn_len)]},
        }))
        parse_docs[doc] = {"sentences": [_sentence_entry(arg1), _sentence_entry(sent1)]}
    return lines, parse_docs


def load_corpus(lines: list[str], parse_docs: dict):
    rels = corpus.read_relations(lines)
    parses = corpus.read_parses(parse_docs)
    corpus.attach_pos(rels, parses)
    return rels, parses


def make_resources(rels, parses, table=None, k: int = 6, seed: int = 0,
                   lexicon: dict | None = None) -> pipeline.Resources:
    table = table if table is not None else build_table()
    words = sorted({t.surface for r in rels for t in r.arg1_tokens + r.arg2_tokens})
    clusters = embeddings.build_cluster_model(table, words, min(k, len(words)), seed=seed)
    if lexicon is None:
        lexicon = {"good": 1.0, "bad": -1.0}
    return pipeline.Resources(table=table, lexicon=lexicon, parses=parses,
                              clusters=clusters)


def tiny_hp(**overrides) -> neural.Hyperparams:
    """Small determinate architecture for fast tests."""
    base = dict(lstm1=6, lstm2=5, lstm3=6, lstm4=6, lstm5=5, lstm6=6,
                dense1=10, dense2=8, dropout1=0.0, dropout2=0.0,
                learning_rate=0.3, batch_size=32, max_epochs=30,
                patience=30, max_len=10)
    base.update(overrides)
    return neural.Hyperparams(**base)


def cli_hp(**overrides) -> neural.Hyperparams:
    """Smallest configuration the command-line bounds check accepts."""
    base = dict(lstm1=64, lstm2=64, lstm3=64, lstm4=64, lstm5=64, lstm6=64,
                dense1=64, dense2=64, dropout1=0.0, dropout2=0.0,
                learning_rate=0.3, batch_size=32, max_epochs=4,
                patience=4, max_len=8)
    base.update(overrides)
    return neural.Hyperparams(**base)


# ---------------------------------------------------------------------------
# File writers for CLI tests
# ---------------------------------------------------------------------------

def write_relations_file(path, lines) -> str:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def write_parses_file(path, parse_docs) -> str:
    path.write_text(json.dumps(parse_docs), encoding="utf-8")
    return str(path)


def write_embeddings_file(path, table) -> str:
    with open(path, "wb") as fh:
        embeddings.write_binary(table, fh)
    return str(path)


def write_lexicon_file(path) -> str:
    path.write_text("good\t1.0\nbad\t-1.0\n", encoding="utf-8")
    return str(path)


def write_config_file(path, config: dict) -> str:
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)
