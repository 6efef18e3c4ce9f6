"""Glue from corpus objects to classifier inputs: branch routing, sequence
truncation, feature extraction, vocabulary and label fitting, and branch
training / prediction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import neural
from .corpus import ParseIndex, Relation, Token
from .embeddings import ClusterModel, EmbeddingTable, lookup
from .features import (FeatureVocab, SparseFeatureVector, explicit_features,
                       fit_vocab, nonexplicit_features, vectorize)

BRANCHES = ("explicit", "nonexplicit")

#: Ablation schedules in incremental order, distributed-only row excluded.
DEFAULT_SCHEDULES = {
    "explicit": ["conn", "sent", "tri2", "tri1"],
    "nonexplicit": ["tri2", "tri1", "wp", "pp", "adv", "pr"],
}


@dataclass
class Resources:
    table: EmbeddingTable
    lexicon: dict[str, float]
    parses: ParseIndex | None = None
    clusters: ClusterModel | None = None


def branch_of(rel: Relation) -> str:
    return "explicit" if rel.is_explicit else "nonexplicit"


def route(relations: Sequence[Relation]) -> dict[str, list[Relation]]:
    out: dict[str, list[Relation]] = {b: [] for b in BRANCHES}
    for rel in relations:
        out[branch_of(rel)].append(rel)
    return out


def truncate_args(rel: Relation, max_len: int) -> tuple[list[Token], list[Token]]:
    """Cap sequence lengths: arg1 keeps its tail, arg2 keeps its head."""
    return rel.arg1_tokens[-max_len:], rel.arg2_tokens[:max_len]


def extract_features(rel: Relation, branch: str, res: Resources,
                     families: Sequence[str] | None = None) -> SparseFeatureVector:
    if branch == "explicit":
        vec = explicit_features(rel, res.lexicon)
    else:
        vec = nonexplicit_features(rel, res.clusters, res.parses, res.lexicon)
    if families is not None:
        vec = vec.restrict(families)
    return vec


def label_inventory(relations: Sequence[Relation]) -> list[str]:
    """Sorted, deduplicated sense labels observed in the data."""
    return sorted({s for rel in relations for s in rel.senses})


def _embed(tokens: Sequence[Token], table: EmbeddingTable) -> np.ndarray:
    return np.stack([lookup(table, t.surface) for t in tokens]).astype(np.float64)


def build_samples(relations: Sequence[Relation], branch: str, res: Resources,
                  vocab: FeatureVocab, label_index: dict[str, int], max_len: int,
                  families: Sequence[str] | None = None) -> list[neural.Sample]:
    samples = []
    for rel in relations:
        arg1, arg2 = truncate_args(rel, max_len)
        feats = vectorize(extract_features(rel, branch, res, families), vocab)
        label = label_index.get(rel.senses[0], -1) if rel.senses else -1
        samples.append(neural.Sample(x1=_embed(arg1, res.table),
                                     x2=_embed(arg2, res.table),
                                     feats=feats, label=label))
    return samples


def train_branch(train_rels: Sequence[Relation], dev_rels: Sequence[Relation],
                 res: Resources, branch: str, hp: neural.Hyperparams, seed: int,
                 families: Sequence[str] | None = None, min_count: int = 2):
    """Fit labels and the feature vocabulary on the training split, then run
    SGD with early stopping on dev cross-entropy."""
    if branch not in BRANCHES:
        raise ValueError(f"unknown branch {branch!r}")
    t_rels = [r for r in train_rels if branch_of(r) == branch]
    d_rels = [r for r in dev_rels if branch_of(r) == branch]
    if not t_rels:
        raise ValueError(f"no {branch} relations in the training data")
    if not d_rels:
        raise ValueError(f"no {branch} relations in the dev data")
    for rel in t_rels:
        if not rel.senses:
            raise ValueError(f"relation {rel.rel_id}: training relation without gold sense")
    label_set = label_inventory(t_rels)
    label_index = {s: i for i, s in enumerate(label_set)}
    vocab = fit_vocab((extract_features(r, branch, res, families) for r in t_rels),
                      min_count=min_count)
    train_samples = build_samples(t_rels, branch, res, vocab, label_index,
                                  hp.max_len, families)
    dev_samples = [s for s in build_samples(d_rels, branch, res, vocab, label_index,
                                            hp.max_len, families)
                   if s.label >= 0]  # dev senses unseen in training carry no target
    if not dev_samples:
        raise ValueError(f"no scorable {branch} relations in the dev data")
    return neural.train(train_samples, dev_samples, label_set, vocab, hp, seed,
                        branch=branch)


def predict_relations(models: dict[str, neural.ModelParams],
                      relations: Sequence[Relation],
                      res: Resources) -> list[tuple[str, int, str]]:
    """One (doc_id, rel_id, sense) triple per relation, in input order."""
    results: list[tuple[str, int, str] | None] = [None] * len(relations)
    by_branch: dict[str, list[int]] = {}
    for i, rel in enumerate(relations):
        by_branch.setdefault(branch_of(rel), []).append(i)
    for branch, idxs in by_branch.items():
        model = models.get(branch)
        if model is None:
            raise ValueError(f"no model for branch '{branch}' "
                             f"({len(idxs)} relations need it)")
        label_index = {s: i for i, s in enumerate(model.label_set)}
        rels = [relations[i] for i in idxs]
        samples = build_samples(rels, branch, res, model.feature_vocab,
                                label_index, model.max_len)
        probs = neural.predict_probs(model, samples)
        picks = np.argmax(probs, axis=1)
        for pos, i in enumerate(idxs):
            rel = relations[i]
            results[i] = (rel.doc_id, rel.rel_id, model.label_set[int(picks[pos])])
    return [r for r in results if r is not None]


def dev_cross_entropy_objective(train_rels: Sequence[Relation],
                                dev_rels: Sequence[Relation], res: Resources,
                                branch: str, base_hp: neural.Hyperparams,
                                seed: int, min_count: int = 2):
    """Objective for the tuner: best dev cross-entropy of a full training
    run under the candidate configuration."""
    caps = {"batch_size": base_hp.batch_size, "max_epochs": base_hp.max_epochs,
            "patience": base_hp.patience, "max_len": base_hp.max_len}

    def objective(config: dict) -> float:
        hp = neural.Hyperparams.from_config({**config, **caps})
        _, trace = train_branch(train_rels, dev_rels, res, branch, hp, seed,
                                min_count=min_count)
        return min(row["dev_ce"] for row in trace)

    return objective
