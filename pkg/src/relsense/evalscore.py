"""Scorer with shared-task semantics: micro-averaged and per-sense
precision/recall/F1 over All / Explicit / NonExplicit partitions, plus the
incremental feature-ablation harness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Relation

PARTITIONS = ("All", "Explicit", "NonExplicit")


@dataclass(frozen=True)
class Prediction:
    doc_id: str
    rel_id: int
    sense: str


@dataclass(frozen=True)
class SenseScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class ScoreReport:
    partition: str
    precision: float
    recall: float
    f1: float
    per_sense: dict[str, SenseScore]
    n_gold: int
    n_predicted: int


def _f1(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def _in_partition(rel: Relation, partition: str) -> bool:
    if partition == "All":
        return True
    if partition == "Explicit":
        return rel.is_explicit
    if partition == "NonExplicit":
        return not rel.is_explicit
    raise ValueError(f"unknown partition {partition!r}")


def score(predictions: Sequence[Prediction], gold: Sequence[Relation],
          partition: str = "All") -> ScoreReport:
    """Score predictions against gold relations.

    A prediction is correct iff its label is among the relation's gold
    senses.  Unmatched gold relations count as missed; a wrong prediction is
    a false positive for the predicted sense and a false negative for every
    gold sense.  Senses with no predictions get vacuous precision 1.0, as in
    the official scorer family.
    """
    index: dict[tuple[str, int], Prediction] = {}
    gold_keys = {(r.doc_id, r.rel_id) for r in gold}
    for pred in predictions:
        key = (pred.doc_id, pred.rel_id)
        if key not in gold_keys:
            raise ValueError(f"prediction for unknown relation {key}")
        if key in index:
            raise ValueError(f"duplicate predictions for relation {key}")
        index[key] = pred

    part_gold = [r for r in gold if _in_partition(r, partition)]
    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}
    support: dict[str, int] = {}
    correct = 0
    n_predicted = 0
    for rel in part_gold:
        for sense in rel.senses:
            support[sense] = support.get(sense, 0) + 1
        pred = index.get((rel.doc_id, rel.rel_id))
        if pred is not None:
            n_predicted += 1
        if pred is not None and pred.sense in rel.senses:
            correct += 1
            tp[pred.sense] = tp.get(pred.sense, 0) + 1
        else:
            if pred is not None:
                fp[pred.sense] = fp.get(pred.sense, 0) + 1
            for sense in rel.senses:
                fn[sense] = fn.get(sense, 0) + 1

    precision = correct / n_predicted if n_predicted else 0.0
    recall = correct / len(part_gold) if part_gold else 0.0

    labels = sorted(set(support) | set(tp) | set(fp))
    per_sense = {}
    for label in labels:
        s_tp, s_fp, s_fn = tp.get(label, 0), fp.get(label, 0), fn.get(label, 0)
        p = s_tp / (s_tp + s_fp) if s_tp + s_fp > 0 else 1.0
        r = s_tp / (s_tp + s_fn) if s_tp + s_fn > 0 else 0.0
        per_sense[label] = SenseScore(precision=p, recall=r, f1=_f1(p, r),
                                      support=support.get(label, 0))

    return ScoreReport(partition=partition, precision=precision, recall=recall,
                       f1=_f1(precision, recall), per_sense=per_sense,
                       n_gold=len(part_gold), n_predicted=n_predicted)


# ---------------------------------------------------------------------------
# Report formatting
# ---------------------------------------------------------------------------

_NAME_WIDTH = 44


def _row(name: str, p, r, f1, support) -> str:
    def fmt(x) -> str:
        return f"{x:.4f}" if isinstance(x, float) else str(x)
    return (f"{name:<{_NAME_WIDTH}}{fmt(p):>10}{fmt(r):>10}"
            f"{fmt(f1):>10}{fmt(support):>9}")


def report_table(report: ScoreReport) -> str:
    """Fixed-width text table, 4-decimal values, senses in lexicographic
    order; '-' cells for senses with zero support in the partition."""
    lines = [
        f"partition: {report.partition}",
        _row("sense", "precision", "recall", "f1", "support"),
        _row("micro-average", report.precision, report.recall, report.f1,
             report.n_gold),
    ]
    for label in sorted(report.per_sense):
        s = report.per_sense[label]
        if s.support == 0:
            lines.append(_row(label, "-", "-", "-", 0))
        else:
            lines.append(_row(label, s.precision, s.recall, s.f1, s.support))
    return "\n".join(lines) + "\n"


def parse_report_table(text: str) -> dict:
    """Recover the numbers from a formatted table (used for round-trip checks)."""
    out: dict = {"per_sense": {}}
    for line in text.splitlines():
        if line.startswith("partition:"):
            out["partition"] = line.split(":", 1)[1].strip()
            continue
        parts = line.rsplit(None, 4)
        if len(parts) != 5 or parts[0] == "sense":
            continue
        name, p, r, f1, support = parts
        values = None if p == "-" else (float(p), float(r), float(f1))
        if name == "micro-average":
            out["micro"] = values
            out["n_gold"] = int(support)
        else:
            out["per_sense"][name] = (values, int(support))
    return out


def report_to_json(report: ScoreReport) -> dict:
    return {
        "partition": report.partition,
        "micro": {"precision": report.precision, "recall": report.recall,
                  "f1": report.f1, "support": report.n_gold},
        "per_sense": {
            label: {"precision": s.precision, "recall": s.recall,
                    "f1": s.f1, "support": s.support}
            for label, s in sorted(report.per_sense.items())
        },
    }


# ---------------------------------------------------------------------------
# Predictions file IO
# ---------------------------------------------------------------------------

def write_predictions(predictions: Iterable[Prediction], path: str) -> None:
    """One JSON object per line: {DocID, ID, Sense}."""
    with open(path, "w", encoding="utf-8") as fh:
        for pred in predictions:
            fh.write(json.dumps({"DocID": pred.doc_id, "ID": pred.rel_id,
                                 "Sense": pred.sense}, sort_keys=True))
            fh.write("\n")


def read_predictions(path: str) -> list[Prediction]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(Prediction(doc_id=str(obj["DocID"]), rel_id=int(obj["ID"]),
                                      sense=str(obj["Sense"])))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"predictions line {lineno}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Feature ablation
# ---------------------------------------------------------------------------

def feature_ablation(train_rels: Sequence[Relation], dev_rels: Sequence[Relation],
                     resources, branch: str, schedule: Sequence[str],
                     base_hp, seed: int) -> list[dict]:
    """Train one model per prefix of the feature schedule (distributed-only
    first) and report dev micro-F1 per row."""
    from . import pipeline  # local import keeps the module graph acyclic

    rows = []
    for i in range(len(schedule) + 1):
        families = list(schedule[:i])
        model, _ = pipeline.train_branch(train_rels, dev_rels, resources, branch,
                                         base_hp, seed + i, families=families)
        gold = [r for r in dev_rels if pipeline.branch_of(r) == branch]
        triples = pipeline.predict_relations({branch: model}, gold, resources)
        preds = [Prediction(*t) for t in triples]
        partition = "Explicit" if branch == "explicit" else "NonExplicit"
        report = score(preds, gold, partition)
        label = "distributed" if i == 0 else "+" + schedule[i - 1]
        rows.append({"features": label, "f1": report.f1})
    return rows
