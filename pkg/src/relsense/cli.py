"""Command-line entry point: train, tune, predict, evaluate,
cluster-embeddings, and ablate subcommands.

Options may come from a flat JSON key-value config file (--config); explicit
flags win over config values.  Every command with a seed is bit-reproducible
across runs on the same machine (tuner traces modulo wall-clock fields).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import evalscore, hyperopt, neural, pipeline
from .corpus import attach_pos, read_parses_file, read_relations_file
from .embeddings import build_cluster_model, load_binary_file, load_clusters, save_clusters
from .features import load_lexicon


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relsense",
        description="Discourse relation sense classification toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--relations", help="relations file (one JSON object per line)")
        p.add_argument("--parses", help="parses file (single JSON document)")
        p.add_argument("--embeddings", help="binary word-vector file")
        p.add_argument("--lexicon", help="sentiment lexicon (word<TAB>polarity lines)")
        p.add_argument("--clusters", help="saved cluster model (text format)")
        p.add_argument("--model", help="model file path")
        p.add_argument("--branch", choices=pipeline.BRANCHES)
        p.add_argument("--seed", type=int)
        p.add_argument("--config", help="flat JSON key-value config file")
        p.add_argument("--out", help="primary output path")

    p = sub.add_parser("train", help="train one classifier branch")
    common(p)
    p.add_argument("--dev-relations")
    p.add_argument("--dev-parses")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="search hyperparameters on dev cross-entropy")
    common(p)
    p.add_argument("--dev-relations")
    p.add_argument("--dev-parses")
    p.add_argument("--budget", type=int)
    p.add_argument("--best-out", help="best-config file (default: OUT.best.json)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("predict", help="predict senses with trained models")
    common(p)
    p.add_argument("--model-explicit")
    p.add_argument("--model-nonexplicit")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold relations")
    common(p)
    p.add_argument("--predictions")
    p.add_argument("--json", dest="json_out", help="also write a JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cluster-embeddings", help="k-means over corpus-attested vectors")
    common(p)
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("ablate", help="incremental feature-ablation report")
    common(p)
    p.add_argument("--dev-relations")
    p.add_argument("--dev-parses")
    p.add_argument("--schedule", help="comma-separated feature families")
    p.set_defaults(func=cmd_ablate)
    return parser


class _Options:
    """Flag values backed by the config file; explicit flags win."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config: dict = {}
        if getattr(args, "config", None):
            with open(args.config, encoding="utf-8") as fh:
                self.config = json.load(fh)
            if not isinstance(self.config, dict):
                raise ValueError("config file must hold a flat JSON object")

    def get(self, key: str, default=None):
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        return self.config.get(key, default)

    def require(self, key: str):
        value = self.get(key)
        if value is None:
            flag = "--" + key.replace("_", "-")
            raise ValueError(f"missing required option {flag}")
        return value

    def hyperparams(self) -> neural.Hyperparams:
        hp = neural.Hyperparams.from_config(self.config)
        searched = {name: getattr(hp, name)
                    for name in (d.name for d in hyperopt.default_space().dims)}
        if not hyperopt.default_space().contains(searched):
            raise ValueError(f"hyperparameters out of bounds: {searched}")
        return hp


def _load_branch_resources(opts: _Options, branch: str, relations,
                           parses_key: str = "parses") -> pipeline.Resources:
    table = load_binary_file(opts.require("embeddings"))
    lexicon = load_lexicon(opts.get("lexicon")) if opts.get("lexicon") else {}
    parses = None
    parses_path = opts.get(parses_key)
    if parses_path:
        parses = read_parses_file(parses_path)
        attach_pos(relations, parses)
    elif branch == "nonexplicit":
        raise ValueError("parses required for the nonexplicit branch")
    clusters = None
    if branch == "nonexplicit":
        clusters_path = opts.get("clusters")
        if clusters_path:
            clusters = load_clusters(clusters_path)
        else:
            words = sorted({t.surface for r in relations
                            for t in r.arg1_tokens + r.arg2_tokens})
            k = int(opts.get("k", 1000))
            k = min(k, len(words))
            print(f"note: no --clusters given; building {k} clusters from "
                  f"{len(words)} corpus words", file=sys.stderr)
            clusters = build_cluster_model(table, words, k,
                                           seed=int(opts.get("seed", 0)))
    return pipeline.Resources(table=table, lexicon=lexicon, parses=parses,
                              clusters=clusters)


def _load_split(opts: _Options, rel_key: str, parse_key: str, res_parses):
    relations = read_relations_file(opts.require(rel_key))
    path = opts.get(parse_key)
    if path:
        parses = read_parses_file(path)
        attach_pos(relations, parses)
        if res_parses is not None:
            res_parses.update(parses)
    return relations


def cmd_train(args) -> int:
    opts = _Options(args)
    branch = opts.require("branch")
    seed = int(opts.get("seed", 0))
    hp = opts.hyperparams()
    train_rels = read_relations_file(opts.require("relations"))
    res = _load_branch_resources(opts, branch, train_rels)
    dev_rels = _load_split(opts, "dev_relations", "dev_parses", res.parses)
    model, trace = pipeline.train_branch(
        train_rels, dev_rels, res, branch, hp, seed,
        min_count=int(opts.get("min_count", 2)))
    model_path = opts.require("model")
    neural.save_model(model, model_path)
    log_path = opts.get("out", model_path + ".log.jsonl")
    with open(log_path, "w", encoding="utf-8") as fh:
        for row in trace:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    best = min(row["dev_ce"] for row in trace)
    print(f"trained {branch} model: {len(trace)} epochs, best dev "
          f"cross-entropy {best:.6f} -> {model_path}", file=sys.stderr)
    return 0


def cmd_tune(args) -> int:
    opts = _Options(args)
    branch = opts.require("branch")
    seed = int(opts.get("seed", 0))
    budget = int(opts.get("budget", 20))
    base_hp = opts.hyperparams()
    train_rels = read_relations_file(opts.require("relations"))
    res = _load_branch_resources(opts, branch, train_rels)
    dev_rels = _load_split(opts, "dev_relations", "dev_parses", res.parses)
    objective = pipeline.dev_cross_entropy_objective(
        train_rels, dev_rels, res, branch, base_hp, seed,
        min_count=int(opts.get("min_count", 2)))
    best, trace = hyperopt.run_search(objective, hyperopt.default_space(),
                                      budget=budget, seed=seed)
    out_path = opts.require("out")
    with open(out_path, "w", encoding="utf-8") as fh:
        for row in trace:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    best_path = opts.get("best_out", out_path + ".best.json")
    with open(best_path, "w", encoding="utf-8") as fh:
        json.dump(best.config, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"tuned {branch}: best objective {best.objective:.6f} "
          f"after {budget} trials -> {best_path}", file=sys.stderr)
    return 0


def cmd_predict(args) -> int:
    opts = _Options(args)
    relations = read_relations_file(opts.require("relations"))
    models = {}
    single = opts.get("model")
    if single:
        branch = opts.require("branch")
        models[branch] = neural.load_model(single)
    for branch, key in (("explicit", "model_explicit"), ("nonexplicit", "model_nonexplicit")):
        path = opts.get(key)
        if path:
            models[branch] = neural.load_model(path)
    if not models:
        raise ValueError("no model given: use --model with --branch, or "
                         "--model-explicit / --model-nonexplicit")
    table = load_binary_file(opts.require("embeddings"))
    lexicon = load_lexicon(opts.get("lexicon")) if opts.get("lexicon") else {}
    parses = None
    if opts.get("parses"):
        parses = read_parses_file(opts.get("parses"))
        attach_pos(relations, parses)
    clusters = load_clusters(opts.get("clusters")) if opts.get("clusters") else None
    if "nonexplicit" in models and clusters is None:
        print("warning: no --clusters given; word-pair features degrade to "
              "the unknown bucket", file=sys.stderr)
    res = pipeline.Resources(table=table, lexicon=lexicon, parses=parses,
                             clusters=clusters)
    triples = pipeline.predict_relations(models, relations, res)
    preds = [evalscore.Prediction(*t) for t in triples]
    evalscore.write_predictions(preds, opts.require("out"))
    print(f"wrote {len(preds)} predictions", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    opts = _Options(args)
    gold = read_relations_file(opts.require("relations"))
    preds = evalscore.read_predictions(opts.require("predictions"))
    reports = [evalscore.score(preds, gold, partition)
               for partition in evalscore.PARTITIONS]
    text = "\n".join(evalscore.report_table(r) for r in reports)
    out_path = opts.get("out")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    json_path = opts.get("json_out")
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump([evalscore.report_to_json(r) for r in reports], fh,
                      sort_keys=True, indent=2)
            fh.write("\n")
    return 0


def cmd_cluster(args) -> int:
    opts = _Options(args)
    table = load_binary_file(opts.require("embeddings"))
    relations = read_relations_file(opts.require("relations"))
    words = sorted({t.surface for r in relations
                    for t in r.arg1_tokens + r.arg2_tokens})
    k = int(opts.get("k", 1000))
    model = build_cluster_model(table, words, k, seed=int(opts.get("seed", 0)))
    save_clusters(model, opts.require("out"))
    print(f"clustered {len(model.assignment)} words into {k} clusters",
          file=sys.stderr)
    return 0


def cmd_ablate(args) -> int:
    opts = _Options(args)
    branch = opts.require("branch")
    seed = int(opts.get("seed", 0))
    hp = opts.hyperparams()
    schedule_arg = opts.get("schedule")
    schedule = ([s.strip() for s in schedule_arg.split(",") if s.strip()]
                if schedule_arg else pipeline.DEFAULT_SCHEDULES[branch])
    train_rels = read_relations_file(opts.require("relations"))
    res = _load_branch_resources(opts, branch, train_rels)
    dev_rels = _load_split(opts, "dev_relations", "dev_parses", res.parses)
    rows = evalscore.feature_ablation(train_rels, dev_rels, res, branch,
                                      schedule, hp, seed)
    lines = [f"{row['features']:<24}{row['f1']:.4f}" for row in rows]
    text = "\n".join(lines) + "\n"
    out_path = opts.get("out")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, sort_keys=True, indent=2)
            fh.write("\n")
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
