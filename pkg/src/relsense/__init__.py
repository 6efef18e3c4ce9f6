"""Discourse relation sense classification toolkit.

Recurrent encoders over frozen word vectors are combined with sparse surface
features in a feed-forward classifier; hyperparameters are tuned by a
Gaussian-process search, and predictions are scored with shared-task
semantics.
"""

__version__ = "0.1.0"

from .corpus import ParseTree, Relation, RelType, Token, parse_ptb, read_relations
from .embeddings import ClusterModel, EmbeddingTable, kmeans, load_binary, lookup
from .features import (FeatureVocab, SparseFeatureVector, explicit_features,
                       fit_vocab, nonexplicit_features, sentiment_score, vectorize)
from .hyperopt import SearchSpace, Trial, default_space, run_search, suggest_next
from .neural import Hyperparams, ModelParams, Sample, load_model, save_model, train

__all__ = [
    "ParseTree", "Relation", "RelType", "Token", "parse_ptb", "read_relations",
    "ClusterModel", "EmbeddingTable", "kmeans", "load_binary", "lookup",
    "FeatureVocab", "SparseFeatureVector", "explicit_features", "fit_vocab",
    "nonexplicit_features", "sentiment_score", "vectorize",
    "SearchSpace", "Trial", "default_space", "run_search", "suggest_next",
    "Hyperparams", "ModelParams", "Sample", "load_model", "save_model", "train",
]
