"""Pre-trained word vectors: binary format IO, lookups, and k-means clustering.

The binary layout is the common word2vec one: an ASCII header
"<vocab_size> <dim>\\n", then per entry the word bytes, a single space, and
dim little-endian 32-bit floats.  A trailing newline per entry is tolerated
on read and never written.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import BinaryIO

import numpy as np


@dataclass
class EmbeddingTable:
    """Word -> dense vector map; vocab insertion order equals row order."""

    dim: int
    vocab: dict[str, int]
    vectors: np.ndarray  # (|vocab|, dim) float32
    oov_vector: np.ndarray  # (dim,) float32

    def __len__(self) -> int:
        return len(self.vocab)


@dataclass
class ClusterModel:
    """Vocabulary partition; OOV words map to the reserved bucket k."""

    k: int
    dim: int
    centroids: np.ndarray | None
    assignment: dict[str, int]
    labels: np.ndarray | None = None  # row-aligned ids when built from a matrix


def load_binary(stream: BinaryIO) -> EmbeddingTable:
    """Decode an embedding table; duplicate words keep the first occurrence."""
    data = stream.read()
    nl = data.find(b"\n")
    if nl < 0:
        raise ValueError("missing header line")
    try:
        n_str, dim_str = data[:nl].split()
        n, dim = int(n_str), int(dim_str)
    except ValueError:
        raise ValueError(f"malformed header {data[:nl]!r}")
    if n <= 0 or dim <= 0:
        raise ValueError(f"non-positive header values {n} {dim}")
    pos = nl + 1
    vec_bytes = 4 * dim
    vocab: dict[str, int] = {}
    rows = []
    for entry in range(n):
        while pos < len(data) and data[pos : pos + 1] == b"\n":
            pos += 1
        space = data.find(b" ", pos)
        if space < 0 or space + vec_bytes > len(data):
            raise ValueError(f"truncated at entry {entry}")
        word = data[pos:space].decode("utf-8")
        vec = np.frombuffer(data[space + 1 : space + 1 + vec_bytes], dtype="<f4")
        pos = space + 1 + vec_bytes
        if word in vocab:
            continue
        vocab[word] = len(rows)
        rows.append(vec)
    vectors = np.vstack(rows).astype(np.float32) if rows else np.zeros((0, dim), np.float32)
    return EmbeddingTable(dim=dim, vocab=vocab, vectors=vectors,
                          oov_vector=np.zeros(dim, dtype=np.float32))


def load_binary_file(path: str) -> EmbeddingTable:
    with open(path, "rb") as fh:
        return load_binary(fh)


def write_binary(table: EmbeddingTable, stream: BinaryIO) -> None:
    """Canonical encoding: no per-entry trailing newline."""
    stream.write(f"{len(table.vocab)} {table.dim}\n".encode("ascii"))
    for word, idx in table.vocab.items():
        stream.write(word.encode("utf-8"))
        stream.write(b" ")
        stream.write(np.asarray(table.vectors[idx], dtype="<f4").tobytes())


def lookup(table: EmbeddingTable, word: str) -> np.ndarray:
    """Exact match, then lowercased match, then the OOV vector (zeros)."""
    idx = table.vocab.get(word)
    if idx is None:
        idx = table.vocab.get(word.lower())
    if idx is None:
        return table.oov_vector
    return table.vectors[idx]


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------

def kmeans(vectors: np.ndarray, k: int, seed: int = 0, max_iters: int = 100,
           words: list[str] | None = None) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding; deterministic for a fixed seed.

    Empty clusters are re-seeded from the point farthest from its assigned
    centroid.  When `words` is given the per-word assignment map is built.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    n = vectors.shape[0]
    if k <= 0:
        raise ValueError("k must be positive")
    if k > n:
        raise ValueError(f"k={k} exceeds number of points {n}")
    if not np.all(np.isfinite(vectors)):
        raise ValueError("non-finite input vectors")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(vectors, k, rng)

    labels = np.zeros(n, dtype=np.int64)
    prev_sse = np.inf
    for _ in range(max_iters):
        dists = _sq_dists(vectors, centroids)
        new_labels = np.argmin(dists, axis=1)
        new_labels = _repair_empty(vectors, centroids, new_labels, dists, k)
        sse = float(np.sum((vectors - centroids[new_labels]) ** 2))
        assert sse <= prev_sse + 1e-9 * max(1.0, abs(prev_sse)), "SSE increased"
        prev_sse = sse
        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        for j in range(k):
            members = vectors[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
        if converged:
            break

    assignment = {}
    if words is not None:
        assignment = {w: int(labels[i]) for i, w in enumerate(words)}
    return ClusterModel(k=k, dim=vectors.shape[1], centroids=centroids,
                        assignment=assignment, labels=labels)


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.sum(diff * diff, axis=2)


def _kmeanspp(vectors: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = vectors.shape[0]
    centroids = np.empty((k, vectors.shape[1]))
    centroids[0] = vectors[rng.integers(n)]
    closest = np.sum((vectors - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centroids[j] = vectors[idx]
        closest = np.minimum(closest, np.sum((vectors - centroids[j]) ** 2, axis=1))
    return centroids


def _repair_empty(vectors, centroids, labels, dists, k):
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        assigned = dists[np.arange(len(labels)), labels]
        donor = int(np.argmax(assigned))
        labels[donor] = j
        centroids[j] = vectors[donor]
        dists[:, j] = np.sum((vectors - centroids[j]) ** 2, axis=1)
        counts = np.bincount(labels, minlength=k)
    return labels


def cluster_of(model: ClusterModel, word: str) -> int:
    """Assigned cluster id, with lowercase fallback; OOV words get the id k."""
    cid = model.assignment.get(word)
    if cid is None:
        cid = model.assignment.get(word.lower())
    if cid is None:
        return model.k
    return cid


def build_cluster_model(table: EmbeddingTable, words: list[str], k: int,
                        seed: int = 0, max_iters: int = 100) -> ClusterModel:
    """Cluster the embedding vectors of the given (deduplicated) words."""
    seen: dict[str, int] = {}
    for w in words:
        idx = table.vocab.get(w, table.vocab.get(w.lower()))
        if idx is not None and w not in seen:
            seen[w] = idx
    if not seen:
        raise ValueError("no clusterable words: none found in the embedding vocabulary")
    vocab_words = list(seen)
    vectors = table.vectors[list(seen.values())].astype(np.float64)
    return kmeans(vectors, k, seed=seed, max_iters=max_iters, words=vocab_words)


def save_clusters(model: ClusterModel, path: str) -> None:
    """Text format: header "k dim", then word<TAB>cluster_id lines (sorted)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{model.k} {model.dim}\n")
        for word in sorted(model.assignment):
            fh.write(f"{word}\t{model.assignment[word]}\n")


def load_clusters(path: str) -> ClusterModel:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"malformed cluster file header in {path}")
        k, dim = int(header[0]), int(header[1])
        assignment = {}
        for line in fh:
            if not line.strip():
                continue
            word, cid = line.rstrip("\n").split("\t")
            assignment[word] = int(cid)
    return ClusterModel(k=k, dim=dim, centroids=None, assignment=assignment)
