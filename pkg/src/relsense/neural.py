"""Minimal neural engine: stacked bidirectional LSTM argument encoders, a
dense head with inverted dropout, softmax cross-entropy, exact reverse-mode
gradients, and plain SGD with early stopping.

Everything runs in float64.  Word vectors are frozen inputs: gradients stop
at the bottom encoder layer.  Training is single-threaded and deterministic
for a fixed seed.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from .features import FeatureVocab
from .embeddings import EmbeddingTable, lookup

_LSTM_TENSOR_NAMES = ("W_i", "W_f", "W_o", "W_c", "U_i", "U_f", "U_o", "U_c",
                      "b_i", "b_f", "b_o", "b_c")
_HEAD_TENSOR_NAMES = ("W1", "b1", "W2", "b2", "W_out", "b_out")


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass
class LSTMParams:
    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_c: np.ndarray
    U_i: np.ndarray
    U_f: np.ndarray
    U_o: np.ndarray
    U_c: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W_i.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W_i.shape[0]

    def tensors(self):
        for name in _LSTM_TENSOR_NAMES:
            yield name, getattr(self, name)


@dataclass
class EncoderParams:
    """Stacked bidirectional layers: (forward, backward) parameter pairs."""

    layers: list[tuple[LSTMParams, LSTMParams]]

    @property
    def top_hidden(self) -> int:
        return self.layers[-1][0].hidden_dim


@dataclass
class HeadParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W_out: np.ndarray
    b_out: np.ndarray
    dropout1: float = 0.0
    dropout2: float = 0.0

    def tensors(self):
        for name in _HEAD_TENSOR_NAMES:
            yield name, getattr(self, name)


@dataclass
class ModelParams:
    arg1_encoder: EncoderParams
    arg2_encoder: EncoderParams
    head: HeadParams
    label_set: list[str]
    feature_vocab: FeatureVocab
    embedding_dim: int
    max_len: int = 80
    branch: str = ""


@dataclass
class Sample:
    """One classifier input: embedded argument sequences, surface feature
    vector, and the gold label index (-1 when unlabeled)."""

    x1: np.ndarray  # (T1, embedding_dim)
    x2: np.ndarray  # (T2, embedding_dim)
    feats: np.ndarray  # (feature_dim,)
    label: int = -1


@dataclass
class Hyperparams:
    """Architecture and SGD settings; defaults are the tuned configuration
    for the non-explicit branch."""

    lstm1: int = 259
    lstm2: int = 75
    lstm3: int = 263
    lstm4: int = 127
    lstm5: int = 89
    lstm6: int = 150
    dense1: int = 269
    dense2: int = 69
    dropout1: float = 0.11
    dropout2: float = 0.57
    learning_rate: float = 0.1549
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    max_len: int = 80

    @property
    def arg1_sizes(self) -> list[int]:
        return [self.lstm1, self.lstm2, self.lstm3]

    @property
    def arg2_sizes(self) -> list[int]:
        return [self.lstm4, self.lstm5, self.lstm6]

    @classmethod
    def from_config(cls, config: dict) -> "Hyperparams":
        """Build from a flat named-value mapping, ignoring unrelated keys."""
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in config.items():
            if key in known:
                kwargs[key] = type(getattr(cls(), key))(value)
        return cls(**kwargs)

    def to_config(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _glorot(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    s = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-s, s, size=(out_dim, in_dim))


def init_lstm(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LSTMParams:
    # forget-gate bias starts at +1 so early cell states are retained
    return LSTMParams(
        W_i=_glorot(rng, hidden_dim, input_dim),
        W_f=_glorot(rng, hidden_dim, input_dim),
        W_o=_glorot(rng, hidden_dim, input_dim),
        W_c=_glorot(rng, hidden_dim, input_dim),
        U_i=_glorot(rng, hidden_dim, hidden_dim),
        U_f=_glorot(rng, hidden_dim, hidden_dim),
        U_o=_glorot(rng, hidden_dim, hidden_dim),
        U_c=_glorot(rng, hidden_dim, hidden_dim),
        b_i=np.zeros(hidden_dim),
        b_f=np.ones(hidden_dim),
        b_o=np.zeros(hidden_dim),
        b_c=np.zeros(hidden_dim),
    )


def init_encoder(input_dim: int, sizes: Sequence[int], rng: np.random.Generator) -> EncoderParams:
    layers = []
    in_dim = input_dim
    for size in sizes:
        layers.append((init_lstm(in_dim, size, rng), init_lstm(in_dim, size, rng)))
        in_dim = 2 * size
    return EncoderParams(layers=layers)


def init_model(embedding_dim: int, label_set: Sequence[str], feature_vocab: FeatureVocab,
               hp: Hyperparams, rng: np.random.Generator, branch: str = "") -> ModelParams:
    label_set = list(label_set)
    if not label_set:
        raise ValueError("empty label set")
    if len(set(label_set)) != len(label_set):
        raise ValueError("duplicate labels in label set")
    arg1 = init_encoder(embedding_dim, hp.arg1_sizes, rng)
    arg2 = init_encoder(embedding_dim, hp.arg2_sizes, rng)
    n_in = 2 * arg1.top_hidden + 2 * arg2.top_hidden + feature_vocab.dim
    head = HeadParams(
        W1=_glorot(rng, hp.dense1, n_in),
        b1=np.zeros(hp.dense1),
        W2=_glorot(rng, hp.dense2, hp.dense1),
        b2=np.zeros(hp.dense2),
        W_out=_glorot(rng, len(label_set), hp.dense2),
        b_out=np.zeros(len(label_set)),
        dropout1=hp.dropout1,
        dropout2=hp.dropout2,
    )
    return ModelParams(arg1_encoder=arg1, arg2_encoder=arg2, head=head,
                       label_set=label_set, feature_vocab=feature_vocab,
                       embedding_dim=embedding_dim, max_len=hp.max_len, branch=branch)


def iter_tensors(model: ModelParams):
    """Deterministic (name, array) walk over every trainable tensor."""
    for enc_name, enc in (("arg1", model.arg1_encoder), ("arg2", model.arg2_encoder)):
        for li, (fwd, bwd) in enumerate(enc.layers):
            for dname, params in (("f", fwd), ("b", bwd)):
                for tname, arr in params.tensors():
                    yield f"{enc_name}.l{li}.{dname}.{tname}", arr
    for tname, arr in model.head.tensors():
        yield f"head.{tname}", arr


def zero_grads(model: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in iter_tensors(model)}


# ---------------------------------------------------------------------------
# LSTM forward / backward
# ---------------------------------------------------------------------------

def lstm_step(x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
              p: LSTMParams) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM update with input, forget, and output gates."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    if x.shape != (p.input_dim,) or h_prev.shape != (p.hidden_dim,) or c_prev.shape != (p.hidden_dim,):
        raise ValueError(
            f"dimension mismatch: x{x.shape}, h{h_prev.shape}, c{c_prev.shape} "
            f"vs input_dim={p.input_dim}, hidden_dim={p.hidden_dim}")
    i = sigmoid(p.W_i @ x + p.U_i @ h_prev + p.b_i)
    f = sigmoid(p.W_f @ x + p.U_f @ h_prev + p.b_f)
    o = sigmoid(p.W_o @ x + p.U_o @ h_prev + p.b_o)
    g = np.tanh(p.W_c @ x + p.U_c @ h_prev + p.b_c)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


class _SeqCache:
    __slots__ = ("X", "I", "F", "O", "G", "C", "TC", "H")

    def __init__(self, X, I, F, O, G, C, TC, H):
        self.X, self.I, self.F, self.O, self.G = X, I, F, O, G
        self.C, self.TC, self.H = C, TC, H


def _lstm_seq_forward(X: np.ndarray, p: LSTMParams) -> _SeqCache:
    B, T, in_dim = X.shape
    if in_dim != p.input_dim:
        raise ValueError(f"dimension mismatch: input {in_dim} vs {p.input_dim}")
    h = p.hidden_dim
    I, F, O, G = (np.empty((B, T, h)) for _ in range(4))
    C, TC, H = (np.empty((B, T, h)) for _ in range(3))
    WiT, WfT, WoT, WcT = p.W_i.T, p.W_f.T, p.W_o.T, p.W_c.T
    UiT, UfT, UoT, UcT = p.U_i.T, p.U_f.T, p.U_o.T, p.U_c.T
    h_t = np.zeros((B, h))
    c_t = np.zeros((B, h))
    for t in range(T):
        xt = X[:, t]
        i = sigmoid(xt @ WiT + h_t @ UiT + p.b_i)
        f = sigmoid(xt @ WfT + h_t @ UfT + p.b_f)
        o = sigmoid(xt @ WoT + h_t @ UoT + p.b_o)
        g = np.tanh(xt @ WcT + h_t @ UcT + p.b_c)
        c_t = f * c_t + i * g
        tc = np.tanh(c_t)
        h_t = o * tc
        I[:, t], F[:, t], O[:, t], G[:, t] = i, f, o, g
        C[:, t], TC[:, t], H[:, t] = c_t, tc, h_t
    return _SeqCache(X, I, F, O, G, C, TC, H)


def _lstm_seq_backward(dH: np.ndarray, cache: _SeqCache, p: LSTMParams,
                       grads: dict[str, np.ndarray], prefix: str) -> np.ndarray:
    B, T, h = cache.H.shape
    gW_i, gW_f, gW_o, gW_c = (grads[f"{prefix}.{n}"] for n in ("W_i", "W_f", "W_o", "W_c"))
    gU_i, gU_f, gU_o, gU_c = (grads[f"{prefix}.{n}"] for n in ("U_i", "U_f", "U_o", "U_c"))
    gb_i, gb_f, gb_o, gb_c = (grads[f"{prefix}.{n}"] for n in ("b_i", "b_f", "b_o", "b_c"))
    dX = np.zeros((B, T, p.input_dim))
    dh_next = np.zeros((B, h))
    dc_next = np.zeros((B, h))
    zeros = np.zeros((B, h))
    for t in range(T - 1, -1, -1):
        i, f, o, g = cache.I[:, t], cache.F[:, t], cache.O[:, t], cache.G[:, t]
        tc = cache.TC[:, t]
        c_prev = cache.C[:, t - 1] if t > 0 else zeros
        h_prev = cache.H[:, t - 1] if t > 0 else zeros
        dh = dH[:, t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_next = dc * f
        da_i = di * i * (1.0 - i)
        da_f = df * f * (1.0 - f)
        da_o = do * o * (1.0 - o)
        da_c = dg * (1.0 - g * g)
        xt = cache.X[:, t]
        gW_i += da_i.T @ xt
        gW_f += da_f.T @ xt
        gW_o += da_o.T @ xt
        gW_c += da_c.T @ xt
        gU_i += da_i.T @ h_prev
        gU_f += da_f.T @ h_prev
        gU_o += da_o.T @ h_prev
        gU_c += da_c.T @ h_prev
        gb_i += da_i.sum(axis=0)
        gb_f += da_f.sum(axis=0)
        gb_o += da_o.sum(axis=0)
        gb_c += da_c.sum(axis=0)
        dX[:, t] = da_i @ p.W_i + da_f @ p.W_f + da_o @ p.W_o + da_c @ p.W_c
        dh_next = da_i @ p.U_i + da_f @ p.U_f + da_o @ p.U_o + da_c @ p.U_c
    return dX


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------

def _encode_batch_forward(X: np.ndarray, enc: EncoderParams):
    """X: (B, T, dim) -> output (B, 2*top_hidden) plus per-layer caches.

    The output concatenates the forward direction's final state with the
    backward direction's final state of the top layer.
    """
    caches = []
    cur = X
    for pf, pb in enc.layers:
        cf = _lstm_seq_forward(cur, pf)
        cb = _lstm_seq_forward(cur[:, ::-1], pb)
        caches.append((cf, cb))
        cur = np.concatenate([cf.H, cb.H[:, ::-1]], axis=2)
    top_f, top_b = caches[-1]
    out = np.concatenate([top_f.H[:, -1], top_b.H[:, -1]], axis=1)
    return out, caches


def _encode_batch_backward(d_out: np.ndarray, caches, enc: EncoderParams,
                           grads: dict[str, np.ndarray], prefix: str) -> None:
    B = d_out.shape[0]
    h_top = enc.top_hidden
    T = caches[-1][0].H.shape[1]
    dHf = np.zeros((B, T, h_top))
    dHb = np.zeros((B, T, h_top))
    dHf[:, -1] = d_out[:, :h_top]
    dHb[:, -1] = d_out[:, h_top:]
    for li in range(len(enc.layers) - 1, -1, -1):
        cf, cb = caches[li]
        pf, pb = enc.layers[li]
        dXf = _lstm_seq_backward(dHf, cf, pf, grads, f"{prefix}.l{li}.f")
        dXb = _lstm_seq_backward(dHb, cb, pb, grads, f"{prefix}.l{li}.b")
        dX = dXf + dXb[:, ::-1]
        if li == 0:
            return  # word vectors are frozen
        h_low = enc.layers[li - 1][0].hidden_dim
        dHf = dX[:, :, :h_low]
        dHb = dX[:, :, h_low:][:, ::-1]


def encode_argument(tokens, table: EmbeddingTable, enc: EncoderParams,
                    train_mode: bool = False) -> np.ndarray:
    """Encode one token sequence; the encoder itself has no stochastic parts,
    so train_mode is accepted for interface symmetry only."""
    if not tokens:
        raise ValueError("empty token sequence")
    X = np.stack([lookup(table, t.surface) for t in tokens]).astype(np.float64)
    out, _ = _encode_batch_forward(X[None], enc)
    return out[0]


def embed_tokens(tokens, table: EmbeddingTable) -> np.ndarray:
    """Frozen word-vector rows for a token sequence, as float64."""
    if not tokens:
        raise ValueError("empty token sequence")
    return np.stack([lookup(table, t.surface) for t in tokens]).astype(np.float64)


# ---------------------------------------------------------------------------
# Head
# ---------------------------------------------------------------------------

class _HeadCache:
    __slots__ = ("Z0", "A1", "D1", "A2", "D2", "logits", "M1", "M2", "n1", "n2")


def _head_forward(E1, E2, S, head: HeadParams, M1=None, M2=None) -> _HeadCache:
    cache = _HeadCache()
    cache.n1, cache.n2 = E1.shape[1], E2.shape[1]
    cache.Z0 = np.concatenate([E1, E2, S], axis=1)
    cache.A1 = cache.Z0 @ head.W1.T + head.b1
    R1 = np.maximum(cache.A1, 0.0)
    cache.M1 = M1
    cache.D1 = R1 if M1 is None else R1 * M1
    cache.A2 = cache.D1 @ head.W2.T + head.b2
    R2 = np.maximum(cache.A2, 0.0)
    cache.M2 = M2
    cache.D2 = R2 if M2 is None else R2 * M2
    cache.logits = cache.D2 @ head.W_out.T + head.b_out
    return cache


def _head_backward(dlogits, cache: _HeadCache, head: HeadParams,
                   grads: dict[str, np.ndarray]):
    grads["head.W_out"] += dlogits.T @ cache.D2
    grads["head.b_out"] += dlogits.sum(axis=0)
    dD2 = dlogits @ head.W_out
    if cache.M2 is not None:
        dD2 = dD2 * cache.M2
    dA2 = dD2 * (cache.A2 > 0)
    grads["head.W2"] += dA2.T @ cache.D1
    grads["head.b2"] += dA2.sum(axis=0)
    dD1 = dA2 @ head.W2
    if cache.M1 is not None:
        dD1 = dD1 * cache.M1
    dA1 = dD1 * (cache.A1 > 0)
    grads["head.W1"] += dA1.T @ cache.Z0
    grads["head.b1"] += dA1.sum(axis=0)
    dZ0 = dA1 @ head.W1
    return dZ0[:, :cache.n1], dZ0[:, cache.n1:cache.n1 + cache.n2]


def forward(inputs, head: HeadParams, train_mode: bool = False,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Class probabilities for one (arg1 vec, arg2 vec, surface vec) triple.

    In train mode, inverted dropout masks are drawn from rng after each dense
    activation; in eval mode dropout is the identity.
    """
    e1, e2, s = (np.asarray(a, dtype=np.float64) for a in inputs)
    M1 = M2 = None
    if train_mode:
        if rng is None:
            raise ValueError("train_mode requires an rng for dropout masks")
        M1, M2 = _draw_masks(head, 1, rng)
    cache = _head_forward(e1[None], e2[None], s[None], head, M1, M2)
    return softmax(cache.logits)[0]


def _draw_masks(head: HeadParams, n: int, rng: np.random.Generator):
    d1 = head.W1.shape[0]
    d2 = head.W2.shape[0]
    M1 = (rng.random((n, d1)) >= head.dropout1) / (1.0 - head.dropout1)
    M2 = (rng.random((n, d2)) >= head.dropout2) / (1.0 - head.dropout2)
    return M1, M2


def _softmax_ce(logits: np.ndarray, golds: np.ndarray):
    """Per-example cross-entropy and dlogits (unscaled), via log-sum-exp."""
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    rows = np.arange(len(golds))
    ce = lse - logits[rows, golds]
    dlogits = np.exp(logits - lse[:, None])
    dlogits[rows, golds] -= 1.0
    return ce, dlogits


# ---------------------------------------------------------------------------
# Loss, gradients, SGD
# ---------------------------------------------------------------------------

def _group_by_shape(samples: Sequence[Sample]) -> dict[tuple[int, int], list[int]]:
    groups: dict[tuple[int, int], list[int]] = {}
    for idx, s in enumerate(samples):
        groups.setdefault((len(s.x1), len(s.x2)), []).append(idx)
    return groups


def loss_and_gradients(batch: Sequence[Sample], model: ModelParams,
                       rng: np.random.Generator | None = None):
    """Mean cross-entropy over the batch and exact gradients for every tensor.

    Dropout masks are drawn once per example (in input order) and reused by
    the paired backward pass.  With rng=None dropout is the identity.
    """
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    head = model.head
    if rng is not None:
        M1, M2 = _draw_masks(head, n, rng)
    else:
        M1 = M2 = None
    grads = zero_grads(model)
    total_ce = 0.0
    for idxs in _group_by_shape(batch).values():
        X1 = np.stack([batch[i].x1 for i in idxs])
        X2 = np.stack([batch[i].x2 for i in idxs])
        S = np.stack([batch[i].feats for i in idxs])
        golds = np.array([batch[i].label for i in idxs], dtype=np.intp)
        E1, c1 = _encode_batch_forward(X1, model.arg1_encoder)
        E2, c2 = _encode_batch_forward(X2, model.arg2_encoder)
        gm1 = M1[idxs] if M1 is not None else None
        gm2 = M2[idxs] if M2 is not None else None
        hcache = _head_forward(E1, E2, S, head, gm1, gm2)
        ce, dlogits = _softmax_ce(hcache.logits, golds)
        total_ce += float(ce.sum())
        dE1, dE2 = _head_backward(dlogits / n, hcache, head, grads)
        _encode_batch_backward(dE1, c1, model.arg1_encoder, grads, "arg1")
        _encode_batch_backward(dE2, c2, model.arg2_encoder, grads, "arg2")
    return total_ce / n, grads


def batch_loss(batch: Sequence[Sample], model: ModelParams,
               rng: np.random.Generator | None = None) -> float:
    """Forward-only mean cross-entropy with the same mask-drawing protocol
    as loss_and_gradients."""
    n = len(batch)
    head = model.head
    M1 = M2 = None
    if rng is not None:
        M1, M2 = _draw_masks(head, n, rng)
    total = 0.0
    for idxs in _group_by_shape(batch).values():
        X1 = np.stack([batch[i].x1 for i in idxs])
        X2 = np.stack([batch[i].x2 for i in idxs])
        S = np.stack([batch[i].feats for i in idxs])
        golds = np.array([batch[i].label for i in idxs], dtype=np.intp)
        E1, _ = _encode_batch_forward(X1, model.arg1_encoder)
        E2, _ = _encode_batch_forward(X2, model.arg2_encoder)
        gm1 = M1[idxs] if M1 is not None else None
        gm2 = M2[idxs] if M2 is not None else None
        cache = _head_forward(E1, E2, S, head, gm1, gm2)
        ce, _ = _softmax_ce(cache.logits, golds)
        total += float(ce.sum())
    return total / n


def sgd_step(model: ModelParams, grads: dict[str, np.ndarray], lr: float) -> ModelParams:
    """In-place w <- w - lr * g for every tensor."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    for name, arr in iter_tensors(model):
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise ValueError(f"diverged: non-finite gradient in {name}")
        arr -= lr * g
    return model


def _eval_logits(model: ModelParams, samples: Sequence[Sample]) -> np.ndarray:
    out = np.empty((len(samples), len(model.label_set)))
    for idxs in _group_by_shape(samples).values():
        X1 = np.stack([samples[i].x1 for i in idxs])
        X2 = np.stack([samples[i].x2 for i in idxs])
        S = np.stack([samples[i].feats for i in idxs])
        E1, _ = _encode_batch_forward(X1, model.arg1_encoder)
        E2, _ = _encode_batch_forward(X2, model.arg2_encoder)
        cache = _head_forward(E1, E2, S, model.head)
        out[idxs] = cache.logits
    return out


def predict_probs(model: ModelParams, samples: Sequence[Sample]) -> np.ndarray:
    """Eval-mode class probabilities, one row per sample."""
    return softmax(_eval_logits(model, samples))


def mean_cross_entropy(model: ModelParams, samples: Sequence[Sample]) -> float:
    logits = _eval_logits(model, samples)
    golds = np.array([s.label for s in samples], dtype=np.intp)
    ce, _ = _softmax_ce(logits, golds)
    return float(ce.mean())


def train(train_samples: Sequence[Sample], dev_samples: Sequence[Sample],
          label_set: Sequence[str], feature_vocab: FeatureVocab,
          hp: Hyperparams, seed: int, branch: str = ""):
    """Mini-batch SGD with per-epoch shuffling and early stopping on dev
    cross-entropy; returns the best-dev checkpoint and the epoch trace."""
    if not train_samples:
        raise ValueError("empty training set")
    if not dev_samples:
        raise ValueError("empty dev set")
    rng = np.random.default_rng(seed)
    dim = train_samples[0].x1.shape[1]
    model = init_model(dim, label_set, feature_vocab, hp, rng, branch=branch)
    best_ce = np.inf
    best_state = copy.deepcopy(model)
    stale = 0
    trace: list[dict] = []
    n = len(train_samples)
    for epoch in range(1, hp.max_epochs + 1):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, hp.batch_size):
            batch = [train_samples[i] for i in order[start:start + hp.batch_size]]
            loss, grads = loss_and_gradients(batch, model, rng)
            sgd_step(model, grads, hp.learning_rate)
            batch_losses.append(loss)
        train_ce = float(np.mean(batch_losses))
        dev_ce = mean_cross_entropy(model, dev_samples)
        if not np.isfinite(train_ce) or not np.isfinite(dev_ce):
            raise ValueError("diverged: non-finite loss")
        trace.append({"epoch": epoch, "train_ce": train_ce, "dev_ce": dev_ce})
        if dev_ce < best_ce:
            best_ce = dev_ce
            best_state = copy.deepcopy(model)
            stale = 0
        else:
            stale += 1
            if stale >= hp.patience:
                break
    return best_state, trace


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

MODEL_MAGIC = b"RELSENSE-MODEL-1\n"


def save_model(model: ModelParams, path: str) -> None:
    """Versioned header, JSON metadata, then row-major float64 payloads.

    save -> load -> save is byte-identical.
    """
    pairs = list(iter_tensors(model))
    meta = {
        "branch": model.branch,
        "embedding_dim": model.embedding_dim,
        "max_len": model.max_len,
        "label_set": model.label_set,
        "feature_vocab": {"names": model.feature_vocab.names_in_order(),
                          "min_count": model.feature_vocab.min_count},
        "dropout1": model.head.dropout1,
        "dropout2": model.head.dropout2,
        "tensors": [[name, list(arr.shape)] for name, arr in pairs],
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(f"{len(blob)}\n".encode("ascii"))
        fh.write(blob)
        for _, arr in pairs:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path: str) -> ModelParams:
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise ValueError(f"not a model file: {path}")
        length_line = b""
        while not length_line.endswith(b"\n"):
            ch = fh.read(1)
            if not ch:
                raise ValueError("truncated model header")
            length_line += ch
        meta = json.loads(fh.read(int(length_line)))
        tensors: dict[str, np.ndarray] = {}
        for name, shape in meta["tensors"]:
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise ValueError(f"truncated tensor payload at {name}")
            tensors[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return _assemble_model(meta, tensors)


def _assemble_model(meta: dict, tensors: dict[str, np.ndarray]) -> ModelParams:
    def build_encoder(prefix: str) -> EncoderParams:
        n_layers = 1 + max(int(name.split(".")[1][1:]) for name in tensors
                           if name.startswith(prefix + "."))
        layers = []
        for li in range(n_layers):
            pair = []
            for dname in ("f", "b"):
                kwargs = {t: tensors[f"{prefix}.l{li}.{dname}.{t}"] for t in _LSTM_TENSOR_NAMES}
                pair.append(LSTMParams(**kwargs))
            layers.append((pair[0], pair[1]))
        return EncoderParams(layers=layers)

    head = HeadParams(
        **{t: tensors[f"head.{t}"] for t in _HEAD_TENSOR_NAMES},
        dropout1=float(meta["dropout1"]),
        dropout2=float(meta["dropout2"]),
    )
    vocab_meta = meta["feature_vocab"]
    vocab = FeatureVocab(index={name: i for i, name in enumerate(vocab_meta["names"])},
                         min_count=int(vocab_meta["min_count"]))
    return ModelParams(
        arg1_encoder=build_encoder("arg1"),
        arg2_encoder=build_encoder("arg2"),
        head=head,
        label_set=list(meta["label_set"]),
        feature_vocab=vocab,
        embedding_dim=int(meta["embedding_dim"]),
        max_len=int(meta["max_len"]),
        branch=str(meta["branch"]),
    )
