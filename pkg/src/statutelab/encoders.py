"""Attention primitives and the two hierarchical encoders.

The CNN sentence encoder embeds tokens, convolves, applies tanh and pools
with a learned-query additive attention.  The transformer-style encoder
stacks multi-head self-attention layers (scaled dot-product, residual, no
layer norm at this scale) and average-pools the final states.  Paragraphs
are pooled from sentence vectors with general attention a_i = q^T tanh(A r_i
+ b), weighted by softmax or sparsemax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor

__all__ = [
    "EmbeddingTable",
    "GeneralAttentionParams",
    "SelfAttentionLayer",
    "SentenceEncoderCNN",
    "PRESETS",
    "load_embeddings",
    "random_embeddings",
    "init_attention_params",
    "init_self_attention_layer",
    "init_cnn_encoder",
    "attend",
    "self_attention",
    "self_attention_weights",
    "encode_sentence_cnn",
    "encode_sentence_avg",
    "encode_paragraph",
]

# encoder size presets: embedding dim, CNN filter count, attention query
# size, dropout rate
PRESETS = {
    "paper": {"embed_dim": 512, "filters": 512, "attn_dim": 200, "dropout": 0.2},
    "desk": {"embed_dim": 64, "filters": 64, "attn_dim": 32, "dropout": 0.0},
}


@dataclass
class EmbeddingTable:
    vocab: dict[str, int]
    matrix: Tensor  # [|V|, d]
    oov_policy: str = "zero_vector"  # or "skip"

    @property
    def dim(self) -> int:
        return self.matrix.data.shape[1]

    def embed(self, tokens: list[str]) -> Tensor:
        """Token rows as an [M, d] tensor; OOV handling per policy."""
        if not tokens:
            raise ValueError("cannot embed an empty token sequence")
        if self.oov_policy == "skip":
            idx = [self.vocab[t] for t in tokens if t in self.vocab]
            if not idx:
                raise ValueError("all tokens out of vocabulary under skip policy")
            return T.gather_rows(self.matrix, idx)
        idx = [self.vocab.get(t, 0) for t in tokens]
        mask = np.array([[1.0] if t in self.vocab else [0.0] for t in tokens])
        x = T.gather_rows(self.matrix, idx)
        if mask.min() == 1.0:
            return x
        return T.mul(x, Tensor(np.repeat(mask, self.dim, axis=1)))


def load_embeddings(path, oov_policy: str = "zero_vector", trainable: bool = False) -> EmbeddingTable:
    """GloVe-style text: one "word v1 v2 ... vd" line per word."""
    vocab: dict[str, int] = {}
    rows: list[list[float]] = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise ValueError(f"embedding line {lineno}: expected word and values")
            word, vals = parts[0], parts[1:]
            if dim is None:
                dim = len(vals)
            elif len(vals) != dim:
                raise ValueError(
                    f"embedding line {lineno}: dimension {len(vals)} != {dim}"
                )
            if word in vocab:
                raise ValueError(f"embedding line {lineno}: duplicate word {word!r}")
            vocab[word] = len(rows)
            rows.append([float(v) for v in vals])
    if not rows:
        raise ValueError("empty embedding file")
    return EmbeddingTable(vocab, Tensor(np.array(rows), requires_grad=trainable), oov_policy)


def random_embeddings(
    words, d: int, seed: int, scale: float = 0.1,
    oov_policy: str = "zero_vector", trainable: bool = True,
) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    words = list(words)
    mat = rng.normal(0.0, scale, size=(len(words), d))
    vocab = {w: i for i, w in enumerate(words)}
    if len(vocab) != len(words):
        raise ValueError("duplicate words in vocabulary")
    return EmbeddingTable(vocab, Tensor(mat, requires_grad=trainable), oov_policy)


@dataclass
class GeneralAttentionParams:
    A: Tensor  # [d_q, d_r]
    b: Tensor  # [d_q]
    weight_fn: str = "softmax"  # or "sparsemax"


@dataclass
class SelfAttentionLayer:
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_o: Tensor
    n_heads: int
    d: int


@dataclass
class SentenceEncoderCNN:
    embeddings: EmbeddingTable
    filters: Tensor  # [w, d, F]
    attn: GeneralAttentionParams
    u: Tensor  # learned attention query, [d_q]
    dropout: float = 0.0

    @property
    def out_dim(self) -> int:
        return self.filters.data.shape[2]


def init_attention_params(d_q: int, d_r: int, rng, weight_fn: str = "softmax") -> GeneralAttentionParams:
    a = rng.normal(0.0, 1.0 / math.sqrt(d_r), size=(d_q, d_r))
    return GeneralAttentionParams(
        Tensor(a, requires_grad=True),
        Tensor(np.zeros(d_q), requires_grad=True),
        weight_fn,
    )


def init_self_attention_layer(d: int, n_heads: int, rng) -> SelfAttentionLayer:
    if d % n_heads != 0:
        raise ValueError(f"hidden size {d} not divisible by {n_heads} heads")
    s = 1.0 / math.sqrt(d)

    def w():
        return Tensor(rng.normal(0.0, s, size=(d, d)), requires_grad=True)

    return SelfAttentionLayer(w(), w(), w(), w(), n_heads, d)


def init_cnn_encoder(
    embeddings: EmbeddingTable,
    filters: int,
    attn_dim: int,
    rng,
    width: int = 3,
    dropout: float = 0.0,
) -> SentenceEncoderCNN:
    d = embeddings.dim
    f = Tensor(
        rng.normal(0.0, 1.0 / math.sqrt(width * d), size=(width, d, filters)),
        requires_grad=True,
    )
    attn = init_attention_params(attn_dim, filters, rng)
    u = Tensor(rng.normal(0.0, 1.0 / math.sqrt(attn_dim), size=attn_dim), requires_grad=True)
    return SentenceEncoderCNN(embeddings, f, attn, u, dropout)


def attend(q: Tensor, keys, values, score_fn) -> Tensor:
    """Softmax-weighted sum of values, scored against the query."""
    if len(keys) != len(values):
        raise ValueError(f"{len(keys)} keys but {len(values)} values")
    if not keys:
        raise ValueError("attend needs at least one key/value pair")
    scores = T.stack([score_fn(q, k) for k in keys])
    weights = T.softmax(scores)
    return T.vecmat(weights, T.stack_rows(values))


def _heads(layer: SelfAttentionLayer, x: Tensor):
    dh = layer.d // layer.n_heads
    q = T.matmul(x, layer.w_q)
    k = T.matmul(x, layer.w_k)
    v = T.matmul(x, layer.w_v)
    outs = []
    weights = []
    for h in range(layer.n_heads):
        s, e = h * dh, (h + 1) * dh
        qh = T.slice_cols(q, s, e)
        kh = T.slice_cols(k, s, e)
        vh = T.slice_cols(v, s, e)
        scores = T.scale(T.matmul(qh, T.transpose(kh)), 1.0 / math.sqrt(dh))
        attn = T.softmax_rows(scores)
        weights.append(attn)
        outs.append(T.matmul(attn, vh))
    return outs, weights


def self_attention(x: Tensor, layer: SelfAttentionLayer) -> Tensor:
    """One multi-head self-attention layer with a residual connection."""
    outs, _ = _heads(layer, x)
    z = T.concat_cols(outs)
    return T.add(T.matmul(z, layer.w_o), x)


def self_attention_weights(x: Tensor, layer: SelfAttentionLayer) -> list[np.ndarray]:
    """Row-stochastic attention matrices, one [M, M] array per head."""
    _, weights = _heads(layer, x)
    return [w.data.copy() for w in weights]


def _additive_scores(rows: Tensor, params: GeneralAttentionParams, query: Tensor) -> Tensor:
    # a_i = q^T tanh(A r_i + b), batched over the rows
    hidden = T.tanh(T.add(T.matmul(rows, T.transpose(params.A)), params.b))
    return T.matvec(hidden, query)


def encode_sentence_cnn(
    tokens: list[str],
    enc: SentenceEncoderCNN,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """embed -> conv1d -> tanh -> learned-query additive attention."""
    x = enc.embeddings.embed(tokens)
    feats = T.tanh(T.conv1d(x, enc.filters))
    if train and enc.dropout > 0.0:
        if rng is None:
            raise ValueError("dropout requires an rng in training mode")
        feats = T.dropout(feats, enc.dropout, rng)
    scores = _additive_scores(feats, enc.attn, enc.u)
    weights = T.softmax(scores)
    return T.vecmat(weights, feats)


def encode_sentence_avg(
    tokens: list[str],
    embeddings: EmbeddingTable,
    layers: list[SelfAttentionLayer],
    positions: Tensor | None = None,
) -> Tensor:
    """embed (+ learned positions) -> stacked self-attention -> average pool."""
    x = embeddings.embed(tokens)
    m = x.data.shape[0]
    if positions is not None:
        if m > positions.data.shape[0]:
            raise ValueError(f"sentence length {m} exceeds positional table")
        x = T.add(x, T.gather_rows(positions, range(m)))
    for layer in layers:
        x = self_attention(x, layer)
    return T.avg_pool(x)


def encode_paragraph(
    q: Tensor,
    sent_reps: list[Tensor],
    params: GeneralAttentionParams,
) -> tuple[Tensor, list[float]]:
    """General attention over sentence vectors; returns the pooled vector
    and the attention weights for inspection."""
    if not sent_reps:
        raise ValueError("encode_paragraph needs at least one sentence vector")
    rows = T.stack_rows(sent_reps)
    scores = _additive_scores(rows, params, q)
    if params.weight_fn == "sparsemax":
        weights = T.sparsemax(scores)
    elif params.weight_fn == "softmax":
        weights = T.softmax(scores)
    else:
        raise ValueError(f"unknown weight_fn {params.weight_fn!r}")
    return T.vecmat(weights, rows), [float(w) for w in weights.data]
