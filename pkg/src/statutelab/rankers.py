"""Trainable retrieval models and the lexical/semantic score ensemble.

Retrieval is retrieve-then-rerank: BM25 picks top-N candidates, the neural
model scores them semantically, and the final score is
alpha * s_lexical + (1 - alpha) * s_semantic with lexical scores min-max
normalized per query.  Training uses negative sampling with the
cross-entropy in tensor.ce_negsample and plain gradient descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .corpus import Article, Query
from .encoders import (
    EmbeddingTable,
    GeneralAttentionParams,
    SelfAttentionLayer,
    SentenceEncoderCNN,
    encode_paragraph,
    encode_sentence_avg,
    encode_sentence_cnn,
    init_attention_params,
    init_cnn_encoder,
    init_self_attention_layer,
    random_embeddings,
)
from .evalkit import RetrievalJudgment, macro_f2
from .lexical import InvertedIndex, tokenize, top_n
from .store import bundle_bytes, read_bundle, write_bundle

__all__ = [
    "RankerConfig",
    "RankerModel",
    "ScoredCandidate",
    "LawfulnessClassifier",
    "build_attentive_cnn",
    "build_paraformer_lite",
    "build_lawfulness_classifier",
    "parameters",
    "semantic_score",
    "train_ranker",
    "ensemble",
    "grid_search_alpha",
    "rank",
    "train_lawfulness",
    "lawful_probability",
    "classify",
    "model_bytes",
    "save_model",
    "load_model",
    "save_classifier",
    "load_classifier",
]


@dataclass
class RankerConfig:
    lr: float = 0.05
    epochs: int = 10
    k_negatives: int = 2
    seed: int = 0
    n_train: int = 50
    n_predict: int = 150
    eval_k: int = 1
    k1: float = 1.2
    b: float = 0.75


@dataclass
class RankerModel:
    kind: str  # attentive_cnn | paraformer_lite
    embeddings: EmbeddingTable
    para_attn: GeneralAttentionParams
    config: RankerConfig
    # learned global paragraph query; None means derive it from the encoded query
    para_query: Tensor | None = None
    encoder: SentenceEncoderCNN | None = None  # attentive_cnn
    layers: list[SelfAttentionLayer] = field(default_factory=list)  # paraformer_lite
    positions: Tensor | None = None


@dataclass
class ScoredCandidate:
    article_id: str
    s_lexical: float
    s_semantic: float
    s_final: float


def build_attentive_cnn(
    vocab,
    embed_dim: int,
    filters: int,
    attn_dim: int,
    seed: int,
    width: int = 3,
    dropout: float = 0.0,
    para_query: str = "learned",
    emb_scale: float = 0.1,
    config: RankerConfig | None = None,
) -> RankerModel:
    rng = np.random.default_rng(seed)
    emb = random_embeddings(vocab, embed_dim, seed, scale=emb_scale, oov_policy="zero_vector")
    enc = init_cnn_encoder(emb, filters, attn_dim, rng, width=width, dropout=dropout)
    # a derived paragraph query is the encoded query sentence, so its size is
    # the encoder output size rather than the attention query size
    d_q = attn_dim if para_query == "learned" else filters
    para = init_attention_params(d_q, filters, rng, weight_fn="sparsemax")
    pq = None
    if para_query == "learned":
        pq = Tensor(rng.normal(0.0, 1.0 / math.sqrt(attn_dim), size=attn_dim), requires_grad=True)
    elif para_query != "derived":
        raise ValueError(f"para_query must be learned or derived, got {para_query!r}")
    return RankerModel(
        "attentive_cnn", emb, para, config or RankerConfig(seed=seed), pq, encoder=enc
    )


def build_paraformer_lite(
    vocab,
    embed_dim: int,
    n_layers: int,
    n_heads: int,
    attn_dim: int,
    seed: int,
    max_len: int = 64,
    emb_scale: float = 0.1,
    config: RankerConfig | None = None,
) -> RankerModel:
    rng = np.random.default_rng(seed)
    emb = random_embeddings(vocab, embed_dim, seed, scale=emb_scale, oov_policy="zero_vector")
    layers = [init_self_attention_layer(embed_dim, n_heads, rng) for _ in range(n_layers)]
    positions = Tensor(
        rng.normal(0.0, 0.1, size=(max_len, embed_dim)), requires_grad=True
    )
    # paragraph attention queried by the encoded query sentence itself
    para = init_attention_params(embed_dim, embed_dim, rng, weight_fn="sparsemax")
    return RankerModel(
        "paraformer_lite",
        emb,
        para,
        config or RankerConfig(seed=seed),
        None,
        layers=layers,
        positions=positions,
    )


def parameters(model: RankerModel) -> list[Tensor]:
    """Trainable tensors in declaration order (also the checkpoint order)."""
    params = []
    if model.embeddings.matrix.requires_grad:
        params.append(model.embeddings.matrix)
    if model.kind == "attentive_cnn":
        enc = model.encoder
        params += [enc.filters, enc.attn.A, enc.attn.b, enc.u]
    else:
        if model.positions is not None:
            params.append(model.positions)
        for layer in model.layers:
            params += [layer.w_q, layer.w_k, layer.w_v, layer.w_o]
    params += [model.para_attn.A, model.para_attn.b]
    if model.para_query is not None:
        params.append(model.para_query)
    return params


def _encode_query(model: RankerModel, text: str, train=False, rng=None) -> Tensor:
    tokens = tokenize(text)
    if model.kind == "attentive_cnn":
        return encode_sentence_cnn(tokens, model.encoder, train=train, rng=rng)
    return encode_sentence_avg(tokens, model.embeddings, model.layers, model.positions)


def _statements(article: Article) -> list[str]:
    return article.statements if article.statements else [article.text]


def _score_graph(model: RankerModel, query_text: str, article: Article, train=False, rng=None) -> Tensor:
    qv = _encode_query(model, query_text, train=train, rng=rng)
    if model.kind == "attentive_cnn":
        reps = [
            encode_sentence_cnn(tokenize(s), model.encoder, train=train, rng=rng)
            for s in _statements(article)
        ]
    else:
        reps = [
            encode_sentence_avg(tokenize(s), model.embeddings, model.layers, model.positions)
            for s in _statements(article)
        ]
    pq = model.para_query if model.para_query is not None else qv
    r_a, _ = encode_paragraph(pq, reps, model.para_attn)
    return T.dot(qv, r_a)


def semantic_score(model: RankerModel, query_text: str, article: Article) -> float:
    """Dot product of the encoded query and the pooled article vector."""
    return float(_score_graph(model, query_text, article).data)


def train_ranker(
    model: RankerModel,
    corpus: list[Article],
    queries: list[Query],
    k_negatives: int | None = None,
    seed: int | None = None,
    index: InvertedIndex | None = None,
) -> tuple[RankerModel, list[float]]:
    """Negative-sampling training; returns the model and per-epoch mean loss.

    Negatives are drawn uniformly without replacement from the non-relevant
    articles.  With an index, the pool is first narrowed to each query's
    top n_train lexical candidates (the training-phase cut, which may
    differ from the prediction-phase n_predict).
    """
    cfg = model.config
    k = cfg.k_negatives if k_negatives is None else k_negatives
    seed = cfg.seed if seed is None else seed
    if k >= len(corpus):
        raise ValueError(f"need more than K={k} articles, corpus has {len(corpus)}")
    by_id = {a.id: a for a in corpus}
    pools = {}
    for q in queries:
        if not (q.relevant_ids & by_id.keys()):
            raise ValueError(f"query {q.id!r} has no relevant article in the corpus")
        if index is not None:
            cands = top_n(index, tokenize(q.text), cfg.n_train, k1=cfg.k1, b=cfg.b)
            pools[q.id] = [d for d, _ in cands if d not in q.relevant_ids]
        else:
            pools[q.id] = [a.id for a in corpus if a.id not in q.relevant_ids]
    params = parameters(model)
    rng = np.random.default_rng(seed)
    trace = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(queries))
        total = 0.0
        for qi in order:
            q = queries[int(qi)]
            rel = sorted(q.relevant_ids & by_id.keys())
            pos_id = rel[int(rng.integers(0, len(rel)))]
            pool = pools[q.id]
            n_negs = min(k, len(pool))
            neg_ids = [pool[i] for i in rng.choice(len(pool), size=n_negs, replace=False)] if pool else []
            y_pos = _score_graph(model, q.text, by_id[pos_id], train=True, rng=rng)
            y_negs = [_score_graph(model, q.text, by_id[n], train=True, rng=rng) for n in neg_ids]
            loss = T.ce_negsample(y_pos, y_negs)
            T.backward(loss)
            for p in params:
                if p.grad is not None:
                    p.data -= cfg.lr * p.grad
                    p.zero_grad()
            total += float(loss.data)
        trace.append(total / max(1, len(queries)))
    return model, trace


def ensemble(s_l: float, s_s: float, alpha: float) -> float:
    """alpha * lexical + (1 - alpha) * semantic."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return alpha * s_l + (1.0 - alpha) * s_s


def _minmax(scores: list[float]) -> list[float]:
    lo, hi = min(scores), max(scores)
    if hi > lo:
        return [(s - lo) / (hi - lo) for s in scores]
    return [1.0 for _ in scores]


def _candidates(model, index, by_id, query, n_predict):
    hits = top_n(index, tokenize(query.text), n_predict, k1=model.config.k1, b=model.config.b)
    ids = [doc_id for doc_id, _ in hits]
    lex = _minmax([s for _, s in hits])
    sem = [semantic_score(model, query.text, by_id[i]) for i in ids]
    return ids, lex, sem


def rank(
    model: RankerModel,
    index: InvertedIndex,
    corpus: list[Article],
    query: Query,
    n_predict: int | None = None,
    alpha: float | None = None,
) -> list[ScoredCandidate]:
    """Retrieve top-N lexically, rescore semantically, sort by the ensemble."""
    n_predict = model.config.n_predict if n_predict is None else n_predict
    alpha = 0.5 if alpha is None else alpha
    by_id = {a.id: a for a in corpus}
    ids, lex, sem = _candidates(model, index, by_id, query, n_predict)
    cands = [
        ScoredCandidate(i, l, s, ensemble(l, s, alpha))
        for i, l, s in zip(ids, lex, sem)
    ]
    cands.sort(key=lambda c: (-c.s_final, c.article_id))
    return cands


def grid_search_alpha(
    model: RankerModel,
    index: InvertedIndex,
    corpus: list[Article],
    val_queries: list[Query],
    step: float = 0.01,
    n_predict: int | None = None,
    k: int | None = None,
) -> tuple[float, float]:
    """Best alpha on the validation queries by macro-F2; ties take the
    smallest alpha."""
    if not val_queries:
        raise ValueError("grid search needs a non-empty validation set")
    if not 0.0 < step <= 1.0:
        raise ValueError(f"step must be in (0, 1], got {step}")
    n_predict = model.config.n_predict if n_predict is None else n_predict
    k = model.config.eval_k if k is None else k
    by_id = {a.id: a for a in corpus}
    per_query = [_candidates(model, index, by_id, q, n_predict) for q in val_queries]
    alphas = []
    a = 0.0
    while a < 1.0 - 1e-12:
        alphas.append(round(a, 12))
        a += step
    alphas.append(1.0)
    best_alpha, best_f2 = 0.0, -1.0
    for alpha in alphas:
        judgments = []
        for q, (ids, lex, sem) in zip(val_queries, per_query):
            order = sorted(
                range(len(ids)),
                key=lambda i: (-(alpha * lex[i] + (1.0 - alpha) * sem[i]), ids[i]),
            )
            judgments.append(RetrievalJudgment(set(q.relevant_ids), [ids[i] for i in order]))
        _, _, f2 = macro_f2(judgments, k)
        if f2 > best_f2 + 1e-12:
            best_alpha, best_f2 = alpha, f2
    return best_alpha, best_f2


# ---------------------------------------------------------------------------
# lawfulness classification


@dataclass
class LawfulnessClassifier:
    encoder: SentenceEncoderCNN
    w: Tensor
    b: Tensor
    lr: float = 0.1
    epochs: int = 10


def build_lawfulness_classifier(
    vocab, embed_dim: int, filters: int, attn_dim: int, seed: int,
    width: int = 3, lr: float = 0.1, epochs: int = 10, emb_scale: float = 0.5,
) -> LawfulnessClassifier:
    rng = np.random.default_rng(seed)
    emb = random_embeddings(vocab, embed_dim, seed, scale=emb_scale, oov_policy="zero_vector")
    enc = init_cnn_encoder(emb, filters, attn_dim, rng, width=width)
    w = Tensor(np.zeros(filters), requires_grad=True)
    b = Tensor(np.asarray(0.0), requires_grad=True)
    return LawfulnessClassifier(enc, w, b, lr, epochs)


def _clf_params(clf: LawfulnessClassifier) -> list[Tensor]:
    enc = clf.encoder
    params = []
    if enc.embeddings.matrix.requires_grad:
        params.append(enc.embeddings.matrix)
    params += [enc.filters, enc.attn.A, enc.attn.b, enc.u, clf.w, clf.b]
    return params


def _logit(clf: LawfulnessClassifier, text: str) -> Tensor:
    vec = encode_sentence_cnn(tokenize(text), clf.encoder)
    return T.add(T.dot(clf.w, vec), clf.b)


def train_lawfulness(clf: LawfulnessClassifier, dataset, seed: int) -> LawfulnessClassifier:
    """Binary cross-entropy training of the CNN encoder plus linear head."""
    labels = {rec.lawful for rec in dataset}
    if labels != {True, False}:
        raise ValueError("training data must contain both lawful and unlawful records")
    params = _clf_params(clf)
    rng = np.random.default_rng(seed)
    items = list(dataset)
    for _ in range(clf.epochs):
        for i in rng.permutation(len(items)):
            rec = items[int(i)]
            z = _logit(clf, rec.text)
            # -ln sigma(z) if lawful else -ln(1 - sigma(z)), via softplus
            loss = T.sub(T.softplus(z), T.scale(z, 1.0 if rec.lawful else 0.0))
            T.backward(loss)
            for p in params:
                if p.grad is not None:
                    p.data -= clf.lr * p.grad
                    p.zero_grad()
    return clf


def lawful_probability(clf: LawfulnessClassifier, text: str) -> float:
    z = float(_logit(clf, text).data)
    return 1.0 / (1.0 + math.exp(-z))


def classify(clf: LawfulnessClassifier, text: str) -> bool:
    return lawful_probability(clf, text) >= 0.5


# ---------------------------------------------------------------------------
# checkpoints


def _vocab_words(emb: EmbeddingTable) -> list[str]:
    return [w for w, _ in sorted(emb.vocab.items(), key=lambda kv: kv[1])]


def _model_tensors(model: RankerModel) -> list[Tensor]:
    ts = [model.embeddings.matrix]
    if model.kind == "attentive_cnn":
        enc = model.encoder
        ts += [enc.filters, enc.attn.A, enc.attn.b, enc.u]
    else:
        ts.append(model.positions)
        for layer in model.layers:
            ts += [layer.w_q, layer.w_k, layer.w_v, layer.w_o]
    ts += [model.para_attn.A, model.para_attn.b]
    if model.para_query is not None:
        ts.append(model.para_query)
    return ts


def model_bytes(model: RankerModel) -> bytes:
    meta = {
        "vocab": _vocab_words(model.embeddings),
        "oov_policy": model.embeddings.oov_policy,
        "config": asdict(model.config),
    }
    if model.kind == "attentive_cnn":
        meta["dropout"] = model.encoder.dropout
        meta["para_query"] = "learned" if model.para_query is not None else "derived"
    else:
        meta["n_heads"] = model.layers[0].n_heads if model.layers else 1
        meta["n_layers"] = len(model.layers)
    return bundle_bytes(model.kind, meta, _model_tensors(model))


def save_model(model: RankerModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_bytes(model))


def load_model(path) -> RankerModel:
    kind, meta, tensors = read_bundle(path)
    if kind not in ("attentive_cnn", "paraformer_lite"):
        raise ValueError(f"checkpoint holds a {kind}, not a ranker")
    cfg = RankerConfig(**meta["config"])
    vocab = meta["vocab"]
    if kind == "attentive_cnn":
        model = build_attentive_cnn(
            vocab,
            embed_dim=tensors[0].data.shape[1],
            filters=tensors[1].data.shape[2],
            attn_dim=tensors[2].data.shape[0],
            seed=cfg.seed,
            width=tensors[1].data.shape[0],
            dropout=meta.get("dropout", 0.0),
            para_query=meta.get("para_query", "learned"),
            config=cfg,
        )
    else:
        d = tensors[0].data.shape[1]
        model = build_paraformer_lite(
            vocab,
            embed_dim=d,
            n_layers=meta["n_layers"],
            n_heads=meta["n_heads"],
            attn_dim=d,
            seed=cfg.seed,
            max_len=tensors[1].data.shape[0],
            config=cfg,
        )
    model.embeddings.oov_policy = meta["oov_policy"]
    targets = _model_tensors(model)
    if len(targets) != len(tensors):
        raise ValueError("checkpoint tensor count does not match model structure")
    for dst, src in zip(targets, tensors):
        if dst.data.shape != src.data.shape:
            raise ValueError(f"checkpoint shape {src.data.shape} != model {dst.data.shape}")
        dst.data[...] = src.data
    return model


def save_classifier(clf: LawfulnessClassifier, path) -> None:
    enc = clf.encoder
    meta = {
        "vocab": _vocab_words(enc.embeddings),
        "oov_policy": enc.embeddings.oov_policy,
        "lr": clf.lr,
        "epochs": clf.epochs,
    }
    tensors = [enc.embeddings.matrix, enc.filters, enc.attn.A, enc.attn.b, enc.u, clf.w, clf.b]
    write_bundle(path, "lawfulness", meta, tensors)


def load_classifier(path) -> LawfulnessClassifier:
    kind, meta, tensors = read_bundle(path)
    if kind != "lawfulness":
        raise ValueError(f"checkpoint holds a {kind}, not a lawfulness classifier")
    clf = build_lawfulness_classifier(
        meta["vocab"],
        embed_dim=tensors[0].data.shape[1],
        filters=tensors[1].data.shape[2],
        attn_dim=tensors[2].data.shape[0],
        seed=0,
        width=tensors[1].data.shape[0],
        lr=meta["lr"],
        epochs=meta["epochs"],
    )
    clf.encoder.embeddings.oov_policy = meta["oov_policy"]
    targets = [
        clf.encoder.embeddings.matrix,
        clf.encoder.filters,
        clf.encoder.attn.A,
        clf.encoder.attn.b,
        clf.encoder.u,
        clf.w,
        clf.b,
    ]
    for dst, src in zip(targets, tensors):
        dst.data[...] = src.data
    return clf
