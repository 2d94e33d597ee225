"""Knowledge injection into toy self-attention stacks.

Two mechanisms live here.  Extra attention heads are pretrained to imitate
binary token-relation matrices by MSE on the pre-softmax score matrix
q k^T / sqrt(d_head), with the body untouched, then attached as a final
layer whose value/output projections start at zero so attaching never
changes the model output.  Injection needles are per-token softmax
classifiers hung off intermediate layers and trained on three parallel
levels of B/I/O/E tags for requisite, effectuation and unless segments;
the needles are dropped from checkpoints after training.
"""

from __future__ import annotations

import math
import json
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .encoders import (
    EmbeddingTable,
    SelfAttentionLayer,
    init_self_attention_layer,
    random_embeddings,
    self_attention,
    self_attention_weights,
)
from .store import read_bundle, write_bundle

__all__ = [
    "TAGSET",
    "SdoiMatrix",
    "HydraHead",
    "BioeSample",
    "InjectionConfig",
    "TreModel",
    "Needle",
    "load_sdoi",
    "load_bioe",
    "dump_bioe",
    "validate_bioe",
    "init_hydra_heads",
    "hydra_attn_matrix",
    "hydra_pretrain",
    "hydra_attach",
    "hydra_detach",
    "count_parameters",
    "build_tre_model",
    "tre_forward",
    "tre_needle_loss",
    "tre_train",
    "tre_evaluate",
    "tag_stats",
    "spans_from_tags",
    "attention_weights_report",
    "save_layer_stack",
    "load_layer_stack",
    "save_hydra_heads",
    "load_hydra_heads",
    "save_tre_model",
    "load_tre_model",
]

TAGSET = ["B-R", "I-R", "E-R", "B-E", "I-E", "E-E", "B-U", "I-U", "E-U", "O"]
_TAG_IDX = {t: i for i, t in enumerate(TAGSET)}
_LEVELS = 3


@dataclass
class SdoiMatrix:
    tokens: list[str]
    entries: np.ndarray  # [n, n], values in {0, 1}

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("relation matrix must be square")
        if not np.all((m == 0.0) | (m == 1.0)):
            raise ValueError("relation matrix entries must be 0 or 1")
        if len(self.tokens) != m.shape[0]:
            raise ValueError("token count does not match matrix size")
        self.entries = m


@dataclass
class HydraHead:
    w_q: Tensor  # [d, d_head]
    w_k: Tensor


@dataclass
class BioeSample:
    tokens: list[str]
    tags: list[list[str]]  # three levels, each parallel to tokens


@dataclass
class InjectionConfig:
    positions: list[int]  # 1-based layer indices, strictly increasing
    portions: list[float]  # per-position loss weights, sum to 1

    def validate(self, depth: int) -> None:
        if len(self.positions) != len(self.portions):
            raise ValueError("positions and portions must have equal length")
        if not self.positions:
            raise ValueError("need at least one injection position")
        if any(p2 <= p1 for p1, p2 in zip(self.positions, self.positions[1:])):
            raise ValueError(f"positions must be strictly increasing: {self.positions}")
        if self.positions[0] < 1 or self.positions[-1] > depth:
            raise ValueError(f"positions must lie in [1, {depth}]: {self.positions}")
        if any(p < 0 for p in self.portions):
            raise ValueError("portions must be non-negative")
        if abs(sum(self.portions) - 1.0) > 1e-9:
            raise ValueError(f"portions must sum to 1, got {sum(self.portions)}")


# ---------------------------------------------------------------------------
# file formats


def load_sdoi(path) -> list[SdoiMatrix]:
    """JSONL: {"tokens": [...], "matrix": [[0,1,...], ...]} per line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                out.append(SdoiMatrix(list(map(str, obj["tokens"])), np.array(obj["matrix"])))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"sdoi line {lineno}: {exc}") from exc
    return out


def validate_bioe(sample: BioeSample) -> None:
    """Check tag vocabulary and B...E bracketing on every level."""
    if len(sample.tags) != _LEVELS:
        raise ValueError(f"expected {_LEVELS} tag levels, got {len(sample.tags)}")
    for level, tags in enumerate(sample.tags):
        if len(tags) != len(sample.tokens):
            raise ValueError(f"level {level + 1} has {len(tags)} tags for {len(sample.tokens)} tokens")
        open_seg: dict[str, bool] = {}
        for i, tag in enumerate(tags):
            if tag not in _TAG_IDX:
                raise ValueError(f"unknown tag {tag!r}")
            if tag == "O":
                continue
            kind, typ = tag.split("-")
            if kind == "B":
                if open_seg.get(typ):
                    raise ValueError(f"level {level + 1} token {i}: B-{typ} inside an open {typ} segment")
                open_seg[typ] = True
            elif kind == "E":
                if not open_seg.get(typ):
                    raise ValueError(f"level {level + 1} token {i}: E-{typ} without an open segment")
                open_seg[typ] = False


def load_bioe(path) -> list[BioeSample]:
    """TSV columns token, L1, L2, L3; "-" means O; blank line between samples."""
    samples = []
    tokens: list[str] = []
    tags: list[list[str]] = [[], [], []]

    def flush():
        nonlocal tokens, tags
        if tokens:
            sample = BioeSample(tokens, tags)
            validate_bioe(sample)
            samples.append(sample)
        tokens, tags = [], [[], [], []]

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise ValueError(f"bioe line {lineno}: expected 4 tab-separated columns")
            tokens.append(cols[0])
            for level in range(_LEVELS):
                tag = cols[level + 1]
                tags[level].append("O" if tag == "-" else tag)
    flush()
    return samples


def dump_bioe(samples: list[BioeSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for si, sample in enumerate(samples):
            if si:
                fh.write("\n")
            for i, tok in enumerate(sample.tokens):
                cols = [tok] + ["-" if sample.tags[l][i] == "O" else sample.tags[l][i] for l in range(_LEVELS)]
                fh.write("\t".join(cols) + "\n")


def tag_stats(data: list[BioeSample]) -> dict[str, int]:
    """Exact tag counts over all three levels."""
    counts = {t: 0 for t in TAGSET}
    for sample in data:
        for tags in sample.tags:
            for tag in tags:
                if tag not in counts:
                    raise ValueError(f"unknown tag {tag!r}")
                counts[tag] += 1
    return counts


# ---------------------------------------------------------------------------
# head pretraining against token-relation targets


def init_hydra_heads(d: int, n_heads: int, seed: int, scale: float = 0.3) -> list[HydraHead]:
    if d % n_heads != 0:
        raise ValueError(f"hidden size {d} not divisible by {n_heads} heads")
    rng = np.random.default_rng(seed)
    dh = d // n_heads
    return [
        HydraHead(
            Tensor(rng.normal(0.0, scale, size=(d, dh)), requires_grad=True),
            Tensor(rng.normal(0.0, scale, size=(d, dh)), requires_grad=True),
        )
        for _ in range(n_heads)
    ]


def hydra_attn_matrix(head: HydraHead, hidden: Tensor) -> Tensor:
    """Pre-softmax score matrix q k^T / sqrt(d_head) for one head."""
    dh = head.w_q.data.shape[1]
    q = T.matmul(hidden, head.w_q)
    k = T.matmul(hidden, head.w_k)
    return T.scale(T.matmul(q, T.transpose(k)), 1.0 / math.sqrt(dh))


def hydra_pretrain(
    hidden_states: list[Tensor],
    targets: list[SdoiMatrix],
    heads: list[HydraHead],
    epochs: int,
    lr: float,
    seed: int = 0,
) -> tuple[list[HydraHead], list[float]]:
    """Full-batch gradient descent of the head projections against the
    targets; only the head tensors are updated."""
    if len(hidden_states) != len(targets):
        raise ValueError(f"{len(hidden_states)} states but {len(targets)} targets")
    d = heads[0].w_q.data.shape[0]
    for h, tgt in zip(hidden_states, targets):
        if h.data.ndim != 2 or h.data.shape[1] != d:
            raise ValueError(f"hidden state shape {h.data.shape} does not match head dim {d}")
        if h.data.shape[0] != tgt.entries.shape[0]:
            raise ValueError("hidden state length does not match its target")
    params = [t for head in heads for t in (head.w_q, head.w_k)]
    target_tensors = [Tensor(t.entries) for t in targets]
    trace = []
    for _ in range(epochs):
        losses = []
        for hidden, tgt in zip(hidden_states, target_tensors):
            for head in heads:
                losses.append(T.mse_matrix(hydra_attn_matrix(head, hidden), tgt))
        loss = T.tmean(T.stack(losses))
        T.backward(loss)
        for p in params:
            if p.grad is not None:
                p.data -= lr * p.grad
                p.zero_grad()
        trace.append(float(loss.data))
    return heads, trace


def hydra_attach(body: list[SelfAttentionLayer], heads: list[HydraHead]) -> list[SelfAttentionLayer]:
    """Append one layer built from the pretrained heads.

    Value and output projections start at zero, so with the residual
    connection the attached model reproduces the body output exactly.
    """
    d = heads[0].w_q.data.shape[0]
    dh = heads[0].w_q.data.shape[1]
    if dh * len(heads) != d:
        raise ValueError(f"{len(heads)} heads of width {dh} do not tile hidden size {d}")
    for head in heads:
        if head.w_q.data.shape != (d, dh) or head.w_k.data.shape != (d, dh):
            raise ValueError("inconsistent head shapes")
    if body and body[0].d != d:
        raise ValueError(f"head hidden size {d} does not match body size {body[0].d}")
    layer = SelfAttentionLayer(
        Tensor(np.concatenate([h.w_q.data for h in heads], axis=1), requires_grad=True),
        Tensor(np.concatenate([h.w_k.data for h in heads], axis=1), requires_grad=True),
        Tensor(np.zeros((d, d)), requires_grad=True),
        Tensor(np.zeros((d, d)), requires_grad=True),
        len(heads),
        d,
    )
    return list(body) + [layer]


def hydra_detach(model: list[SelfAttentionLayer]) -> list[SelfAttentionLayer]:
    if not model:
        raise ValueError("nothing to detach")
    return list(model[:-1])


def count_parameters(layers: list[SelfAttentionLayer]) -> int:
    return sum(
        t.data.size for l in layers for t in (l.w_q, l.w_k, l.w_v, l.w_o)
    )


# ---------------------------------------------------------------------------
# injection-needle training


@dataclass
class TreModel:
    embeddings: EmbeddingTable
    positions: Tensor
    layers: list[SelfAttentionLayer]


@dataclass
class Needle:
    w: Tensor  # [d, T]
    b: Tensor  # [T]


def build_tre_model(
    vocab, d: int, n_layers: int, n_heads: int, seed: int, max_len: int = 64
) -> TreModel:
    rng = np.random.default_rng(seed)
    emb = random_embeddings(vocab, d, seed, scale=0.5)
    positions = Tensor(rng.normal(0.0, 0.1, size=(max_len, d)), requires_grad=True)
    layers = [init_self_attention_layer(d, n_heads, rng) for _ in range(n_layers)]
    return TreModel(emb, positions, layers)


def _tre_params(model: TreModel) -> list[Tensor]:
    params = [model.embeddings.matrix, model.positions]
    for layer in model.layers:
        params += [layer.w_q, layer.w_k, layer.w_v, layer.w_o]
    return params


def tre_forward(model: TreModel, tokens: list[str]) -> list[Tensor]:
    """Per-layer hidden states Z^1 .. Z^L for one token sequence."""
    x = model.embeddings.embed(tokens)
    m = x.data.shape[0]
    if m > model.positions.data.shape[0]:
        raise ValueError(f"sequence length {m} exceeds positional table")
    x = T.add(x, T.gather_rows(model.positions, range(m)))
    states = []
    for layer in model.layers:
        x = self_attention(x, layer)
        states.append(x)
    return states


def _token_cross_entropy(logits: Tensor, gold_idx: np.ndarray) -> Tensor:
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    p = e / e.sum(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(e.sum(axis=1))
    rows = np.arange(len(gold_idx))
    loss = float((lse - z[rows, gold_idx]).mean())

    def vjp(g):
        gm = p.copy()
        gm[rows, gold_idx] -= 1.0
        return float(g) * gm / len(gold_idx)

    return Tensor(np.asarray(loss), parents=(logits,), vjps=(vjp,), op="token_ce")


def tre_needle_loss(z: Tensor, gold_tags: list[str], w: Tensor, b: Tensor) -> Tensor:
    """Mean token-level cross entropy of softmax(z W + b) against gold tags."""
    if w.data.shape[1] != len(TAGSET) or b.data.shape[0] != len(TAGSET):
        raise ValueError(f"needle must map to {len(TAGSET)} tags")
    if z.data.shape[0] != len(gold_tags):
        raise ValueError(f"{z.data.shape[0]} states but {len(gold_tags)} gold tags")
    try:
        gold_idx = np.array([_TAG_IDX[t] for t in gold_tags])
    except KeyError as exc:
        raise ValueError(f"unknown tag {exc.args[0]!r}") from exc
    logits = T.add(T.matmul(z, w), b)
    return _token_cross_entropy(logits, gold_idx)


def _needle_assignment(config: InjectionConfig) -> list[tuple[int, float]]:
    # one needle per tag level, assigned round-robin to the config positions
    n = len(config.positions)
    return [(config.positions[l % n], config.portions[l % n]) for l in range(_LEVELS)]


@dataclass
class TreTrainResult:
    model: TreModel
    needles: list[Needle]
    loss_trace: list[float]  # per-epoch mean of the total loss
    step_losses: list[tuple[float, list[float]]]  # (total, per-needle) per step
    metrics: dict


def tre_train(
    model: TreModel,
    config: InjectionConfig,
    data: list[BioeSample],
    epochs: int,
    lr: float,
    seed: int,
) -> TreTrainResult:
    """Train the stack with needles at the configured layers.

    The total loss per sample is the portion-weighted sum of the per-level
    needle losses; every model weight is updated, and the needles are kept
    out of checkpoints.
    """
    config.validate(len(model.layers))
    if not data:
        raise ValueError("no training samples")
    d = model.embeddings.dim
    rng = np.random.default_rng(seed)
    needles = [
        Needle(
            Tensor(rng.normal(0.0, 1.0 / math.sqrt(d), size=(d, len(TAGSET))), requires_grad=True),
            Tensor(np.zeros(len(TAGSET)), requires_grad=True),
        )
        for _ in range(_LEVELS)
    ]
    assignment = _needle_assignment(config)
    params = _tre_params(model) + [t for n in needles for t in (n.w, n.b)]
    trace = []
    step_losses: list[tuple[float, list[float]]] = []
    for _ in range(epochs):
        total_epoch = 0.0
        for si in rng.permutation(len(data)):
            sample = data[int(si)]
            states = tre_forward(model, sample.tokens)
            parts = []
            raw = []
            for level, (pos, portion) in enumerate(assignment):
                l = tre_needle_loss(
                    states[pos - 1], sample.tags[level], needles[level].w, needles[level].b
                )
                raw.append(float(l.data))
                parts.append(T.scale(l, portion))
            loss = parts[0]
            for p in parts[1:]:
                loss = T.add(loss, p)
            T.backward(loss)
            for p in params:
                if p.grad is not None:
                    p.data -= lr * p.grad
                    p.zero_grad()
            step_losses.append((float(loss.data), raw))
            total_epoch += float(loss.data)
        trace.append(total_epoch / len(data))
    metrics = tre_evaluate(model, needles, config, data)
    return TreTrainResult(model, needles, trace, step_losses, metrics)


def _predict_tags(model: TreModel, needles: list[Needle], config: InjectionConfig, tokens):
    states = tre_forward(model, tokens)
    assignment = _needle_assignment(config)
    out = []
    for level, (pos, _) in enumerate(assignment):
        logits = states[pos - 1].data @ needles[level].w.data + needles[level].b.data
        out.append([TAGSET[i] for i in logits.argmax(axis=1)])
    return out


def spans_from_tags(tags: list[str]) -> set[tuple[str, int, int]]:
    """(type, start, end) segments; a B-x opens and the next E-x closes."""
    spans = set()
    open_at: dict[str, int] = {}
    for i, tag in enumerate(tags):
        if tag == "O":
            continue
        kind, typ = tag.split("-")
        if kind == "B":
            open_at[typ] = i
        elif kind == "E" and typ in open_at:
            spans.add((typ, open_at.pop(typ), i))
    return spans


def tre_evaluate(
    model: TreModel, needles: list[Needle], config: InjectionConfig, data: list[BioeSample]
) -> dict:
    """Segment-level P/R/F1 per level plus overall token accuracy."""
    per_level = [{"match": 0, "pred": 0, "gold": 0} for _ in range(_LEVELS)]
    correct = 0
    total = 0
    for sample in data:
        preds = _predict_tags(model, needles, config, sample.tokens)
        for level in range(_LEVELS):
            gold_spans = spans_from_tags(sample.tags[level])
            pred_spans = spans_from_tags(preds[level])
            per_level[level]["match"] += len(gold_spans & pred_spans)
            per_level[level]["pred"] += len(pred_spans)
            per_level[level]["gold"] += len(gold_spans)
            correct += sum(p == g for p, g in zip(preds[level], sample.tags[level]))
            total += len(sample.tokens)
    levels = []
    for stats in per_level:
        p = stats["match"] / stats["pred"] if stats["pred"] else 0.0
        r = stats["match"] / stats["gold"] if stats["gold"] else 0.0
        f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
        levels.append({"precision": p, "recall": r, "f1": f1})
    return {"levels": levels, "token_accuracy": correct / total if total else 0.0}


def attention_weights_report(model: TreModel, tokens: list[str]) -> list[list[np.ndarray]]:
    """Row-stochastic attention matrices per layer per head for one input."""
    x = model.embeddings.embed(tokens)
    m = x.data.shape[0]
    x = T.add(x, T.gather_rows(model.positions, range(m)))
    report = []
    for layer in model.layers:
        report.append(self_attention_weights(x, layer))
        x = self_attention(x, layer)
    return report


# ---------------------------------------------------------------------------
# checkpoints


def _layer_tensors(layers: list[SelfAttentionLayer]) -> list[Tensor]:
    out = []
    for l in layers:
        out += [l.w_q, l.w_k, l.w_v, l.w_o]
    return out


def save_layer_stack(layers: list[SelfAttentionLayer], path) -> None:
    if not layers:
        raise ValueError("empty layer stack")
    meta = {"n_layers": len(layers), "n_heads": layers[0].n_heads, "d": layers[0].d}
    write_bundle(path, "layer_stack", meta, _layer_tensors(layers))


def load_layer_stack(path) -> list[SelfAttentionLayer]:
    kind, meta, tensors = read_bundle(path)
    if kind != "layer_stack":
        raise ValueError(f"checkpoint holds a {kind}, not a layer stack")
    layers = []
    for i in range(meta["n_layers"]):
        wq, wk, wv, wo = tensors[4 * i : 4 * i + 4]
        for t in (wq, wk, wv, wo):
            t.requires_grad = True
        layers.append(SelfAttentionLayer(wq, wk, wv, wo, meta["n_heads"], meta["d"]))
    return layers


def save_hydra_heads(heads: list[HydraHead], path) -> None:
    d, dh = heads[0].w_q.data.shape
    meta = {"n_heads": len(heads), "d": d, "d_head": dh}
    tensors = [t for h in heads for t in (h.w_q, h.w_k)]
    write_bundle(path, "hydra_heads", meta, tensors)


def load_hydra_heads(path) -> list[HydraHead]:
    kind, meta, tensors = read_bundle(path)
    if kind != "hydra_heads":
        raise ValueError(f"checkpoint holds a {kind}, not hydra heads")
    heads = []
    for i in range(meta["n_heads"]):
        wq, wk = tensors[2 * i : 2 * i + 2]
        wq.requires_grad = wk.requires_grad = True
        heads.append(HydraHead(wq, wk))
    return heads


def save_tre_model(model: TreModel, path) -> None:
    words = [w for w, _ in sorted(model.embeddings.vocab.items(), key=lambda kv: kv[1])]
    meta = {
        "vocab": words,
        "n_layers": len(model.layers),
        "n_heads": model.layers[0].n_heads,
        "max_len": model.positions.data.shape[0],
    }
    tensors = [model.embeddings.matrix, model.positions] + _layer_tensors(model.layers)
    write_bundle(path, "tre_model", meta, tensors)


def load_tre_model(path) -> TreModel:
    kind, meta, tensors = read_bundle(path)
    if kind != "tre_model":
        raise ValueError(f"checkpoint holds a {kind}, not an injection model")
    d = tensors[0].data.shape[1]
    model = build_tre_model(
        meta["vocab"], d, meta["n_layers"], meta["n_heads"], seed=0, max_len=meta["max_len"]
    )
    for dst, src in zip(_tre_params(model), tensors):
        dst.data[...] = src.data
    return model
