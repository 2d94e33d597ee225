import math

import numpy as np
import pytest

from statutelab import tensor as T
from statutelab.tensor import Tensor, grad_check
from statutelab.encoders import (
    PRESETS,
    attend,
    encode_paragraph,
    encode_sentence_avg,
    encode_sentence_cnn,
    init_attention_params,
    init_cnn_encoder,
    init_self_attention_layer,
    load_embeddings,
    random_embeddings,
    self_attention,
    self_attention_weights,
)


def dot_score(q, k):
    return T.dot(q, k)


def test_attend_single_pair_returns_value():
    q = Tensor([1.0, 0.0])
    out = attend(q, [Tensor([2.0, 2.0])], [Tensor([5.0, -3.0])], dot_score)
    assert np.allclose(out.data, [5.0, -3.0])


def test_attend_identical_keys_average_values():
    q = Tensor([0.3, -0.7])
    k = Tensor([1.0, 1.0])
    values = [Tensor([0.0, 0.0]), Tensor([2.0, 4.0])]
    out = attend(q, [k, k], values, dot_score)
    assert np.allclose(out.data, [1.0, 2.0])


def test_attend_dot_example():
    # scores [1, 2] over scalar values [0], [10]
    q = Tensor([1.0])
    keys = [Tensor([1.0]), Tensor([2.0])]
    values = [Tensor([0.0]), Tensor([10.0])]
    out = attend(q, keys, values, dot_score)
    expect = 10.0 / (1.0 + math.exp(-1.0))
    assert abs(float(out.data[0]) - expect) < 1e-9


def test_attend_length_mismatch():
    with pytest.raises(ValueError):
        attend(Tensor([1.0]), [Tensor([1.0])], [], dot_score)


def test_attend_output_in_convex_hull():
    rng = np.random.default_rng(0)
    q = Tensor(rng.normal(size=3))
    keys = [Tensor(rng.normal(size=3)) for _ in range(4)]
    values = [Tensor(rng.normal(size=2)) for _ in range(4)]
    out = attend(q, keys, values, dot_score).data
    vals = np.stack([v.data for v in values])
    assert (out >= vals.min(axis=0) - 1e-12).all()
    assert (out <= vals.max(axis=0) + 1e-12).all()


def _layer(d=4, heads=2, seed=0):
    return init_self_attention_layer(d, heads, np.random.default_rng(seed))


def test_self_attention_zero_value_path_is_identity():
    layer = _layer()
    layer.w_v.data[...] = 0.0
    layer.w_o.data[...] = 0.0
    x = Tensor(np.random.default_rng(1).normal(size=(3, 4)))
    out = self_attention(x, layer)
    assert np.array_equal(out.data, x.data)


def test_self_attention_single_row():
    layer = _layer()
    x = Tensor(np.random.default_rng(2).normal(size=(1, 4)))
    out = self_attention(x, layer)
    # one-row softmax weight is 1, so output = x W_v W_o + x
    expect = x.data @ layer.w_v.data @ layer.w_o.data + x.data
    assert np.allclose(out.data, expect, atol=1e-12)


def test_self_attention_permutation_equivariant():
    layer = _layer(d=6, heads=3, seed=4)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(5, 6))
    perm = rng.permutation(5)
    out = self_attention(Tensor(x), layer).data
    out_perm = self_attention(Tensor(x[perm]), layer).data
    assert np.allclose(out_perm, out[perm], atol=1e-12)


def test_self_attention_weights_row_stochastic():
    layer = _layer(d=4, heads=2, seed=6)
    x = Tensor(np.random.default_rng(7).normal(size=(4, 4)))
    for w in self_attention_weights(x, layer):
        assert w.shape == (4, 4)
        assert np.allclose(w.sum(axis=1), 1.0, atol=1e-12)


def _embeddings(words, d=4, seed=0, policy="zero_vector"):
    return random_embeddings(words, d, seed, scale=0.5, oov_policy=policy)


def test_embed_empty_sequence_rejected():
    emb = _embeddings(["a", "b"])
    with pytest.raises(ValueError, match="empty"):
        emb.embed([])


def test_embed_oov_policies():
    emb = _embeddings(["a", "b"], policy="skip")
    assert emb.embed(["a", "zzz", "b"]).data.shape == (2, 4)
    with pytest.raises(ValueError):
        emb.embed(["zzz"])
    emb = _embeddings(["a", "b"], policy="zero_vector")
    out = emb.embed(["a", "zzz"]).data
    assert np.array_equal(out[1], np.zeros(4))
    assert not np.array_equal(out[0], np.zeros(4))


def test_load_embeddings(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("law 0.1 0.2\ngift -1.0 0.5\n", encoding="utf-8")
    emb = load_embeddings(path)
    assert emb.dim == 2
    assert emb.vocab == {"law": 0, "gift": 1}
    assert np.allclose(emb.matrix.data[1], [-1.0, 0.5])
    path.write_text("law 0.1 0.2\ngift -1.0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="line 2"):
        load_embeddings(path)
    path.write_text("law 0.1\nlaw 0.2\n", encoding="utf-8")
    with pytest.raises(ValueError, match="duplicate"):
        load_embeddings(path)


def test_presets():
    assert PRESETS["paper"] == {"embed_dim": 512, "filters": 512, "attn_dim": 200, "dropout": 0.2}
    assert PRESETS["desk"] == {"embed_dim": 64, "filters": 64, "attn_dim": 32, "dropout": 0.0}


def _cnn(words=("a", "b", "c"), d=4, filters=5, attn=3, seed=0):
    rng = np.random.default_rng(seed)
    emb = _embeddings(list(words), d=d, seed=seed)
    return init_cnn_encoder(emb, filters, attn, rng, width=3)


def test_encode_sentence_cnn_single_token_attends_fully():
    enc = _cnn()
    out = encode_sentence_cnn(["a"], enc)
    feats = T.tanh(T.conv1d(enc.embeddings.embed(["a"]), enc.filters))
    assert np.allclose(out.data, feats.data[0], atol=1e-12)


def test_encode_sentence_cnn_zero_filters():
    enc = _cnn()
    enc.filters.data[...] = 0.0
    out = encode_sentence_cnn(["a", "b"], enc)
    assert np.array_equal(out.data, np.zeros(5))


def test_encode_sentence_cnn_all_oov_skip_policy():
    enc = _cnn()
    enc.embeddings.oov_policy = "skip"
    with pytest.raises(ValueError):
        encode_sentence_cnn(["zzz"], enc)


def test_encode_sentence_avg_single_token():
    words = ["a", "b"]
    emb = _embeddings(words)
    layer = _layer()
    pos = Tensor(np.random.default_rng(3).normal(size=(8, 4)))
    out = encode_sentence_avg(["b"], emb, [layer], pos)
    x = emb.matrix.data[1] + pos.data[0]
    expect = self_attention(Tensor(x[None, :]), layer).data[0]
    assert np.allclose(out.data, expect, atol=1e-12)


def test_encode_sentence_avg_residual_only_path():
    emb = _embeddings(["a", "b", "c"])
    layer = _layer()
    layer.w_v.data[...] = 0.0
    layer.w_o.data[...] = 0.0
    pos = Tensor(np.random.default_rng(4).normal(size=(8, 4)))
    out = encode_sentence_avg(["a", "c"], emb, [layer], pos)
    rows = np.stack([emb.matrix.data[0] + pos.data[0], emb.matrix.data[2] + pos.data[1]])
    assert np.allclose(out.data, rows.mean(axis=0), atol=1e-12)


def test_encode_sentence_avg_deterministic():
    emb = _embeddings(["a", "b", "c"])
    layers = [_layer(seed=8), _layer(seed=9)]
    a = encode_sentence_avg(["a", "b", "c"], emb, layers).data
    b = encode_sentence_avg(["a", "b", "c"], emb, layers).data
    assert np.array_equal(a, b)


def test_encode_paragraph_single_sentence():
    params = init_attention_params(3, 4, np.random.default_rng(0))
    q = Tensor(np.random.default_rng(1).normal(size=3))
    rep = Tensor(np.random.default_rng(2).normal(size=4))
    out, weights = encode_paragraph(q, [rep], params)
    assert weights == [1.0]
    assert np.allclose(out.data, rep.data)


def test_encode_paragraph_identical_sentences_uniform():
    params = init_attention_params(3, 4, np.random.default_rng(0))
    q = Tensor(np.random.default_rng(1).normal(size=3))
    rep = Tensor(np.random.default_rng(2).normal(size=4))
    out, weights = encode_paragraph(q, [rep, rep, rep], params)
    assert np.allclose(weights, [1 / 3] * 3, atol=1e-12)
    assert np.allclose(out.data, rep.data, atol=1e-12)


def test_encode_paragraph_sparsemax_selects_support():
    # scores depend only on the first coordinate: tanh(A r + b) = 0.5 * r[0]
    params = init_attention_params(1, 2, np.random.default_rng(0), weight_fn="sparsemax")
    params.A.data[...] = [[np.arctanh(0.5), 0.0]]
    params.b.data[...] = 0.0
    q = Tensor([2.0])
    reps = [Tensor([1.0, 0.0]), Tensor([0.0, 0.0]), Tensor([-1.0, 1e9])]
    out, weights = encode_paragraph(q, reps, params)
    # scores are [1, 0, -1], so sparsemax keeps only the first sentence and
    # the huge second coordinate of the zero-weight sentence never leaks in
    assert np.allclose(weights, [1.0, 0.0, 0.0], atol=1e-12)
    assert np.array_equal(out.data, [1.0, 0.0])


def test_encode_paragraph_weights_on_simplex():
    rng = np.random.default_rng(11)
    for weight_fn in ("softmax", "sparsemax"):
        params = init_attention_params(3, 4, rng, weight_fn=weight_fn)
        q = Tensor(rng.normal(size=3))
        reps = [Tensor(rng.normal(size=4)) for _ in range(5)]
        _, weights = encode_paragraph(q, reps, params)
        assert abs(sum(weights) - 1.0) < 1e-12
        assert min(weights) >= 0.0


def test_query_scaling_keeps_argmax_sentence():
    rng = np.random.default_rng(13)
    params = init_attention_params(3, 4, rng)
    q = rng.normal(size=3)
    reps = [Tensor(rng.normal(size=4)) for _ in range(4)]
    _, w1 = encode_paragraph(Tensor(q), reps, params)
    _, w2 = encode_paragraph(Tensor(3.5 * q), reps, params)
    assert int(np.argmax(w1)) == int(np.argmax(w2))


def test_encoder_gradients_match_finite_differences():
    rng = np.random.default_rng(17)
    enc = _cnn(seed=17)
    tokens = ["a", "b", "c"]
    probe = Tensor(rng.normal(size=5))

    def f(t):
        old = enc.filters
        enc.filters = t
        try:
            return T.dot(encode_sentence_cnn(tokens, enc), probe)
        finally:
            enc.filters = old

    assert grad_check(f, Tensor(enc.filters.data.copy())) < 1e-4

    emb = _embeddings(["a", "b", "c"], seed=18)
    layer = _layer(seed=18)
    probe2 = Tensor(rng.normal(size=4))

    def g(t):
        old = layer.w_q
        layer.w_q = t
        try:
            return T.dot(encode_sentence_avg(tokens, emb, [layer]), probe2)
        finally:
            layer.w_q = old

    assert grad_check(g, Tensor(layer.w_q.data.copy())) < 1e-4
