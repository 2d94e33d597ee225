"""Dense float64 tensors with tape-based reverse-mode gradients.

Every kernel the trainable models need lives here: matmul, stable softmax,
sparsemax (exact simplex projection), same-length 1-D convolution, average
pooling, the negative-sampling cross-entropy, element-wise matrix MSE and
a differentiable soft argmax.  All math is double precision and single
threaded, so repeated runs are bit-identical.
"""

from __future__ import annotations

import itertools
import struct
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "tensor",
    "add",
    "sub",
    "mul",
    "scale",
    "matmul",
    "matvec",
    "vecmat",
    "transpose",
    "dot",
    "tanh",
    "softplus",
    "tsum",
    "tmean",
    "stack",
    "stack_rows",
    "concat_cols",
    "slice_cols",
    "gather_rows",
    "softmax",
    "softmax_rows",
    "sparsemax",
    "sparsemax_values",
    "conv1d",
    "avg_pool",
    "ce_negsample",
    "mse_matrix",
    "softargmax",
    "dropout",
    "backward",
    "grad_check",
    "save_tensor",
    "load_tensor",
    "tensor_to_bytes",
    "tensor_from_bytes",
]

_ids = itertools.count()


class Tensor:
    """A node in the computation graph.

    ``data`` is a float64 ndarray.  Non-leaf tensors remember their parents
    and one vector-Jacobian-product closure per parent; creation order is the
    tape order, so walking nodes by descending id is a reverse topological
    sweep.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjps", "_id", "op")

    def __init__(self, data, requires_grad=False, parents=(), vjps=(), op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        self.grad = None
        self._parents = tuple(parents)
        self._vjps = tuple(vjps)
        self._id = next(_ids)
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape})"

    # convenience operators for scalar-node arithmetic in tests
    def __add__(self, other):
        return add(self, other if isinstance(other, Tensor) else tensor(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __sub__(self, other):
        return sub(self, other if isinstance(other, Tensor) else tensor(other))


def tensor(data, requires_grad=False) -> Tensor:
    """Create a leaf tensor; rejects non-finite values."""
    t = Tensor(data, requires_grad=requires_grad)
    if not np.all(np.isfinite(t.data)):
        raise ValueError("tensor values must be finite")
    return t


def _out(data, parents, vjps, op):
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data, parents=(), vjps=(), op=op)
    return Tensor(data, parents=parents, vjps=vjps, op=op)


# ---------------------------------------------------------------------------
# elementwise and linear algebra


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also supports adding a vector bias to matrix rows."""
    if a.data.shape == b.data.shape:
        return _out(a.data + b.data, (a, b), (lambda g: g, lambda g: g), "add")
    if a.data.ndim == 2 and b.data.ndim == 1 and a.data.shape[1] == b.data.shape[0]:
        return _out(a.data + b.data, (a, b), (lambda g: g, lambda g: g.sum(axis=0)), "add")
    raise ValueError(f"add: incompatible shapes {a.data.shape} and {b.data.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"sub: incompatible shapes {a.data.shape} and {b.data.shape}")
    return _out(a.data - b.data, (a, b), (lambda g: g, lambda g: -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul: incompatible shapes {a.data.shape} and {b.data.shape}")
    return _out(a.data * b.data, (a, b), (lambda g: g * b.data, lambda g: g * a.data), "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _out(a.data * c, (a,), (lambda g: g * c,), "scale")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Standard [m,k] @ [k,n] product."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.data.shape} and {b.data.shape}")
    return _out(
        a.data @ b.data,
        (a, b),
        (lambda g: g @ b.data.T, lambda g: a.data.T @ g),
        "matmul",
    )


def matvec(a: Tensor, x: Tensor) -> Tensor:
    """[m,n] @ [n] -> [m]."""
    if a.data.ndim != 2 or x.data.ndim != 1 or a.data.shape[1] != x.data.shape[0]:
        raise ValueError(f"matvec: incompatible shapes {a.data.shape} and {x.data.shape}")
    return _out(
        a.data @ x.data,
        (a, x),
        (lambda g: np.outer(g, x.data), lambda g: a.data.T @ g),
        "matvec",
    )


def vecmat(w: Tensor, v: Tensor) -> Tensor:
    """[n] @ [n,d] -> [d]; the weighted sum of the rows of v."""
    if w.data.ndim != 1 or v.data.ndim != 2 or w.data.shape[0] != v.data.shape[0]:
        raise ValueError(f"vecmat: incompatible shapes {w.data.shape} and {v.data.shape}")
    return _out(
        w.data @ v.data,
        (w, v),
        (lambda g: v.data @ g, lambda g: np.outer(w.data, g)),
        "vecmat",
    )


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ValueError("transpose expects a matrix")
    return _out(a.data.T.copy(), (a,), (lambda g: g.T,), "transpose")


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or b.data.ndim != 1 or a.data.shape != b.data.shape:
        raise ValueError(f"dot: incompatible shapes {a.data.shape} and {b.data.shape}")
    return _out(
        np.dot(a.data, b.data),
        (a, b),
        (lambda g: g * b.data, lambda g: g * a.data),
        "dot",
    )


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _out(y, (a,), (lambda g: g * (1.0 - y * y),), "tanh")


def softplus(a: Tensor) -> Tensor:
    """ln(1 + e^x) computed without overflow; gradient is the sigmoid."""
    y = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))
    sig = 1.0 / (1.0 + np.exp(-a.data))
    return _out(y, (a,), (lambda g: g * sig,), "softplus")


def tsum(a: Tensor) -> Tensor:
    return _out(a.data.sum(), (a,), (lambda g: np.full_like(a.data, float(g)),), "sum")


def tmean(a: Tensor) -> Tensor:
    n = a.data.size
    return _out(a.data.mean(), (a,), (lambda g: np.full_like(a.data, float(g) / n),), "mean")


# ---------------------------------------------------------------------------
# shape plumbing


def stack(scalars: Sequence[Tensor]) -> Tensor:
    """Stack scalar tensors into a vector."""
    if not scalars:
        raise ValueError("stack needs at least one tensor")
    for s in scalars:
        if s.data.ndim != 0:
            raise ValueError("stack expects scalar tensors")
    data = np.array([s.data for s in scalars])
    vjps = tuple((lambda g, i=i: g[i]) for i in range(len(scalars)))
    return _out(data, tuple(scalars), vjps, "stack")


def stack_rows(vecs: Sequence[Tensor]) -> Tensor:
    """Stack equal-length vectors into a matrix, one per row."""
    if not vecs:
        raise ValueError("stack_rows needs at least one vector")
    d = vecs[0].data.shape
    for v in vecs:
        if v.data.ndim != 1 or v.data.shape != d:
            raise ValueError("stack_rows expects equal-length vectors")
    data = np.stack([v.data for v in vecs])
    vjps = tuple((lambda g, i=i: g[i]) for i in range(len(vecs)))
    return _out(data, tuple(vecs), vjps, "stack_rows")


def concat_cols(mats: Sequence[Tensor]) -> Tensor:
    """Concatenate matrices along columns."""
    if not mats:
        raise ValueError("concat_cols needs at least one matrix")
    data = np.concatenate([m.data for m in mats], axis=1)
    offs = np.cumsum([0] + [m.data.shape[1] for m in mats])
    vjps = tuple(
        (lambda g, s=offs[i], e=offs[i + 1]: g[:, s:e]) for i in range(len(mats))
    )
    return _out(data, tuple(mats), vjps, "concat_cols")


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 2:
        raise ValueError("slice_cols expects a matrix")

    def vjp(g):
        out = np.zeros_like(a.data)
        out[:, start:stop] = g
        return out

    return _out(a.data[:, start:stop].copy(), (a,), (vjp,), "slice_cols")


def gather_rows(table: Tensor, indices: Sequence[int]) -> Tensor:
    """Select rows of a matrix; the gradient scatter-adds back."""
    idx = np.asarray(list(indices), dtype=np.intp)
    if table.data.ndim != 2:
        raise ValueError("gather_rows expects a matrix")

    def vjp(g):
        out = np.zeros_like(table.data)
        np.add.at(out, idx, g)
        return out

    return _out(table.data[idx], (table,), (vjp,), "gather_rows")


# ---------------------------------------------------------------------------
# nonlinear kernels


def _softmax1d(x: np.ndarray) -> np.ndarray:
    z = x - x.max()
    e = np.exp(z)
    return e / e.sum()


def softmax(a: Tensor) -> Tensor:
    """Stable softmax of a vector (max subtracted before exponentiation)."""
    if a.data.ndim != 1:
        raise ValueError("softmax expects a vector")
    s = _softmax1d(a.data)
    return _out(s, (a,), (lambda g: s * (g - np.dot(g, s)),), "softmax")


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise stable softmax of a matrix."""
    if a.data.ndim != 2:
        raise ValueError("softmax_rows expects a matrix")
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)
    return _out(
        s,
        (a,),
        (lambda g: s * (g - (g * s).sum(axis=1, keepdims=True)),),
        "softmax_rows",
    )


def sparsemax_values(x: np.ndarray) -> np.ndarray:
    """Euclidean projection of x onto the probability simplex (sort + threshold).

    Support size k is the largest k with 1 + k*z_(k) > sum_{j<=k} z_(j);
    tau = (sum_{j<=k} z_(j) - 1) / k.  The max of x is subtracted first, which
    makes the computation invariant to a constant shift of the input.
    """
    z = np.asarray(x, dtype=np.float64)
    z = z - z.max()
    srt = np.sort(z)[::-1]
    cums = np.cumsum(srt)
    ks = np.arange(1, z.size + 1)
    support = ks[1.0 + ks * srt > cums]
    k = int(support[-1])
    tau = (cums[k - 1] - 1.0) / k
    return np.maximum(z - tau, 0.0)


def sparsemax(a: Tensor) -> Tensor:
    """Sparsemax of a vector; subgradient averages over the support at ties."""
    if a.data.ndim != 1:
        raise ValueError("sparsemax expects a vector")
    p = sparsemax_values(a.data)
    supp = p > 0.0

    def vjp(g):
        k = supp.sum()
        out = np.zeros_like(p)
        out[supp] = g[supp] - g[supp].sum() / k
        return out

    return _out(p, (a,), (vjp,), "sparsemax")


def conv1d(x: Tensor, filters: Tensor) -> Tensor:
    """Same-length 1-D convolution over the rows of x.

    x is [M, d], filters is [w, d, F] with odd width w; the input is
    zero-padded by (w-1)/2 rows on each side and no bias is applied.
    """
    if x.data.ndim != 2 or filters.data.ndim != 3:
        raise ValueError("conv1d expects x [M,d] and filters [w,d,F]")
    w, d, nf = filters.data.shape
    if w % 2 == 0:
        raise ValueError("conv1d filter width must be odd")
    if x.data.shape[1] != d:
        raise ValueError(f"conv1d: input depth {x.data.shape[1]} != filter depth {d}")
    m = x.data.shape[0]
    pad = (w - 1) // 2
    xp = np.zeros((m + w - 1, d))
    xp[pad : pad + m] = x.data
    out = np.zeros((m, nf))
    for j in range(w):
        out += xp[j : j + m] @ filters.data[j]

    def vjp_x(g):
        gp = np.zeros_like(xp)
        for j in range(w):
            gp[j : j + m] += g @ filters.data[j].T
        return gp[pad : pad + m]

    def vjp_f(g):
        gf = np.zeros_like(filters.data)
        for j in range(w):
            gf[j] = xp[j : j + m].T @ g
        return gf

    return _out(out, (x, filters), (vjp_x, vjp_f), "conv1d")


def avg_pool(z: Tensor) -> Tensor:
    """Column mean of an [M, d] matrix -> [d]."""
    if z.data.ndim != 2 or z.data.shape[0] < 1:
        raise ValueError("avg_pool expects a non-empty matrix")
    m = z.data.shape[0]
    return _out(
        z.data.mean(axis=0),
        (z,),
        (lambda g: np.tile(g / m, (m, 1)),),
        "avg_pool",
    )


def ce_negsample(y_pos: Tensor, y_negs: Tensor | Sequence[Tensor]) -> Tensor:
    """Negative-sampling cross entropy.

    p = exp(y+) / (exp(y+) + sum_j exp(y-_j)) computed with max subtraction;
    the loss is -ln p.  With no negatives p = 1 and the loss (and all
    gradients) are exactly zero.
    """
    if not isinstance(y_negs, Tensor):
        y_negs = stack(list(y_negs)) if len(y_negs) > 0 else tensor(np.zeros(0))
    if y_pos.data.ndim != 0:
        raise ValueError("ce_negsample expects a scalar positive score")
    if y_negs.data.ndim != 1:
        raise ValueError("ce_negsample expects a vector of negative scores")
    scores = np.concatenate(([float(y_pos.data)], y_negs.data))
    m = scores.max()
    e = np.exp(scores - m)
    p = e / e.sum()
    loss = m + np.log(e.sum()) - float(y_pos.data)

    def vjp_pos(g):
        return np.asarray(float(g) * (p[0] - 1.0))

    def vjp_negs(g):
        return float(g) * p[1:]

    return _out(loss, (y_pos, y_negs), (vjp_pos, vjp_negs), "ce_negsample")


def mse_matrix(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared elementwise difference of two equal-shape matrices."""
    if pred.data.shape != target.data.shape:
        raise ValueError(
            f"mse_matrix: shape mismatch {pred.data.shape} vs {target.data.shape}"
        )
    diff = pred.data - target.data
    n = diff.size
    return _out(
        (diff * diff).mean(),
        (pred, target),
        (lambda g: float(g) * 2.0 * diff / n, lambda g: -float(g) * 2.0 * diff / n),
        "mse_matrix",
    )


def softargmax(x: Tensor, beta: float = 1.0) -> Tensor:
    """Differentiable argmax: sum_i softmax(beta*x)_i * i with 0-based i."""
    if beta < 1.0:
        raise ValueError("softargmax requires beta >= 1")
    if x.data.ndim != 1:
        raise ValueError("softargmax expects a vector")
    s = _softmax1d(beta * x.data)
    idx = np.arange(x.data.size, dtype=np.float64)
    out = float(np.dot(s, idx))
    return _out(
        np.asarray(out),
        (x,),
        (lambda g: float(g) * beta * s * (idx - out),),
        "softargmax",
    )


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; rate 0 is the identity."""
    if rate <= 0.0:
        return x
    if rate >= 1.0:
        raise ValueError("dropout rate must be < 1")
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return _out(x.data * mask, (x,), (lambda g: g * mask,), "dropout")


# ---------------------------------------------------------------------------
# reverse pass and the finite-difference oracle


def backward(loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into every requires_grad tensor.

    Nodes are visited in reverse creation order, which is a reverse
    topological order of the tape by construction.
    """
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ValueError("backward expects a scalar loss")
    nodes = {}
    stack_ = [loss]
    while stack_:
        node = stack_.pop()
        if node._id in nodes or not node.requires_grad:
            continue
        nodes[node._id] = node
        stack_.extend(node._parents)
    grads: dict[int, np.ndarray] = {loss._id: np.ones_like(loss.data)}
    for nid in sorted(nodes, reverse=True):
        node = nodes[nid]
        g = grads.pop(nid, None)
        if g is None:
            continue
        if node.grad is None:
            node.grad = np.zeros_like(node.data)
        node.grad = node.grad + g
        for parent, vjp in zip(node._parents, node._vjps):
            if not parent.requires_grad:
                continue
            contrib = vjp(g)
            if parent._id in grads:
                grads[parent._id] = grads[parent._id] + contrib
            else:
                grads[parent._id] = np.asarray(contrib, dtype=np.float64)


def grad_check(
    f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5
) -> float:
    """Max relative error between backward() and central differences at x.

    rel err per coordinate is |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
    """
    leaf = Tensor(x.data.copy(), requires_grad=True)
    out = f(leaf)
    backward(out)
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
    flat = leaf.data.reshape(-1)
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = float(f(Tensor(leaf.data.copy())).data)
        flat[i] = orig - eps
        lo = float(f(Tensor(leaf.data.copy())).data)
        flat[i] = orig
        numeric[i] = (hi - lo) / (2.0 * eps)
    ga = analytic.reshape(-1)
    denom = np.maximum(1e-8, np.abs(ga) + np.abs(numeric))
    return float(np.max(np.abs(ga - numeric) / denom))


# ---------------------------------------------------------------------------
# serialization: b"SLTN1", ndim and dims as little-endian u64, then doubles

_MAGIC = b"SLTN1"


def tensor_to_bytes(t: Tensor) -> bytes:
    dims = t.data.shape
    head = _MAGIC + struct.pack("<Q", len(dims)) + b"".join(
        struct.pack("<Q", d) for d in dims
    )
    return head + t.data.astype("<f8").tobytes()


def tensor_from_bytes(buf: bytes) -> Tensor:
    if buf[:5] != _MAGIC:
        raise ValueError("bad tensor magic")
    ndim = struct.unpack("<Q", buf[5:13])[0]
    dims = struct.unpack(f"<{ndim}Q", buf[13 : 13 + 8 * ndim])
    vals = np.frombuffer(buf[13 + 8 * ndim :], dtype="<f8", count=int(np.prod(dims)) if dims else 1)
    if ndim == 0:
        return Tensor(vals[0])
    return Tensor(vals.reshape(dims).copy())


def save_tensor(t: Tensor, path) -> None:
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(t))


def load_tensor(path) -> Tensor:
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())
