"""Reverse-mode automatic differentiation over dense float64 matrices.

A Tape records eagerly evaluated operations in topological order; backward
sweeps the tape once in strict reverse order, accumulating vector-Jacobian
products. The op set is the minimum needed to differentiate the training
objectives with respect to both the classifier and the structure generator,
including the symmetric degree normalization of a generated adjacency.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ContractError, DimensionError


class Var:
    """Handle to one tape node: its value and gradient flag."""

    __slots__ = ("tape", "nid", "value", "requires_grad")

    def __init__(self, tape: "Tape", nid: int, value: np.ndarray, requires_grad: bool):
        self.tape = tape
        self.nid = nid
        self.value = value
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(nid={self.nid}, shape={self.value.shape}, grad={self.requires_grad})"


class _Node:
    __slots__ = ("inputs", "vjp", "requires_grad", "is_leaf", "shape")

    def __init__(self, inputs, vjp, requires_grad, is_leaf, shape):
        self.inputs = inputs
        self.vjp = vjp
        self.requires_grad = requires_grad
        self.is_leaf = is_leaf
        self.shape = shape


class Tape:
    """Append-only record of operations; node ids are topologically ordered."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def leaf(self, value, requires_grad: bool = False) -> Var:
        value = np.asarray(value, dtype=np.float64)
        nid = len(self.nodes)
        self.nodes.append(_Node((), None, requires_grad, True, value.shape))
        return Var(self, nid, value, requires_grad)

    def record(self, value: np.ndarray, inputs: Sequence[Var], vjp) -> Var:
        requires_grad = any(v.requires_grad for v in inputs)
        nid = len(self.nodes)
        self.nodes.append(
            _Node(
                tuple(v.nid for v in inputs),
                vjp if requires_grad else None,
                requires_grad,
                False,
                value.shape,
            )
        )
        return Var(self, nid, value, requires_grad)


def backward(loss: Var) -> dict[int, np.ndarray]:
    """Accumulate gradients of a scalar loss for all requires_grad leaves.

    Returns a map from leaf node id to its gradient; leaves not reachable
    from the loss get an exact zero matrix of their own shape.
    """
    if loss.value.shape != ():
        raise ContractError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    tape = loss.tape
    grads: dict[int, np.ndarray] = {loss.nid: np.array(1.0)}
    for nid in range(loss.nid, -1, -1):
        node = tape.nodes[nid]
        g = grads.get(nid)
        if g is None or node.vjp is None:
            continue
        input_grads = node.vjp(g)
        for inp_nid, inp_grad in zip(node.inputs, input_grads):
            if inp_grad is None or not tape.nodes[inp_nid].requires_grad:
                continue
            if inp_nid in grads:
                grads[inp_nid] = grads[inp_nid] + inp_grad
            else:
                grads[inp_nid] = inp_grad
    out: dict[int, np.ndarray] = {}
    for nid, node in enumerate(tape.nodes):
        if node.is_leaf and node.requires_grad:
            out[nid] = grads.get(nid, np.zeros(node.shape))
    return out


def _require_2d(v: Var, op: str):
    if v.value.ndim != 2:
        raise DimensionError(f"{op} expects a matrix, got shape {v.value.shape}")


def matmul(a: Var, b: Var) -> Var:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise DimensionError(f"matmul shapes {a.value.shape} x {b.value.shape}")
    av, bv = a.value, b.value
    out = av @ bv

    def vjp(g):
        return (g @ bv.T, av.T @ g)

    return a.tape.record(out, (a, b), vjp)


def sparse_dense_matmul(s, b: Var) -> Var:
    """Multiply a constant sparse matrix by a dense Var."""
    if not sp.issparse(s):
        raise DimensionError("sparse_dense_matmul needs a sparse left operand")
    if s.shape[1] != b.value.shape[0]:
        raise DimensionError(f"sparse_dense_matmul shapes {s.shape} x {b.value.shape}")
    s = s.tocsr()
    st = s.T.tocsr()
    out = np.asarray(s @ b.value)

    def vjp(g):
        return (np.asarray(st @ g),)

    return b.tape.record(out, (b,), vjp)


def add(a: Var, b: Var) -> Var:
    if a.value.shape != b.value.shape:
        raise DimensionError(f"add shapes {a.value.shape} vs {b.value.shape}")

    def vjp(g):
        return (g, g)

    return a.tape.record(a.value + b.value, (a, b), vjp)


def add_const(a: Var, c: np.ndarray) -> Var:
    """Add a constant matrix; gradient passes through unchanged."""
    c = np.asarray(c, dtype=np.float64)
    if a.value.shape != c.shape:
        raise DimensionError(f"add_const shapes {a.value.shape} vs {c.shape}")

    def vjp(g):
        return (g,)

    return a.tape.record(a.value + c, (a,), vjp)


def scale(a: Var, s: float) -> Var:
    s = float(s)

    def vjp(g):
        return (s * g,)

    return a.tape.record(s * a.value, (a,), vjp)


def relu(a: Var) -> Var:
    mask = a.value > 0

    def vjp(g):
        return (g * mask,)

    return a.tape.record(np.maximum(a.value, 0.0), (a,), vjp)


def transpose(a: Var) -> Var:
    _require_2d(a, "transpose")

    def vjp(g):
        return (np.ascontiguousarray(g.T),)

    return a.tape.record(np.ascontiguousarray(a.value.T), (a,), vjp)


def elementwise_mul(a: Var, b: Var) -> Var:
    if a.value.shape != b.value.shape:
        raise DimensionError(f"elementwise_mul shapes {a.value.shape} vs {b.value.shape}")
    av, bv = a.value, b.value

    def vjp(g):
        return (g * bv, g * av)

    return a.tape.record(av * bv, (a, b), vjp)


def row_softmax(a: Var) -> Var:
    """Softmax over each row, computed with max subtraction for stability."""
    _require_2d(a, "row_softmax")
    z = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return a.tape.record(p, (a,), vjp)


def masked_cross_entropy(logits: Var, labels: np.ndarray, mask: np.ndarray) -> Var:
    """Mean cross-entropy of row-softmax probabilities over masked nodes."""
    _require_2d(logits, "masked_cross_entropy")
    mask = np.asarray(mask, dtype=bool)
    m = int(mask.sum())
    if m == 0:
        raise ConfigError("masked_cross_entropy needs a non-empty mask")
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.value[mask]
    y = labels[mask]
    zs = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(zs).sum(axis=1))
    picked = zs[np.arange(m), y]
    loss = np.asarray((lse - picked).sum() / m)
    full_shape = logits.value.shape

    def vjp(g):
        p = np.exp(zs)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(m), y] -= 1.0
        out = np.zeros(full_shape)
        out[mask] = p * (float(g) / m)
        return (out,)

    return logits.tape.record(loss, (logits,), vjp)


def frobenius_sq(a: Var) -> Var:
    """Sum of squared entries (squared Frobenius norm), a scalar."""
    av = a.value

    def vjp(g):
        return (2.0 * float(g) * av,)

    return a.tape.record(np.asarray(np.sum(av * av)), (a,), vjp)


def gram(h: Var) -> Var:
    """H @ H^T similarity matrix (dot-product kernel)."""
    _require_2d(h, "gram")
    hv = h.value

    def vjp(g):
        return ((g + g.T) @ hv,)

    return h.tape.record(hv @ hv.T, (h,), vjp)


def cosine_gram(h: Var) -> Var:
    """Gram of rows pre-normalized to unit length; all-zero rows map to 0."""
    _require_2d(h, "cosine_gram")
    hv = h.value
    norms = np.sqrt(np.sum(hv * hv, axis=1))
    inv = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 0.0)
    u = hv * inv[:, None]
    out = u @ u.T

    def vjp(g):
        gu = (g + g.T) @ u
        proj = np.sum(gu * u, axis=1)
        return ((gu - u * proj[:, None]) * inv[:, None],)

    return h.tape.record(out, (h,), vjp)


def neg_sq_euclid_gram(h: Var) -> Var:
    """Bounded Euclidean similarity exp(-||h_i - h_j||^2)."""
    _require_2d(h, "neg_sq_euclid_gram")
    hv = h.value
    r = np.sum(hv * hv, axis=1)
    d = r[:, None] + r[None, :] - 2.0 * (hv @ hv.T)
    out = np.exp(-d)

    def vjp(g):
        w = -out * g
        s = w + w.T
        return (2.0 * (s.sum(axis=1)[:, None] * hv - s @ hv),)

    return h.tape.record(out, (h,), vjp)


def sym_normalize(a: Var) -> Var:
    """Differentiable D^{-1/2} (A + I) D^{-1/2} for a nonnegative square Var.

    Matches graphcore.normalize_adjacency on dense inputs bit for bit.
    """
    _require_2d(a, "sym_normalize")
    n = a.value.shape[0]
    if a.value.shape[1] != n:
        raise DimensionError(f"sym_normalize expects square input, got {a.value.shape}")
    b = a.value.copy()
    _diag = np.arange(n)
    b[_diag, _diag] += 1.0
    deg = b.sum(axis=1)
    s = 1.0 / np.sqrt(deg)
    out = b * s[:, None] * s[None, :]

    def vjp(g):
        gb = g * (s[:, None] * s[None, :])
        go = g * b
        t = go @ s + go.T @ s
        gd = -0.5 * deg ** (-1.5) * t
        return (gb + gd[:, None],)

    return a.tape.record(out, (a,), vjp)


def topk_mask(a: Var, k: int) -> Var:
    """Zero entries outside the k largest of their row or column.

    For a symmetric nonnegative input this equals keeping the top-k of each
    row and then symmetrizing by the elementwise maximum. Ties at the k-th
    value break toward the lower column index, deterministically.
    """
    _require_2d(a, "topk_mask")
    n = a.value.shape[0]
    kk = min(int(k), n)
    order = np.argsort(-a.value, axis=1, kind="stable")
    rowmask = np.zeros(a.value.shape, dtype=bool)
    rowmask[np.repeat(np.arange(n), kk), order[:, :kk].ravel()] = True
    keep = rowmask | rowmask.T

    def vjp(g):
        return (np.where(keep, g, 0.0),)

    return a.tape.record(np.where(keep, a.value, 0.0), (a,), vjp)


def grad_check(
    build: Callable[[Tape, list[Var]], Var],
    leaves: Sequence[np.ndarray],
    step: float = 1e-5,
) -> float:
    """Compare reverse-mode gradients against central finite differences.

    build(tape, vars) must return a scalar Var. Returns the maximum relative
    error over every entry of every leaf, with relative error
    |ad - fd| / max(1, |ad|, |fd|).
    """
    leaves = [np.asarray(x, dtype=np.float64) for x in leaves]
    tape = Tape()
    var_list = [tape.leaf(x, requires_grad=True) for x in leaves]
    out = build(tape, var_list)
    grads = backward(out)

    def eval_at(values: list[np.ndarray]) -> float:
        t = Tape()
        vs = [t.leaf(v) for v in values]
        return float(build(t, vs).value)

    max_rel = 0.0
    for li in range(len(leaves)):
        g = grads[var_list[li].nid]
        it = np.nditer(leaves[li], flags=["multi_index"], op_flags=["readonly"])
        while not it.finished:
            idx = it.multi_index
            plus = [x.copy() for x in leaves]
            minus = [x.copy() for x in leaves]
            plus[li][idx] += step
            minus[li][idx] -= step
            fd = (eval_at(plus) - eval_at(minus)) / (2.0 * step)
            ad = float(np.asarray(g)[idx])
            rel = abs(ad - fd) / max(1.0, abs(ad), abs(fd))
            max_rel = max(max_rel, rel)
            it.iternext()
    return max_rel
