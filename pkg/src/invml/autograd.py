"""Small reverse-mode differentiation engine over 2-D float arrays.

Only the operations needed by the training losses are provided. Shapes are
explicit: apart from multiplication by a Python scalar there is no
broadcasting, so a shape slip raises instead of silently expanding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CycleDetected, ShapeMismatch
from .linalg import POWER_SEED, spectral_norm as _power_iteration


@dataclass(frozen=True)
class ActivationSpec:
    kind: str = "leaky-relu"
    alpha: float = 0.1

    def __post_init__(self):
        if self.kind != "leaky-relu":
            raise ValueError(f"unsupported activation {self.kind!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


def leaky_relu_forward(z, alpha=0.1):
    z = np.asarray(z, dtype=np.float64)
    return np.where(z >= 0, z, alpha * z)


def leaky_relu_inverse(y, alpha=0.1):
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    y = np.asarray(y, dtype=np.float64)
    return np.where(y >= 0, y, y / alpha)


class Node:
    """A value in the computation graph.

    ``backward_fn`` maps the upstream gradient to one gradient per parent.
    """

    __slots__ = ("value", "grad", "parents", "backward_fn", "op", "requires_grad")

    def __init__(self, value, parents=(), backward_fn=None, op="leaf", requires_grad=True):
        v = np.asarray(value, dtype=np.float64)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        if v.ndim != 2:
            raise ShapeMismatch(f"nodes hold 2-D values, got shape {v.shape}")
        self.value = v
        self.grad = None
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.op = op
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise ShapeMismatch("item() needs a 1x1 node")
        return float(self.value[0, 0])

    def __repr__(self):
        return f"Node(op={self.op}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, c):
        if isinstance(c, Node):
            return mul(self, c)
        return scale(self, c)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def const(value) -> Node:
    return Node(value, requires_grad=False, op="const")


def _node(x) -> Node:
    return x if isinstance(x, Node) else const(x)


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a, b) -> Node:
    a, b = _node(a), _node(b)
    _same_shape(a, b, "add")
    return Node(a.value + b.value, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Node:
    a, b = _node(a), _node(b)
    _same_shape(a, b, "sub")
    return Node(a.value - b.value, (a, b), lambda g: (g, -g), "sub")


def mul(a, b) -> Node:
    a, b = _node(a), _node(b)
    _same_shape(a, b, "mul")
    av, bv = a.value, b.value
    return Node(av * bv, (a, b), lambda g: (g * bv, g * av), "mul")


def scale(a, c: float) -> Node:
    a = _node(a)
    c = float(c)
    return Node(c * a.value, (a,), lambda g: (c * g,), "scale")


def matmul(a, b) -> Node:
    a, b = _node(a), _node(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return Node(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g), "matmul")


def transpose(a) -> Node:
    a = _node(a)
    return Node(a.value.T.copy(), (a,), lambda g: (g.T,), "transpose")


def leaky_relu(a, alpha=0.1) -> Node:
    a = _node(a)
    slope = np.where(a.value >= 0, 1.0, alpha)
    return Node(a.value * slope, (a,), lambda g: (g * slope,), "leaky_relu")


def abs_(a) -> Node:
    a = _node(a)
    sgn = np.sign(a.value)  # sign(0) = 0 is the chosen subgradient
    return Node(np.abs(a.value), (a,), lambda g: (g * sgn,), "abs")


def square(a) -> Node:
    a = _node(a)
    av = a.value
    return Node(av * av, (a,), lambda g: (2.0 * av * g,), "square")


def log1p(a) -> Node:
    a = _node(a)
    av = a.value
    return Node(np.log1p(av), (a,), lambda g: (g / (1.0 + av),), "log1p")


def sum_(a) -> Node:
    a = _node(a)
    shape = a.shape
    return Node(np.sum(a.value), (a,), lambda g: (np.full(shape, g[0, 0]),), "sum")


def columns(a, start, stop=None) -> Node:
    """Column slice ``a[:, start:stop]``."""
    a = _node(a)
    shape = a.shape
    sl = slice(start, stop)

    def bw(g):
        out = np.zeros(shape)
        out[:, sl] = g
        return (out,)

    return Node(a.value[:, sl].copy(), (a,), bw, "columns")


def pair_distances(z, i_idx, j_idx) -> Node:
    """Euclidean distances ``||z_i - z_j||`` for paired row indices, as P x 1."""
    z = _node(z)
    i_idx = np.asarray(i_idx, dtype=np.intp)
    j_idx = np.asarray(j_idx, dtype=np.intp)
    if i_idx.shape != j_idx.shape or i_idx.ndim != 1:
        raise ShapeMismatch("pair index arrays must be 1-D and equal length")
    diff = z.value[i_idx] - z.value[j_idx]
    d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    shape = z.shape

    def bw(g):
        safe = np.where(d > 0, d, 1.0)
        coef = np.where(d > 0, g[:, 0] / safe, 0.0)
        contrib = diff * coef[:, None]
        out = np.zeros(shape)
        np.add.at(out, i_idx, contrib)
        np.add.at(out, j_idx, -contrib)
        return (out,)

    return Node(d[:, None], (z,), bw, "pair_distances")


def distance_matrix(z) -> Node:
    """All pairwise Euclidean distances between rows, n x n."""
    z = _node(z)
    zv = z.value
    sq = np.einsum("ij,ij->i", zv, zv)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (zv @ zv.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    d = np.sqrt(d2)

    def bw(g):
        coef = np.divide(g, d, out=np.zeros_like(d), where=d > 0)
        coef = coef + coef.T
        return (coef.sum(axis=1)[:, None] * zv - coef @ zv,)

    return Node(d, (z,), bw, "distance_matrix")


def log1p_distance_sum(z, mask, dist=None) -> Node:
    """``sum over mask of log(1 + ||z_i - z_j||)`` as a single fused node.

    ``dist`` may carry precomputed row distances of ``z`` to avoid a second
    pass; gradients treat ``mask`` as constant.
    """
    z = _node(z)
    zv = z.value
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (zv.shape[0], zv.shape[0]):
        raise ShapeMismatch(f"mask must be {zv.shape[0]} x {zv.shape[0]}")
    if dist is None:
        dist = distance_matrix(const(zv)).value
    active = mask & (dist > 0)
    value = float(np.sum(np.log1p(dist), where=active))

    def bw(g):
        # d/dz_i of log(1 + d_ij) = (z_i - z_j) / (d_ij (1 + d_ij)), both ends
        coef = np.zeros(dist.shape)
        np.divide(g[0, 0], dist * (1.0 + dist), out=coef, where=active)
        rows = coef.sum(axis=1) + coef.sum(axis=0)
        return (rows[:, None] * zv - coef @ zv - coef.T @ zv,)

    return Node(value, (z,), bw, "log1p_distance_sum")


def spectral_norm(a, n_iter=5, seed=POWER_SEED) -> Node:
    """Largest singular value; gradient ``u v^T`` with u, v held fixed."""
    a = _node(a)
    sigma, u, v = _power_iteration(a.value, n_iter=n_iter, seed=seed)
    outer = np.outer(u, v)
    return Node(sigma, (a,), lambda g: (g[0, 0] * outer,), "spectral_norm")


def _topological_order(root):
    order, state = [], {}
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        key = id(node)
        if done:
            state[key] = 2
            order.append(node)
            continue
        st = state.get(key)
        if st == 2:
            continue
        if st == 1:
            raise CycleDetected(f"cycle through {node!r}")
        state[key] = 1
        stack.append((node, True))
        for p in node.parents:
            ps = state.get(id(p))
            if ps == 1:
                raise CycleDetected(f"cycle through {p!r}")
            if ps is None and p.requires_grad:
                stack.append((p, False))
    return order


def backward(loss: Node) -> dict:
    """Populate ``.grad`` on every node reachable from ``loss``.

    Gradients are reset for the traversed graph before propagation, so a
    call always yields the gradient of this loss alone. Returns a mapping
    from each leaf node to its gradient.
    """
    if loss.shape != (1, 1):
        raise ShapeMismatch(f"backward needs a scalar loss, got {loss.shape}")
    order = _topological_order(loss)
    pending = {id(loss): np.ones((1, 1))}
    leaves = {}
    for node in reversed(order):
        g = pending.pop(id(node), None)
        node.grad = np.zeros_like(node.value) if g is None else g
        if not node.parents:
            if node.requires_grad:
                leaves[node] = node.grad
            continue
        if g is None or node.backward_fn is None:
            continue
        for p, pg in zip(node.parents, node.backward_fn(g)):
            if not p.requires_grad:
                continue
            if pg.shape != p.shape:
                raise ShapeMismatch(f"{node.op}: gradient {pg.shape} vs value {p.shape}")
            key = id(p)
            pending[key] = pg if key not in pending else pending[key] + pg
    return leaves
