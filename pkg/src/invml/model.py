"""The invertible encoder: equi-dimensional body, compression head, extra heads.

Samples are rows. Body layer l maps ``z -> leaky_relu(z @ W_l.T)`` and has
no bias, so it is undone exactly by ``z -> leaky_relu_inv(z) @ inv(W_l).T``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from . import autograd as ag
from .autograd import leaky_relu_forward, leaky_relu_inverse
from .errors import NoConvergence, RankDeficientHead, ShapeMismatch
from .linalg import mat_inverse, random_orthogonal
from .losses import (
    LossBreakdown,
    ScheduleConfig,
    ScheduleSet,
    layer_dims,
    loss_extra,
    loss_lis,
    loss_orth,
    loss_pad,
    loss_push,
)

COND_WARN = 1e12
COND_ERROR = 1e14


@dataclass
class InvMLEncoder:
    m: int
    s_prime: int
    L: int
    body: list  # L-1 arrays, m x m
    head: np.ndarray  # s' x m
    extra_heads: dict  # l -> s_l x m for l = 2..L-1
    alpha: float = 0.1

    def __post_init__(self):
        if self.L < 3:
            raise ValueError("L must be >= 3")
        if len(self.body) != self.L - 1:
            raise ShapeMismatch(f"expected {self.L - 1} body matrices, got {len(self.body)}")
        for w in self.body:
            if w.shape != (self.m, self.m):
                raise ShapeMismatch(f"body matrix shape {w.shape}, expected {(self.m, self.m)}")
        if self.head.shape != (self.s_prime, self.m):
            raise ShapeMismatch(f"head shape {self.head.shape}, expected {(self.s_prime, self.m)}")
        dims = self.s_dims
        for l, e in self.extra_heads.items():
            if e.shape != (dims[l], self.m):
                raise ShapeMismatch(f"extra head {l} shape {e.shape}, expected {(dims[l], self.m)}")

    @property
    def s_dims(self) -> dict:
        return layer_dims(self.m, self.s_prime, self.L)

    @classmethod
    def init(cls, m: int, s_prime: int, L: int = 8, seed: int = 0, alpha: float = 0.1,
             extra_heads: bool = True) -> "InvMLEncoder":
        """Random orthogonal body; head and extra heads are leading rows of
        random orthogonal matrices."""
        rng = np.random.default_rng(seed)
        body = [random_orthogonal(m, rng) for _ in range(L - 1)]
        head = random_orthogonal(m, rng)[:s_prime]
        extras = {}
        if extra_heads:
            extras = {l: random_orthogonal(m, rng)[:s] for l, s in layer_dims(m, s_prime, L).items()}
        return cls(m, s_prime, L, body, head, extras, alpha)

    @classmethod
    def identity(cls, m: int, s_prime: int, L: int = 8, alpha: float = 0.1) -> "InvMLEncoder":
        """Identity body with coordinate-selector heads."""
        eye = np.eye(m)
        extras = {l: eye[:s].copy() for l, s in layer_dims(m, s_prime, L).items()}
        return cls(m, s_prime, L, [eye.copy() for _ in range(L - 1)], eye[:s_prime].copy(), extras, alpha)

    def parameters(self) -> dict:
        """Named views of every trainable array, in checkpoint order."""
        params = {f"body.{i + 1}": w for i, w in enumerate(self.body)}
        params["head"] = self.head
        for l in sorted(self.extra_heads):
            params[f"extra.{l}"] = self.extra_heads[l]
        return params

    def set_parameters(self, params: dict) -> None:
        for i in range(len(self.body)):
            self.body[i] = params[f"body.{i + 1}"]
        self.head = params["head"]
        for l in list(self.extra_heads):
            self.extra_heads[l] = params[f"extra.{l}"]

    def copy(self) -> "InvMLEncoder":
        return InvMLEncoder(
            self.m, self.s_prime, self.L,
            [w.copy() for w in self.body], self.head.copy(),
            {l: e.copy() for l, e in self.extra_heads.items()}, self.alpha,
        )

    def without_extra_heads(self) -> "InvMLEncoder":
        enc = self.copy()
        enc.extra_heads = {}
        return enc


@dataclass
class ForwardTrace:
    activations: list  # [x, out_1, ..., out_{L-1}]
    embedding: np.ndarray
    head_outputs: dict = field(default_factory=dict)

    @property
    def latent(self) -> np.ndarray:
        """Output of the last body layer (full-dimensional representation)."""
        return self.activations[-1]


def _check_input(enc, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != enc.m:
        raise ShapeMismatch(f"input must be n x {enc.m}, got {x.shape}")
    return x


def forward(enc: InvMLEncoder, x) -> ForwardTrace:
    z = _check_input(enc, x)
    acts = [z]
    outs = {}
    for l, w in enumerate(enc.body, start=1):
        z = leaky_relu_forward(z @ w.T, enc.alpha)
        acts.append(z)
        if l in enc.extra_heads:
            outs[l] = z @ enc.extra_heads[l].T
    return ForwardTrace(acts, z @ enc.head.T, outs)


def _layer_inverse(w, cond_cap=COND_ERROR):
    inv, cond = mat_inverse(w, cond_cap=cond_cap, return_cond=True)
    if cond > COND_WARN:
        warnings.warn(f"body weight condition number {cond:.2e} exceeds {COND_WARN:.0e}",
                      RuntimeWarning, stacklevel=3)
    return inv


def body_inverses(enc: InvMLEncoder) -> list:
    return [_layer_inverse(w) for w in enc.body]


def inverse_body(enc: InvMLEncoder, z_last, inverses=None) -> np.ndarray:
    """Map the last body output back to input space."""
    return inverse_layers(enc, z_last, inverses)[0]


def inverse_layers(enc: InvMLEncoder, z_last, inverses=None) -> list:
    """Reconstruct every layer's input from the top: ``[x_hat, ..., z_last]``."""
    z = _check_input(enc, z_last)
    inverses = body_inverses(enc) if inverses is None else inverses
    recon = [z]
    for inv in reversed(inverses):
        z = leaky_relu_inverse(z, enc.alpha) @ inv.T
        recon.append(z)
    return recon[::-1]


def invert_head_least_squares(enc: InvMLEncoder, y) -> np.ndarray:
    """Minimum-norm ``z`` with ``z @ head.T = y``."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != enc.s_prime:
        raise ShapeMismatch(f"y must be n x {enc.s_prime}")
    # head.T = Q R, so head = R^T Q^T and z = (y R^{-1}) Q^T
    q, r = np.linalg.qr(enc.head.T)
    d = np.abs(np.diag(r))
    if d.min() <= 1e-12 * max(d.max(), 1e-300):
        raise RankDeficientHead("head rows are linearly dependent")
    coef = solve_triangular(r, y.T, trans="T", lower=False).T
    return coef @ q.T


def omp(dictionary: np.ndarray, y: np.ndarray, sparsity: int, tol: float = 1e-8) -> np.ndarray:
    """Orthogonal matching pursuit for ``dictionary @ c = y`` with at most
    ``sparsity`` nonzeros. ``tol`` bounds the residual relative to ``max(1, |y|)``."""
    n_atoms = dictionary.shape[1]
    norms = np.linalg.norm(dictionary, axis=0)
    norms[norms == 0] = np.inf
    c = np.zeros(n_atoms)
    bound = tol * max(1.0, float(np.linalg.norm(y)))
    resid = y.copy()
    support = []
    coef = np.zeros(0)
    while np.linalg.norm(resid) > bound and len(support) < sparsity:
        score = np.abs(dictionary.T @ resid) / norms
        score[support] = -1.0
        support.append(int(np.argmax(score)))
        sub = dictionary[:, support]
        coef = np.linalg.lstsq(sub, y, rcond=None)[0]
        resid = y - sub @ coef
    if np.linalg.norm(resid) > bound:
        raise NoConvergence(
            f"residual {np.linalg.norm(resid):.3e} above tolerance after {sparsity} atoms")
    c[support] = coef
    return c


# beyond this many candidate supports the exact search is skipped
SUPPORT_SEARCH_BUDGET = 50_000


def support_search(dictionary: np.ndarray, y: np.ndarray, sparsity: int, tol: float = 1e-8):
    """Exact l0 program: smallest support whose least-squares fit meets the
    residual bound, by enumeration. Returns None when none does."""
    n_atoms = dictionary.shape[1]
    bound = tol * max(1.0, float(np.linalg.norm(y)))
    if np.linalg.norm(y) <= bound:
        return np.zeros(n_atoms)
    for size in range(1, sparsity + 1):
        for support in itertools.combinations(range(n_atoms), size):
            sub = dictionary[:, support]
            coef = np.linalg.lstsq(sub, y, rcond=None)[0]
            if np.linalg.norm(y - sub @ coef) <= bound:
                c = np.zeros(n_atoms)
                c[list(support)] = coef
                return c
    return None


def _sparse_row(head, row, sparsity, tol):
    try:
        return omp(head, row, sparsity, tol)
    except NoConvergence:
        n_atoms = head.shape[1]
        if sum(math.comb(n_atoms, k) for k in range(1, sparsity + 1)) > SUPPORT_SEARCH_BUDGET:
            raise
    # greedy selection can pick a wrong atom first; fall back to the exact search
    found = support_search(head, row, sparsity, tol)
    if found is None:
        raise NoConvergence(f"no support of size <= {sparsity} fits within tolerance")
    return found


def invert_head_sparse(enc: InvMLEncoder, y, sparsity: int, tol: float = 1e-8) -> np.ndarray:
    """Recover ``sparsity``-sparse rows ``z`` with ``z @ head.T = y``.

    OMP first; rows it cannot fit go to an exhaustive support search when the
    number of candidate supports is within ``SUPPORT_SEARCH_BUDGET``.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != enc.s_prime:
        raise ShapeMismatch(f"y must be n x {enc.s_prime}")
    if not 1 <= sparsity <= enc.s_prime:
        raise ValueError(f"sparsity must lie in [1, s'={enc.s_prime}]")
    return np.vstack([_sparse_row(enc.head, row, sparsity, tol) for row in y])


# --------------------------------------------------------------------------
# training graph

def _body_graph(enc: InvMLEncoder, params: dict, x: np.ndarray):
    z = ag.const(x)
    outs = []
    for l in range(1, enc.L):
        z = ag.leaky_relu(ag.matmul(z, ag.transpose(params[f"body.{l}"])), enc.alpha)
        outs.append(z)
    return outs


def loss_terms(enc: InvMLEncoder, x, graph, sched: ScheduleSet, cfg: Optional[ScheduleConfig] = None,
               rows=None, params: Optional[dict] = None):
    """Weighted loss terms as separate graph nodes.

    Returns ``(terms, param_nodes)`` with ``terms`` keyed orth, pad, extra,
    lis and push. ``rows`` restricts neighbourhood terms to those anchor rows.
    """
    cfg = cfg or ScheduleConfig()
    x = _check_input(enc, x)
    if params is None:
        params = {name: ag.Node(v) for name, v in enc.parameters().items()}
    outs = _body_graph(enc, params, x)
    L = enc.L

    weights = [params[f"body.{l}"] for l in range(1, L)] + [params["head"]]
    alphas = [sched.alpha[l] for l in range(1, L)] + [sched.alpha[L]]
    orth = loss_orth(weights, alphas, n_iter=cfg.power_iters)

    n_rows = x.shape[0] if rows is None else len(rows)
    pair_scale = 1.0 / (n_rows * graph.k) if cfg.normalize else 1.0
    row_scale = 1.0 / n_rows if cfg.normalize else 1.0

    inner = list(range(2, L))
    pad = row_scale * loss_pad([outs[l - 1] for l in inner], [sched.beta[l] for l in inner],
                               [sched.s[l] for l in inner])

    head_outputs = {}
    for l in inner:
        if f"extra.{l}" in params and sched.gamma.get(l, 0.0) != 0.0:
            head_outputs[l] = ag.matmul(outs[l - 1], ag.transpose(params[f"extra.{l}"]))
    extra = pair_scale * loss_extra(head_outputs, x, graph, sched, cfg.lis_norm, cfg.push_mode, rows)

    y = ag.matmul(outs[-1], ag.transpose(params["head"]))
    lis = pair_scale * loss_lis(x, y, graph, cfg.lis_norm, rows)
    mu_l = sched.mu.get(L, 0.0)
    push = (pair_scale * mu_l) * loss_push(y, graph, sched.push_radius, cfg.push_mode, rows) if mu_l else ag.const(0.0)
    return {"orth": orth, "pad": pad, "extra": extra, "lis": lis, "push": push}, params


def total_loss(enc: InvMLEncoder, x, graph, sched: ScheduleSet, cfg: Optional[ScheduleConfig] = None,
               rows=None, params: Optional[dict] = None):
    """Build the scheduled training loss.

    Returns ``(breakdown, loss_node, param_nodes)``; ``param_nodes`` maps
    parameter names to the leaf nodes whose ``.grad`` is filled by backward.
    """
    terms, params = loss_terms(enc, x, graph, sched, cfg, rows, params)
    total = terms["orth"] + terms["pad"] + terms["extra"] + terms["lis"] + terms["push"]
    breakdown = LossBreakdown(**{k: v.item() for k, v in terms.items()}, total=total.item())
    return breakdown, total, params
