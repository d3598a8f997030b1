"""Training losses and their epoch/layer weight schedules.

Layer indices follow the network's 1-based convention: body layers are
1..L-1, extra heads sit on layers 2..L-1 and the compression head is layer L.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import ClassVar, Optional, Sequence

import numpy as np

from . import autograd as ag
from .datasets import NeighborGraph
from .errors import ShapeMismatch

PAPER_EPOCHS = 10000


@dataclass
class ScheduleConfig:
    """Loss-weight magnitudes and ramp breakpoints (fractions of the run)."""

    alpha0: float = 1.0
    beta_min: float = 0.01
    beta_max: float = 0.1
    gamma0: float = 1.0
    mu_max: float = 1.0
    mu_min: float = 0.1
    mu_embed: Optional[float] = None  # push weight on the embedding; None -> mu_min
    push_radius: Optional[float] = None  # None -> 3 x mean input k-NN distance
    alpha_start: float = 500 / PAPER_EPOCHS
    alpha_end: float = 2000 / PAPER_EPOCHS
    gamma_start: float = 2000 / PAPER_EPOCHS
    gamma_end: float = 8000 / PAPER_EPOCHS
    lis_norm: str = "l1"  # or "squared"
    push_mode: str = "prose"  # non-neighbours; "formula" sums over neighbours
    use_orth: bool = True
    use_pad: bool = True
    use_extra: bool = True
    power_iters: int = 5
    # divide neighbourhood terms by the pair count and pad by the row count,
    # so weights do not scale with n and k
    normalize: bool = True

    def __post_init__(self):
        if self.lis_norm not in ("l1", "squared"):
            raise ValueError(f"lis_norm must be 'l1' or 'squared', got {self.lis_norm!r}")
        if self.push_mode not in ("prose", "formula"):
            raise ValueError(f"push_mode must be 'prose' or 'formula', got {self.push_mode!r}")
        for name in ("alpha0", "beta_min", "beta_max", "gamma0", "mu_max", "mu_min"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.alpha_start <= self.alpha_end <= self.gamma_start <= self.gamma_end:
            raise ValueError("ramps must satisfy alpha_start <= alpha_end <= gamma_start <= gamma_end")

    def to_dict(self):
        return asdict(self)


def layer_dims(m: int, s_prime: int, L: int) -> dict:
    """Target dimension s_l of each extra-head layer l = 2..L-1.

    Decays geometrically from m towards s'; the last body layer gets s'.
    """
    if L < 3:
        raise ValueError("L must be >= 3")
    if not 1 <= s_prime <= m:
        raise ValueError("need 1 <= s' <= m")
    if L == 3:
        return {2: s_prime}
    ratio = s_prime / m
    return {l: int(round(m * ratio ** ((l - 1) / (L - 2)))) for l in range(2, L)}


def _ramp(x, x0, x1):
    if x <= x0:
        return 0.0
    if x >= x1 or x1 == x0:
        return 1.0
    return (x - x0) / (x1 - x0)


def _linear_in_layer(lo, hi, l, L):
    # l runs over 2..L-1
    if L == 3:
        return hi
    return lo + (hi - lo) * (l - 2) / (L - 3)


@dataclass
class ScheduleSet:
    """Snapshot of every loss weight at one epoch."""

    epoch: int
    epochs_total: int
    alpha: dict  # l = 1..L (L is the compression head)
    beta: dict  # l = 2..L-1
    gamma: dict  # l = 2..L-1
    mu: dict  # l = 2..L-1, plus L for the embedding
    s: dict  # l = 2..L-1
    push_radius: float


def eval_schedules(epoch: int, cfg: ScheduleConfig, m: int, s_prime: int, L: int,
                   epochs_total: int, push_radius: float) -> ScheduleSet:
    """Loss weights at ``epoch`` with breakpoints scaled to ``epochs_total``."""
    if epochs_total < 1:
        raise ValueError("epochs_total must be >= 1")
    if not 0 <= epoch <= epochs_total:
        raise ValueError(f"epoch {epoch} outside [0, {epochs_total}]")
    frac = epoch / epochs_total
    a = cfg.alpha0 * _ramp(frac, cfg.alpha_start, cfg.alpha_end) if cfg.use_orth else 0.0
    g = cfg.gamma0 * (1.0 - _ramp(frac, cfg.gamma_start, cfg.gamma_end)) if cfg.use_extra else 0.0
    inner = range(2, L)
    mu = {l: _linear_in_layer(cfg.mu_max, cfg.mu_min, l, L) for l in inner}
    mu[L] = cfg.mu_min if cfg.mu_embed is None else cfg.mu_embed
    return ScheduleSet(
        epoch=epoch,
        epochs_total=epochs_total,
        alpha={l: a for l in range(1, L + 1)},
        beta={l: (_linear_in_layer(cfg.beta_min, cfg.beta_max, l, L) if cfg.use_pad else 0.0)
              for l in inner},
        gamma={l: g for l in inner},
        mu=mu,
        s=layer_dims(m, s_prime, L),
        push_radius=float(push_radius),
    )


def default_push_radius(graph: NeighborGraph) -> float:
    return 3.0 * float(np.mean(graph.distances))


# --------------------------------------------------------------------------
# loss terms (all return 1x1 nodes)

def _zero():
    return ag.const(0.0)


def _gram_residual(w):
    """``W^T W - I`` for square/tall W, ``W W^T - I`` for wide W."""
    rows, cols = w.shape
    if rows < cols:
        return ag.matmul(w, ag.transpose(w)) - ag.const(np.eye(rows))
    return ag.matmul(ag.transpose(w), w) - ag.const(np.eye(cols))


def loss_orth(weights: Sequence, alphas: Sequence[float], n_iter: int = 5):
    """Weighted spectral norms of each weight's Gram residual."""
    if len(weights) != len(alphas):
        raise ShapeMismatch("one alpha per weight matrix")
    total = _zero()
    for w, a in zip(weights, alphas):
        if a == 0.0:
            continue
        w = ag._node(w)
        resid = _gram_residual(w)
        if not np.any(resid.value):
            continue  # exactly orthogonal: value 0, take 0 as subgradient
        total = total + a * ag.spectral_norm(resid, n_iter=n_iter)
    return total


def loss_pad(outputs: Sequence, betas: Sequence[float], dims: Sequence[int]):
    """L1 penalty on the coordinates past each layer's target dimension."""
    total = _zero()
    for z, b, s in zip(outputs, betas, dims):
        if b == 0.0:
            continue
        z = ag._node(z)
        if s >= z.shape[1]:
            continue
        total = total + b * ag.sum_(ag.abs_(ag.columns(z, s)))
    return total


def _rows_filter(i, j, rows):
    if rows is None:
        return i, j
    keep = np.isin(i, rows)
    return i[keep], j[keep]


def loss_lis(x, z, graph: NeighborGraph, norm: str = "l1", rows=None):
    """Sum over neighbour pairs of the input/latent distance discrepancy."""
    x = np.asarray(x.value if isinstance(x, ag.Node) else x, dtype=np.float64)
    z = ag._node(z)
    if x.shape[0] != z.shape[0]:
        raise ShapeMismatch("x and z need the same number of rows")
    i, j = _rows_filter(*graph.pairs(), rows)
    dx = ag.pair_distances(ag.const(x), i, j).value
    gap = ag.pair_distances(z, i, j) - ag.const(dx)
    if norm == "squared":
        return ag.sum_(ag.square(gap))
    return ag.sum_(ag.abs_(gap))


def push_mask(dz: np.ndarray, graph: NeighborGraph, radius: float, mode: str = "prose", rows=None):
    """Active pairs of the push-away term as a boolean n x n matrix."""
    n = dz.shape[0]
    adj = graph.adjacency
    if mode == "prose":
        active = ~adj
        np.fill_diagonal(active, False)
    else:
        active = adj.copy()
    active &= dz < radius
    if rows is not None:
        keep = np.zeros(n, dtype=bool)
        keep[rows] = True
        active &= keep[:, None]
    return active


def loss_push(z, graph: NeighborGraph, radius: float, mode: str = "prose", rows=None):
    """Repulsion ``-sum log(1 + d)`` over active pairs closer than ``radius``."""
    if radius <= 0:
        raise ValueError("push radius must be positive")
    z = ag._node(z)
    dist = ag.distance_matrix(ag.const(z.value)).value
    active = push_mask(dist, graph, radius, mode, rows)
    if not active.any():
        return _zero()
    return -ag.log1p_distance_sum(z, active, dist)


def loss_extra(head_outputs: dict, x, graph: NeighborGraph, sched: ScheduleSet,
               norm: str = "l1", push_mode: str = "prose", rows=None):
    """Weighted LIS + push on each extra head's output."""
    total = _zero()
    for l, out in head_outputs.items():
        g = sched.gamma.get(l, 0.0)
        out = ag._node(out)
        if out.shape[1] != sched.s[l]:
            raise ShapeMismatch(f"extra head {l}: {out.shape[1]} columns, expected s_l={sched.s[l]}")
        if g == 0.0:
            continue
        term = loss_lis(x, out, graph, norm, rows)
        mu = sched.mu.get(l, 0.0)
        if mu:
            term = term + mu * loss_push(out, graph, sched.push_radius, push_mode, rows)
        total = total + g * term
    return total


@dataclass
class LossBreakdown:
    """Weighted contributions; ``total`` is their sum."""

    orth: float = 0.0
    pad: float = 0.0
    lis: float = 0.0
    push: float = 0.0
    extra: float = 0.0
    total: float = 0.0
    fields: ClassVar[tuple] = ("orth", "pad", "lis", "push", "extra", "total")

    def as_row(self):
        return {k: getattr(self, k) for k in self.fields}
