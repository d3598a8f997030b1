"""Adam training loop and binary checkpoints."""
from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import autograd as ag
from .datasets import Dataset, NeighborGraph, knn_graph
from .errors import (
    ChecksumMismatch,
    NonFiniteLoss,
    ShapeMismatch,
    VersionMismatch,
)
from .losses import ScheduleConfig, default_push_radius, eval_schedules
from .model import InvMLEncoder, total_loss

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"IMLE"
CHECKPOINT_VERSION = 1


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> dict:
    """One bias-corrected Adam update. Returns new parameter arrays; moments
    in ``state`` are updated in place."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    out = {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        p = np.asarray(p, dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m, v = np.zeros_like(p), np.zeros_like(p)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.first_moment[name], state.second_moment[name] = m, v
        out[name] = p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return out


@dataclass
class TrainConfig:
    epochs: int = 2000
    k: int = 15
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    batch_mode: str = "full"  # or "block"
    block_size: int = 256
    log_interval: int = 50
    grad_clip: float = 1e3
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)

    def __post_init__(self):
        if isinstance(self.schedule, dict):
            self.schedule = ScheduleConfig(**self.schedule)
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.batch_mode not in ("full", "block"):
            raise ValueError("batch_mode must be 'full' or 'block'")
        if self.log_interval < 1:
            raise ValueError("log_interval must be >= 1")

    def to_dict(self):
        return asdict(self)


HISTORY_FIELDS = ("epoch", "orth", "pad", "lis", "push", "extra", "total")


def _blocks(graph: NeighborGraph, block_size: int, rng: np.random.Generator):
    """Anchor groups with their full neighbourhoods: ``(members, anchor_rows)``."""
    order = rng.permutation(graph.n)
    for start in range(0, graph.n, block_size):
        anchors = np.sort(order[start:start + block_size])
        members = np.union1d(anchors, graph.indices[anchors].ravel())
        yield members, np.searchsorted(members, anchors)


def _subgraph(graph: NeighborGraph, members: np.ndarray) -> NeighborGraph:
    """Restrict a graph to ``members``. Neighbours outside the block are
    remapped to row 0, so only anchor rows are meaningful."""
    pos = np.full(graph.n, -1)
    pos[members] = np.arange(members.size)
    idx = pos[graph.indices[members]]
    idx[idx < 0] = 0
    return NeighborGraph(graph.k, idx, graph.distances[members])


def _global_clip(grads: dict, limit: float) -> dict:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if limit and total > limit:
        return {k: g * (limit / total) for k, g in grads.items()}
    return grads


def _check_finite(epoch, breakdown):
    for name in ("orth", "pad", "lis", "push", "extra", "total"):
        if not np.isfinite(getattr(breakdown, name)):
            raise NonFiniteLoss(epoch, name)


def train(enc: InvMLEncoder, data, config: TrainConfig, state: Optional[AdamState] = None,
          graph: Optional[NeighborGraph] = None, start_epoch: int = 0,
          callback: Optional[Callable] = None):
    """Optimise ``enc`` in place under the scheduled loss.

    Returns ``(enc, history, state)`` where ``history`` holds one dict per
    logged epoch with the weighted loss components.
    """
    x = data.x if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if x.shape[1] != enc.m:
        raise ShapeMismatch(f"dataset has {x.shape[1]} columns, encoder expects {enc.m}")
    cfg = config.schedule
    graph = graph if graph is not None else knn_graph(x, config.k)
    radius = cfg.push_radius if cfg.push_radius is not None else default_push_radius(graph)
    if state is None:
        state = AdamState(config.lr, config.beta1, config.beta2, config.eps)
    rng = np.random.default_rng(config.seed)
    history = []

    for epoch in range(start_epoch, config.epochs):
        sched = eval_schedules(epoch, cfg, enc.m, enc.s_prime, enc.L, config.epochs, radius)
        if config.batch_mode == "full":
            batches = [(None, x, graph, None)]
        else:
            batches = [(members, x[members], _subgraph(graph, members), anchors)
                       for members, anchors in _blocks(graph, config.block_size, rng)]
        logged = None
        for _, xb, gb, rows in batches:
            breakdown, loss, nodes = total_loss(enc, xb, gb, sched, cfg, rows=rows)
            _check_finite(epoch, breakdown)
            ag.backward(loss)
            grads = {name: (node.grad if node.grad is not None else np.zeros_like(node.value))
                     for name, node in nodes.items()}
            grads = _global_clip(grads, config.grad_clip)
            enc.set_parameters(adam_step(enc.parameters(), grads, state))
            logged = breakdown if logged is None else _accumulate(logged, breakdown)
        if epoch % config.log_interval == 0 or epoch == config.epochs - 1:
            row = {"epoch": epoch, **logged.as_row()}
            history.append(row)
            log.debug("epoch %d total %.6g", epoch, logged.total)
        if callback is not None:
            callback(epoch, enc, logged)
    return enc, history, state


def _accumulate(a, b):
    from .losses import LossBreakdown
    return LossBreakdown(**{k: getattr(a, k) + getattr(b, k) for k in LossBreakdown.fields})


def write_history_csv(path, history) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(HISTORY_FIELDS) + "\n")
        for row in history:
            fh.write(",".join([str(row["epoch"])] + [repr(float(row[k])) for k in HISTORY_FIELDS[1:]]) + "\n")


# --------------------------------------------------------------------------
# checkpoints

@dataclass
class Checkpoint:
    encoder: InvMLEncoder
    epoch: int = 0
    adam: Optional[AdamState] = None
    config: dict = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION


def _pack_matrix(buf: list, a: np.ndarray) -> None:
    buf.append(np.ascontiguousarray(a, dtype="<f8").tobytes())


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    """Little-endian layout: header (magic, version, m, s', L, s_l list),
    epoch, activation slope, Adam scalars, config JSON, matrices in
    parameter order, then Adam moments, then a CRC32 of everything before."""
    enc = ckpt.encoder
    dims = enc.s_dims
    extra_ls = sorted(enc.extra_heads)
    buf = [CHECKPOINT_MAGIC, struct.pack("<5I", ckpt.version, enc.m, enc.s_prime, enc.L, len(dims))]
    buf.append(struct.pack(f"<{len(dims)}I", *[dims[l] for l in sorted(dims)]))
    buf.append(struct.pack("<I", len(extra_ls)))
    buf.append(struct.pack(f"<{len(extra_ls)}I", *extra_ls))
    adam = ckpt.adam
    buf.append(struct.pack("<IdB", ckpt.epoch, enc.alpha, adam is not None))
    if adam is not None:
        buf.append(struct.pack("<Q4d", adam.t, adam.lr, adam.beta1, adam.beta2, adam.eps))
    cfg = json.dumps(ckpt.config, sort_keys=True).encode()
    buf.append(struct.pack("<I", len(cfg)))
    buf.append(cfg)
    params = enc.parameters()
    for a in params.values():
        _pack_matrix(buf, a)
    if adam is not None:
        for moments in (adam.first_moment, adam.second_moment):
            buf.append(struct.pack("<B", bool(moments)))
            if moments:
                for name, a in params.items():
                    _pack_matrix(buf, moments.get(name, np.zeros_like(a)))
    body = b"".join(buf)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw, self.pos = raw, 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.raw):
            raise ChecksumMismatch("checkpoint ends early")
        out = struct.unpack_from(fmt, self.raw, self.pos)
        self.pos += size
        return out

    def bytes(self, count):
        if self.pos + count > len(self.raw):
            raise ChecksumMismatch("checkpoint ends early")
        out = self.raw[self.pos:self.pos + count]
        self.pos += count
        return out

    def matrix(self, rows, cols):
        data = self.bytes(8 * rows * cols)
        return np.frombuffer(data, dtype="<f8").reshape(rows, cols).astype(np.float64)


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != CHECKPOINT_MAGIC:
        raise ChecksumMismatch("not a checkpoint file (bad magic or truncated)")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint version {version}, this build reads {CHECKPOINT_VERSION}")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumMismatch("CRC32 mismatch")
    r = _Reader(body)
    r.pos = 4
    version, m, s_prime, L, n_dims = r.take("<5I")
    s_list = list(r.take(f"<{n_dims}I"))
    (n_extra,) = r.take("<I")
    extra_ls = list(r.take(f"<{n_extra}I"))
    epoch, alpha, has_adam = r.take("<IdB")
    adam = None
    if has_adam:
        t, lr, b1, b2, eps = r.take("<Q4d")
        adam = AdamState(lr, b1, b2, eps, int(t))
    (cfg_len,) = r.take("<I")
    config = json.loads(r.bytes(cfg_len).decode()) if cfg_len else {}
    dims = dict(zip(range(2, L), s_list))
    shapes = {f"body.{i}": (m, m) for i in range(1, L)}
    shapes["head"] = (s_prime, m)
    for l in extra_ls:
        shapes[f"extra.{l}"] = (dims[l], m)
    params = {name: r.matrix(*shape) for name, shape in shapes.items()}
    if adam is not None:
        for target in (adam.first_moment, adam.second_moment):
            (present,) = r.take("<B")
            if present:
                target.update({name: r.matrix(*shape) for name, shape in shapes.items()})
    if r.pos != len(body):
        raise ChecksumMismatch("trailing bytes in checkpoint")
    enc = InvMLEncoder(
        m, s_prime, L,
        [params[f"body.{i}"] for i in range(1, L)],
        params["head"],
        {l: params[f"extra.{l}"] for l in extra_ls},
        alpha,
    )
    return Checkpoint(enc, epoch, adam, config, version)
