"""Latent-space interpolation: k-NN pairs and geodesic piecewise paths."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .datasets import NeighborGraph, block_distances, knn_graph
from .errors import DisconnectedPair, NoValidWaypoints
from .metrics import _rank_rows
from .model import InvMLEncoder, body_inverses, forward, inverse_body

DEFAULT_T_STEPS = 13


@dataclass
class InterpolationResult:
    pair: tuple
    t_grid: np.ndarray
    latent_recons: np.ndarray  # len(t_grid) x m
    input_interps: np.ndarray  # len(t_grid) x m
    mse_per_t: np.ndarray


def _interpolate_pairs(enc, x, latent, pairs, t_grid, inverses):
    """Blend ``t z_i + (1 - t) z_j`` for every pair and map back in one pass."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    t = t_grid[None, :, None]
    zi, zj = latent[pairs[:, 0]][:, None, :], latent[pairs[:, 1]][:, None, :]
    xi, xj = x[pairs[:, 0]][:, None, :], x[pairs[:, 1]][:, None, :]
    blend = (t * zi + (1.0 - t) * zj).reshape(-1, enc.m)
    recon = inverse_body(enc, blend, inverses).reshape(len(pairs), len(t_grid), enc.m)
    direct = t * xi + (1.0 - t) * xj
    mse = np.mean((recon - direct) ** 2, axis=2)
    return [InterpolationResult((int(a), int(b)), t_grid.copy(), recon[p], direct[p], mse[p])
            for p, (a, b) in enumerate(pairs)]


def knn_interpolate(enc: InvMLEncoder, x, graph: NeighborGraph, k: int, pairs_per_sample: int = 1,
                    t_steps: int = DEFAULT_T_STEPS, seed: int = 0,
                    samples: Optional[Sequence[int]] = None) -> list:
    """Interpolate each sample with random partners among its first ``k`` neighbours."""
    if not 1 <= k <= graph.k:
        raise ValueError(f"k={k} outside [1, {graph.k}]")
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    samples = np.arange(graph.n) if samples is None else np.asarray(samples)
    pairs = []
    for i in samples:
        for j in rng.choice(graph.indices[i, :k], size=pairs_per_sample, replace=True):
            pairs.append((i, j))
    latent = forward(enc, x).latent
    t_grid = np.linspace(0.0, 1.0, t_steps)
    return _interpolate_pairs(enc, x, latent, pairs, t_grid, body_inverses(enc))


def interpolation_mse_curve(enc: InvMLEncoder, x, graph: NeighborGraph, k_range=range(1, 11),
                            seed: int = 0, n_samples: Optional[int] = None,
                            t_steps: int = DEFAULT_T_STEPS) -> np.ndarray:
    """Mean interpolation MSE for each neighbourhood size in ``k_range``."""
    rng = np.random.default_rng(seed)
    samples = None
    if n_samples is not None and n_samples < graph.n:
        samples = np.sort(rng.choice(graph.n, n_samples, replace=False))
    curve = []
    for k in k_range:
        res = knn_interpolate(enc, x, graph, k, 1, t_steps, seed + k, samples)
        curve.append(float(np.mean([r.mse_per_t.mean() for r in res])))
    return np.array(curve)


# --------------------------------------------------------------------------
# geodesic interpolation

def latent_shortest_path(z, k: int, i: int, j: int) -> list:
    """Dijkstra path between ``i`` and ``j`` on the symmetrised k-NN graph of ``z``."""
    g = knn_graph(z, k)
    rows = np.repeat(np.arange(g.n), g.k)
    w = csr_matrix((g.distances.ravel(), (rows, g.indices.ravel())), shape=(g.n, g.n))
    w = w.maximum(w.T)
    dist, pred = dijkstra(w, directed=False, indices=i, return_predecessors=True)
    if not np.isfinite(dist[j]):
        raise DisconnectedPair(f"samples {i} and {j} are not connected at k={k}")
    path = [j]
    while path[-1] != i:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def neighbour_rank(z, i: int, j: int) -> int:
    """Closeness rank of ``j`` among ``i``'s neighbours (1 = nearest)."""
    d = block_distances(z[i:i + 1], z)
    return int(_rank_rows(d, i)[0, j])


def _waypoints(z, path, segments, max_rank):
    # greedy: jump to the farthest path node still within max_rank
    hops = [0]
    while hops[-1] < len(path) - 1:
        cur = hops[-1]
        nxt = cur + 1
        for cand in range(len(path) - 1, cur, -1):
            if neighbour_rank(z, path[cur], path[cand]) <= max_rank:
                nxt = cand
                break
        if neighbour_rank(z, path[cur], path[nxt]) > max_rank:
            raise NoValidWaypoints(f"path step {path[cur]} -> {path[nxt]} exceeds rank {max_rank}")
        hops.append(nxt)
    if len(hops) - 1 > segments:
        raise NoValidWaypoints(
            f"path needs {len(hops) - 1} segments with rank <= {max_rank}, only {segments} allowed")
    # spread evenly when that keeps every hop within max_rank
    want = min(segments, len(path) - 1)
    even = [int(round(v)) for v in np.linspace(0, len(path) - 1, want + 1)]
    if all(neighbour_rank(z, path[a], path[b]) <= max_rank for a, b in zip(even, even[1:])):
        hops = even
    return [path[h] for h in hops]


@dataclass
class GeodesicResult:
    path: list
    waypoints: list
    segments: list  # InterpolationResult per consecutive waypoint pair

    @property
    def latent_recons(self) -> np.ndarray:
        return np.vstack([s.latent_recons if n == 0 else s.latent_recons[1:]
                          for n, s in enumerate(self.segments)])

    @property
    def input_interps(self) -> np.ndarray:
        return np.vstack([s.input_interps if n == 0 else s.input_interps[1:]
                          for n, s in enumerate(self.segments)])


def select_distant_pair(z, labels=None, min_rank: int = 45, seed: int = 0):
    """Random pair at mutual rank >= ``min_rank`` (different classes if labelled)."""
    rng = np.random.default_rng(seed)
    n = z.shape[0]
    for _ in range(10 * n):
        i, j = (int(v) for v in rng.choice(n, 2, replace=False))
        if labels is not None and labels[i] == labels[j]:
            continue
        if min(neighbour_rank(z, i, j), neighbour_rank(z, j, i)) >= min_rank:
            return i, j
    raise NoValidWaypoints("no pair satisfies the distance criterion")


def geodesic_interpolate(enc: InvMLEncoder, x, pair, segments: int = 4, k: int = 15,
                         t_steps: int = DEFAULT_T_STEPS, max_rank: int = 20,
                         min_rank: Optional[int] = None) -> GeodesicResult:
    """Piecewise-linear latent interpolation along a latent k-NN geodesic.

    ``t`` runs from the second endpoint of each segment to the first, as in
    :func:`knn_interpolate`; waypoints are ordered from ``pair[0]``.
    """
    x = np.asarray(x, dtype=np.float64)
    i, j = (int(v) for v in pair)
    latent = forward(enc, x).latent
    if min_rank is not None:
        if min(neighbour_rank(latent, i, j), neighbour_rank(latent, j, i)) < min_rank:
            raise NoValidWaypoints(f"pair ({i}, {j}) is closer than rank {min_rank}")
    path = latent_shortest_path(latent, k, i, j)
    way = _waypoints(latent, path, segments, max_rank)
    t_grid = np.linspace(0.0, 1.0, t_steps)
    # t=1 at the segment start so concatenated segments run from i to j
    seg_pairs = [(a, b) for a, b in zip(way, way[1:])]
    res = _interpolate_pairs(enc, x, latent, seg_pairs, t_grid[::-1].copy(), body_inverses(enc))
    return GeodesicResult(path, way, res)


# --------------------------------------------------------------------------
# output files

def write_curve_csv(path, k_values, curve) -> None:
    with open(path, "w") as fh:
        fh.write("k,mse\n")
        for k, v in zip(k_values, curve):
            fh.write(f"{k},{float(v)!r}\n")


def write_pairs_csv(path, results_by_k: dict) -> None:
    """Rows ``(i, j, k, t, mse)`` for every pair and grid point."""
    with open(path, "w") as fh:
        fh.write("i,j,k,t,mse\n")
        for k, results in results_by_k.items():
            for r in results:
                for t, e in zip(r.t_grid, r.mse_per_t):
                    fh.write(f"{r.pair[0]},{r.pair[1]},{k},{float(t)!r},{float(e)!r}\n")


def write_pgm_strip(path, frames: np.ndarray, image_shape) -> None:
    """Binary PGM (P5) with frames laid side by side; values clipped to [0, 1]."""
    h, w = image_shape
    tiles = np.clip(np.asarray(frames, dtype=np.float64), 0.0, 1.0).reshape(-1, h, w)
    strip = np.concatenate(list(tiles), axis=1)
    pixels = np.round(strip * 255.0).astype(np.uint8)
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + pixels.tobytes())
