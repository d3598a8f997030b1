"""Synthetic generators, file loaders, splitting and k-NN graphs."""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    BadMagic,
    CountMismatch,
    KTooLarge,
    MissingLabels,
    ShapeMismatch,
    TruncatedFile,
)
from .linalg import as_matrix, random_orthogonal

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    x: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = "dataset"
    # continuous per-sample value used only for colouring plots
    color: Optional[np.ndarray] = field(default=None, repr=False)
    image_shape: Optional[tuple] = None

    def __post_init__(self):
        self.x = as_matrix(self.x, "x")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
            if self.labels.shape[0] != self.x.shape[0]:
                raise ShapeMismatch("labels length differs from sample count")
            if self.labels.size and self.labels.min() < 0:
                raise ValueError("labels must be non-negative class indices")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[1]

    @property
    def class_count(self) -> int:
        return 0 if self.labels is None else int(self.labels.max()) + 1

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.x[idx],
            None if self.labels is None else self.labels[idx],
            self.name,
            None if self.color is None else self.color[idx],
            self.image_shape,
        )


# --------------------------------------------------------------------------
# synthetic data

def gen_swiss_roll(n: int, seed: int = 0, noise: float = 0.0) -> Dataset:
    """Swiss roll ``(t cos t, y, t sin t)`` with t in [1.5pi, 4.5pi], y in [0, 21]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    t = 1.5 * np.pi * (1.0 + 2.0 * rng.random(n))
    y = 21.0 * rng.random(n)
    x = np.column_stack([t * np.cos(t), y, t * np.sin(t)])
    if noise:
        x += noise * rng.standard_normal(x.shape)
    return Dataset(x, None, "swissroll", color=t)


def _unit_sphere(rng, count, dim):
    p = rng.standard_normal((count, dim))
    return p / np.linalg.norm(p, axis=1, keepdims=True)


def gen_spheres(
    n: int,
    ambient_dim: int = 101,
    seed: int = 0,
    half: bool = False,
    intrinsic_dim: Optional[int] = None,
    n_spheres: int = 11,
) -> Dataset:
    """Ten unit spheres with Gaussian-shifted centres inside one radius-5 sphere.

    ``intrinsic_dim`` selects the sphere dimension d (points on S^d, which
    needs d + 1 <= ambient_dim); by default d = ambient_dim - 1. Spheres of
    lower dimension are placed in a random (seeded) orientation. With
    ``half`` every sample is reflected onto the hemisphere whose final
    coordinate is not below the centre's, in the sphere's own frame.
    Labels give the sphere index; the enclosing sphere is the last class.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if ambient_dim < 2:
        raise ValueError("ambient_dim must be >= 2")
    d = ambient_dim - 1 if intrinsic_dim is None else int(intrinsic_dim)
    if not 1 <= d <= ambient_dim - 1:
        raise ValueError("intrinsic_dim must be in [1, ambient_dim - 1]")
    rng = np.random.default_rng(seed)
    spread = 10.0 / np.sqrt(ambient_dim - 1)
    centers = rng.normal(0.0, spread, size=(n_spheres, ambient_dim))
    centers[-1] = 0.0
    radii = np.ones(n_spheres)
    radii[-1] = 5.0
    counts = [n // n_spheres + (1 if i < n % n_spheres else 0) for i in range(n_spheres)]

    blocks, labels = [], []
    for i, c in enumerate(counts):
        if c == 0:
            continue
        local = _unit_sphere(rng, c, d + 1)
        if half:
            local[:, -1] = np.abs(local[:, -1])
        if d + 1 < ambient_dim:
            frame = random_orthogonal(ambient_dim, rng)[: d + 1]
            local = local @ frame
        blocks.append(centers[i] + radii[i] * local)
        labels.append(np.full(c, i))
    name = ("halfspheres" if half else "spheres") + (f"_s{d}" if intrinsic_dim else "")
    return Dataset(np.vstack(blocks), np.concatenate(labels), name)


# --------------------------------------------------------------------------
# file formats

def _open_bytes(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def _parse_idx(raw: bytes, expected_magic: int) -> np.ndarray:
    if len(raw) < 4:
        raise TruncatedFile("file shorter than the IDX magic number")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise BadMagic(f"magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedFile("file shorter than its IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise TruncatedFile(f"header claims {size} bytes of data, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def _area_matrix(src: int, dst: int) -> np.ndarray:
    """Row-stochastic box-filter resampling matrix from ``src`` to ``dst`` pixels."""
    ratio = src / dst
    w = np.zeros((dst, src))
    for i in range(dst):
        lo, hi = i * ratio, (i + 1) * ratio
        for j in range(int(np.floor(lo)), min(src, int(np.ceil(hi)))):
            w[i, j] = min(hi, j + 1) - max(lo, j)
    return w / ratio


def downsample_images(images: np.ndarray, size: int = 16) -> np.ndarray:
    """Area-average a stack of square images ``(n, h, w)`` down to ``size x size``."""
    n, h, w = images.shape
    rows, cols = _area_matrix(h, size), _area_matrix(w, size)
    return np.einsum("ih,nhw,jw->nij", rows, images, cols)


def load_idx(images_path, labels_path=None, downsample: Optional[int] = None, name="idx") -> Dataset:
    images = _parse_idx(_open_bytes(images_path), IDX_IMAGES_MAGIC).astype(np.float64) / 255.0
    labels = None
    if labels_path is not None:
        labels = _parse_idx(_open_bytes(labels_path), IDX_LABELS_MAGIC).astype(np.int64)
        if labels.shape[0] != images.shape[0]:
            raise CountMismatch(f"{images.shape[0]} images but {labels.shape[0]} labels")
    if downsample:
        images = downsample_images(images, downsample)
    shape = images.shape[1:]
    return Dataset(images.reshape(images.shape[0], -1), labels, name, image_shape=tuple(shape))


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as IDX (images when 3-D, labels when 1-D)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    header = struct.pack(">I", magic) + struct.pack(f">{array.ndim}I", *array.shape)
    data = header + array.tobytes()
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "wb") as fh:
            fh.write(data)
    else:
        path.write_bytes(data)


def load_csv(path, label_column: bool = False, name: Optional[str] = None) -> Dataset:
    """One sample per row, optional trailing integer label, optional header."""
    rows = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if k == 0:
                    continue  # header line
                raise
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    labels = None
    if label_column:
        labels = data[:, -1].astype(np.int64)
        data = data[:, :-1]
    return Dataset(data, labels, name or Path(path).stem)


def train_test_split(ds: Dataset, test_fraction: float = 0.5, seed: int = 0):
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(ds.n)
    cut = ds.n - int(round(test_fraction * ds.n))
    return ds.subset(np.sort(perm[:cut])), ds.subset(np.sort(perm[cut:]))


# --------------------------------------------------------------------------
# neighbourhoods

def block_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows of ``a`` and rows of ``b``.

    Small problems use direct differences; large ones the Gram expansion.
    """
    if a.shape[0] * b.shape[0] * a.shape[1] <= 2e8:
        return cdist(a, b)
    sa = np.einsum("ij,ij->i", a, a)
    sb = np.einsum("ij,ij->i", b, b)
    d2 = sa[:, None] + sb[None, :] - 2.0 * (a @ b.T)
    return np.sqrt(np.maximum(d2, 0.0))


def pairwise_distances(x: np.ndarray) -> np.ndarray:
    x = as_matrix(x)
    d = block_distances(x, x)
    np.fill_diagonal(d, 0.0)
    return d


def _block_rows(n, budget=4e6):
    return max(1, int(budget // max(1, n)))


@dataclass(frozen=True)
class NeighborGraph:
    k: int
    indices: np.ndarray
    distances: np.ndarray

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    def pairs(self, k: Optional[int] = None):
        """Flattened ``(i, j)`` arrays over each row's first ``k`` neighbours."""
        k = self.k if k is None else k
        i = np.repeat(np.arange(self.n), k)
        return i, self.indices[:, :k].ravel()

    @cached_property
    def adjacency(self) -> np.ndarray:
        return self.mask()

    def mask(self, k: Optional[int] = None) -> np.ndarray:
        """Boolean n x n adjacency, ``mask[i, j]`` when j is among i's neighbours."""
        i, j = self.pairs(k)
        out = np.zeros((self.n, self.n), dtype=bool)
        out[i, j] = True
        return out


def knn_graph(x, k: int) -> NeighborGraph:
    """Exact k nearest neighbours; ties go to the lower index."""
    x = as_matrix(x, "x")
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n:
        raise KTooLarge(f"k={k} needs at least {k + 1} samples, have {n}")
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    step = min(n, _block_rows(n))
    for start in range(0, n, step):
        stop = min(n, start + step)
        d = block_distances(x[start:stop], x)
        rows = np.arange(stop - start)
        d[rows, rows + start] = np.inf
        kth = np.partition(d, k - 1, axis=1)[:, k - 1]
        for r in rows:
            cand = np.flatnonzero(d[r] <= kth[r])
            order = cand[np.lexsort((cand, d[r, cand]))][:k]
            idx[start + r] = order
            dist[start + r] = d[r, order]
    return NeighborGraph(k, idx, dist)


# --------------------------------------------------------------------------
# difficulty statistics

@dataclass(frozen=True)
class DatasetStats:
    entropy_mean: float
    hist_std_mean: float
    knn_acc: float
    logistic_acc: float


def histogram_entropy(counts: np.ndarray) -> float:
    """Shannon entropy in bits of a histogram."""
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log2(p))) + 0.0


def image_histograms(x: np.ndarray, bins: int = 256) -> np.ndarray:
    """Per-row intensity histograms over [0, 1]."""
    x = np.clip(as_matrix(x), 0.0, 1.0)
    b = np.minimum((x * bins).astype(np.int64), bins - 1)
    out = np.zeros((x.shape[0], bins), dtype=np.int64)
    np.add.at(out, (np.repeat(np.arange(x.shape[0]), x.shape[1]), b.ravel()), 1)
    return out


def dataset_stats(ds: Dataset, bins: int = 256, seed: int = 0, k: int = 5) -> DatasetStats:
    """Histogram entropy/std means plus 10-fold kNN and logistic accuracies."""
    if ds.labels is None:
        raise MissingLabels("dataset_stats needs labels for the accuracy fields")
    from .metrics import acc_knn, acc_logistic_10fold

    hist = image_histograms(ds.x, bins)
    entropy = float(np.mean([histogram_entropy(h) for h in hist]))
    std = float(np.mean(hist.std(axis=1)))
    return DatasetStats(
        entropy_mean=entropy,
        hist_std_mean=std,
        knn_acc=acc_knn(ds.x, ds.labels, k=k, seed=seed),
        logistic_acc=acc_logistic_10fold(ds.x, ds.labels, seed=seed),
    )
