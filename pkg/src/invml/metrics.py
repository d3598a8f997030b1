"""Embedding-quality, invertibility and downstream-accuracy metrics."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from .datasets import NeighborGraph, block_distances, knn_graph, pairwise_distances
from .errors import DegenerateFold, KRangeInvalid, ShapeMismatch
from .linalg import as_matrix, svd_rank


def rmse(x, x_hat) -> float:
    """``sqrt(sum_i ||x_i - x_hat_i||^2 / N^2)``; note the 1/N^2."""
    x, x_hat = as_matrix(x), as_matrix(x_hat)
    if x.shape != x_hat.shape:
        raise ShapeMismatch(f"{x.shape} vs {x_hat.shape}")
    n = x.shape[0]
    return float(np.sqrt(np.sum((x - x_hat) ** 2) / n**2))


def mne(pairs) -> float:
    """Largest absolute entry error over ``(z, z_hat)`` layer pairs."""
    worst = 0.0
    for z, z_hat in pairs:
        worst = max(worst, float(np.max(np.abs(np.asarray(z) - np.asarray(z_hat)))))
    return worst


# --------------------------------------------------------------------------
# rank-based neighbourhood preservation

def _rank_rows(d: np.ndarray, offset: int) -> np.ndarray:
    """Closeness ranks per row; self is rank 0, ties go to the lower index."""
    d = d.copy()
    rows = np.arange(d.shape[0])
    d[rows, rows + offset] = -1.0
    order = np.argsort(d, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(d.shape[1])[None, :], axis=1)
    return ranks


def _check_k_range(m, k1, k2):
    if not (2 <= k1 <= k2 and 2 * m - 3 * k2 - 1 > 0 and k2 < m):
        raise KRangeInvalid(f"k range [{k1}, {k2}] invalid for {m} samples")


def _neighbourhood_penalty(a, b, ks, block=512):
    """For each k: sum over i of (rank_a(i, j) - k) for j in b's k-NN but not a's."""
    a, b = as_matrix(a), as_matrix(b)
    n = a.shape[0]
    out = np.zeros(len(ks))
    for start in range(0, n, block):
        stop = min(n, start + block)
        ra = _rank_rows(block_distances(a[start:stop], a), start)
        rb = _rank_rows(block_distances(b[start:stop], b), start)
        for t, k in enumerate(ks):
            hit = (rb <= k) & (rb > 0) & (ra > k)
            out[t] += float(np.sum(ra[hit] - k))
    return out


def _average_preservation(a, b, k1, k2):
    m = a.shape[0]
    _check_k_range(m, k1, k2)
    ks = list(range(k1, k2 + 1))
    pen = _neighbourhood_penalty(a, b, ks)
    vals = [1.0 - 2.0 / (m * k * (2 * m - 3 * k - 1)) * p for k, p in zip(ks, pen)]
    return float(np.mean(vals))


def trustworthiness(x, z, k1: int = 5, k2: int = 10) -> float:
    """Penalises points that enter a latent neighbourhood without being input
    neighbours, weighted by their input-space rank; averaged over k1..k2."""
    x, z = as_matrix(x), as_matrix(z)
    if x.shape[0] != z.shape[0]:
        raise ShapeMismatch("x and z need the same number of rows")
    return _average_preservation(x, z, k1, k2)


def continuity(x, z, k1: int = 5, k2: int = 10) -> float:
    """Mirror of trustworthiness: input neighbours missing from the latent
    neighbourhood, weighted by their latent rank."""
    x, z = as_matrix(x), as_matrix(z)
    if x.shape[0] != z.shape[0]:
        raise ShapeMismatch("x and z need the same number of rows")
    return _average_preservation(z, x, k1, k2)


class BiLipschitz(NamedTuple):
    k_min: float
    k_max: float
    skipped: int


def bi_lipschitz(x, z, graph: NeighborGraph) -> BiLipschitz:
    """Local bi-Lipschitz constants over the input neighbourhoods.

    Pairs with a zero distance in either space are skipped and counted.
    """
    x, z = as_matrix(x), as_matrix(z)
    i, j = graph.pairs()
    dx = np.linalg.norm(x[i] - x[j], axis=1)
    dz = np.linalg.norm(z[i] - z[j], axis=1)
    ok = (dx > 0) & (dz > 0)
    ratio = np.full(dx.shape, -np.inf)
    ratio[ok] = np.maximum(dz[ok] / dx[ok], dx[ok] / dz[ok])
    per_row = ratio.reshape(graph.n, graph.k).max(axis=1)
    valid = per_row > -np.inf
    if not valid.any():
        return BiLipschitz(float("nan"), float("nan"), int((~ok).sum()))
    return BiLipschitz(float(per_row[valid].min()), float(per_row[valid].max()), int((~ok).sum()))


def latent_mse(x, z, max_samples: int = 2000, seed: int = 0) -> float:
    """``sqrt(sum_ij |d_X - d_Z| / N^2)``, on a seeded row subsample when large."""
    x, z = as_matrix(x), as_matrix(z)
    if x.shape[0] != z.shape[0]:
        raise ShapeMismatch("x and z need the same number of rows")
    n = x.shape[0]
    if n > max_samples:
        idx = np.sort(np.random.default_rng(seed).choice(n, max_samples, replace=False))
        x, z, n = x[idx], z[idx], max_samples
    diff = np.abs(pairwise_distances(x) - pairwise_distances(z))
    return float(np.sqrt(diff.sum() / n**2))


# --------------------------------------------------------------------------
# downstream classifiers

def stratified_folds(labels, n_folds: int = 10, seed: int = 0) -> list:
    """Test-index arrays for stratified k-fold cross-validation."""
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2:
        raise DegenerateFold("need at least two classes")
    if counts.min() < n_folds:
        raise DegenerateFold(f"class {classes[counts.argmin()]} has {counts.min()} < {n_folds} samples")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(n_folds)]
    pos = 0
    for c in classes:
        members = rng.permutation(np.flatnonzero(labels == c))
        for t, idx in enumerate(members):
            folds[(pos + t) % n_folds].append(idx)
        pos += members.size
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def fit_softmax(x, y, n_classes, l2=1e-4, iters=500, lr=0.5):
    """Multinomial logistic regression by full-batch gradient descent."""
    n, d = x.shape
    w = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    onehot = np.eye(n_classes)[y]
    for _ in range(iters):
        logits = x @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        err = (p - onehot) / n
        w -= lr * (x.T @ err + l2 * w)
        b -= lr * err.sum(axis=0)
    return w, b


def _standardise(train, test):
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0] = 1.0
    return (train - mu) / sd, (test - mu) / sd


def acc_logistic_10fold(z, labels, seed: int = 0, n_folds: int = 10) -> float:
    z = as_matrix(z)
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = int(labels.max()) + 1
    scores = []
    for test in stratified_folds(labels, n_folds, seed):
        train = np.setdiff1d(np.arange(z.shape[0]), test)
        xtr, xte = _standardise(z[train], z[test])
        w, b = fit_softmax(xtr, labels[train], n_classes)
        scores.append(np.mean(np.argmax(xte @ w + b, axis=1) == labels[test]))
    return float(np.mean(scores))


def _knn_predict(train_x, train_y, test_x, k):
    d = block_distances(test_x, train_x)
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    preds = np.empty(test_x.shape[0], dtype=np.int64)
    for r, nb in enumerate(order):
        votes = train_y[nb]
        counts = np.bincount(votes)
        tied = np.flatnonzero(counts == counts.max())
        # among tied classes pick the one holding the nearest neighbour
        preds[r] = next(v for v in votes if v in tied)
    return preds


def acc_knn(z, labels, k: int = 5, seed: int = 0, n_folds: int = 10) -> float:
    z = as_matrix(z)
    labels = np.asarray(labels, dtype=np.int64)
    scores = []
    for test in stratified_folds(labels, n_folds, seed):
        train = np.setdiff1d(np.arange(z.shape[0]), test)
        pred = _knn_predict(z[train], labels[train], z[test], k)
        scores.append(np.mean(pred == labels[test]))
    return float(np.mean(scores))


# --------------------------------------------------------------------------
# reports

CSV_COLUMNS = ("layer", "rmse", "mne", "trust", "cont", "k_min", "k_max", "l_mse",
               "acc_logistic", "acc_knn", "rank_sparsity")


@dataclass
class MetricsReport:
    layer: str = ""
    rmse: Optional[float] = None
    mne: Optional[float] = None
    trust: Optional[float] = None
    cont: Optional[float] = None
    k_min: Optional[float] = None
    k_max: Optional[float] = None
    l_mse: Optional[float] = None
    acc_logistic: Optional[float] = None
    acc_knn: Optional[float] = None
    rank_sparsity: Optional[int] = None

    def csv_row(self) -> str:
        vals = []
        for c in CSV_COLUMNS:
            v = getattr(self, c)
            if v is None:
                vals.append("")
            elif isinstance(v, str):
                vals.append(v)
            elif isinstance(v, (int, np.integer)):
                vals.append(str(int(v)))
            else:
                vals.append(repr(float(v)))
        return ",".join(vals)

    def to_dict(self):
        return asdict(self)


def write_reports_csv(path, reports, extra_columns=()) -> None:
    """``extra_columns`` is a sequence of ``(name, values)`` prepended per row."""
    names = [n for n, _ in extra_columns]
    with open(path, "w") as fh:
        fh.write(",".join(names + list(CSV_COLUMNS)) + "\n")
        for r, rep in enumerate(reports):
            prefix = [str(vals[r]) for _, vals in extra_columns]
            fh.write(",".join(prefix + [rep.csv_row()]) + "\n")


def evaluate_representation(x, z, graph: NeighborGraph, labels=None, k1=5, k2=10,
                            seed=0, layer="", rank_tol=None) -> MetricsReport:
    """Embedding-quality metrics of ``z`` against the input ``x``."""
    lip = bi_lipschitz(x, z, graph)
    rep = MetricsReport(
        layer=layer,
        trust=trustworthiness(x, z, k1, k2),
        cont=continuity(x, z, k1, k2),
        k_min=lip.k_min,
        k_max=lip.k_max,
        l_mse=latent_mse(x, z, seed=seed),
    )
    if labels is not None:
        rep.acc_logistic = acc_logistic_10fold(z, labels, seed)
        rep.acc_knn = acc_knn(z, labels, seed=seed)
    if rank_tol is not None:
        rep.rank_sparsity = svd_rank(z, rank_tol).rank
    return rep


def evaluate_encoder(enc, x, labels=None, k=15, k1=5, k2=10, seed=0, rank_tol=1e-3,
                     graph: Optional[NeighborGraph] = None):
    """Reports for the embedding (layer L) and the last body output (layer L-1).

    Both rows carry the invertibility metrics of the body.
    """
    from .model import forward, inverse_layers

    x = as_matrix(x)
    graph = graph if graph is not None else knn_graph(x, k)
    trace = forward(enc, x)
    recon = inverse_layers(enc, trace.latent)
    inv = {"rmse": rmse(x, recon[0]), "mne": mne(zip(trace.activations, recon))}
    top = evaluate_representation(x, trace.embedding, graph, labels, k1, k2, seed, "L")
    body = evaluate_representation(x, trace.latent, graph, labels, k1, k2, seed, "L-1", rank_tol)
    for rep in (top, body):
        rep.rmse, rep.mne = inv["rmse"], inv["mne"]
    top.rank_sparsity = body.rank_sparsity
    return top, body
