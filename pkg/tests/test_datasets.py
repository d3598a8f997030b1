import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invml.datasets import (
    Dataset,
    dataset_stats,
    gen_spheres,
    gen_swiss_roll,
    histogram_entropy,
    image_histograms,
    knn_graph,
    load_csv,
    load_idx,
    train_test_split,
    write_idx,
)
from invml.errors import BadMagic, CountMismatch, KTooLarge, MissingLabels, TruncatedFile


def test_swiss_roll_parameterisation():
    ds = gen_swiss_roll(1000, seed=3)
    r = np.hypot(ds.x[:, 0], ds.x[:, 2])
    assert ds.x.shape == (1000, 3)
    assert r.min() >= 1.5 * np.pi - 1e-12 and r.max() <= 4.5 * np.pi + 1e-12
    assert ds.x[:, 1].min() >= 0 and ds.x[:, 1].max() <= 21
    np.testing.assert_allclose(r, ds.color, rtol=1e-12)


def test_swiss_roll_determinism():
    assert np.array_equal(gen_swiss_roll(50, seed=1).x, gen_swiss_roll(50, seed=1).x)
    assert not np.array_equal(gen_swiss_roll(50, seed=1).x, gen_swiss_roll(50, seed=2).x)
    with pytest.raises(ValueError):
        gen_swiss_roll(0)


def test_spheres_radii():
    ds = gen_spheres(550, ambient_dim=11, seed=0)
    groups = {c: ds.x[ds.labels == c] for c in range(ds.class_count)}
    big = groups.pop(10)
    np.testing.assert_allclose(np.linalg.norm(big, axis=1), 5.0, atol=1e-12)
    # full-dimensional spheres: the centre solves a linear system from 4+ points
    for pts in groups.values():
        a = 2 * (pts[1:] - pts[0])
        b = np.sum(pts[1:] ** 2 - pts[0] ** 2, axis=1)
        c, *_ = np.linalg.lstsq(a, b, rcond=None)
        np.testing.assert_allclose(np.linalg.norm(pts - c, axis=1), 1.0, atol=1e-10)
    assert sum(len(p) for p in groups.values()) == 500


def test_spheres_ambient_default_and_labels():
    ds = gen_spheres(110, seed=0)
    assert ds.m == 101
    assert ds.class_count == 11
    assert np.bincount(ds.labels).tolist() == [10] * 11


def test_half_spheres_hemisphere_cut():
    ds = gen_spheres(550, ambient_dim=6, seed=1, half=True)
    full = gen_spheres(550, ambient_dim=6, seed=1, half=False)
    # the enclosing sphere is centred at the origin, so the cut is on the sign
    big = ds.x[ds.labels == 10]
    assert np.all(big[:, -1] >= 0)
    assert np.any(full.x[full.labels == 10][:, -1] < 0)


def test_s10_variant_lies_in_11_dim_affine_patches():
    ds = gen_spheres(1100, ambient_dim=101, seed=2, half=True, intrinsic_dim=10)
    assert ds.m == 101
    for c in range(11):
        pts = ds.x[ds.labels == c]
        centred = pts - pts.mean(axis=0)
        sv = np.linalg.svd(centred, compute_uv=False)
        assert np.sum(sv > 1e-9 * sv[0]) <= 11


def test_knn_examples():
    g = knn_graph(np.array([[0.0], [1.0], [3.0]]), 1)
    assert g.indices[:, 0].tolist() == [1, 0, 1]
    x = np.random.default_rng(0).standard_normal((7, 2))
    g = knn_graph(x, 6)
    for i, row in enumerate(g.indices):
        assert sorted(row.tolist()) == [j for j in range(7) if j != i]
    with pytest.raises(KTooLarge):
        knn_graph(x, 7)


def _sort_oracle(x, k):
    n = len(x)
    rows = []
    for i in range(n):
        d = [(float(np.sqrt(np.sum((x[i] - x[j]) ** 2))), j) for j in range(n) if j != i]
        rows.append([j for _, j in sorted(d)[:k]])
    return np.array(rows)


def test_knn_matches_full_sort():
    x = np.random.default_rng(1).standard_normal((100, 5))
    g = knn_graph(x, 7)
    assert np.array_equal(g.indices, _sort_oracle(x, 7))


def test_knn_ties_lower_index():
    x = np.array([[0.0], [1.0], [-1.0], [2.0]])
    assert knn_graph(x, 2).indices[0].tolist() == [1, 2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_knn_invariants(seed, k):
    x = np.random.default_rng(seed).standard_normal((20, 3))
    g = knn_graph(x, k)
    n = g.n
    assert np.all(g.indices != np.arange(n)[:, None])
    assert np.all((g.indices >= 0) & (g.indices < n))
    assert np.all(np.diff(g.distances, axis=1) >= 0)
    full = np.linalg.norm(x[:, None] - x[None], axis=2)
    np.fill_diagonal(full, np.inf)
    np.testing.assert_allclose(g.distances[:, 0], full.min(axis=1), atol=1e-12)


def test_graph_pairs_and_mask():
    x = np.random.default_rng(2).standard_normal((10, 2))
    g = knn_graph(x, 3)
    i, j = g.pairs()
    assert len(i) == 30
    assert g.mask().sum() == 30 and np.array_equal(g.mask(), g.adjacency)
    assert g.mask(1).sum() == 10


# --- IDX / CSV ------------------------------------------------------------

def test_idx_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    imgs = rng.integers(0, 256, (6, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, 6, dtype=np.uint8)
    write_idx(tmp_path / "img.idx", imgs)
    write_idx(tmp_path / "lab.idx.gz", labels)
    raw = (tmp_path / "img.idx").read_bytes()
    assert struct.unpack(">I", raw[:4])[0] == 0x00000803
    with gzip.open(tmp_path / "lab.idx.gz") as fh:
        assert struct.unpack(">I", fh.read(4))[0] == 0x00000801
    ds = load_idx(tmp_path / "img.idx", tmp_path / "lab.idx.gz")
    assert np.array_equal(np.round(ds.x * 255).astype(np.uint8), imgs.reshape(6, -1))
    assert np.array_equal(ds.labels, labels)
    assert ds.x.min() >= 0 and ds.x.max() <= 1
    assert load_idx(tmp_path / "img.idx", downsample=16).m == 256


def test_downsample_area_average(tmp_path):
    img = np.zeros((1, 4, 4), dtype=np.uint8)
    img[0, :2, :2] = 255
    write_idx(tmp_path / "a.idx", img)
    ds = load_idx(tmp_path / "a.idx", downsample=2)
    np.testing.assert_allclose(ds.x.reshape(2, 2), [[1.0, 0.0], [0.0, 0.0]])


def test_idx_errors(tmp_path):
    imgs = np.zeros((3, 2, 2), dtype=np.uint8)
    write_idx(tmp_path / "img.idx", imgs)
    write_idx(tmp_path / "lab.idx", np.zeros(4, dtype=np.uint8))
    with pytest.raises(CountMismatch):
        load_idx(tmp_path / "img.idx", tmp_path / "lab.idx")
    with pytest.raises(BadMagic):
        load_idx(tmp_path / "lab.idx")
    raw = (tmp_path / "img.idx").read_bytes()
    (tmp_path / "short.idx").write_bytes(raw[:-1])
    with pytest.raises(TruncatedFile):
        load_idx(tmp_path / "short.idx")


def test_load_csv(tmp_path):
    (tmp_path / "a.csv").write_text("f1,f2,label\n1,2,0\n3,4,1\n")
    ds = load_csv(tmp_path / "a.csv", label_column=True)
    assert ds.x.tolist() == [[1, 2], [3, 4]] and ds.labels.tolist() == [0, 1]
    (tmp_path / "b.csv").write_text("1,2\n3,4\n")
    assert load_csv(tmp_path / "b.csv").x.shape == (2, 2)


def test_split_partitions():
    ds = Dataset(np.arange(20.0).reshape(10, 2), np.arange(10) % 2)
    tr, te = train_test_split(ds, 0.3, seed=1)
    assert tr.n == 7 and te.n == 3
    assert sorted(tr.x[:, 0].tolist() + te.x[:, 0].tolist()) == ds.x[:, 0].tolist()


# --- stats ----------------------------------------------------------------

def test_entropy_examples():
    h = image_histograms(np.full((1, 64), 0.3))
    assert histogram_entropy(h[0]) == 0.0
    assert histogram_entropy(np.ones(16)) == pytest.approx(4.0, abs=1e-12)


def test_dataset_stats():
    rng = np.random.default_rng(4)
    labels = np.repeat([0, 1], 30)
    x = np.clip(rng.random((60, 16)) * 0.5 + labels[:, None] * 0.5, 0, 1)
    st_ = dataset_stats(Dataset(x, labels), bins=8)
    assert st_.entropy_mean >= 0
    assert 0 <= st_.knn_acc <= 1 and st_.knn_acc > 0.9
    assert 0 <= st_.logistic_acc <= 1
    with pytest.raises(MissingLabels):
        dataset_stats(Dataset(x))
