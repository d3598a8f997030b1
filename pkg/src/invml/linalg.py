"""Dense linear algebra primitives.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 with two axes.
Every routine here is a pure function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    IllConditioned,
    NonFiniteValue,
    RankDeficient,
    ShapeMismatch,
    SingularMatrix,
    ZeroMatrix,
)

DEFAULT_COND_CAP = 1e12
POWER_SEED = 20201  # fixed start vector for power iteration


def as_matrix(a, name="matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float64 array."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteValue(f"{name} contains NaN or Inf")
    return m


def _require_square(w, name="w"):
    if w.shape[0] != w.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got {w.shape}")


def lu_factor(w: np.ndarray):
    """LU factorisation with partial pivoting, ``P w = L U``.

    Returns ``(lu, perm)`` with L (unit diagonal) and U packed into ``lu``.
    """
    w = as_matrix(w)
    _require_square(w)
    n = w.shape[0]
    lu = w.copy()
    perm = np.arange(n)
    scale = np.max(np.abs(w)) if w.size else 0.0
    if scale == 0.0:
        raise SingularMatrix("matrix is identically zero")
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < 1e-14 * scale:
            raise SingularMatrix(f"pivot {k} below 1e-14 * max|entry|")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm


def lu_solve(lu: np.ndarray, perm: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``w x = b`` given the factors from :func:`lu_factor`."""
    n = lu.shape[0]
    x = np.array(b, dtype=np.float64)[perm]
    for k in range(n):
        x[k + 1:] -= np.multiply.outer(lu[k + 1:, k], x[k])
    for k in range(n - 1, -1, -1):
        x[k] /= lu[k, k]
        x[:k] -= np.multiply.outer(lu[:k, k], x[k])
    return x


def condition_number(w: np.ndarray, w_inv: np.ndarray) -> float:
    """1-norm condition number ``||w||_1 ||w^-1||_1``."""
    return float(np.abs(w).sum(axis=0).max() * np.abs(w_inv).sum(axis=0).max())


def mat_inverse(w, cond_cap: float = DEFAULT_COND_CAP, return_cond: bool = False):
    """Invert a square matrix by LU with partial pivoting.

    Raises SingularMatrix on a negligible pivot and IllConditioned when the
    1-norm condition number exceeds ``cond_cap``.
    """
    w = as_matrix(w, "w")
    _require_square(w)
    lu, perm = lu_factor(w)
    inv = lu_solve(lu, perm, np.eye(w.shape[0]))
    cond = condition_number(w, inv)
    if cond > cond_cap:
        raise IllConditioned(f"condition number {cond:.3e} exceeds cap {cond_cap:.1e}")
    if return_cond:
        return inv, cond
    return inv


def spectral_norm(w, n_iter: int = 5, seed: int = POWER_SEED):
    """Largest singular value of ``w`` by power iteration on ``w^T w``.

    Returns ``(sigma, u, v)`` with unit vectors satisfying ``w v = sigma u``
    approximately. The start vector is drawn from a fixed seed so that the
    estimate is reproducible.
    """
    w = as_matrix(w, "w")
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    if not np.any(w):
        raise ZeroMatrix("spectral norm of an all-zero matrix")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(w.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(n_iter):
        nxt = w.T @ (w @ v)
        nrm = np.linalg.norm(nxt)
        if nrm == 0.0:
            # start vector landed in the null space; restart on a basis vector
            v = np.zeros(w.shape[1])
            v[int(np.argmax(np.abs(w).sum(axis=0)))] = 1.0
            continue
        v = nxt / nrm
    wv = w @ v
    sigma = float(np.linalg.norm(wv))
    u = wv / sigma
    return sigma, u, v


def _round_robin(n):
    """Yield disjoint column-pair rounds covering every pair once (circle method)."""
    idx = list(range(n))
    for _ in range(n - 1):
        half = n // 2
        yield np.array(idx[:half]), np.array(idx[half:][::-1])
        idx = [idx[0]] + [idx[-1]] + idx[1:-1]


def jacobi_singular_values(a, tol: float = 1e-15, max_sweeps: int = 80) -> np.ndarray:
    """Singular values by one-sided Jacobi, sorted nonincreasing.

    Tall inputs are first reduced to their triangular QR factor, which shares
    the singular values. Column rotations are applied in parallel rounds.
    """
    a = as_matrix(a, "a")
    if a.shape[0] < a.shape[1]:
        a = a.T
    if a.size == 0:
        return np.zeros(0)
    if a.shape[0] > a.shape[1]:
        a = np.linalg.qr(a, mode="r")
    n = a.shape[1]
    work = a.copy()
    if n % 2:
        work = np.hstack([work, np.zeros((work.shape[0], 1))])
    cols = work.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p, q in _round_robin(cols):
            ap, aq = work[:, p], work[:, q]
            alpha = np.einsum("ij,ij->j", ap, ap)
            beta = np.einsum("ij,ij->j", aq, aq)
            gamma = np.einsum("ij,ij->j", ap, aq)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            active &= gamma != 0.0
            if not np.any(active):
                continue
            rotated = True
            g = np.where(active, gamma, 1.0)
            zeta = (beta - alpha) / (2.0 * g)
            t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            t = np.where(zeta == 0.0, 1.0, t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            c = np.where(active, c, 1.0)
            s = np.where(active, s, 0.0)
            work[:, p] = c * ap - s * aq
            work[:, q] = s * ap + c * aq
        if not rotated:
            break
    sv = np.linalg.norm(work[:, :n], axis=0)
    return np.sort(sv)[::-1]


@dataclass(frozen=True)
class SvdRankResult:
    singular_values: np.ndarray
    rank: int
    tolerance_used: float


def svd_rank(z, rel_tol: float = 1e-3) -> SvdRankResult:
    """Numerical rank: singular values above ``rel_tol * sigma_max``."""
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    sv = jacobi_singular_values(z)
    top = sv[0] if sv.size else 0.0
    rank = int(np.count_nonzero(sv > rel_tol * top))
    return SvdRankResult(singular_values=sv, rank=rank, tolerance_used=rel_tol)


def qr_orthogonalize(w) -> np.ndarray:
    """Q factor of ``w`` with the sign convention ``diag(R) > 0``."""
    w = as_matrix(w, "w")
    _require_square(w)
    q, r = np.linalg.qr(w)
    d = np.diag(r)
    if np.min(np.abs(d)) <= 1e-12 * max(np.max(np.abs(d)), 1e-300):
        raise RankDeficient("matrix is not full rank")
    return q * np.sign(d)


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    return qr_orthogonalize(rng.standard_normal((n, n)))


def pca_project(x, target_dim: int, return_ratio: bool = False):
    """Project centred rows of ``x`` onto the top principal directions."""
    x = as_matrix(x, "x")
    if not 1 <= target_dim <= x.shape[1]:
        raise ShapeMismatch(f"target_dim {target_dim} outside [1, {x.shape[1]}]")
    xc = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(xc, full_matrices=False)
    proj = xc @ vt[:target_dim].T
    if not return_ratio:
        return proj
    total = float(np.sum(s * s))
    ratio = float(np.sum(s[:target_dim] ** 2) / total) if total > 0 else 1.0
    return proj, ratio
