"""Dense matrix utilities shared by every other module.

Symmetric matrices and factors are plain ``numpy.ndarray`` objects; the
helpers here validate them, decompose them, and move between matrix and
vector coordinates.  Every rank decision takes an explicit ``rank_tol`` so
callers can record which threshold was used.
"""
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, NonFinite, NotPsd, NotSymmetric

RANK_TOL = 1e-9
SYM_TOL = 1e-8


class EigDecomp(NamedTuple):
    U: np.ndarray
    sigma: np.ndarray
    rank: int


class SvdDecomp(NamedTuple):
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    r: int


def check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFinite("array contains NaN or Inf")


def as_symmetric(M, sym_tol=SYM_TOL):
    """Validate a square matrix as symmetric and return ``(M + M^T) / 2``.

    Raises
    ------
    NotSymmetric
        If some ``|M_ij - M_ji|`` exceeds ``sym_tol * (1 + max|M|)``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    check_finite(M)
    scale = 1.0 + (np.max(np.abs(M)) if M.size else 0.0)
    if M.size and np.max(np.abs(M - M.T)) > sym_tol * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    return 0.5 * (M + M.T)


def as_factor(F):
    F = np.asarray(F, dtype=float)
    if F.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d factor, got shape {F.shape}")
    check_finite(F)
    return F


def _rank_cutoff(values, rank_tol):
    top = np.max(np.abs(values)) if len(values) else 0.0
    return rank_tol * max(1.0, top)


def sym_eig(M, rank_tol=RANK_TOL):
    """Eigendecomposition of a symmetric matrix, eigenvalues nonincreasing.

    Parameters
    ----------
    M : (d, d) array_like
        Symmetric input; it is symmetrized before decomposition.
    rank_tol : float
        Relative threshold for counting nonzero eigenvalues.

    Returns
    -------
    EigDecomp
        ``U`` orthogonal with eigenvectors as columns, ``sigma`` sorted by
        value (largest first, ties kept in stable order) and the numerical
        rank.
    """
    M = np.asarray(M, dtype=float)
    check_finite(M)
    M = 0.5 * (M + M.T)
    w, U = np.linalg.eigh(M)
    order = np.argsort(-w, kind="stable")
    w, U = w[order], U[:, order]
    rank = int(np.sum(np.abs(w) > _rank_cutoff(w, rank_tol)))
    return EigDecomp(U, w, rank)


def svd(M, rank_tol=RANK_TOL):
    """Thin SVD truncated to the numerical rank.

    Singular values with ``sigma_i <= rank_tol * max(1, sigma_1)`` are
    dropped, so a zero matrix returns empty factors.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionMismatch("svd expects a 2-d array")
    check_finite(M)
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    d1, d2 = M.shape
    if M.size == 0:
        return SvdDecomp(np.zeros((d1, 0)), np.zeros(0), np.zeros((d2, 0)), 0)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > _rank_cutoff(s, rank_tol)))
    return SvdDecomp(U[:, :r], s[:r], Vt[:r].T, r)


def pinv(M, rank_tol=RANK_TOL):
    """Moore-Penrose pseudoinverse of a symmetric matrix."""
    U, w, _ = sym_eig(M, rank_tol)
    keep = np.abs(w) > _rank_cutoff(w, rank_tol)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    P = (U * inv) @ U.T
    return 0.5 * (P + P.T)


def null_space_basis(X, rank_tol=RANK_TOL):
    """Orthonormal basis ``V_X`` (d x (d - r)) of the null space of symmetric X.

    Columns are eigenvectors whose eigenvalue magnitude is at most
    ``rank_tol * max(1, ||X||_2)``; an invertible X gives a d x 0 array.
    """
    U, w, _ = sym_eig(X, rank_tol)
    zero = np.abs(w) <= _rank_cutoff(w, rank_tol)
    return U[:, zero]


def range_null_split(X, rank_tol=RANK_TOL):
    """Return ``(U_X, V_X, w_range)``: range basis, null basis, range eigenvalues."""
    U, w, _ = sym_eig(X, rank_tol)
    zero = np.abs(w) <= _rank_cutoff(w, rank_tol)
    return U[:, ~zero], U[:, zero], w[~zero]


def sym_product(A, B):
    """Symmetric product ``(A B^T + B A^T) / 2``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"sym_product needs equal square shapes, got {A.shape} and {B.shape}")
    P = A @ B.T
    return 0.5 * (P + P.T)


def psd_sqrt(X, rank_tol=RANK_TOL):
    """Symmetric PSD square root; eigenvalues within tolerance of zero are clamped."""
    U, w, _ = sym_eig(X, rank_tol)
    top = np.max(np.abs(w)) if len(w) else 0.0
    if len(w) and w[-1] < -rank_tol * (1.0 + top):
        raise NotPsd(f"smallest eigenvalue {w[-1]:.3e} is negative")
    R = (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T
    return 0.5 * (R + R.T)


def psd_project(X):
    """Nearest PSD matrix in Frobenius norm."""
    U, w, _ = sym_eig(X)
    R = (U * np.clip(w, 0.0, None)) @ U.T
    return 0.5 * (R + R.T)


def lambda_min(M):
    """Smallest eigenvalue of a symmetric matrix (``inf`` for an empty one)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def _tril_indices(d):
    # column-major lower triangle: (0,0), (1,0), ..., (d-1,0), (1,1), ...
    rows, cols = [], []
    for j in range(d):
        for i in range(j, d):
            rows.append(i)
            cols.append(j)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def svec(W):
    """Isometric vectorization of a symmetric matrix.

    Off-diagonal entries are scaled by sqrt(2), so the Frobenius inner
    product becomes the dot product.  Ordering is the column-major lower
    triangle.

    >>> svec(np.eye(2))
    array([1., 0., 1.])
    """
    W = np.asarray(W, dtype=float)
    rows, cols = _tril_indices(W.shape[0])
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return W[rows, cols] * scale


def smat(v):
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float)
    m = v.shape[0]
    d = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    if d * (d + 1) // 2 != m:
        raise DimensionMismatch(f"length {m} is not a triangular number")
    rows, cols = _tril_indices(d)
    scale = np.where(rows == cols, 1.0, 1.0 / np.sqrt(2.0))
    W = np.zeros((d, d))
    W[rows, cols] = v * scale
    W[cols, rows] = v * scale
    return W


def sym_basis(d):
    """Orthonormal basis of S^d as a (d(d+1)/2, d, d) array, ordered like svec."""
    m = d * (d + 1) // 2
    return np.stack([smat(e) for e in np.eye(m)]) if m else np.zeros((0, d, d))


def orth_null(M, rank_tol=RANK_TOL):
    """Orthonormal basis of the null space of a general matrix, via SVD.

    Returns ``(N, dim)`` where the columns of ``N`` span ``{v : M v = 0}``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(n), n
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    cutoff = _rank_cutoff(s, rank_tol)
    r = int(np.sum(s > cutoff))
    N = Vt[r:].T
    return N, N.shape[1]


def random_orthogonal(k, rng):
    """Haar-distributed orthogonal k x k matrix."""
    Q, R = np.linalg.qr(rng.standard_normal((k, k)))
    return Q * np.sign(np.diag(R))
