"""Maps between formulations: factorizations X -> F and direction lifts W -> Delta.

A direction W of the PSD problem that is admissible at ``X = F F^T``
(its compression onto null(X) vanishes) can be written as
``F Delta^T + Delta F^T``.  :func:`construct_delta` builds such a Delta from
the singular vectors of F; :func:`construct_delta_sym` builds a symmetric
one with ``F Delta + Delta F = W`` when no two nonzero eigenvalues of F
cancel.
"""
import numpy as np

from .errors import BadWidth, EigenvalueConditionViolated, NotPsd, SubspaceViolation
from .matcore import RANK_TOL, as_factor, as_symmetric, pinv, sym_eig

SUBSPACE_TOL = 1e-8


def factor_any(X, k=None, rotate=None, rank_tol=RANK_TOL):
    """Return a d x k factor F with ``F F^T = X``.

    Parameters
    ----------
    X : (d, d) array_like
        PSD matrix; eigenvalues down to ``-rank_tol * (1 + ||X||_2)`` are
        treated as zero.
    k : int, optional
        Factor width, at least the numerical rank of X.  Defaults to d.
    rotate : (k, k) array_like, optional
        Orthogonal matrix applied on the right.
    """
    X = as_symmetric(X)
    d = X.shape[0]
    k = d if k is None else int(k)
    U, w, r = sym_eig(X, rank_tol)
    top = np.max(np.abs(w)) if d else 0.0
    if d and w[-1] < -rank_tol * (1.0 + top):
        raise NotPsd(f"X has eigenvalue {w[-1]:.3e} < 0")
    if k < r:
        raise BadWidth(f"width k={k} is below rank(X)={r}")
    F = np.zeros((d, k))
    m = min(r, k)
    F[:, :m] = U[:, :m] * np.sqrt(np.clip(w[:m], 0.0, None))
    if rotate is not None:
        Q = np.asarray(rotate, dtype=float)
        if Q.shape != (k, k):
            raise BadWidth(f"rotation must be {k} x {k}, got {Q.shape}")
        F = F @ Q
    return F


def _check_subspace(W, V, tol):
    if V.shape[1] == 0:
        return
    viol = np.linalg.norm(V.T @ W @ V)
    if viol > tol * (1.0 + np.linalg.norm(W)):
        raise SubspaceViolation(f"||V_X^T W V_X||_F = {viol:.3e}")


def construct_delta(F, W, rank_tol=RANK_TOL, tol=SUBSPACE_TOL):
    """Delta with ``F Delta^T + Delta F^T = W`` and vanishing curvature gap.

    Uses ``Delta = U (L o U^T W U) U^T (F^+)^T`` where U holds the left
    singular vectors of F and L has 1/2 on the leading r x r block and 1
    elsewhere.  For every symmetric S with ``S F F^T = 0`` the result
    satisfies ``tr(S (W X^+ W - Delta Delta^T)) = 0``.
    """
    F = as_factor(F)
    W = as_symmetric(W)
    d = F.shape[0]
    if W.shape != (d, d):
        raise SubspaceViolation(f"W must be {d} x {d}")
    U, s, Vt = np.linalg.svd(F, full_matrices=True)
    cut = rank_tol * max(1.0, s[0] if len(s) else 0.0)
    r = int(np.sum(s > cut))
    _check_subspace(W, U[:, r:], tol)
    L = np.ones((d, d))
    L[:r, :r] = 0.5
    M = L * (U.T @ W @ U)
    # (F^+)^T = U_r diag(1/s) V_r^T
    Fpt = (U[:, :r] / s[:r]) @ Vt[:r]
    return U @ M @ U.T @ Fpt


def construct_delta_sym(F, W, rank_tol=RANK_TOL, tol=SUBSPACE_TOL):
    """Symmetric Delta with ``F Delta + Delta F = W``.

    In the eigenbasis of F, entry (i, j) is ``W_ij / (sigma_i + sigma_j)``
    when at least one of sigma_i, sigma_j is nonzero and 0 otherwise.

    Raises
    ------
    EigenvalueConditionViolated
        If some divisor ``|sigma_i + sigma_j|`` with a nonzero eigenvalue
        involved is at most ``rank_tol * max(1, |sigma|_max)``.
    SubspaceViolation
        If W does not vanish on the null space of ``F^2``.
    """
    F = as_symmetric(F)
    W = as_symmetric(W)
    U, w, _ = sym_eig(F, rank_tol)
    cut = rank_tol * max(1.0, np.max(np.abs(w)) if len(w) else 0.0)
    nz = np.abs(w) > cut
    _check_subspace(W, U[:, ~nz], tol)
    S = w[:, None] + w[None, :]
    active = nz[:, None] | nz[None, :]
    bad = active & (np.abs(S) <= cut)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise EigenvalueConditionViolated(
            f"eigenvalues {w[i]:.6g} and {w[j]:.6g} (indices {i + 1}, {j + 1}) sum to zero")
    What = U.T @ W @ U
    D = np.zeros_like(What)
    D[active] = What[active] / S[active]
    D = 0.5 * (D + D.T)
    out = U @ D @ U.T
    return 0.5 * (out + out.T)


def lemma_t2_gap(S, F, Delta, rank_tol=RANK_TOL):
    """``tr(S (Delta Delta^T - W X^+ W))`` with ``W = F Delta^T + Delta F^T``, ``X = F F^T``.

    The hypotheses ``S >= 0`` and ``S F = 0`` are not enforced; see
    :func:`t2_hypothesis_residuals`.
    """
    S = np.asarray(S, dtype=float)
    F = as_factor(F)
    Delta = np.asarray(Delta, dtype=float)
    X = F @ F.T
    W = F @ Delta.T + Delta @ F.T
    return float(np.trace(S @ (Delta @ Delta.T - W @ pinv(X, rank_tol) @ W)))


def t2_hypothesis_residuals(S, F):
    """Return ``(||S F||_F, max(0, -lambda_min(S)))``."""
    S = as_symmetric(S)
    lmin = float(np.linalg.eigvalsh(S)[0]) if S.size else 0.0
    return float(np.linalg.norm(S @ F)), max(0.0, -lmin)
