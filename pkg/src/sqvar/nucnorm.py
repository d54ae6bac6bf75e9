"""Nuclear-norm regularization through its PSD-block and factored forms.

``min_X h(X) + lam ||X||_*`` over d1 x d2 matrices is lifted to a PSD
problem on ``S^{d1+d2}`` (see :func:`sqvar.problems.make_nnm_bc`) and then
factored as ``Xbar = F F^T`` with ``F = [Y; Z]`` square, which gives the
smooth problem ``h(Y Z^T) + lam/2 (||Y||^2 + ||Z||^2)``.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional

import numpy as np

from .certify import DEFAULT_TOLS, certify_bc_1c
from .errors import DimensionMismatch, NotFirstOrder, NotPsd, Stalled
from .matcore import RANK_TOL, check_finite, svd, sym_eig
from .problems import make_nnm_bc
from .solve import SolveOptions, solve_dss, solve_dss_sym


@dataclass(frozen=True)
class NnmProblem:
    """Smooth part h on d1 x d2 matrices plus the weight ``lam`` of the nuclear norm."""
    d1: int
    d2: int
    h_eval: Callable
    h_grad: Callable
    lam: float
    h_hess_form: Optional[Callable] = None
    h_hess_apply: Optional[Callable] = None
    lipschitz: Optional[float] = None
    family: str = "custom"
    params: dict = field(default_factory=dict, repr=False)

    def objective(self, X):
        return float(self.h_eval(X) + self.lam * np.sum(np.linalg.svd(X, compute_uv=False)))


def make_nnm_least_squares(A, b, d1, d2, lam):
    """``h(X) = 1/2 ||A vec(X) - b||^2`` with row-major ``vec`` and A of shape (m, d1 d2)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    if A.shape != (b.shape[0], d1 * d2):
        raise DimensionMismatch(f"A must be {(b.shape[0], d1 * d2)}, got {A.shape}")
    AtA = A.T @ A

    def h(X):
        r = A @ np.ravel(X) - b
        return 0.5 * float(r @ r)

    def grad(X):
        return (A.T @ (A @ np.ravel(X) - b)).reshape(d1, d2)

    def hess_form(X, W1, W2):
        return float((A @ np.ravel(W1)) @ (A @ np.ravel(W2)))

    def hess_apply(X, W):
        return (AtA @ np.ravel(W)).reshape(d1, d2)

    L = float(np.linalg.norm(A, 2) ** 2) if A.size else 0.0
    return NnmProblem(d1, d2, h, grad, float(lam), hess_form, hess_apply, L,
                      family="least_squares", params={"A": A, "b": b})


def make_nnm_denoise(M, lam):
    """``h(X) = 1/2 ||X - M||_F^2``; the minimizer is the soft-thresholded SVD of M."""
    M = np.asarray(M, dtype=float)
    d1, d2 = M.shape

    def h(X):
        return 0.5 * float(np.sum((X - M) ** 2))

    def grad(X):
        return np.asarray(X, dtype=float) - M

    def hess_form(X, W1, W2):
        return float(np.sum(W1 * W2))

    def hess_apply(X, W):
        return np.array(W, dtype=float)

    return NnmProblem(d1, d2, h, grad, float(lam), hess_form, hess_apply, 1.0,
                      family="denoise", params={"M": M})


def sensing_instance(d1, d2, rank, m, seed=0, lam=1e-4):
    """Noiseless Gaussian sensing of a planted rank-``rank`` matrix.

    The measurement matrix has i.i.d. N(0, 1/m) entries so that
    ``A^T A`` is close to the identity on low-rank matrices.

    Returns
    -------
    problem : NnmProblem
    X_true : (d1, d2) ndarray
    """
    rng = np.random.default_rng(seed)
    X_true = rng.standard_normal((d1, rank)) @ rng.standard_normal((rank, d2))
    A = rng.standard_normal((m, d1 * d2)) / np.sqrt(m)
    b = A @ X_true.ravel()
    p = make_nnm_least_squares(A, b, d1, d2, lam)
    p.params.update({"sensing": {"d1": d1, "d2": d2, "rank": rank, "m": m, "seed": seed}})
    return p, X_true


def soft_threshold(M, tau):
    """Singular-value soft-thresholding, the prox of ``tau ||.||_*``."""
    U, s, Vt = np.linalg.svd(np.asarray(M, dtype=float), full_matrices=False)
    return (U * np.maximum(s - tau, 0.0)) @ Vt


class NuclearBlock(NamedTuple):
    value: float
    W1: np.ndarray
    W2: np.ndarray
    Xbar: np.ndarray


def nuclear_norm_block(X, rank_tol=RANK_TOL):
    """Nuclear norm of X together with the PSD block that attains it.

    ``Xbar = [[U S U^T, X], [X^T, V S V^T]]`` is PSD with trace ``2 ||X||_*``.
    """
    X = np.asarray(X, dtype=float)
    check_finite(X)
    U, s, V, _ = svd(X, rank_tol)
    W1 = (U * s) @ U.T
    W2 = (V * s) @ V.T
    Xbar = np.block([[W1, X], [X.T, W2]])
    value = float(np.sum(np.linalg.svd(X, compute_uv=False))) if X.size else 0.0
    return NuclearBlock(value, W1, W2, 0.5 * (Xbar + Xbar.T))


@dataclass
class NnmReport:
    passed: bool
    residuals: dict
    rank: int
    tolerances: Any = None

    def to_dict(self):
        return {"formulation": "NNM", "first_order": {"pass": bool(self.passed),
                "residuals": {k: float(v) for k, v in self.residuals.items()}},
                "rank": self.rank,
                "tolerances": self.tolerances.to_dict() if self.tolerances else None}


def certify_nnm_1p(p, X, tols=DEFAULT_TOLS):
    """First-order conditions of ``h + lam ||.||_*`` at X.

    With ``H = -grad h(X) / lam`` and the rank-r SVD ``X = U S V^T``, a
    first-order point has ``||H||_op <= 1``, ``U^T H = V^T`` and
    ``V^T H^T = U^T``.
    """
    X = np.asarray(X, dtype=float)
    check_finite(X)
    if X.shape != (p.d1, p.d2):
        raise DimensionMismatch(f"X must be {(p.d1, p.d2)}, got {X.shape}")
    H = -np.asarray(p.h_grad(X), dtype=float) / p.lam
    check_finite(H)
    U, _, V, r = svd(X, tols.rank_tol)
    op = float(np.linalg.norm(H, 2)) if H.size else 0.0
    res = {"opNorm": max(0.0, op - 1.0),
           "align1": float(np.linalg.norm(U.T @ H - V.T)),
           "align2": float(np.linalg.norm(V.T @ H.T - U.T))}
    scale = 1.0 + op
    passed = all(v <= tols.feas_tol * scale for v in res.values())
    return NnmReport(passed, res, r, tols)


def lift_nnm_1p(p, X, tols=DEFAULT_TOLS):
    """Lift a first-order point of the nuclear-norm problem to the PSD block problem.

    Raises
    ------
    NotFirstOrder
        If X fails :func:`certify_nnm_1p`, or the lifted block unexpectedly
        fails the PSD first-order check.
    """
    rep = certify_nnm_1p(p, X, tols)
    if not rep.passed:
        raise NotFirstOrder(f"X is not a first-order point: {rep.residuals}")
    Xbar = nuclear_norm_block(X, tols.rank_tol).Xbar
    bc = certify_bc_1c(make_nnm_bc(p, p.lam), Xbar, tols)
    if not bc.first_order.passed:
        raise NotFirstOrder(f"lifted block fails first-order check: {bc.first_order.residuals}")
    return Xbar


class NnmProjection(NamedTuple):
    X: np.ndarray
    U: np.ndarray
    V: np.ndarray
    Sigma: np.ndarray


def project_nnm(Xbar, d1, rank_tol=RANK_TOL):
    """Off-diagonal block of Xbar and the SVD read off its eigenvectors.

    With ``Xbar = Z S Z^T`` (positive part), ``U = sqrt(2) Z[:d1]``,
    ``V = sqrt(2) Z[d1:]`` and ``Sigma = S / 2``.  These form an SVD of X
    when Xbar is a first-order point of a block problem.
    """
    U_, w, r = sym_eig(Xbar, rank_tol)
    top = np.max(np.abs(w)) if len(w) else 0.0
    if len(w) and w[-1] < -rank_tol * (1.0 + top):
        raise NotPsd(f"Xbar has eigenvalue {w[-1]:.3e} < 0")
    Xbar = 0.5 * (np.asarray(Xbar, dtype=float) + np.asarray(Xbar, dtype=float).T)
    Z = U_[:, :r]
    return NnmProjection(Xbar[:d1, d1:].copy(), np.sqrt(2.0) * Z[:d1], np.sqrt(2.0) * Z[d1:], w[:r] / 2.0)


class NnmSolution(NamedTuple):
    Y: np.ndarray
    Z: np.ndarray
    X: np.ndarray
    trace: Any


def solve_nnm_dss(p, init=None, opts=None, seed=0):
    """Minimize ``h(Y Z^T) + lam/2 (||Y||^2 + ||Z||^2)`` with square ``F = [Y; Z]``.

    ``init`` is a pair ``(Y0, Z0)`` of shapes (d1, d) and (d2, d) with
    ``d = d1 + d2``; when omitted a seeded random start is used.
    """
    d1, d2 = p.d1, p.d2
    d = d1 + d2
    if init is None:
        rng = np.random.default_rng(seed)
        F0 = rng.standard_normal((d, d)) / np.sqrt(d)
    else:
        Y0, Z0 = (np.asarray(a, dtype=float) for a in init)
        if Y0.shape != (d1, d) or Z0.shape != (d2, d):
            raise DimensionMismatch(f"need Y0 {(d1, d)} and Z0 {(d2, d)}")
        F0 = np.vstack([Y0, Z0])
    F, trace = solve_dss(make_nnm_bc(p, p.lam), F0, opts or SolveOptions(seed=seed))
    Y, Z = F[:d1], F[d1:]
    return NnmSolution(Y, Z, Y @ Z.T, trace)


def nnm_dss_objective(p):
    """``(Y, Z) -> h(Y Z^T) + lam/2 (||Y||^2 + ||Z||^2)``."""
    def g(Y, Z):
        return float(p.h_eval(Y @ Z.T) + 0.5 * p.lam * (np.sum(Y * Y) + np.sum(Z * Z)))
    return g


def nnm_dss_sym_objective(p):
    """Objective of the symmetric block parametrization.

    ``F = [[Y1, Y3], [Y3^T, Y2]] -> h(Y1 Y3 + Y3 Y2) + lam/2 ||F||_F^2``,
    which equals the block objective at ``F^2``.
    """
    d1 = p.d1

    def g(F):
        F = np.asarray(F, dtype=float)
        Y1, Y3, Y2 = F[:d1, :d1], F[:d1, d1:], F[d1:, d1:]
        return float(p.h_eval(Y1 @ Y3 + Y3 @ Y2) + 0.5 * p.lam * np.sum(F * F))
    return g


def solve_nnm_dss_sym(p, F0, opts=None):
    """Route the symmetric parametrization through :func:`solve_dss_sym`."""
    return solve_dss_sym(make_nnm_bc(p, p.lam), F0, opts)


def prox_grad_nnm_oracle(p, X0=None, L=None, max_iter=100000, tol=1e-14, history=None):
    """Proximal gradient baseline: ``X <- shrink(X - grad h(X)/L, lam/L)``.

    Uses ``p.lipschitz`` when ``L`` is not given and backtracks otherwise.
    Stops when ``||X_new - X||_F <= tol (1 + ||X||_F)``.

    Raises
    ------
    Stalled
        If the iteration budget runs out.
    """
    X = np.zeros((p.d1, p.d2)) if X0 is None else np.array(X0, dtype=float)
    L = L or p.lipschitz
    backtrack = L is None
    L = 1.0 if backtrack else float(L)
    fx = p.objective(X)
    for _ in range(max_iter):
        G = p.h_grad(X)
        hx = p.h_eval(X)
        while True:
            Xn = soft_threshold(X - G / L, p.lam / L)
            D = Xn - X
            if not backtrack or p.h_eval(Xn) <= hx + np.sum(G * D) + 0.5 * L * np.sum(D * D) + 1e-15 * abs(hx):
                break
            L *= 2.0
        fn = p.objective(Xn)
        if history is not None:
            history.append(fn)
        step = np.linalg.norm(D)
        X, fx = Xn, fn
        if step <= tol * (1.0 + np.linalg.norm(X)):
            return X
    raise Stalled(f"prox-gradient did not converge in {max_iter} iterations")


# --- JSON ----------------------------------------------------------------

def nnm_problem_from_dict(spec, lam=None):
    """Inner problem from ``{"family": "least_squares"|"denoise"|"sensing", ...}``."""
    lam = float(spec.get("lambda", lam) if lam is None else lam)
    fam = spec.get("family", "sensing")
    if fam == "least_squares":
        return make_nnm_least_squares(spec["A"], spec["b"], int(spec["d1"]), int(spec["d2"]), lam)
    if fam == "denoise":
        return make_nnm_denoise(spec["M"], lam)
    if fam == "sensing":
        return sensing_instance(int(spec["d1"]), int(spec["d2"]), int(spec["rank"]),
                                int(spec["m"]), int(spec.get("seed", 0)), lam)[0]
    raise KeyError(f"unknown nuclear-norm family {fam!r}")


def nnm_problem_to_dict(p):
    if "sensing" in p.params:
        return dict(family="sensing", **p.params["sensing"], **{"lambda": p.lam})
    if p.family == "least_squares":
        return {"family": "least_squares", "d1": p.d1, "d2": p.d2,
                "A": p.params["A"].tolist(), "b": p.params["b"].tolist(), "lambda": p.lam}
    if p.family == "denoise":
        return {"family": "denoise", "M": p.params["M"].tolist(), "lambda": p.lam}
    raise KeyError(f"nuclear-norm family {p.family!r} has no JSON form")
