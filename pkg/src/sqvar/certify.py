"""First- and second-order certificates for the six formulations.

Every certifier returns a :class:`CertReport`.  Second-order checks
restrict the relevant quadratic form to an orthonormal basis of the
admissible direction subspace, eigensolve the reduced matrix, and return
the minimizing direction as a witness when the form is not PSD.  The
``*_form`` functions evaluate each quadratic form straight from the problem
callbacks so that witnesses can be re-checked without the assembled matrix.
"""
import json
from dataclasses import dataclass, field, replace
from typing import Any, NamedTuple, Optional

import numpy as np

from .errors import DimensionMismatch, NotFeasible
from .matcore import (RANK_TOL, as_factor, as_symmetric, lambda_min, orth_null,
                      pinv, range_null_split, smat, svec, sym_basis, sym_eig,
                      sym_product)

FORMULATIONS = ("BC", "DSS", "DSS_SYM", "NSDP", "SSV", "SSV_SYM")


@dataclass(frozen=True)
class Tolerances:
    feas_tol: float = 1e-8
    rank_tol: float = RANK_TOL
    psd_tol: float = 1e-8
    curv_tol: float = 1e-6

    def to_dict(self):
        return {"feasTol": self.feas_tol, "rankTol": self.rank_tol,
                "psdTol": self.psd_tol, "curvTol": self.curv_tol}

    @classmethod
    def from_dict(cls, d):
        names = {"feasTol": "feas_tol", "rankTol": "rank_tol", "psdTol": "psd_tol", "curvTol": "curv_tol"}
        return cls(**{names.get(k, k): float(v) for k, v in d.items()})


DEFAULT_TOLS = Tolerances()


@dataclass
class FirstOrder:
    passed: bool
    residuals: dict


@dataclass
class SecondOrder:
    evaluated: bool
    passed: Optional[bool] = None
    lambda_min: Optional[float] = None
    subspace_dim: Optional[int] = None
    witness: Any = None


@dataclass
class CertReport:
    formulation: str
    first_order: FirstOrder
    second_order: SecondOrder
    tolerances: Tolerances
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        """True when every evaluated condition passed."""
        if not self.first_order.passed:
            return False
        so = self.second_order
        return (not so.evaluated) or bool(so.passed)

    def to_dict(self):
        so = self.second_order
        if so.evaluated:
            second = {"pass": bool(so.passed), "lambda_min": so.lambda_min,
                      "subspace_dim": so.subspace_dim, "witness": _witness_json(so.witness)}
        else:
            second = {"pass": None, "status": "not evaluated"}
        return {
            "formulation": self.formulation,
            "first_order": {"pass": bool(self.first_order.passed),
                            "residuals": {k: float(v) for k, v in self.first_order.residuals.items()}},
            "second_order": second,
            "tolerances": self.tolerances.to_dict(),
            "notes": list(self.notes),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _witness_json(w):
    if w is None:
        return None
    if isinstance(w, dict):
        return {k: np.asarray(v).tolist() for k, v in w.items()}
    return np.asarray(w).tolist()


def _fo(formulation, residuals, limits, tols, notes=None):
    passed = all(residuals[k] <= limits[k] for k in limits)
    return CertReport(formulation, FirstOrder(passed, residuals), SecondOrder(False), tols,
                      list(notes or []))


def _reduced_test(R, tols):
    """Eigen test on a reduced Hessian; returns (passed, lambda_min, coords)."""
    m = R.shape[0]
    if m == 0:
        return True, float("inf"), None
    R = 0.5 * (R + R.T)
    w, Q = np.linalg.eigh(R)
    scale = 1.0 + np.max(np.abs(w))
    return bool(w[0] >= -tols.curv_tol * scale), float(w[0]), Q[:, 0]


def _gram(A, B):
    return A.reshape(A.shape[0], -1) @ B.reshape(B.shape[0], -1).T


# --- quadratic forms evaluated from callbacks -----------------------------

def bc_form(p, X, W, rank_tol=RANK_TOL):
    """``D^2 h_X[W,W] + 2 tr(W X^+ W grad h(X))``."""
    G = p.grad(X)
    return float(p.hess_form(X, W, W) + 2.0 * np.trace(W @ pinv(X, rank_tol) @ W @ G))


def dss_form(p, F, Delta):
    """``D^2 h_X[W,W] + 2 tr(grad h(FF^T) Delta Delta^T)`` with ``W = F Delta^T + Delta F^T``."""
    X = F @ F.T
    W = F @ Delta.T + Delta @ F.T
    return float(p.hess_form(X, W, W) + 2.0 * np.trace(p.grad(X) @ Delta @ Delta.T))


def dss_sym_form(p, F, Delta):
    """``D^2 h_X[W,W] + 2 tr(grad h(F^2) Delta^2)`` with ``W = 2 F o Delta``."""
    X = F @ F
    W = 2.0 * sym_product(F, Delta)
    return float(p.hess_form(X, W, W) + 2.0 * np.trace(p.grad(X) @ Delta @ Delta))


def lagrangian_form(p, x, Lam, z):
    """``D^2 f(x)[z,z] - tr(Lam D^2 C_x[z,z])``."""
    return float(p.f_hess_form(x, z, z) - np.sum(Lam * p.D2C_form(x, z, z)))


def nsdp_form(p, x, Lam, z, rank_tol=RANK_TOL):
    """Lagrangian curvature plus ``2 tr(DC[z] C^+ DC[z] Lam)``."""
    D = p.DC(x, z)
    return lagrangian_form(p, x, Lam, z) + 2.0 * float(np.trace(D @ pinv(p.C_eval(x), rank_tol) @ D @ Lam))


def ssv_form(p, x, Lam, z, Delta):
    """``D^2 f[z,z] + 2 tr(Lam Delta Delta^T) - tr(Lam D^2 C[z,z])``."""
    return lagrangian_form(p, x, Lam, z) + 2.0 * float(np.trace(Lam @ Delta @ Delta.T))


# --- BC ------------------------------------------------------------------

def _check_dim(p, M, what="X"):
    if M.shape[0] != p.d:
        raise DimensionMismatch(f"{what} has {M.shape[0]} rows, problem has d={p.d}")


def certify_bc_1c(p, X, tols=DEFAULT_TOLS):
    """``X >= 0``, ``grad h(X) >= 0`` and ``grad h(X) X = 0``."""
    X = as_symmetric(X)
    _check_dim(p, X)
    G = p.grad(X)
    res = {"feas": max(0.0, -lambda_min(X)),
           "dualPsd": max(0.0, -lambda_min(G)),
           "compl": float(np.linalg.norm(G @ X))}
    scale = 1.0 + np.linalg.norm(X) + np.linalg.norm(G)
    limits = {"feas": tols.feas_tol * scale, "dualPsd": tols.psd_tol * scale,
              "compl": tols.feas_tol * scale}
    return _fo("BC", res, limits, tols)


def bc_subspace_basis(X, rank_tol=RANK_TOL):
    """Orthonormal basis of ``{W in S^d : V_X^T W V_X = 0}`` as an (m, d, d) stack."""
    U_X, V_X, _ = range_null_split(X, rank_tol)
    U = np.hstack([U_X, V_X])
    d, r = X.shape[0], U_X.shape[1]
    Ws = []
    for j in range(d):
        for i in range(j, d):
            if i >= r and j >= r:
                continue
            E = np.zeros((d, d))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = np.sqrt(0.5)
            Ws.append(U @ E @ U.T)
    return np.stack(Ws) if Ws else np.zeros((0, d, d))


def certify_bc_2nc(p, X, tols=DEFAULT_TOLS):
    """Second-order necessary conditions for the PSD-constrained problem.

    The form ``D^2 h_X[W,W] + 2 tr(W X^+ W grad h(X))`` is restricted to
    directions W whose compression onto the null space of X vanishes.
    """
    rep = certify_bc_1c(p, X, tols)
    if not rep.first_order.passed:
        return rep
    X = as_symmetric(X)
    G = p.grad(X)
    Xp = pinv(X, tols.rank_tol)
    Ws = bc_subspace_basis(X, tols.rank_tol)
    H = p.hess_gram(X, Ws)
    if Ws.shape[0]:
        T = _gram(Ws @ Xp, G @ Ws)
        H = H + T + T.T
    ok, lmin, v = _reduced_test(H, tols)
    witness = None if ok else np.tensordot(v, Ws, axes=1)
    rep.second_order = SecondOrder(True, ok, lmin, Ws.shape[0], witness)
    return rep


# --- DSS -----------------------------------------------------------------

def _dss_first_order(p, F, tols, label, grad_term):
    X = F @ F.T if label == "DSS" else F @ F
    G = p.grad(X)
    r = float(np.linalg.norm(grad_term(G, F)))
    scale = 1.0 + np.linalg.norm(X) + np.linalg.norm(G)
    return _fo(label, {"grad": r}, {"grad": tols.feas_tol * scale}, tols), X, G


def certify_dss(p, F, tols=DEFAULT_TOLS):
    """Stationarity and PSD Hessian of ``g(F) = h(F F^T)`` over all d x k directions.

    Rectangular factors (k < d) are accepted; the report then carries a
    note because second-order points of the factored problem need not map
    to second-order points of the PSD problem.
    """
    F = as_factor(F)
    _check_dim(p, F, "F")
    d, k = F.shape
    rep, X, G = _dss_first_order(p, F, tols, "DSS", lambda G, F: G @ F)
    if k < d:
        rank = int(np.sum(np.linalg.svd(F, compute_uv=False) > tols.rank_tol * max(1.0, np.linalg.norm(F, 2))))
        if rank >= k:
            rep.notes.append("k < d with full-rank F: equivalence not guaranteed")
    if not rep.first_order.passed:
        return rep
    H = dss_hessian(p, F)
    ok, lmin, v = _reduced_test(H, tols)
    witness = None if ok else v.reshape(d, k)
    rep.second_order = SecondOrder(True, ok, lmin, d * k, witness)
    return rep


def dss_hessian(p, F):
    """Dense Hessian of ``g(F) = h(F F^T)`` in row-major ``vec(F)`` coordinates."""
    d, k = F.shape
    X = F @ F.T
    G = p.grad(X)
    m = d * k
    Ds = np.eye(m).reshape(m, d, k)
    Ws = np.einsum("ab,ncb->nac", F, Ds)
    Ws = Ws + Ws.transpose(0, 2, 1)
    T = _gram(Ds, G @ Ds)
    H = p.hess_gram(X, Ws) + T + T.T
    return 0.5 * (H + H.T)


def certify_dss_sym(p, F, tols=DEFAULT_TOLS):
    """Conditions for ``g(F) = h(F^2)`` over symmetric F and symmetric directions."""
    F = as_symmetric(F)
    _check_dim(p, F, "F")
    rep, X, G = _dss_first_order(p, F, tols, "DSS_SYM", lambda G, F: sym_product(G, F))
    if not rep.first_order.passed:
        return rep
    H, Ds = dss_sym_hessian(p, F, return_basis=True)
    ok, lmin, v = _reduced_test(H, tols)
    witness = None if ok else np.tensordot(v, Ds, axes=1)
    rep.second_order = SecondOrder(True, ok, lmin, Ds.shape[0], witness)
    return rep


def dss_sym_hessian(p, F, return_basis=False):
    """Hessian of ``h(F^2)`` in svec coordinates of the symmetric direction."""
    d = F.shape[0]
    X = F @ F
    G = p.grad(X)
    Ds = sym_basis(d)
    Ws = Ds @ F + F @ Ds
    H = p.hess_gram(X, Ws)
    T = _gram(Ds, G @ Ds)
    H = H + T + T.T
    H = 0.5 * (H + H.T)
    return (H, Ds) if return_basis else H


# --- NSDP ----------------------------------------------------------------

def _nsdp_dims(p, x, Lam):
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != p.n:
        raise DimensionMismatch(f"x has length {x.shape[0]}, problem has n={p.n}")
    Lam = as_symmetric(Lam)
    if Lam.shape[0] != p.d:
        raise DimensionMismatch(f"Lambda is {Lam.shape}, problem has d={p.d}")
    return x, Lam


def _stationarity(p, x, Lam):
    return float(np.linalg.norm(p.f_grad(x) - p.DC_adj(x, Lam)))


def certify_nsdp_1c(p, x, Lam, tols=DEFAULT_TOLS):
    """``grad f = DC^*(Lam)``, ``Lam C(x) = 0``, ``C(x) >= 0`` and ``Lam >= 0``."""
    x, Lam = _nsdp_dims(p, x, Lam)
    C = p.C_eval(x)
    g = p.f_grad(x)
    res = {"stationarity": _stationarity(p, x, Lam),
           "compl": float(np.linalg.norm(Lam @ C)),
           "feas": max(0.0, -lambda_min(C)),
           "multPsd": max(0.0, -lambda_min(Lam))}
    scale = 1.0 + np.linalg.norm(C) + np.linalg.norm(Lam) + np.linalg.norm(g)
    limits = {"stationarity": tols.feas_tol * scale, "compl": tols.feas_tol * scale,
              "feas": tols.feas_tol * scale, "multPsd": tols.psd_tol * scale}
    return _fo("NSDP", res, limits, tols)


def _lagrangian_matrix(p, x, Lam):
    n = p.n
    E = np.eye(n)
    H = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            H[i, j] = H[j, i] = (p.f_hess_form(x, E[i], E[j])
                                 - np.sum(Lam * p.D2C_form(x, E[i], E[j])))
    return H


def nsdp_subspace(p, x, rank_tol=RANK_TOL):
    """Orthonormal basis (n x m) of ``{z : V^T DC_x[z] V = 0}``."""
    V = range_null_split(p.C_eval(x), rank_tol)[1]
    Ds = p.DC_stack(x)
    q = V.shape[1]
    if q == 0 or p.n == 0:
        return np.eye(p.n)
    M = np.stack([svec(V.T @ D @ V) for D in Ds], axis=1)
    return orth_null(M, rank_tol)[0]


def certify_nsdp_2nc(p, x, Lam, tols=DEFAULT_TOLS):
    """Second-order necessary conditions for the nonlinear SDP at ``(x, Lam)``."""
    rep = certify_nsdp_1c(p, x, Lam, tols)
    if not rep.first_order.passed:
        return rep
    x, Lam = _nsdp_dims(p, x, Lam)
    C = p.C_eval(x)
    Cp = pinv(C, tols.rank_tol)
    Ds = p.DC_stack(x)
    Z = nsdp_subspace(p, x, tols.rank_tol)
    H = _lagrangian_matrix(p, x, Lam)
    if p.n:
        T = _gram(Ds @ Cp, Lam @ Ds)
        H = H + T + T.T
    R = Z.T @ H @ Z
    ok, lmin, v = _reduced_test(R, tols)
    witness = None if ok else Z @ v
    rep.second_order = SecondOrder(True, ok, lmin, Z.shape[1], witness)
    return rep


# --- SSV / SSV-Sym -------------------------------------------------------

def _ssv_first_order(p, x, F, Lam, tols, label):
    C = p.C_eval(x)
    if label == "SSV":
        compl = np.linalg.norm(Lam @ F)
        FF = F @ F.T
    else:
        compl = np.linalg.norm(sym_product(Lam, F))
        FF = F @ F
    g = p.f_grad(x)
    res = {"stationarity": _stationarity(p, x, Lam),
           "complF": float(compl),
           "factorFeas": float(np.linalg.norm(C - FF))}
    scale = 1.0 + np.linalg.norm(C) + np.linalg.norm(Lam) + np.linalg.norm(g)
    limits = {k: tols.feas_tol * scale for k in res}
    return _fo(label, res, limits, tols)


def certify_ssv(p, x, F, Lam, tols=DEFAULT_TOLS):
    """Conditions for ``min f(x) s.t. C(x) = F F^T`` with square F.

    The admissible directions ``(z, Delta)`` satisfy
    ``DC_x[z] = F Delta^T + Delta F^T``; their basis is the null space of
    that linear map, computed by SVD in dimension ``n + d^2``.
    """
    x, Lam = _nsdp_dims(p, x, Lam)
    F = as_factor(F)
    d, n = p.d, p.n
    if F.shape != (d, d):
        raise DimensionMismatch(f"F must be {(d, d)}, got {F.shape}")
    rep = _ssv_first_order(p, x, F, Lam, tols, "SSV")
    if not rep.first_order.passed:
        return rep
    m2 = d * d
    Ds = np.eye(m2).reshape(m2, d, d)
    FD = np.einsum("ab,ncb->nac", F, Ds)
    cols = [svec(D) for D in p.DC_stack(x)] + [-svec(W + W.T) for W in FD]
    M = np.stack(cols, axis=1)
    N = orth_null(M, tols.rank_tol)[0]
    H = np.zeros((n + m2, n + m2))
    H[:n, :n] = _lagrangian_matrix(p, x, Lam)
    H[n:, n:] = 2.0 * _gram(Ds, Lam @ Ds)
    R = N.T @ H @ N
    ok, lmin, v = _reduced_test(R, tols)
    witness = None
    if not ok:
        u = N @ v
        witness = {"z": u[:n], "Delta": u[n:].reshape(d, d)}
    rep.second_order = SecondOrder(True, ok, lmin, N.shape[1], witness)
    return rep


def certify_ssv_sym(p, x, F, Lam, tols=DEFAULT_TOLS):
    """As :func:`certify_ssv` with F and the directions Delta symmetric."""
    x, Lam = _nsdp_dims(p, x, Lam)
    F = as_symmetric(F)
    d, n = p.d, p.n
    if F.shape != (d, d):
        raise DimensionMismatch(f"F must be {(d, d)}, got {F.shape}")
    rep = _ssv_first_order(p, x, F, Lam, tols, "SSV_SYM")
    if not rep.first_order.passed:
        return rep
    Ds = sym_basis(d)
    cols = [svec(D) for D in p.DC_stack(x)] + [-svec(F @ D + D @ F) for D in Ds]
    M = np.stack(cols, axis=1)
    N = orth_null(M, tols.rank_tol)[0]
    s = Ds.shape[0]
    H = np.zeros((n + s, n + s))
    H[:n, :n] = _lagrangian_matrix(p, x, Lam)
    T = _gram(Ds, Lam @ Ds)
    H[n:, n:] = T + T.T
    R = N.T @ H @ N
    ok, lmin, v = _reduced_test(R, tols)
    witness = None
    if not ok:
        u = N @ v
        witness = {"z": u[:n], "Delta": np.tensordot(u[n:], Ds, axes=1)}
    rep.second_order = SecondOrder(True, ok, lmin, N.shape[1], witness)
    return rep


# --- auxiliary checks ----------------------------------------------------

class EcResult(NamedTuple):
    passed: bool
    offending: Optional[tuple]


def check_eigenvalue_condition(F, tol=RANK_TOL):
    """No two nonzero eigenvalues of symmetric F may sum to zero.

    Eigenvalues with ``|sigma| <= tol * max(1, |sigma|_max)`` count as zero.
    The offending pair is reported with 1-based indices into the
    nonincreasing spectrum.
    """
    _, w, _ = sym_eig(as_symmetric(F))
    cut = tol * max(1.0, np.max(np.abs(w)) if len(w) else 0.0)
    nz = [i for i in range(len(w)) if abs(w[i]) > cut]
    for a, i in enumerate(nz):
        for j in nz[a:]:
            if abs(w[i] + w[j]) <= cut:
                return EcResult(False, (i + 1, j + 1, float(w[i]), float(w[j])))
    return EcResult(True, None)


class StrictComplementarity(NamedTuple):
    passed: bool
    rank_X: int
    rank_L: int
    residual: float


def check_strict_complementarity(X, Lam, rank_tol=RANK_TOL):
    """``rank(X) + rank(Lam) = d``; the residual ``||Lam X||_F`` is reported, not enforced."""
    X = as_symmetric(X)
    Lam = as_symmetric(Lam)
    rx = sym_eig(X, rank_tol).rank
    rl = sym_eig(Lam, rank_tol).rank
    return StrictComplementarity(rx + rl == X.shape[0], rx, rl, float(np.linalg.norm(Lam @ X)))


def in_s2nc_cone(p, x, Lam, z, tol=1e-8, rank_tol=RANK_TOL):
    """Membership of z in the cone of the stronger second-order condition.

    With V spanning null(C(x)) split as ``[V1 V2]`` where V1 spans the range
    of Lam, z belongs iff ``V^T DC[z] V1 = 0`` and ``V2^T DC[z] V2 >= 0``.
    """
    x, Lam = _nsdp_dims(p, x, Lam)
    V = range_null_split(p.C_eval(x), rank_tol)[1]
    D = p.DC(x, np.asarray(z, dtype=float))
    if V.shape[1] == 0:
        return True
    P = range_null_split(V.T @ Lam @ V, rank_tol)
    V1, V2 = V @ P[0], V @ P[1]
    scale = tol * (1.0 + np.linalg.norm(D))
    if V1.shape[1] and np.linalg.norm(V.T @ D @ V1) > scale:
        return False
    if V2.shape[1] and lambda_min(V2.T @ D @ V2) < -scale:
        return False
    return True


def certify_nsdp_s2nc(p, x, Lam, tols=DEFAULT_TOLS):
    """Stronger second-order check, available only under strict complementarity.

    Under strict complementarity the cone of the stronger condition equals
    the subspace of :func:`certify_nsdp_2nc`, so that certificate is
    returned with a note.  Otherwise the second order is left unevaluated.
    """
    x, Lam = _nsdp_dims(p, x, Lam)
    sc = check_strict_complementarity(p.C_eval(x), Lam, tols.rank_tol)
    if not sc.passed:
        rep = certify_nsdp_1c(p, x, Lam, tols)
        rep.notes.append("strict complementarity fails: cone condition not evaluated")
        return rep
    rep = certify_nsdp_2nc(p, x, Lam, tols)
    rep.notes.append("strict complementarity holds: cone reduces to the 2NC subspace")
    return rep


class MultiplierRecovery(NamedTuple):
    Lam: np.ndarray
    residual: float
    null_dim: int


def recover_multiplier(p, x, rank_tol=RANK_TOL):
    """Least-squares multiplier supported on the null space of C(x).

    Writes ``Lam = V M V^T`` with V spanning null(C(x)) and solves
    ``min_M ||grad f(x) - DC_x^*(V M V^T)||``.  The minimum-norm M is taken
    when the recovery map is not injective; ``null_dim`` reports the
    dimension of its kernel.  M is not projected onto the PSD cone.
    """
    x = np.asarray(x, dtype=float).ravel()
    C = p.C_eval(x)
    lmin = lambda_min(C)
    if lmin < -rank_tol * (1.0 + np.linalg.norm(C, 2)):
        raise NotFeasible(f"C(x) has eigenvalue {lmin:.3e} < 0")
    V = range_null_split(C, rank_tol)[1]
    g = p.f_grad(x)
    q = V.shape[1]
    if q == 0:
        return MultiplierRecovery(np.zeros((p.d, p.d)), float(np.linalg.norm(g)), 0)
    basis = sym_basis(q)
    A = np.stack([p.DC_adj(x, V @ B @ V.T) for B in basis], axis=1)
    coef, *_ = np.linalg.lstsq(A, g, rcond=None)
    Lam = V @ smat(coef) @ V.T
    Lam = 0.5 * (Lam + Lam.T)
    resid = float(np.linalg.norm(g - p.DC_adj(x, Lam)))
    null_dim = A.shape[1] - int(np.linalg.matrix_rank(A)) if A.size else basis.shape[0]
    return MultiplierRecovery(Lam, resid, null_dim)


def with_tols(tols=None, **overrides):
    return replace(tols or DEFAULT_TOLS, **overrides)
