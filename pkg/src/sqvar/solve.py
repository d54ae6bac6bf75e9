"""Second-order solvers for the squared-variable formulations.

The workhorse is a dense trust-region Newton method on a flat parameter
vector.  It stops only when the gradient is small *and* the exact Hessian
has no significant negative eigenvalue, stepping along the most negative
eigenvector when a first-order point turns out to be a saddle.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq

from .certify import (Tolerances, certify_ssv, dss_hessian, dss_sym_hessian,
                      _gram)
from .errors import NonFinite
from .matcore import as_factor, as_symmetric, psd_project, psd_sqrt, smat, svec, sym_product

log = logging.getLogger(__name__)

FIRST_ORDER = "FirstOrder"
SECOND_ORDER = "SecondOrder"
MAX_ITER = "MaxIter"
STALLED = "Stalled"
ROUNDOFF = 1e-14


@dataclass(frozen=True)
class AuglagOptions:
    rho_init: float = 10.0
    rho_growth: float = 4.0
    dual_step_count: int = 5
    inner_tol: float = 1e-11
    rho_max: float = 1e12
    max_outer: int = 60
    feas_tol: float = 1e-10


@dataclass(frozen=True)
class SolveOptions:
    max_iter: int = 500
    grad_tol: float = 1e-10
    curv_tol: float = 1e-6
    initial_radius: float = 1.0
    seed: int = 0
    auglag: AuglagOptions = field(default_factory=AuglagOptions)

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        for name in ("grad_tol", "curv_tol", "initial_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SolveTrace:
    records: list = field(default_factory=list)
    termination: Optional[str] = None

    def log(self, **rec):
        self.records.append(rec)

    @property
    def objectives(self):
        return [r["objective"] for r in self.records if "objective" in r]

    def to_jsonl(self):
        lines = [json.dumps(_jsonable(r)) for r in self.records]
        lines.append(json.dumps({"termination": self.termination}))
        return "\n".join(lines) + "\n"


def _jsonable(rec):
    out = {}
    for k, v in rec.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        out[k] = v
    return out


# --- trust-region core ---------------------------------------------------

def _tr_step(g, H, radius):
    """Exact solution of ``min g.p + p.H.p/2, ||p|| <= radius`` by eigendecomposition."""
    w, Q = np.linalg.eigh(H)
    a = Q.T @ g
    if w[0] > 0:
        p = -(a / w)
        if np.linalg.norm(p) <= radius:
            return Q @ p
    lo = max(0.0, -w[0])
    gap = 1e-12 * (1.0 + np.max(np.abs(w)))
    deg = np.abs(w - w[0]) <= gap if w[0] <= 0 else np.zeros_like(w, dtype=bool)

    def norm_p(lam):
        return np.linalg.norm(a / (w + lam))

    if w[0] <= 0:
        # hard case when the component along the bottom eigenspace vanishes
        rest = np.where(deg, 0.0, a / np.where(deg, 1.0, w + lo))
        if np.linalg.norm(a[deg]) <= 1e-12 * (1.0 + np.linalg.norm(a)) and np.linalg.norm(rest) <= radius:
            tau = np.sqrt(max(radius ** 2 - np.linalg.norm(rest) ** 2, 0.0))
            p = -rest
            p[np.argmax(deg)] += tau
            return Q @ p
    hi = lo + np.linalg.norm(a) / radius + gap
    f_lo = lo + gap
    if norm_p(f_lo) <= radius:
        lam = f_lo
    else:
        lam = brentq(lambda t: 1.0 / radius - 1.0 / norm_p(t), f_lo, hi, xtol=1e-14, rtol=1e-12)
    return Q @ (-(a / (w + lam)))


class _Result(NamedTuple):
    x: np.ndarray
    trace: SolveTrace


def trust_region(fun, grad, hess, x0, opts, trace=None):
    """Minimize a smooth function to an approximate second-order point.

    Parameters
    ----------
    fun, grad, hess : callables on flat vectors
    x0 : ndarray
    opts : SolveOptions

    Returns
    -------
    x, trace
        ``trace.termination`` is one of ``SecondOrder``, ``MaxIter`` or
        ``Stalled``.
    """
    rng = np.random.default_rng(opts.seed)
    trace = trace if trace is not None else SolveTrace()
    x = np.array(x0, dtype=float)
    radius = opts.initial_radius
    perturbed = False
    try:
        fx = fun(x)
        for it in range(opts.max_iter):
            g = grad(x)
            if not (np.isfinite(fx) and np.all(np.isfinite(g))):
                raise NonFinite("non-finite objective or gradient")
            gnorm = float(np.linalg.norm(g))
            H = hess(x)
            if not np.all(np.isfinite(H)):
                raise NonFinite("non-finite Hessian")
            w, Q = np.linalg.eigh(H)
            lmin = float(w[0]) if len(w) else np.inf
            hscale = 1.0 + (float(np.max(np.abs(w))) if len(w) else 0.0)
            rec = dict(iter=it, objective=float(fx), gradNorm=gnorm, minCurvEstimate=lmin,
                       radius=float(radius))
            first = gnorm <= opts.grad_tol * (1.0 + abs(fx))
            if first and lmin >= -opts.curv_tol * hscale:
                rec["event"] = "converged"
                trace.log(**rec)
                trace.termination = SECOND_ORDER
                return _Result(x, trace)
            if first:
                # saddle: escape along the most negative eigenvector
                v = Q[:, 0]
                if g @ v > 0:
                    v = -v
                t = max(radius, opts.initial_radius)
                for _ in range(60):
                    fn = fun(x + t * v)
                    if fn < fx:
                        break
                    t *= 0.5
                else:
                    fn = None
                if fn is not None:
                    x, fx = x + t * v, fn
                    rec["event"] = "escape"
                    trace.log(**rec)
                    continue
                if not perturbed and lmin >= -10.0 * opts.curv_tol * hscale:
                    u = rng.standard_normal(x.shape)
                    x = x + 10.0 * opts.grad_tol * u / np.linalg.norm(u)
                    fx = fun(x)
                    perturbed = True
                    rec["event"] = "perturb"
                    trace.log(**rec)
                    continue
                rec["event"] = "stalled"
                trace.log(**rec)
                trace.termination = STALLED
                return _Result(x, trace)
            p = _tr_step(g, H, radius)
            pred = -(g @ p + 0.5 * p @ H @ p)
            fn = fun(x + p)
            ared = fx - fn
            ratio = ared / pred if pred > 0 else -np.inf
            pn = np.linalg.norm(p)
            noise = ROUNDOFF * (1.0 + abs(fx))
            if ared > 0 and ratio > 1e-4:
                x, fx = x + p, fn
                rec["event"] = "accept"
                if ratio > 0.75 and pn >= 0.99 * radius:
                    radius = min(2.0 * radius, 1e8)
                elif ratio < 0.25:
                    radius = 0.25 * pn
            elif pred < noise and ared > -noise and np.linalg.norm(grad(x + p)) < gnorm:
                # decrease is below the resolution of f; judge by the gradient
                x, fx = x + p, fn
                rec["event"] = "accept_roundoff"
            else:
                rec["event"] = "reject"
                radius = 0.25 * pn
            trace.log(**rec)
            if radius < 1e-15 * (1.0 + np.linalg.norm(x)):
                trace.termination = STALLED
                return _Result(x, trace)
        trace.termination = MAX_ITER
    except (NonFinite, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.warning("trust region stopped: %s", exc)
        trace.log(event="error", message=str(exc))
        trace.termination = STALLED
    return _Result(x, trace)


# --- factored formulations -----------------------------------------------

def default_factor(p, k=None):
    """``psd_sqrt`` of the PSD projection of ``-grad h(0)``, as a d x k factor."""
    X0 = psd_project(-p.grad(np.zeros((p.d, p.d))))
    F = psd_sqrt(X0)
    k = p.d if k is None else k
    return F[:, :k] if k <= p.d else np.hstack([F, np.zeros((p.d, k - p.d))])


def dss_objective(p, d, k):
    """Flat-vector objective, gradient and Hessian of ``h(F F^T)``."""
    def F_of(v):
        return v.reshape(d, k)

    def fun(v):
        F = F_of(v)
        return float(p.eval(F @ F.T))

    def grad(v):
        F = F_of(v)
        return (2.0 * p.grad(F @ F.T) @ F).ravel()

    def hess(v):
        return dss_hessian(p, F_of(v))

    return fun, grad, hess


def solve_dss(p, F0=None, opts=None, trace=None):
    """Find an approximate second-order point of ``g(F) = h(F F^T)``.

    Returns
    -------
    F, trace
    """
    opts = opts or SolveOptions()
    F0 = default_factor(p) if F0 is None else as_factor(F0)
    d, k = F0.shape
    fun, grad, hess = dss_objective(p, d, k)
    x, trace = trust_region(fun, grad, hess, F0.ravel(), opts, trace)
    return x.reshape(d, k), trace


def dss_sym_objective(p, d):
    def fun(v):
        F = smat(v)
        return float(p.eval(F @ F))

    def grad(v):
        F = smat(v)
        return svec(2.0 * sym_product(p.grad(F @ F), F))

    def hess(v):
        return dss_sym_hessian(p, smat(v))

    return fun, grad, hess


def solve_dss_sym(p, F0=None, opts=None, trace=None):
    """As :func:`solve_dss` for ``g(F) = h(F^2)`` over symmetric F."""
    opts = opts or SolveOptions()
    F0 = default_factor(p) if F0 is None else as_symmetric(F0)
    fun, grad, hess = dss_sym_objective(p, F0.shape[0])
    x, trace = trust_region(fun, grad, hess, svec(F0), opts, trace)
    return smat(x), trace


# --- augmented Lagrangian for the slack formulation ----------------------

def _auglag_parts(p, Lam, rho):
    n, d = p.n, p.d
    m2 = d * d
    Ds = np.eye(m2).reshape(m2, d, d)

    def split(u):
        return u[:n], u[n:].reshape(d, d)

    def resid(x, F):
        return p.C_eval(x) - F @ F.T

    def fun(u):
        x, F = split(u)
        c = resid(x, F)
        return float(p.f_eval(x) - np.sum(Lam * c) + 0.5 * rho * np.sum(c * c))

    def grad(u):
        x, F = split(u)
        M = Lam - rho * resid(x, F)
        return np.concatenate([p.f_grad(x) - p.DC_adj(x, M), (2.0 * M @ F).ravel()])

    def hess(u):
        x, F = split(u)
        M = Lam - rho * resid(x, F)
        DCs = p.DC_stack(x)
        WF = np.einsum("ab,ncb->nac", F, Ds)
        WF = WF + WF.transpose(0, 2, 1)
        H = np.zeros((n + m2, n + m2))
        E = np.eye(n)
        for i in range(n):
            for j in range(i, n):
                H[i, j] = H[j, i] = p.f_hess_form(x, E[i], E[j]) - np.sum(M * p.D2C_form(x, E[i], E[j]))
        if n:
            H[:n, :n] += rho * _gram(DCs, DCs)
            H[:n, n:] = -rho * _gram(DCs, WF)
            H[n:, :n] = H[:n, n:].T
        T = _gram(Ds, M @ Ds)
        H[n:, n:] = T + T.T + rho * _gram(WF, WF)
        return 0.5 * (H + H.T)

    return fun, grad, hess, split, resid


def solve_ssv_auglag(p, x0, F0=None, opts=None, Lam0=None, trace=None):
    """Augmented-Lagrangian method for ``min f(x) s.t. C(x) = F F^T``.

    Each round minimizes
    ``f(x) - <Lam, C(x) - F F^T> + rho/2 ||C(x) - F F^T||^2`` over (x, F)
    with :func:`trust_region`, then updates ``Lam <- Lam - rho (C - F F^T)``.
    The penalty grows by ``rho_growth`` whenever the violation fails to
    halve.

    Returns
    -------
    x, F, Lam, trace
    """
    opts = opts or SolveOptions()
    al = opts.auglag
    x = np.asarray(x0, dtype=float).ravel().copy()
    d = p.d
    F = psd_sqrt(psd_project(p.C_eval(x))) if F0 is None else as_factor(F0).copy()
    Lam = np.zeros((d, d)) if Lam0 is None else as_symmetric(Lam0).copy()
    rho = al.rho_init
    trace = trace if trace is not None else SolveTrace()
    tols = Tolerances(feas_tol=al.feas_tol)
    inner = SolveOptions(max_iter=opts.max_iter, grad_tol=al.inner_tol, curv_tol=opts.curv_tol,
                         initial_radius=opts.initial_radius, seed=opts.seed)
    prev_viol = np.inf
    best = np.inf
    stuck = 0
    for outer in range(al.max_outer):
        fun, grad, hess, split, resid = _auglag_parts(p, Lam, rho)
        u, sub = trust_region(fun, grad, hess, np.concatenate([x, F.ravel()]), inner)
        x, F = split(u)
        F = F.copy()
        c = resid(x, F)
        viol = float(np.linalg.norm(c))
        Lam = Lam - rho * c
        Lam = 0.5 * (Lam + Lam.T)
        rep = certify_ssv(p, x, F, Lam, tols) if np.all(np.isfinite(u)) else None
        trace.log(iter=outer, objective=float(p.f_eval(x)), gradNorm=float(np.linalg.norm(grad(u))),
                  minCurvEstimate=sub.records[-1].get("minCurvEstimate") if sub.records else None,
                  rho=float(rho), violation=viol, inner=sub.termination)
        if rep is None:
            trace.termination = STALLED
            break
        if rep.first_order.passed:
            trace.termination = SECOND_ORDER if sub.termination == SECOND_ORDER else FIRST_ORDER
            break
        if viol > 0.5 * prev_viol:
            rho = min(rho * al.rho_growth, al.rho_max)
        if viol < best:
            best, stuck = viol, 0
        else:
            stuck += 1
        if rho >= al.rho_max and stuck >= al.dual_step_count:
            trace.termination = STALLED
            break
        prev_viol = viol
    else:
        trace.termination = MAX_ITER
    return x, F, Lam, trace


# --- sampling probe ------------------------------------------------------

class LocalCheck(NamedTuple):
    min_gap: float
    argmin: np.ndarray


def sample_local_check(objective, point, radius, trials=10000, seed=0, symmetric=False):
    """Smallest ``objective(point + E) - objective(point)`` over random E in a ball.

    E is drawn uniformly from the Frobenius ball of the given radius (from
    symmetric matrices when ``symmetric`` is set).  This is a sanity probe,
    not a certificate.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    point = np.asarray(point, dtype=float)
    f0 = objective(point)
    best, arg = np.inf, None
    if symmetric:
        m = point.shape[0] * (point.shape[0] + 1) // 2
    else:
        m = point.size
    for _ in range(trials):
        u = rng.standard_normal(m)
        u *= radius * rng.uniform() ** (1.0 / m) / np.linalg.norm(u)
        E = smat(u) if symmetric else u.reshape(point.shape)
        gap = objective(point + E) - f0
        if gap < best:
            best, arg = gap, E
    return LocalCheck(float(best), arg)
