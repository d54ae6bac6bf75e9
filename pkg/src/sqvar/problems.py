"""Problem data model with analytic derivatives and built-in families.

Two problem shapes are supported:

* :class:`BcProblem` -- minimize a smooth ``h`` over PSD matrices X.
* :class:`NsdpProblem` -- minimize a smooth ``f(x)`` subject to ``C(x) >= 0``.

Derivatives are closed-form callbacks.  :func:`fd_check_derivatives`
compares them against central finite differences and is meant as a
validator, never as the source of derivatives.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BadDimension, DimensionMismatch, NonFinite
from .matcore import as_symmetric, check_finite, sym_basis


@dataclass(frozen=True)
class BcProblem:
    """Smooth objective on symmetric d x d matrices.

    ``hess_form(X, W1, W2)`` is the bilinear second derivative.  The
    optional ``hess_apply(X, W)`` returns the symmetric matrix ``G`` with
    ``<G, W2> = hess_form(X, W, W2)``; assemblers use it when present to
    avoid the quadratic number of form evaluations.
    """

    d: int
    eval: Callable
    grad: Callable
    hess_form: Callable
    hess_apply: Optional[Callable] = None
    family: str = "custom"
    params: dict = field(default_factory=dict, compare=False, repr=False)

    def hess_gram(self, X, Ws):
        """Matrix ``G[i, j] = D^2 h_X[W_i, W_j]`` for a stack of directions."""
        Ws = np.asarray(Ws, dtype=float)
        m = Ws.shape[0]
        if m == 0:
            return np.zeros((0, 0))
        if self.hess_apply is not None:
            HW = np.stack([self.hess_apply(X, W) for W in Ws])
            G = HW.reshape(m, -1) @ Ws.reshape(m, -1).T
        else:
            G = np.empty((m, m))
            for i in range(m):
                for j in range(i, m):
                    G[i, j] = G[j, i] = self.hess_form(X, Ws[i], Ws[j])
        return 0.5 * (G + G.T)


@dataclass(frozen=True)
class NsdpProblem:
    """``min f(x)  s.t.  C(x) >= 0`` with x in R^n and C(x) in S^d.

    Callbacks: ``f_eval(x)``, ``f_grad(x)``, ``f_hess_form(x, z1, z2)``,
    ``C_eval(x)``, ``DC(x, z)``, ``DC_adj(x, Lam)`` and the bilinear
    ``D2C_form(x, z1, z2)``.
    """

    n: int
    d: int
    f_eval: Callable
    f_grad: Callable
    f_hess_form: Callable
    C_eval: Callable
    DC: Callable
    DC_adj: Callable
    D2C_form: Callable
    family: str = "custom"
    params: dict = field(default_factory=dict, compare=False, repr=False)

    def f_hess_matrix(self, x):
        E = np.eye(self.n)
        H = np.array([[self.f_hess_form(x, E[i], E[j]) for j in range(self.n)] for i in range(self.n)])
        return 0.5 * (H + H.T) if self.n else np.zeros((0, 0))

    def DC_stack(self, x):
        """All partial derivatives ``DC_x[e_i]`` as an (n, d, d) array."""
        E = np.eye(self.n)
        if self.n == 0:
            return np.zeros((0, self.d, self.d))
        return np.stack([self.DC(x, e) for e in E])


def _pair(A, B):
    A = as_symmetric(A)
    B = as_symmetric(B)
    if A.shape != B.shape:
        raise DimensionMismatch(f"A is {A.shape} but B is {B.shape}")
    return A, B


def make_quadratic_square(A, B):
    """``h(X) = <A, X^2> + <B, X>``."""
    A, B = _pair(A, B)

    def h(X):
        return float(np.sum(A * (X @ X)) + np.sum(B * X))

    def grad(X):
        G = A @ X + X @ A + B
        return 0.5 * (G + G.T)

    def hess_form(X, W1, W2):
        return float(np.sum(A * (W1 @ W2 + W2 @ W1)))

    def hess_apply(X, W):
        G = A @ W + W @ A
        return 0.5 * (G + G.T)

    return BcProblem(A.shape[0], h, grad, hess_form, hess_apply,
                     family="quadratic_square", params={"A": A, "B": B})


def make_quadratic_hadamard(A, B):
    """``h(X) = <A, X o X> + <B, X>`` with o the entrywise product."""
    A, B = _pair(A, B)

    def h(X):
        return float(np.sum(A * X * X) + np.sum(B * X))

    def grad(X):
        return 2.0 * A * X + B

    def hess_form(X, W1, W2):
        return float(2.0 * np.sum(A * W1 * W2))

    def hess_apply(X, W):
        return 2.0 * A * W

    return BcProblem(A.shape[0], h, grad, hess_form, hess_apply,
                     family="quadratic_hadamard", params={"A": A, "B": B})


def make_least_squares(A_list, b):
    """``h(X) = 0.5 * sum_i (<A_i, X> - b_i)^2``."""
    mats = [as_symmetric(A) for A in A_list]
    if len({A.shape for A in mats}) > 1:
        raise DimensionMismatch("sensing matrices differ in size")
    As = np.stack(mats)
    b = np.asarray(b, dtype=float).ravel()
    if As.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"{As.shape[0]} matrices but {b.shape[0]} targets")
    check_finite(b)

    def op(X):
        return np.einsum("kij,ij->k", As, X)

    def adj(y):
        return np.einsum("k,kij->ij", y, As)

    def h(X):
        r = op(X) - b
        return float(0.5 * r @ r)

    def grad(X):
        return adj(op(X) - b)

    def hess_form(X, W1, W2):
        return float(op(W1) @ op(W2))

    def hess_apply(X, W):
        return adj(op(W))

    return BcProblem(As.shape[1], h, grad, hess_form, hess_apply,
                     family="least_squares", params={"A_list": As, "b": b})


def example_2_1_data(d, k):
    """Measurement matrices, targets, epsilon and eta for the Burer-Monteiro counterexample."""
    if d < 3:
        raise BadDimension("the construction needs d >= 3")
    if not 1 <= k <= d:
        raise BadDimension("need 1 <= k <= d")
    eps = 0.5 * np.sqrt(6.0 / k)
    e = np.eye(d)
    As = [np.outer(e[i], e[d - 1]) + np.outer(e[d - 1], e[i]) for i in range(d - 1)]
    As.append(eps * np.eye(d))
    As.append(eps * np.diag(np.r_[2.0 * np.ones(d - 1), 1.0]))
    b = np.zeros(d + 1)
    b[d - 1:] = eps * 5.0 * (d - 1) / 3.0
    eta = np.sqrt((d - 1) / k)
    return np.stack(As), b, eps, eta


def make_example_2_1(d, k):
    """Convex least-squares instance with a spurious width-k second-order point.

    Returns
    -------
    problem : BcProblem
    F_k : (d, k) ndarray
        ``eta_k [I_k; 0]`` with ``eta_k^2 = (d-1)/k``.
    X_star : (d, d) ndarray
        The unique minimizer ``5(d-1)/3 e_d e_d^T``.
    """
    As, b, _, eta = example_2_1_data(d, k)
    p = make_least_squares(As, b)
    p = BcProblem(p.d, p.eval, p.grad, p.hess_form, p.hess_apply,
                  family="example_2_1", params={"d": d, "k": k})
    F_k = np.zeros((d, k))
    F_k[:k, :k] = eta * np.eye(k)
    X_star = np.zeros((d, d))
    X_star[-1, -1] = 5.0 * (d - 1) / 3.0
    return p, F_k, X_star


def make_example_2_2():
    """``<A, X^2> + <B, X>`` with 2A + B = 0 and A indefinite."""
    A = np.array([[0.5, -1.0], [-1.0, 0.5]])
    B = np.array([[-1.0, 2.0], [2.0, -1.0]])
    return make_quadratic_square(A, B)


def make_example_b_1():
    """Hadamard quadratic whose symmetric factor [0 1; 1 0] is a local minimizer."""
    A = np.array([[10.0, 5.0], [5.0, -1.0]])
    B = np.array([[-20.0, 0.0], [0.0, 2.0]])
    return make_quadratic_hadamard(A, B)


def make_example_3_1():
    """``f(x) = (x+1)^2 / 2`` subject to ``[[x^2+1, x], [x, x^2+1]] >= 0`` (n=1, d=2)."""
    J = np.array([[0.0, 1.0], [1.0, 0.0]])
    I = np.eye(2)

    def f(x):
        return float(0.5 * (x[0] + 1.0) ** 2)

    def f_grad(x):
        return np.array([x[0] + 1.0])

    def f_hess_form(x, z1, z2):
        return float(z1[0] * z2[0])

    def C(x):
        return (x[0] ** 2 + 1.0) * I + x[0] * J

    def DC(x, z):
        return z[0] * (2.0 * x[0] * I + J)

    def DC_adj(x, Lam):
        return np.array([np.sum((2.0 * x[0] * I + J) * Lam)])

    def D2C_form(x, z1, z2):
        return 2.0 * z1[0] * z2[0] * I

    return NsdpProblem(1, 2, f, f_grad, f_hess_form, C, DC, DC_adj, D2C_form,
                       family="example_3_1", params={})


def make_affine_nsdp(C0, C_list, Q, c):
    """``f(x) = x^T Q x / 2 + c^T x`` subject to ``C0 + sum_i x_i C_i >= 0``."""
    C0 = as_symmetric(C0)
    Cs = np.stack([as_symmetric(Ci) for Ci in C_list]) if len(C_list) else np.zeros((0,) + C0.shape)
    Q = np.asarray(Q, dtype=float)
    Q = 0.5 * (Q + Q.T)
    c = np.asarray(c, dtype=float).ravel()
    n, d = Cs.shape[0], C0.shape[0]
    if Q.shape != (n, n) or c.shape != (n,) or Cs.shape[1:] != (d, d):
        raise DimensionMismatch("inconsistent affine NSDP data")

    def f(x):
        return float(0.5 * x @ Q @ x + c @ x)

    def f_grad(x):
        return Q @ x + c

    def f_hess_form(x, z1, z2):
        return float(z1 @ Q @ z2)

    def C(x):
        return C0 + np.einsum("i,ijk->jk", x, Cs)

    def DC(x, z):
        return np.einsum("i,ijk->jk", z, Cs)

    def DC_adj(x, Lam):
        return np.einsum("ijk,jk->i", Cs, Lam)

    def D2C_form(x, z1, z2):
        return np.zeros((d, d))

    return NsdpProblem(n, d, f, f_grad, f_hess_form, C, DC, DC_adj, D2C_form,
                       family="affine", params={"C0": C0, "C_list": Cs, "Q": Q, "c": c})


def make_planted_affine_nsdp(rng, n, d, rank):
    """Convex affine instance with a planted KKT pair.

    ``C(x_bar)`` has the requested rank and the planted multiplier fills the
    null space of ``C(x_bar)`` (strict complementarity), so the pair is the
    unique solution when the constraint map is injective on it.

    Returns
    -------
    problem, x_bar, Lam_bar
    """
    if not 0 <= rank <= d:
        raise BadDimension("rank must lie in [0, d]")
    U = np.linalg.qr(rng.standard_normal((d, d)))[0]
    P = (U[:, :rank] * rng.uniform(0.5, 2.0, rank)) @ U[:, :rank].T
    Lam = (U[:, rank:] * rng.uniform(0.5, 2.0, d - rank)) @ U[:, rank:].T
    Cs = [0.5 * (G + G.T) for G in rng.standard_normal((n, d, d))]
    x_bar = rng.standard_normal(n)
    C0 = P - np.einsum("i,ijk->jk", x_bar, np.stack(Cs))
    G = rng.standard_normal((n, n))
    Q = G @ G.T / n + np.eye(n)
    adj = np.array([np.sum(Ci * Lam) for Ci in Cs])
    # grad f(x_bar) = Q x_bar + c must equal DC^*(Lam)
    c = adj - Q @ x_bar
    return make_affine_nsdp(C0, Cs, Q, c), x_bar, 0.5 * (Lam + Lam.T)


def make_nnm_bc(inner, lam):
    """Lift a nuclear-norm-regularized problem to the PSD-block form.

    ``inner`` must expose ``d1``, ``d2``, ``h_eval``, ``h_grad`` and
    ``h_hess_form`` on d1 x d2 matrices (optionally ``h_hess_apply``).  The
    lifted objective is ``h(X) + lam/2 tr(Xbar)`` where X is the upper-right
    block of ``Xbar``.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    d1, d2 = inner.d1, inner.d2
    if d1 < 1 or d2 < 1:
        raise BadDimension("block dimensions must be positive")
    d = d1 + d2
    h_apply = getattr(inner, "h_hess_apply", None)

    def off(Xb):
        Xb = np.asarray(Xb)
        if Xb.shape != (d, d):
            raise DimensionMismatch(f"expected {(d, d)}, got {Xb.shape}")
        return Xb[:d1, d1:]

    def block(G, diag):
        out = np.zeros((d, d))
        out[:d1, :d1] = diag * np.eye(d1)
        out[d1:, d1:] = diag * np.eye(d2)
        out[:d1, d1:] = 0.5 * G
        out[d1:, :d1] = 0.5 * G.T
        return out

    def h(Xb):
        return float(inner.h_eval(off(Xb)) + 0.5 * lam * np.trace(Xb))

    def grad(Xb):
        return block(inner.h_grad(off(Xb)), 0.5 * lam)

    def hess_form(Xb, W1, W2):
        return float(inner.h_hess_form(off(Xb), off(W1), off(W2)))

    hess_apply = None
    if h_apply is not None:
        def hess_apply(Xb, W):
            return block(h_apply(off(Xb), off(W)), 0.0)

    return BcProblem(d, h, grad, hess_form, hess_apply, family="nnm_bc",
                     params={"inner": inner, "lambda": lam})


@dataclass
class FdReport:
    grad_err: float
    hess_err: float
    extra: dict = field(default_factory=dict)

    @property
    def worst(self):
        return max([self.grad_err, self.hess_err] + list(self.extra.values()))

    def passes(self, tol):
        return self.worst <= tol


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _mrel(A, B):
    return float(np.linalg.norm(A - B) / max(1.0, np.linalg.norm(A), np.linalg.norm(B)))


def _unit_sym(rng, d):
    G = rng.standard_normal((d, d))
    G = G + G.T
    return G / np.linalg.norm(G)


def fd_check_derivatives(problem, point, step=1e-5, n_dirs=20, seed=0):
    """Compare analytic derivatives with central finite differences.

    Errors are ``|fd - analytic| / max(1, |fd|, |analytic|)``, maximized over
    ``n_dirs`` random unit directions.  For an :class:`NsdpProblem` the
    report also carries the errors of ``DC``, ``D2C_form`` and the adjoint
    identity ``<DC(x, z), L> = DC_adj(x, L) . z``.
    """
    if not 0 < step <= 1e-2:
        raise ValueError("step must lie in (0, 1e-2]")
    point = np.asarray(point, dtype=float)
    check_finite(point)
    rng = np.random.default_rng(seed)
    t = step
    g_err = h_err = 0.0
    if isinstance(problem, BcProblem):
        X = point
        G = problem.grad(X)
        for _ in range(n_dirs):
            E, E2 = _unit_sym(rng, problem.d), _unit_sym(rng, problem.d)
            fd = (problem.eval(X + t * E) - problem.eval(X - t * E)) / (2 * t)
            g_err = max(g_err, _rel(fd, float(np.sum(G * E))))
            fd2 = np.sum((problem.grad(X + t * E) - problem.grad(X - t * E)) * E2) / (2 * t)
            h_err = max(h_err, _rel(fd2, problem.hess_form(X, E, E2)))
            if problem.hess_apply is not None:
                h_err = max(h_err, _rel(float(np.sum(problem.hess_apply(X, E) * E2)),
                                        problem.hess_form(X, E, E2)))
        rep = FdReport(g_err, h_err)
    elif isinstance(problem, NsdpProblem):
        x = point
        g = problem.f_grad(x)
        dc_err = d2c_err = adj_err = 0.0
        for _ in range(n_dirs):
            z = rng.standard_normal(problem.n)
            z /= max(np.linalg.norm(z), 1e-300)
            z2 = rng.standard_normal(problem.n)
            z2 /= max(np.linalg.norm(z2), 1e-300)
            fd = (problem.f_eval(x + t * z) - problem.f_eval(x - t * z)) / (2 * t)
            g_err = max(g_err, _rel(fd, float(g @ z)))
            fd2 = (problem.f_grad(x + t * z) - problem.f_grad(x - t * z)) @ z2 / (2 * t)
            h_err = max(h_err, _rel(fd2, problem.f_hess_form(x, z, z2)))
            fdC = (problem.C_eval(x + t * z) - problem.C_eval(x - t * z)) / (2 * t)
            dc_err = max(dc_err, _mrel(fdC, problem.DC(x, z)))
            fdD = (problem.DC(x + t * z, z2) - problem.DC(x - t * z, z2)) / (2 * t)
            d2c_err = max(d2c_err, _mrel(fdD, problem.D2C_form(x, z, z2)))
            L = _unit_sym(rng, problem.d)
            lhs = float(np.sum(problem.DC(x, z) * L))
            rhs = float(problem.DC_adj(x, L) @ z)
            adj_err = max(adj_err, abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))
        rep = FdReport(g_err, h_err, {"DC": dc_err, "D2C": d2c_err, "adjoint": adj_err})
    else:
        raise TypeError(f"unsupported problem type {type(problem).__name__}")
    if not np.isfinite(rep.worst):
        raise NonFinite("finite-difference comparison produced a non-finite value")
    return rep


def adjoint_error(problem, x, z, Lam):
    """Relative mismatch of ``<DC(x,z), Lam>`` against ``DC_adj(x,Lam) . z``."""
    lhs = float(np.sum(problem.DC(x, z) * Lam))
    rhs = float(np.asarray(problem.DC_adj(x, Lam)) @ z)
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


# --- JSON schema -----------------------------------------------------------

FAMILIES = ("quadratic_square", "quadratic_hadamard", "least_squares",
            "example_2_1", "example_3_1", "nnm_bc")


def problem_from_dict(spec):
    """Build a problem from the JSON schema ``{"family": ..., ...}``."""
    fam = spec.get("family")
    if fam == "quadratic_square":
        return make_quadratic_square(spec["A"], spec["B"])
    if fam == "quadratic_hadamard":
        return make_quadratic_hadamard(spec["A"], spec["B"])
    if fam == "least_squares":
        return make_least_squares(spec["A_list"], spec["b"])
    if fam == "example_2_1":
        d = int(spec["d"])
        return make_example_2_1(d, int(spec.get("k", d)))[0]
    if fam == "example_3_1":
        return make_example_3_1()
    if fam == "nnm_bc":
        from .nucnorm import nnm_problem_from_dict
        inner = nnm_problem_from_dict(spec["inner"], spec["lambda"])
        return make_nnm_bc(inner, inner.lam)
    raise KeyError(f"unknown problem family {fam!r}; expected one of {FAMILIES}")


def problem_to_dict(problem):
    fam = problem.family
    p = problem.params
    if fam in ("quadratic_square", "quadratic_hadamard"):
        return {"family": fam, "A": p["A"].tolist(), "B": p["B"].tolist()}
    if fam == "least_squares":
        return {"family": fam, "A_list": p["A_list"].tolist(), "b": p["b"].tolist()}
    if fam == "example_2_1":
        return {"family": fam, "d": p["d"], "k": p["k"]}
    if fam == "example_3_1":
        return {"family": fam}
    if fam == "nnm_bc":
        from .nucnorm import nnm_problem_to_dict
        return {"family": fam, "lambda": p["lambda"], "inner": nnm_problem_to_dict(p["inner"])}
    raise KeyError(f"family {fam!r} has no JSON form")


def random_sym(rng, d, scale=1.0):
    G = rng.standard_normal((d, d))
    return scale * 0.5 * (G + G.T)


def sym_directions(d):
    """Orthonormal basis of S^d, shape (d(d+1)/2, d, d)."""
    return sym_basis(d)
