"""Scripted end-to-end checks of the four worked examples.

Each ``reproduce_*`` function returns a dict with one entry per sub-claim
(``name``, ``pass`` and the measured quantities) and an overall ``pass``.
"""
import numpy as np

from .certify import (certify_bc_1c, certify_bc_2nc, certify_dss, certify_dss_sym,
                      certify_nsdp_1c, certify_nsdp_2nc, certify_ssv_sym, bc_form,
                      check_eigenvalue_condition, recover_multiplier)
from .lift import factor_any
from .problems import (example_2_1_data, make_example_2_1, make_example_2_2,
                       make_example_3_1, make_example_b_1)
from .solve import SECOND_ORDER, SolveOptions, sample_local_check, solve_dss, solve_dss_sym


def _claim(name, ok, **detail):
    return {"name": name, "pass": bool(ok), **detail}


def _result(example, claims):
    return {"example": example, "claims": claims, "pass": all(c["pass"] for c in claims)}


def reproduce_ex2_1(d=6, k=3, starts=5, seed=0):
    """Width-k factor that is a second-order point but not a global minimizer."""
    p, Fk, X_star = make_example_2_1(d, k)
    _, _, eps, _ = example_2_1_data(d, k)
    claims = []
    rep = certify_dss(p, Fk)
    grad_res = rep.first_order.residuals["grad"]
    lmin = rep.second_order.lambda_min
    claims.append(_claim("F_k is a DSS second-order point", rep.passed and grad_res <= 1e-10 and lmin >= -1e-8,
                         grad_residual=grad_res, lambda_min=lmin, notes=rep.notes))
    g = p.eval(Fk @ Fk.T)
    expect = 5.0 * (d - 1) ** 2 / (12.0 * k)
    claims.append(_claim("g(F_k) = 5(d-1)^2/(12k)", abs(g - expect) <= 1e-10 * expect, value=g, expected=expect))
    G = p.grad(Fk @ Fk.T)
    E = np.zeros((d, d))
    E[-1, -1] = -eps ** 2 * (d - 1) / 3.0
    claims.append(_claim("grad h(F_k F_k^T) = -eps^2 (d-1)/3 e_d e_d^T",
                         np.linalg.norm(G - E) <= 1e-10 * (1 + np.linalg.norm(E)),
                         error=float(np.linalg.norm(G - E))))
    hs = p.eval(X_star)
    claims.append(_claim("h(X_*) = 0", abs(hs) <= 1e-12, value=hs))
    claims.append(_claim("X_* passes the PSD second-order check", certify_bc_2nc(p, X_star).passed))
    claims.append(_claim("square factor of X_* passes the DSS check", certify_dss(p, factor_any(X_star, d)).passed))
    pd = make_example_2_1(d, d)[0]
    rng = np.random.default_rng(seed)
    finals = []
    for s in range(starts):
        F, tr = solve_dss(pd, rng.standard_normal((d, d)), SolveOptions(seed=seed + s))
        finals.append({"seed": seed + s, "objective": pd.eval(F @ F.T), "termination": tr.termination})
    claims.append(_claim("k = d solver reaches g <= 1e-8",
                         all(f["objective"] <= 1e-8 for f in finals), runs=finals))
    return _result("ex2.1", claims)


def reproduce_ex2_2():
    """X = I is first-order but not second-order; F = diag(1,-1) passes the symmetric check."""
    p = make_example_2_2()
    I = np.eye(2)
    claims = []
    r1 = certify_bc_1c(p, I)
    claims.append(_claim("X = I passes first order", r1.first_order.passed,
                         residuals=r1.first_order.residuals))
    r2 = certify_bc_2nc(p, I)
    W = r2.second_order.witness
    val = bc_form(p, I, W) / float(np.sum(W * W)) if W is not None else None
    claims.append(_claim("X = I refuted at second order with witness value -1",
                         r2.first_order.passed and r2.second_order.passed is False and abs(val + 1.0) <= 1e-8,
                         lambda_min=r2.second_order.lambda_min, witness_value=val))
    F = np.diag([1.0, -1.0])
    r3 = certify_dss_sym(p, F)
    claims.append(_claim("F = diag(1,-1) passes the symmetric-factor check", r3.passed,
                         lambda_min=r3.second_order.lambda_min))
    ec = check_eigenvalue_condition(F)
    claims.append(_claim("F = diag(1,-1) violates the eigenvalue condition", not ec.passed,
                         offending=list(ec.offending) if ec.offending else None))
    Fs, tr = solve_dss_sym(p, F + 1e-3 * np.array([[1.0, 0.5], [0.5, -1.0]]))
    claims.append(_claim("solver from near diag(1,-1) reaches a certified point",
                         tr.termination == SECOND_ORDER and certify_dss_sym(p, Fs).passed,
                         termination=tr.termination, F=Fs.tolist()))
    return _result("ex2.2", claims)


def reproduce_ex3_1():
    """Symmetric slack formulation certifies a point whose x has no multiplier."""
    p = make_example_3_1()
    x0 = np.array([0.0])
    F = np.diag([1.0, -1.0])
    Lam = np.array([[0.0, 0.5], [0.5, 0.0]])
    claims = []
    r = certify_ssv_sym(p, x0, F, Lam)
    claims.append(_claim("(0, diag(1,-1), Lam) passes the symmetric slack check",
                         r.passed and r.second_order.subspace_dim == 1,
                         subspace_dim=r.second_order.subspace_dim, lambda_min=r.second_order.lambda_min))
    ec = check_eigenvalue_condition(F)
    claims.append(_claim("F violates the eigenvalue condition", not ec.passed))
    rec = recover_multiplier(p, x0)
    claims.append(_claim("no multiplier at x = 0: residual 1", abs(rec.residual - 1.0) <= 1e-12,
                         residual=rec.residual))
    r1 = certify_nsdp_1c(p, x0, np.zeros((2, 2)))
    claims.append(_claim("x = 0 fails first order with stationarity residual 1",
                         not r1.first_order.passed and abs(r1.first_order.residuals["stationarity"] - 1.0) <= 1e-12,
                         residuals=r1.first_order.residuals))
    r4 = certify_ssv_sym(p, x0, np.eye(2), Lam)
    claims.append(_claim("F = I with the same Lam fails first order", not r4.first_order.passed,
                         complF=r4.first_order.residuals["complF"]))
    xm = np.array([-1.0])
    r5 = certify_nsdp_2nc(p, xm, recover_multiplier(p, xm).Lam)
    claims.append(_claim("x = -1 passes the NSDP second-order check", r5.passed))
    return _result("ex3.1", claims)


def reproduce_exb_1(radius=0.05, trials=10000, seed=0):
    """F = [0 1; 1 0] is a local minimizer of h(F^2) while X = F^2 = I is not one of h."""
    p = make_example_b_1()
    I = np.eye(2)
    F = np.array([[0.0, 1.0], [1.0, 0.0]])
    claims = []
    r1 = certify_bc_1c(p, I)
    claims.append(_claim("X = I passes first order", r1.first_order.passed))
    r2 = certify_bc_2nc(p, I)
    claims.append(_claim("X = I refuted at second order", r2.first_order.passed and r2.second_order.passed is False,
                         lambda_min=r2.second_order.lambda_min))
    r3 = certify_dss_sym(p, F)
    claims.append(_claim("F passes the symmetric-factor check", r3.passed, lambda_min=r3.second_order.lambda_min))
    chk = sample_local_check(lambda G: p.eval(G @ G), F, radius, trials, seed, symmetric=True)
    claims.append(_claim("sampled neighbourhood of F shows no decrease", chk.min_gap >= -1e-12,
                         min_gap=chk.min_gap, radius=radius, trials=trials))
    E = np.diag([0.0, 0.01])
    drop = p.eval(I + E) - p.eval(I)
    claims.append(_claim("E = diag(0, 0.01) decreases h at I", drop < 0, change=drop))
    return _result("exB.1", claims)


EXAMPLES = {"ex2.1": reproduce_ex2_1, "ex2.2": reproduce_ex2_2,
            "ex3.1": reproduce_ex3_1, "exB.1": reproduce_exb_1}
