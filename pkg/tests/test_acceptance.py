"""Acceptance criteria 1-9, each at its stated tolerance and runtime budget.

Every test records a single pass/fail line that pytest prints in the
"acceptance criteria" summary section.
"""
import time

import numpy as np

from sqvar.certify import (bc_form, certify_bc_1c, certify_bc_2nc, certify_dss, certify_dss_sym,
                           certify_nsdp_1c, certify_nsdp_2nc, certify_ssv_sym,
                           check_eigenvalue_condition, recover_multiplier, with_tols)
from sqvar.lift import construct_delta, construct_delta_sym, factor_any, lemma_t2_gap
from sqvar.matcore import pinv, psd_sqrt, random_orthogonal
from sqvar.nucnorm import (certify_nnm_1p, lift_nnm_1p, make_nnm_denoise, make_nnm_least_squares,
                           nuclear_norm_block, project_nnm, prox_grad_nnm_oracle, sensing_instance,
                           soft_threshold, solve_nnm_dss)
from sqvar.problems import (adjoint_error, fd_check_derivatives, make_example_2_1, make_example_2_2,
                            make_example_3_1, make_example_b_1, make_least_squares, make_nnm_bc,
                            make_planted_affine_nsdp, make_quadratic_hadamard, make_quadratic_square)
from sqvar.solve import SECOND_ORDER, SolveOptions, sample_local_check, solve_dss, solve_dss_sym, solve_ssv_auglag

I2 = np.eye(2)


def sym(rng, d):
    G = rng.standard_normal((d, d))
    return 0.5 * (G + G.T)


def feasible_direction(rng, X, tol=1e-9):
    w, U = np.linalg.eigh(X)
    null = np.abs(w) <= tol * max(1.0, np.max(np.abs(w)))
    W = U.T @ (2 * sym(rng, X.shape[0])) @ U
    W[np.ix_(null, null)] = 0.0
    return U @ W @ U.T


def annihilator(rng, F, tol=1e-9):
    U, s, _ = np.linalg.svd(F, full_matrices=True)
    r = int(np.sum(s > tol * max(1.0, s[0])))
    V = U[:, r:]
    G = rng.standard_normal((V.shape[1], V.shape[1]))
    return V @ G @ G.T @ V.T


def test_criterion_1_example_2_1(acceptance):
    t0 = time.perf_counter()
    failures = []
    for d in range(3, 9):
        for k in range(1, d):
            p, Fk, Xs = make_example_2_1(d, k)
            rep = certify_dss(p, Fk)
            g = p.eval(Fk @ Fk.T)
            want = 5 * (d - 1) ** 2 / (12 * k)
            ok = (rep.passed and rep.first_order.residuals["grad"] <= 1e-10
                  and rep.second_order.lambda_min >= -1e-8
                  and abs(g - want) <= 1e-10 * want and abs(p.eval(Xs)) <= 1e-12)
            if not ok:
                failures.append((d, k))
        p = make_example_2_1(d, d)[0]
        for seed in range(5):
            F0 = np.random.default_rng(seed).standard_normal((d, d))
            F, tr = solve_dss(p, F0, SolveOptions(seed=seed))
            if p.eval(F @ F.T) > 1e-8:
                failures.append((d, d, seed))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed <= 60
    acceptance(1, "Example 2.1 spurious width-k points and k = d solves", ok,
               f"{len(failures)} failures, {elapsed:.1f} s")
    assert ok, failures


def test_criterion_2_example_2_2(acceptance):
    t0 = time.perf_counter()
    p = make_example_2_2()
    r1 = certify_bc_1c(p, I2)
    r2 = certify_bc_2nc(p, I2)
    W = r2.second_order.witness
    value = bc_form(p, I2, W) / np.sum(W * W)
    r3 = certify_dss_sym(p, np.diag([1.0, -1.0]))
    elapsed = time.perf_counter() - t0
    ok = (r1.passed and r2.first_order.passed and r2.second_order.passed is False
          and abs(value + 1) <= 1e-8 and r3.passed and elapsed <= 1)
    acceptance(2, "Example 2.2 refutation with witness value -1", ok,
               f"witness value {value:.12f}, {elapsed:.3f} s")
    assert ok


def test_criterion_3_example_3_1(acceptance):
    t0 = time.perf_counter()
    p = make_example_3_1()
    F = np.diag([1.0, -1.0])
    rep = certify_ssv_sym(p, [0.0], F, 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]]))
    ec = check_eigenvalue_condition(F)
    rec = recover_multiplier(p, [0.0])
    elapsed = time.perf_counter() - t0
    ok = (rep.passed and rep.second_order.subspace_dim == 1 and not ec.passed
          and abs(rec.residual - 1.0) <= 1e-12 and elapsed <= 1)
    acceptance(3, "Example 3.1 symmetric slack certificate without a multiplier", ok,
               f"residual {rec.residual:.15f}, {elapsed:.3f} s")
    assert ok


def test_criterion_4_example_b_1(acceptance):
    t0 = time.perf_counter()
    p = make_example_b_1()
    F = np.array([[0.0, 1.0], [1.0, 0.0]])
    r1 = certify_bc_1c(p, I2)
    r2 = certify_bc_2nc(p, I2)
    r3 = certify_dss_sym(p, F)
    chk = sample_local_check(lambda G: p.eval(G @ G), F, 0.05, 10000, seed=0, symmetric=True)
    drop = p.eval(I2 + np.diag([0.0, 0.01])) - p.eval(I2)
    elapsed = time.perf_counter() - t0
    ok = (r1.passed and r2.second_order.passed is False and r3.passed
          and chk.min_gap >= -1e-12 and drop < 0 and elapsed <= 5)
    acceptance(4, "Example B.1 local minimizer in F but not in X", ok,
               f"minGap {chk.min_gap:.3e}, h(I+E)-h(I) {drop:.3e}, {elapsed:.2f} s")
    assert ok


def test_criterion_5_square_factor_round_trip(acceptance):
    rng = np.random.default_rng(5)
    fail_a = fail_b = 0
    tols = with_tols(curv_tol=1e-6)
    for _ in range(100):
        d = int(rng.integers(1, 6))
        G = rng.standard_normal((d, d))
        A = G @ G.T / d + 0.1 * np.eye(d)
        p = make_quadratic_square(A, sym(rng, d))
        F, tr = solve_dss(p, rng.standard_normal((d, d)))
        if tr.termination != SECOND_ORDER or not certify_bc_2nc(p, F @ F.T, tols).passed:
            fail_a += 1
    for _ in range(100):
        d = int(rng.integers(2, 6))
        r = int(rng.integers(1, d + 1))
        B = rng.standard_normal((d, r))
        X = B @ B.T
        As = [sym(rng, d) for _ in range(d * (d + 1) // 2 + 2)]
        p = make_least_squares(As, [np.sum(Ai * X) for Ai in As])
        for _ in range(20):
            F = factor_any(X, d, random_orthogonal(d, rng))
            if not certify_dss(p, F).passed:
                fail_b += 1
    ok = fail_a == 0 and fail_b == 0
    acceptance(5, "square-factor second-order round trip", ok,
               f"{fail_a} solver failures / 100, {fail_b} factor failures / 2000")
    assert ok


def test_criterion_6_symmetric_factor_conditional(acceptance):
    rng = np.random.default_rng(6)
    found = failures = skipped = 0
    while found < 100:
        d = int(rng.integers(2, 5))
        G = rng.standard_normal((d, d))
        p = make_quadratic_square(G @ G.T / d + 0.1 * np.eye(d), sym(rng, d))
        F, tr = solve_dss_sym(p, sym(rng, d))
        if tr.termination != SECOND_ORDER or not certify_dss_sym(p, F).passed:
            skipped += 1
            continue
        if not certify_bc_1c(p, F @ F).passed:
            failures += 1
        if not check_eigenvalue_condition(F).passed:
            skipped += 1
            continue
        found += 1
        if not certify_bc_2nc(p, F @ F).passed:
            failures += 1
    for _ in range(20):
        q, xb, Lb = make_planted_affine_nsdp(rng, 5, 3, 2)
        Fq = psd_sqrt(q.C_eval(xb))
        if not (certify_ssv_sym(q, xb, Fq, Lb).passed and check_eigenvalue_condition(Fq).passed
                and certify_nsdp_2nc(q, xb, Lb).passed):
            failures += 1
    # documented one-way behaviour when the eigenvalue condition fails
    e22 = make_example_2_2()
    Fe = np.diag([1.0, -1.0])
    one_way_22 = (certify_dss_sym(e22, Fe).passed and not check_eigenvalue_condition(Fe).passed
                  and certify_bc_1c(e22, Fe @ Fe).passed
                  and certify_bc_2nc(e22, Fe @ Fe).second_order.passed is False)
    e31 = make_example_3_1()
    one_way_31 = (certify_ssv_sym(e31, [0.0], Fe, 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]])).passed
                  and recover_multiplier(e31, [0.0]).residual == 1.0
                  and not certify_nsdp_1c(e31, [0.0], np.zeros((2, 2))).passed)
    ok = failures == 0 and one_way_22 and one_way_31
    acceptance(6, "symmetric-factor conditional equivalence", ok,
               f"{failures} failures over 100 EC instances + 20 planted, {skipped} skipped draws")
    assert ok


def test_criterion_7_lemma_suite(acceptance):
    rng = np.random.default_rng(7)
    gap_fail = delta_fail = sym_fail = 0
    for _ in range(1000):
        d = int(rng.integers(1, 9))
        k = int(rng.integers(1, d + 1))
        r = int(rng.integers(1, k + 1))
        F = rng.standard_normal((d, r)) @ rng.standard_normal((r, k))
        S = annihilator(rng, F)
        D = rng.standard_normal((d, k))
        scale = 1 + np.linalg.norm(S) * (np.linalg.norm(D) ** 2 + 1)
        if lemma_t2_gap(S, F, D) < -1e-10 * scale:
            gap_fail += 1
    for _ in range(500):
        d = int(rng.integers(1, 9))
        k = int(rng.integers(1, d + 1))
        r = int(rng.integers(1, k + 1))
        F = rng.standard_normal((d, r)) @ rng.standard_normal((r, k))
        X = F @ F.T
        W = feasible_direction(rng, X)
        D = construct_delta(F, W)
        S = annihilator(rng, F)
        nW = np.linalg.norm(W)
        t2 = np.trace(S @ (W @ pinv(X) @ W - D @ D.T))
        if (np.linalg.norm(F @ D.T + D @ F.T - W) > 1e-8 * (1 + nW)
                or abs(t2) > 1e-8 * (1 + np.linalg.norm(S) * nW ** 2)):
            delta_fail += 1
    done = 0
    while done < 500:
        d = int(rng.integers(1, 9))
        r = int(rng.integers(1, d + 1))
        w = np.zeros(d)
        w[:r] = rng.uniform(0.2, 3.0, r) * rng.choice([-1.0, 1.0], r)
        if np.min(np.abs(w[:r, None] + w[None, :r])) < 1e-2:
            continue
        done += 1
        Q = random_orthogonal(d, rng)
        F = (Q * w) @ Q.T
        X = F @ F
        W = feasible_direction(rng, X)
        D = construct_delta_sym(F, W)
        S = annihilator(rng, F)
        nW = np.linalg.norm(W)
        t2 = np.trace(S @ (W @ pinv(X) @ W - D @ D))
        if (np.linalg.norm(F @ D + D @ F - W) > 1e-8 * (1 + nW) or not np.array_equal(D, D.T)
                or abs(t2) > 1e-8 * (1 + np.linalg.norm(S) * nW ** 2)):
            sym_fail += 1
    ok = gap_fail == sym_fail == delta_fail == 0
    acceptance(7, "curvature-gap lemma and direction lifts", ok,
               f"gap {gap_fail}/1000, delta {delta_fail}/500, delta_sym {sym_fail}/500")
    assert ok


def test_criterion_8_nuclear_norm(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    block_fail = 0
    for _ in range(100):
        d1, d2 = int(rng.integers(1, 21)), int(rng.integers(1, 16))
        X = rng.standard_normal((d1, d2))
        s = np.linalg.svd(X, compute_uv=False).sum()
        if abs(nuclear_norm_block(X).value - s) > 1e-10 * (1 + s):
            block_fail += 1
    shrink_err = 0.0
    for seed in range(3):
        r = np.random.default_rng(100 + seed)
        M = np.outer(r.standard_normal(4), r.standard_normal(3)) + 0.1 * r.standard_normal((4, 3))
        lam = 0.05
        sol = solve_nnm_dss(make_nnm_denoise(M, lam), seed=seed)
        shrink_err = max(shrink_err, np.linalg.norm(sol.X - soft_threshold(M, lam)))
    p, Xt = sensing_instance(8, 6, 2, 120, seed=0)
    sol = solve_nnm_dss(p, seed=0)
    rel = np.linalg.norm(sol.X - Xt) / np.linalg.norm(Xt)
    Xo = prox_grad_nnm_oracle(p)
    gap = abs(p.objective(sol.X) - p.objective(Xo))
    # lift the oracle point; project the solver's block point
    tight = with_tols(feas_tol=1e-8)
    trips = 0
    for seed in range(5):
        r = np.random.default_rng(200 + seed)
        q = make_nnm_least_squares(r.standard_normal((20, 12)), r.standard_normal(20), 4, 3, 0.5)
        Xq = prox_grad_nnm_oracle(q)
        lifted = certify_bc_1c(make_nnm_bc(q, q.lam), lift_nnm_1p(q, Xq, tight), tight).passed
        s2 = solve_nnm_dss(q, seed=seed)
        Fb = np.vstack([s2.Y, s2.Z])
        projected = certify_nnm_1p(q, project_nnm(Fb @ Fb.T, 4).X, tight).passed
        trips += lifted and projected
    elapsed = time.perf_counter() - t0
    ok = (block_fail == 0 and shrink_err <= 1e-6 and rel <= 1e-3 and gap <= 1e-4
          and trips == 5 and elapsed <= 120)
    acceptance(8, "nuclear-norm pipeline", ok,
               f"block {block_fail}/100, shrink err {shrink_err:.1e}, recovery {rel:.1e}, "
               f"gap {gap:.1e}, round trips {trips}/5, {elapsed:.1f} s")
    assert ok


def test_criterion_9_derivatives(acceptance):
    rng = np.random.default_rng(9)
    nnm_inner = make_nnm_least_squares(rng.standard_normal((15, 12)), rng.standard_normal(15), 4, 3, 0.4)
    bc = {
        "quadratic_square": make_quadratic_square(sym(rng, 4), sym(rng, 4)),
        "quadratic_hadamard": make_quadratic_hadamard(sym(rng, 4), sym(rng, 4)),
        "least_squares": make_least_squares([sym(rng, 4) for _ in range(6)], rng.standard_normal(6)),
        "example_2_1": make_example_2_1(5, 2)[0],
        "nnm_bc": make_nnm_bc(nnm_inner, nnm_inner.lam),
    }
    nsdp = {"example_3_1": make_example_3_1(),
            "affine": make_planted_affine_nsdp(rng, 4, 3, 1)[0]}
    worst, adj = {}, 0.0
    for name, p in bc.items():
        worst[name] = max(fd_check_derivatives(p, sym(rng, p.d), seed=i).worst for i in range(50))
    for name, p in nsdp.items():
        errs = []
        for i in range(50):
            x = rng.standard_normal(p.n)
            errs.append(fd_check_derivatives(p, x, seed=i).worst)
            adj = max(adj, adjoint_error(p, x, rng.standard_normal(p.n), sym(rng, p.d)))
        worst[name] = max(errs)
    ok = max(worst.values()) <= 1e-5 and adj <= 1e-10
    acceptance(9, "finite-difference and adjoint checks", ok,
               f"worst fd {max(worst.values()):.1e}, adjoint {adj:.1e}")
    assert ok, worst
