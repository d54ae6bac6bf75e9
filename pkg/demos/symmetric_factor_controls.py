"""Symmetric square roots F^2 = X can certify points that are not second-order for X.

Two small instances where the eigenvalue condition fails, and one where it holds.
Run with ``python demos/symmetric_factor_controls.py``.
"""
import numpy as np

from sqvar import (bc_form, certify_bc_2nc, certify_dss_sym, certify_ssv_sym,
                   check_eigenvalue_condition, make_example_2_2, make_example_3_1,
                   recover_multiplier)

I = np.eye(2)
F = np.diag([1.0, -1.0])

# PSD-constrained quadratic: X = I is first order but has a descent direction.
p = make_example_2_2()
rep = certify_bc_2nc(p, I)
W = rep.second_order.witness
print("X = I second order:", rep.second_order.passed)
print("witness W =\n", np.round(W, 6))
print("Q(W) / ||W||^2 =", bc_form(p, I, W) / np.sum(W * W))

# The symmetric factor diag(1, -1) of the same X passes, because 1 + (-1) = 0.
print("\nF = diag(1,-1) passes symmetric check:", certify_dss_sym(p, F).passed)
print("eigenvalue condition:", check_eigenvalue_condition(F))

# Nonlinear SDP: the slack triple certifies, although x = 0 admits no multiplier.
q = make_example_3_1()
Lam = 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]])
rep = certify_ssv_sym(q, [0.0], F, Lam)
print("\nslack triple passes:", rep.passed, "subspace_dim =", rep.second_order.subspace_dim)
print("best multiplier residual at x = 0:", recover_multiplier(q, [0.0]).residual)

# When the factor is PSD the condition holds and the certificates agree.
Fp = np.array([[2.0, 0.5], [0.5, 1.0]])
print("\nPSD factor eigenvalue condition:", check_eigenvalue_condition(Fp).passed)
