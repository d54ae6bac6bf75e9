"""Width matters: a convex least-squares SDP whose thin factorization has a spurious second-order point.

Run with ``python demos/burer_monteiro_width.py``.
"""
import numpy as np

from sqvar import certify_dss, make_example_2_1, solve_dss, SolveOptions

d = 6

# The PSD problem is convex with a unique minimizer X_* of rank one.
p, _, X_star = make_example_2_1(d, 1)
print(f"h(X_*) = {p.eval(X_star):.2e}")

# Thin factors F_k pass every second-order test of h(F F^T), yet sit at a positive value.
print("\n k   g(F_k)      lambda_min   passes")
for k in range(1, d):
    p, Fk, _ = make_example_2_1(d, k)
    rep = certify_dss(p, Fk)
    print(f"{k:2d}  {p.eval(Fk @ Fk.T):9.5f}  {rep.second_order.lambda_min:11.3e}   {rep.passed}")

# With a square factor the trap disappears: random starts all reach the global value.
p = make_example_2_1(d, d)[0]
rng = np.random.default_rng(0)
print("\nseed  final g     iterations  termination")
for seed in range(5):
    F, trace = solve_dss(p, rng.standard_normal((d, d)), SolveOptions(seed=seed))
    print(f"{seed:4d}  {p.eval(F @ F.T):9.2e}  {len(trace.records):10d}  {trace.termination}")
