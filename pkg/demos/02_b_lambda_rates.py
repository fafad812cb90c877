# # Linear and sublinear convergence on b_lambda
#
# b_lambda = p⊗p⊗p + lambda (p⊗q⊗q + q⊗p⊗q + q⊗q⊗p) with p ⟂ q. For
# lambda < 1/2 the best approximation is p⊗p⊗p and ALS converges linearly
# with a rate that tends to one as lambda approaches 1/2.

import numpy as np

from rankone_als import RankOneRep, SolverConfig, gen_b_lambda, solve
from rankone_als.diagnostics import classify_mode
from rankone_als.oracles import b_lambda_alphas, b_lambda_rate, best_rank_one_multistart

rng = np.random.default_rng(0)

# ## Measured versus predicted rate

for lam in (0.1, 0.2, 0.3, 0.4):
    b, p, q = gen_b_lambda(lam, seed=0)
    res = solve(b, [rng.standard_normal(2) for _ in range(3)], SolverConfig(tol_delta_f=0))
    est = classify_mode(res.trace, 0, RankOneRep([p, p, p]), floor=1e-9, successor_floor=0.0)
    print(f"lambda={lam}  measured={est.rho_hat:.6f}  predicted={b_lambda_rate(lam):.6f}  {est.classification}")

# ## At the threshold
#
# At lambda = 1/2 the ratio creeps up to one: the error decays sublinearly.

b, p, q = gen_b_lambda(0.5, seed=0)
cfg = SolverConfig(max_sweeps=2000, tol_grad=0, tol_delta_f=0, trace_every=10**9)
res = solve(b, [rng.standard_normal(2) for _ in range(3)], cfg)
est = classify_mode(res.trace, 0, RankOneRep([p, p, p]), floor=1e-9, successor_floor=0.0)
print(f"lambda=0.5  q_limsup={est.q_limsup:.5f}  {est.classification}")

# ## Past the threshold
#
# For lambda > 1/2 the minimizers move to (p + alpha q)^{⊗3} with two
# mirrored values of alpha. A multistart run finds both.

b, p, q = gen_b_lambda(0.7, seed=0)
r = best_rank_one_multistart(b, 20, config=SolverConfig(tol_grad=1e-14, tol_delta_f=0, trace_every=10**9))
print("global points found:", len(r.global_points))
print("alpha values:", sorted(b_lambda_alphas(0.7)))
