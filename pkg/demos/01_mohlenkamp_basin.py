# # Two basins of one small tensor
#
# The target is b = 2 e1⊗e1⊗e1 + e2⊗e2⊗e2. Its global best rank-one
# approximation is the first term; the second term is a local minimizer.
# Starting ALS from (tau e1 + e2) in every mode, the start tau decides
# which term ALS finds, and the switch happens at tau = 1/2.

import numpy as np

from rankone_als import gen_initial_tau, gen_mohlenkamp, solve, to_dense
from rankone_als.diagnostics import basin_angle, classify_mode

t = gen_mohlenkamp()
b = to_dense(t)

# ## Where does each start go?

for tau in (0.4, 0.495, 0.4999, 0.5001, 0.505, 0.6):
    res = solve(b, gen_initial_tau(tau))
    print(f"tau={tau:<7} sweeps={res.trace.n_sweeps:<3} f={res.trace.sweep_f[-1]:+.12f}")

# f = -0.4 is the global minimum (2e1⊗e1⊗e1) and f = -0.1 the local one.

# ## How fast?
#
# The per-sweep ratios of the factor tangent collapse towards zero, the
# signature of superlinear convergence.

res = solve(b, gen_initial_tau(0.6))
est = classify_mode(res.trace, 0, t.term(0), floor=1e-9, successor_floor=0.0)
print("ratios:", np.array2string(est.tail, precision=3))
print("class:", est.classification)

# ## The basin boundary
#
# The boundary tau = 1/2 is the tangent of the basin angle for weights 2, 1
# in order three. In higher order the basin of the larger term shrinks.

for d in (3, 4, 5, 10):
    print(f"d={d:<3} tan(phi*)={np.tan(basin_angle(2, 1, d)):.6f}")
