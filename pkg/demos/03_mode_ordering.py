# # The sweep order can change the answer
#
# For an orthogonal CP tensor with weights (1, lambda) and a carefully
# tilted start, sweeping modes as (1,2,3) finds the global term while
# (1,3,2) finds the smaller one.

from rankone_als import SolverConfig, gen_ordering_example, inner, solve, to_dense
from rankone_als.diagnostics import tan_angle_tensor
from rankone_als.tensors import evaluate_rank_one

lam = 0.9
t, init = gen_ordering_example(lam, 2.0, 0.72)
b = to_dense(t)
terms = [evaluate_rank_one(t.term(j)) for j in range(2)]

for order in ((0, 1, 2), (0, 2, 1)):
    res = solve(b, init, SolverConfig(mode_order=order))
    v = evaluate_rank_one(res.rep)
    j = min(range(2), key=lambda j: tan_angle_tensor(v, terms[j]))
    label = "(" + ",".join(str(m + 1) for m in order) + ")"
    print(f"order {label}: term b{j + 1}, f={res.trace.sweep_f[-1]:+.12f}")

# The two values differ by (1 - lambda^2) / (2 (1 + lambda^2)):
print("predicted gap:", (1 - lam**2) / (2 * (1 + lam**2)))
print("||b||^2 =", inner(b, b))
