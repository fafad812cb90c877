# # Checking a critical point
#
# At a critical point of rank-one ALS every mode pair (nu, mu) gives a
# matrix M whose singular values include ||v||. At a minimizer ||v|| is the
# largest one. A saddle can fail that test.

import numpy as np

from rankone_als import gen_mohlenkamp, to_dense
from rankone_als.oracles import singular_certificate, stationarity_residual
from rankone_als.tensors import outer

e1, e2 = np.eye(2)
b = to_dense(gen_mohlenkamp())

for name, point in (("global", [2 * e1, e1, e1]), ("local", [e2, e2, e2])):
    cert = singular_certificate(point, b, 0, 1)
    print(f"{name:<7} ||v||={cert.norm_v:.3f} sigma={np.round(cert.singular_values, 6)} largest={cert.matches_norm}")

# ## A saddle
#
# For 1.5 e1⊗e1⊗e1 + e2⊗e2⊗e1 the point e2⊗e2⊗e1 is critical, but the
# (1,2) pair matrix is diag(1.5, 1): a better rank-one fit exists.

s = 1.5 * outer([e1, e1, e1]) + outer([e2, e2, e1])
point = [e2, e2, e1]
print("stationarity residual:", stationarity_residual(point, s))
cert = singular_certificate(point, s, 0, 1)
print("saddle  sigma =", cert.singular_values, "largest =", cert.matches_norm)
