"""Tensor families and initial guesses used by the experiments.

Seeded generators draw from ``numpy.random.default_rng(seed)`` so identical
seeds give identical tensors (and identical files).
"""

import numpy as np

from .errors import BadDimsError, ConstraintViolatedError, RankTooLargeError
from .tensors import CPTensor, RankOneRep, TuckerTensor, outer


def gram_schmidt(a):
    """Orthonormalize the columns of ``a`` with modified Gram-Schmidt."""
    q = np.array(a, dtype=np.float64)
    n_cols = q.shape[1]
    for j in range(n_cols):
        for i in range(j):
            q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        nrm = np.linalg.norm(q[:, j])
        if nrm == 0:
            raise BadDimsError("columns are linearly dependent")
        q[:, j] /= nrm
    # one re-orthogonalization pass keeps B^T B = I at round-off level
    for j in range(n_cols):
        for i in range(j):
            q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        q[:, j] /= np.linalg.norm(q[:, j])
    return q


def random_orthonormal(n, r, rng):
    if r > n:
        raise RankTooLargeError(f"cannot fit {r} orthonormal columns in dimension {n}")
    return gram_schmidt(rng.uniform(-1.0, 1.0, (n, r)))


def gen_mohlenkamp():
    """``2 e1⊗e1⊗e1 + e2⊗e2⊗e2`` in ``(R^2)^⊗3``."""
    eye = np.eye(2)
    return CPTensor(np.array([2.0, 1.0]), (eye, eye, eye), orthonormal=True)


def gen_initial_tau(tau, d=3):
    """Initial guess with every factor equal to ``(tau, 1)``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return RankOneRep([np.array([tau, 1.0]) for _ in range(d)])


def gen_b_lambda(lam, d=3, n=2, seed=0):
    """``⊗p + lam * sum_mu (q ⊗ .. ⊗ p@mu ⊗ .. ⊗ q)`` with random orthonormal ``p, q``.

    Returns ``(b, p, q)``. For ``d = 3`` this is
    ``p⊗p⊗p + lam (p⊗q⊗q + q⊗p⊗q + q⊗q⊗p)``.
    """
    if n < 2 or d < 3:
        raise BadDimsError("need n >= 2 and d >= 3")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    pq = random_orthonormal(n, 2, np.random.default_rng(seed))
    p, q = pq[:, 0], pq[:, 1]
    b = outer([p] * d)
    for mu in range(d):
        fs = [q] * d
        fs[mu] = p
        b = b + lam * outer(fs)
    return b, p, q


def gen_orthogonal_cp(weights, dims, r=None, seed=0):
    """CP tensor with descending ``weights`` and seeded orthonormal factor matrices."""
    w = np.array(weights, dtype=np.float64)
    r = w.size if r is None else int(r)
    if w.size != r:
        raise BadDimsError(f"{w.size} weights for rank {r}")
    if np.any(w <= 0) or np.any(np.diff(w) > 0):
        raise BadDimsError("weights must be positive and descending")
    if r > min(dims):
        raise RankTooLargeError(f"rank {r} exceeds smallest mode size {min(dims)}")
    rng = np.random.default_rng(seed)
    mats = tuple(random_orthonormal(n, r, rng) for n in dims)
    return CPTensor(w, mats, orthonormal=True)


def ordering_constraints_hold(lam, alpha2, alpha3):
    """Conditions under which the two mode orders select different dominant terms."""
    if not 0 < lam < 1:
        return False
    if not (alpha2 >= 1 >= alpha3 > 0):
        return False
    return alpha2**3 * alpha3**2 >= lam**-5 >= alpha2**2 * alpha3**3


def gen_ordering_example(lam, alpha2, alpha3):
    """``e1⊗e1⊗e1 + lam e2⊗e2⊗e2`` and the start ``p_mu = e1 + alpha_mu e2``.

    ``alpha_1`` is set to 1; it is irrelevant because the first micro step
    overwrites factor 1. Returns ``(CPTensor, RankOneRep)``.
    """
    if not ordering_constraints_hold(lam, alpha2, alpha3):
        raise ConstraintViolatedError(
            f"need 0<lam<1, alpha2>=1>=alpha3>0 and alpha2^3 alpha3^2 >= lam^-5 >= alpha2^2 alpha3^3 "
            f"(got {alpha2**3 * alpha3**2:.4g}, {lam**-5:.4g}, {alpha2**2 * alpha3**3:.4g})"
        )
    eye = np.eye(2)
    t = CPTensor(np.array([1.0, lam]), (eye, eye, eye), orthonormal=True)
    init = RankOneRep([np.array([1.0, a]) for a in (1.0, alpha2, alpha3)])
    return t, init


def gen_synthetic_order4(seed=0, dims=(6, 6, 6, 6), ranks=(3, 3, 3, 3)):
    """Random order-4 Tucker tensor: uniform core, orthonormal factors."""
    dims = tuple(int(n) for n in dims)
    ranks = tuple(int(t) for t in ranks)
    if len(dims) != 4 or len(ranks) != 4:
        raise BadDimsError("need four dims and four ranks")
    if any(t < 1 or t > n for t, n in zip(ranks, dims)):
        raise BadDimsError(f"ranks {ranks} incompatible with dims {dims}")
    rng = np.random.default_rng(seed)
    core = rng.uniform(-1.0, 1.0, ranks)
    mats = tuple(random_orthonormal(n, t, rng) for n, t in zip(dims, ranks))
    return TuckerTensor(core, mats)


GENERATORS = ("mohlenkamp", "b_lambda", "orthogonal_cp", "ordering", "synthetic_order4")
