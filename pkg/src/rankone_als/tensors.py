"""Dense and structured tensors, the rank-one map and the contraction kernels.

Dense tensors are plain ``float64`` numpy arrays in C order (last index
varying fastest) with at least two axes. Modes are numbered from 0 in the
Python API.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadDimsError,
    DegenerateFactorError,
    DimMismatchError,
    ZeroTargetError,
)

_UNIT_TOL = 1e-12


def as_dense(values, dims=None):
    """Return ``values`` as a validated dense tensor.

    ``dims`` reshapes a flat value sequence given in C order.
    """
    arr = np.asarray(values, dtype=np.float64)
    if dims is not None:
        dims = tuple(int(n) for n in dims)
        if arr.size != int(np.prod(dims)):
            raise DimMismatchError(f"{arr.size} values do not fill dims {dims}")
        arr = arr.reshape(dims)
    if arr.ndim < 2:
        raise BadDimsError(f"tensor order must be at least 2, got {arr.ndim}")
    if 0 in arr.shape:
        raise BadDimsError(f"every mode size must be positive, got {arr.shape}")
    return arr


class RankOneRep:
    """Representation system ``(p_1, ..., p_d)`` of the rank-one tensor ``p_1 ⊗ ... ⊗ p_d``.

    Factors are copied into read-only float arrays. A zero factor is
    rejected unless ``allow_zero`` is set (the solver needs this for the
    slot that is about to be overwritten).
    """

    __slots__ = ("factors",)

    def __init__(self, factors, allow_zero=False):
        fs = []
        for mu, p in enumerate(factors):
            a = np.array(p, dtype=np.float64).reshape(-1)
            if a.size == 0:
                raise BadDimsError(f"factor {mu} is empty")
            if not allow_zero and not np.any(a):
                raise DegenerateFactorError(f"factor {mu} is the zero vector")
            a.flags.writeable = False
            fs.append(a)
        if len(fs) < 2:
            raise BadDimsError("a representation system needs at least two factors")
        self.factors = tuple(fs)

    @property
    def order(self):
        return len(self.factors)

    @property
    def dims(self):
        return tuple(p.size for p in self.factors)

    def __len__(self):
        return len(self.factors)

    def __getitem__(self, mu):
        return self.factors[mu]

    def __iter__(self):
        return iter(self.factors)

    def __repr__(self):
        return f"RankOneRep(dims={self.dims})"

    def sq_norms(self):
        return np.array([p @ p for p in self.factors])

    def normalized(self):
        """Unit-norm factors and the scale ``prod ||p_mu||``."""
        norms = np.sqrt(self.sq_norms())
        if np.any(norms == 0):
            raise DegenerateFactorError("cannot normalize a zero factor")
        return RankOneRep([p / s for p, s in zip(self.factors, norms)]), float(np.prod(norms))

    def replace(self, mu, p):
        fs = list(self.factors)
        fs[mu] = p
        return RankOneRep(fs)

    def to_dense(self):
        return evaluate_rank_one(self)


def _factors(p):
    return p.factors if isinstance(p, RankOneRep) else tuple(np.asarray(x, dtype=np.float64) for x in p)


@dataclass(frozen=True)
class CPTensor:
    """Canonical polyadic tensor ``sum_j weights[j] * b_j1 ⊗ ... ⊗ b_jd``.

    ``factors[mu]`` has shape ``(n_mu, r)`` with unit-norm columns. When
    ``orthonormal`` is set every factor matrix must satisfy ``B^T B = I``.
    """

    weights: np.ndarray
    factors: tuple
    orthonormal: bool = False

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        fs = tuple(np.array(B, dtype=np.float64) for B in self.factors)
        r = w.size
        if r == 0 or np.any(w <= 0):
            raise BadDimsError("CP weights must be positive")
        if len(fs) < 2:
            raise BadDimsError("a CP tensor needs at least two modes")
        for mu, B in enumerate(fs):
            if B.ndim != 2 or B.shape[1] != r:
                raise DimMismatchError(f"factor {mu} must have shape (n, {r}), got {B.shape}")
            if np.max(np.abs(np.linalg.norm(B, axis=0) - 1.0)) > _UNIT_TOL:
                raise BadDimsError(f"factor {mu} columns are not unit norm")
            if self.orthonormal and np.max(np.abs(B.T @ B - np.eye(r))) > _UNIT_TOL:
                raise BadDimsError(f"factor {mu} columns are not orthonormal")
        for a in (w, *fs):
            a.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "factors", fs)

    @property
    def order(self):
        return len(self.factors)

    @property
    def rank(self):
        return self.weights.size

    @property
    def dims(self):
        return tuple(B.shape[0] for B in self.factors)

    @property
    def is_descending(self):
        return bool(np.all(np.diff(self.weights) <= 0))

    def term(self, j):
        """Term ``j`` as a rank-one representation; the weight sits in factor 0."""
        fs = [B[:, j].copy() for B in self.factors]
        fs[0] = fs[0] * self.weights[j]
        return RankOneRep(fs)

    def to_dense(self):
        return cp_to_dense(self)


@dataclass(frozen=True)
class TuckerTensor:
    """Tucker tensor: ``core`` of shape ``(t_1..t_d)`` and factors ``(n_mu, t_mu)``."""

    core: np.ndarray
    factors: tuple

    def __post_init__(self):
        core = as_dense(self.core).copy()
        fs = tuple(np.array(B, dtype=np.float64) for B in self.factors)
        if len(fs) != core.ndim:
            raise DimMismatchError(f"{len(fs)} factors for a core of order {core.ndim}")
        for mu, B in enumerate(fs):
            if B.ndim != 2 or B.shape[1] != core.shape[mu]:
                raise DimMismatchError(f"factor {mu} has shape {B.shape}, core mode size {core.shape[mu]}")
            if B.shape[1] > B.shape[0]:
                raise BadDimsError(f"mode {mu}: rank {B.shape[1]} exceeds size {B.shape[0]}")
        for a in (core, *fs):
            a.flags.writeable = False
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "factors", fs)

    @property
    def order(self):
        return self.core.ndim

    @property
    def dims(self):
        return tuple(B.shape[0] for B in self.factors)

    @property
    def ranks(self):
        return self.core.shape

    def to_dense(self):
        return tucker_to_dense(self)


def to_dense(t):
    """Densify a dense array, :class:`CPTensor`, :class:`TuckerTensor` or :class:`RankOneRep`."""
    if isinstance(t, (CPTensor, TuckerTensor, RankOneRep)):
        return t.to_dense()
    return as_dense(t)


def inner(a, b):
    """Euclidean inner product of two dense tensors of equal shape."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


def norm(a):
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64).ravel()))


def outer(factors):
    """Dense outer product of a sequence of vectors."""
    out = np.asarray(factors[0], dtype=np.float64)
    for p in factors[1:]:
        out = np.multiply.outer(out, p)
    return out


def evaluate_rank_one(p):
    """The multilinear map ``U(p_1, ..., p_d) = p_1 ⊗ ... ⊗ p_d`` as a dense tensor."""
    return outer(_factors(p))


def cp_to_dense(t):
    out = np.zeros(t.dims)
    for j in range(t.rank):
        out += t.weights[j] * outer([B[:, j] for B in t.factors])
    return out


def tucker_to_dense(t):
    out = t.core
    # mode product with B_mu on each axis, applied to the leading axis then rolled to the back
    for B in t.factors:
        out = np.tensordot(out, B, axes=([0], [1]))
    return np.ascontiguousarray(out)


def raw_objective(v, b):
    """``0.5 <v, v> - <b, v>``, the objective without the ``1/||b||^2`` factor."""
    return 0.5 * inner(v, v) - inner(b, v)


def objective_f(v, b):
    """Normalized objective ``(0.5 <v, v> - <b, v>) / ||b||^2``; bounded below by -1/2."""
    bb = inner(b, b)
    if bb == 0:
        raise ZeroTargetError("target tensor has zero norm")
    return raw_objective(v, b) / bb


def contract_except(b, vectors):
    """Contract ``b`` with ``vectors[mu]`` on every mode listed in the mapping.

    Returns the tensor over the remaining modes, in increasing mode order.
    """
    b = np.asarray(b)
    d = b.ndim
    t = b
    # walk modes from the back; kept modes accumulate at the tail of t
    keep_after = 0
    for mu in range(d - 1, -1, -1):
        if mu in vectors:
            p = vectors[mu]
            if p.shape[0] != b.shape[mu]:
                raise DimMismatchError(f"mode {mu}: vector length {p.shape[0]} != {b.shape[mu]}")
            if keep_after == 0:
                t = t @ p
            else:
                t = np.tensordot(t, p, axes=([t.ndim - keep_after - 1], [0]))
        else:
            keep_after += 1
    return t


def contract_all_but_one(b, p, mu, normalized=False):
    """Contract ``b`` with every factor of ``p`` except mode ``mu``.

    Entry ``i`` is ``sum b[..i..] prod_{nu != mu} p_nu[i_nu]``. With
    ``normalized`` the result is divided by ``prod_{nu != mu} ||p_nu||^2``,
    which is exactly the ALS update of factor ``mu``.
    """
    fs = _factors(p)
    b = np.asarray(b)
    if len(fs) != b.ndim:
        raise DimMismatchError(f"{len(fs)} factors for a tensor of order {b.ndim}")
    w = contract_except(b, {nu: fs[nu] for nu in range(len(fs)) if nu != mu})
    if normalized:
        den = 1.0
        for nu, q in enumerate(fs):
            if nu != mu:
                den *= q @ q
        if den == 0:
            raise DegenerateFactorError(f"a factor other than mode {mu} is zero")
        w = w / den
    return w


def contraction_matrix(b, partial, nu, mu):
    """Matrix ``M`` of shape ``(n_mu, n_nu)`` with ``M g = (p ⊗ .. g@nu .. Id@mu ..)^T b``.

    ``partial`` lists the fixed vectors for every mode other than ``nu`` and
    ``mu``, in increasing mode order.
    """
    b = np.asarray(b)
    d = b.ndim
    if nu == mu:
        raise BadDimsError("nu and mu must differ")
    others = [xi for xi in range(d) if xi not in (nu, mu)]
    partial = list(partial)
    if len(partial) != len(others):
        raise DimMismatchError(f"expected {len(others)} fixed vectors, got {len(partial)}")
    vecs = {xi: np.asarray(q, dtype=np.float64) for xi, q in zip(others, partial)}
    t = contract_except(b, vecs)
    # t carries axes (min(nu, mu), max(nu, mu))
    return t.T if nu < mu else t


def partial_vectors(p, nu, mu):
    """Factors of ``p`` for every mode except ``nu`` and ``mu``, in mode order."""
    fs = _factors(p)
    return [q for xi, q in enumerate(fs) if xi not in (nu, mu)]


def gradient_F(p, b):
    """Gradient of ``F = f o U`` with respect to each factor; list of ``d`` vectors."""
    fs = _factors(p)
    bb = inner(b, b)
    if bb == 0:
        raise ZeroTargetError("target tensor has zero norm")
    sq = [q @ q for q in fs]
    grads = []
    for mu in range(len(fs)):
        g = 1.0
        for nu in range(len(fs)):
            if nu != mu:
                g *= sq[nu]
        grads.append((g * fs[mu] - contract_all_but_one(b, fs, mu)) / bb)
    return grads


def F_value(p, b):
    """``F(p) = f(U(p))`` without densifying ``U(p)``."""
    fs = _factors(p)
    bb = inner(b, b)
    if bb == 0:
        raise ZeroTargetError("target tensor has zero norm")
    vv = float(np.prod([q @ q for q in fs]))
    bv = float(contract_all_but_one(b, fs, 0) @ fs[0])
    return (0.5 * vv - bv) / bb
