"""Independent checks: stationarity, singular-value certificates, multistart search,
closed forms for the ``b_lambda`` family and a finite-difference gradient test.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .als import SolverConfig, solve
from .errors import (
    DegenerateFactorError,
    NegativeLambdaError,
    NotStationaryError,
    OutOfRangeError,
    RankOneError,
)
from .tensors import (
    F_value,
    RankOneRep,
    as_dense,
    contraction_matrix,
    evaluate_rank_one,
    gradient_F,
    inner,
    objective_f,
    outer,
    partial_vectors,
)


def jacobi_svd(a, tol=1e-15, max_sweeps=100):
    """Singular value decomposition by one-sided (Hestenes) Jacobi rotations.

    Returns ``(u, s, vt)`` with ``s`` in descending order and
    ``a = u @ diag(s) @ vt``. Meant for the small mode-pair matrices.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    m, n = a.shape
    if m < n:
        u, s, vt = jacobi_svd(a.T, tol, max_sweeps)
        return vt.T, s, u.T
    w = a.copy()
    v = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = w[:, i] @ w[:, i]
                beta = w[:, j] @ w[:, j]
                gamma = w[:, i] @ w[:, j]
                if gamma == 0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                wi, wj = w[:, i].copy(), w[:, j]
                w[:, i] = c * wi - s * wj
                w[:, j] = s * wi + c * wj
                vi, vj = v[:, i].copy(), v[:, j]
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
        if not rotated:
            break
    sv = np.linalg.norm(w, axis=0)
    order = np.argsort(-sv, kind="stable")
    sv = sv[order]
    w = w[:, order]
    v = v[:, order]
    u = np.zeros_like(w)
    nz = sv > 0
    u[:, nz] = w[:, nz] / sv[nz]
    return u, sv, v.T


def _unit(p):
    fs = []
    for mu, q in enumerate(p):
        n = np.linalg.norm(q)
        if n == 0:
            raise DegenerateFactorError(f"factor {mu} is zero")
        fs.append(np.asarray(q) / n)
    return fs


def stationarity_residual(p, b):
    """Largest violation of the Lagrange conditions ``M_{nu,mu} p̂_nu = lambda p̂_mu``.

    ``lambda = <⊗ p̂, b>`` with unit factors; zero exactly at critical points.
    """
    b = as_dense(b)
    fs = _unit(p)
    lam = inner(evaluate_rank_one(fs), b)
    d = len(fs)
    worst = 0.0
    for nu in range(d):
        for mu in range(d):
            if nu == mu:
                continue
            M = contraction_matrix(b, partial_vectors(fs, nu, mu), nu, mu)
            worst = max(worst, float(np.linalg.norm(M @ fs[nu] - lam * fs[mu])))
    return worst


@dataclass(frozen=True)
class SingularCertificate:
    """Singular-value check of one mode pair at a stationary point.

    ``matches_norm`` says whether ``||v||`` is the *largest* singular value;
    ``is_singular_value`` whether it appears anywhere in the spectrum.
    """

    sigma_max: float
    gap: float
    matches_norm: bool
    is_singular_value: bool
    norm_v: float
    singular_values: np.ndarray = field(repr=False)


def singular_certificate(p, b, nu, mu, stationary_tol=1e-8, match_tol=1e-8):
    b = as_dense(b)
    res = stationarity_residual(p, b)
    if res > stationary_tol:
        raise NotStationaryError(res, stationary_tol)
    fs = _unit(p)
    norm_v = float(np.prod([np.linalg.norm(q) for q in p]))
    M = contraction_matrix(b, partial_vectors(fs, nu, mu), nu, mu)
    _, s, _ = jacobi_svd(M)
    sigma_max = float(s[0])
    gap = float(s[0] - s[1]) if s.size > 1 else sigma_max
    return SingularCertificate(
        sigma_max=sigma_max,
        gap=gap,
        matches_norm=abs(sigma_max - norm_v) <= match_tol * sigma_max,
        is_singular_value=bool(np.any(np.abs(s - norm_v) <= match_tol * max(sigma_max, 1.0))),
        norm_v=norm_v,
        singular_values=s,
    )


def hosvd_start(b):
    """Dominant left singular vector of every mode unfolding."""
    b = as_dense(b)
    fs = []
    for mu in range(b.ndim):
        unf = np.moveaxis(b, mu, 0).reshape(b.shape[mu], -1)
        u, _, _ = np.linalg.svd(unf, full_matrices=False)
        fs.append(u[:, 0])
    return RankOneRep(fs)


def random_start(dims, rng):
    return RankOneRep([rng.uniform(-1.0, 1.0, n) for n in dims])


def cluster_values(values, tol):
    """Single-linkage clusters of scalars; returns ``(centers, labels)``."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    labels = np.empty(values.size, dtype=int)
    centers = []
    members = []
    for i in order:
        if members and values[i] - values[members[-1][-1]] <= tol:
            members[-1].append(i)
        else:
            members.append([i])
        labels[i] = len(members) - 1
    centers = [float(np.mean(values[m])) for m in members]
    return centers, labels


def cluster_points(points, tol):
    """Greedy clustering of dense tensors by Euclidean distance."""
    reps = []
    labels = []
    for x in points:
        for c, r in enumerate(reps):
            if np.linalg.norm(x - r) <= tol:
                labels.append(c)
                break
        else:
            reps.append(x)
            labels.append(len(reps) - 1)
    return reps, labels


@dataclass
class StartOutcome:
    seed: Optional[int]
    f: float
    residual: float
    rep: Optional[RankOneRep]
    reason: str
    cluster: int = -1
    error: Optional[str] = None


@dataclass
class MultistartResult:
    """Best point found over all starts.

    ``local_values`` are the distinct terminal objective values (clusters at
    ``value_tol``); ``global_points`` the distinct tensors attaining the best
    value (clusters at ``point_tol * ||b||``).
    """

    best: RankOneRep
    f_star: float
    local_values: list
    global_points: list
    starts: list

    def report(self):
        lines = ["# seed f residual cluster"]
        for s in self.starts:
            seed = "hosvd" if s.seed is None else str(s.seed)
            if s.error:
                lines.append(f"{seed} nan nan -1 error={s.error}")
            else:
                lines.append(f"{seed} {s.f!r} {s.residual!r} {s.cluster}")
        lines.append(f"f_star={self.f_star!r}")
        lines.append("local_values=" + ",".join(repr(v) for v in self.local_values))
        lines.append(f"n_global_points={len(self.global_points)}")
        return "\n".join(lines) + "\n"


def best_rank_one_multistart(
    b,
    n_starts,
    seed=0,
    config=None,
    value_tol=1e-8,
    point_tol=1e-6,
):
    """Run ALS from ``n_starts`` seeded random guesses plus one HOSVD start.

    Start ``i`` draws its guess from ``numpy.random.default_rng(seed + i)``.
    A failing start is recorded and skipped.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    b = as_dense(b)
    config = config or SolverConfig(trace_every=10**9)
    inits = [(None, hosvd_start(b))]
    for i in range(n_starts):
        inits.append((seed + i, random_start(b.shape, np.random.default_rng(seed + i))))
    outcomes = []
    for s, init in inits:
        try:
            rep, _, reason = solve(b, init, config)
        except RankOneError as exc:
            outcomes.append(StartOutcome(s, np.nan, np.nan, None, "error", error=str(exc)))
            continue
        outcomes.append(StartOutcome(s, F_value(rep, b), stationarity_residual(rep, b), rep, reason.value))
    ok = [o for o in outcomes if o.error is None]
    if not ok:
        raise RankOneError("every start failed")
    centers, labels = cluster_values([o.f for o in ok], value_tol)
    for o, lab in zip(ok, labels):
        o.cluster = int(lab)
    best_cluster = int(np.argmin(centers))
    glob = [o for o in ok if o.cluster == best_cluster]
    best = min(glob, key=lambda o: o.f)
    reps, _ = cluster_points([evaluate_rank_one(o.rep) for o in glob], point_tol * np.sqrt(inner(b, b)))
    return MultistartResult(
        best=best.rep,
        f_star=best.f,
        local_values=sorted(centers),
        global_points=reps,
        starts=outcomes,
    )


def b_lambda_alphas(lam):
    """Solutions ``alpha`` of ``2 lam alpha / (1 + lam alpha^2) = alpha``."""
    if lam < 0:
        raise NegativeLambdaError("lambda must be non-negative")
    if lam <= 0.5:
        return {0.0}
    a = float(np.sqrt((2 * lam - 1) / lam))
    return {0.0, a, -a}


def b_lambda_count(lam):
    """Number of best rank-one approximations of ``b_lambda`` (order 3)."""
    if lam < 0:
        raise NegativeLambdaError("lambda must be non-negative")
    return 1 if lam <= 0.5 else 2


def b_lambda_rate(lam):
    """Q-linear rate ``(lam/2)(3 lam + lam^2 + sqrt((3 lam + lam^2)^2 + 4 lam))`` for ``0 <= lam < 1/2``."""
    if lam < 0:
        raise NegativeLambdaError("lambda must be non-negative")
    if lam >= 0.5:
        raise OutOfRangeError("rate formula holds for lambda < 1/2 only")
    a = 3 * lam + lam * lam
    return float(0.5 * lam * (a + np.sqrt(a * a + 4 * lam)))


def b_lambda_threshold(d):
    if d < 3:
        raise OutOfRangeError("threshold defined for d >= 3")
    return 1.0 / (d - 1)


def finite_diff_gradient(p, b, h=1e-6):
    """Central-difference gradient of ``F`` in every factor coordinate.

    ``F`` is evaluated on the densified tensor, independently of the
    contraction kernels behind :func:`gradient_F`.
    """
    fs = [np.array(q, dtype=np.float64) for q in p]
    out = []
    for mu, q in enumerate(fs):
        g = np.empty_like(q)
        for i in range(q.size):
            qp, qm = q.copy(), q.copy()
            qp[i] += h
            qm[i] -= h
            fp = objective_f(outer(fs[:mu] + [qp] + fs[mu + 1 :]), b)
            fm = objective_f(outer(fs[:mu] + [qm] + fs[mu + 1 :]), b)
            g[i] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def finite_diff_gradient_check(p, b, h=1e-6):
    """Max absolute deviation between :func:`gradient_F` and central differences."""
    if h <= 0:
        raise ValueError("h must be positive")
    b = as_dense(b)
    fs = [np.asarray(q, dtype=np.float64) for q in p]
    exact = gradient_F(fs, b)
    approx = finite_diff_gradient(fs, b, h)
    return max(float(np.max(np.abs(e - a))) for e, a in zip(exact, approx))
