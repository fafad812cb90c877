"""Alternating least squares for the best rank-one approximation.

One micro step replaces factor ``mu`` by the least-squares solution with
all other factors fixed::

    p_mu <- (p_1/||p_1||^2 ⊗ .. ⊗ Id ⊗ .. ⊗ p_d/||p_d||^2)^T b

using the already updated factors for modes visited earlier in the sweep
(Gauss-Seidel order). No normalization happens between steps unless
``SolverConfig.rebalance`` is set.
"""

import enum
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    BadDimsError,
    DegenerateFactorError,
    DegenerateIterateError,
    DimMismatchError,
    ZeroInitialError,
    ZeroTargetError,
)
from .tensors import (
    RankOneRep,
    as_dense,
    contract_all_but_one,
    contract_except,
    contraction_matrix,
    evaluate_rank_one,
    gradient_F,
    inner,
    objective_f,
    outer,
    partial_vectors,
)
from .trace import MicroStepRecord, SweepTrace

DEGENERATE_NORM = 1e-150


class TerminationReason(enum.Enum):
    GRADIENT = "tol_grad"
    DELTA_F = "tol_delta_f"
    MAX_SWEEPS = "max_sweeps"


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules and sweep options.

    A tolerance of 0 disables that criterion. ``mode_order`` is a 0-based
    permutation; ``None`` means the natural order.
    """

    max_sweeps: int = 100_000
    tol_grad: float = 1e-10
    tol_delta_f: float = 1e-15
    mode_order: Optional[tuple] = None
    rebalance: bool = False
    trace_every: int = 1

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be positive")
        if self.tol_grad < 0 or self.tol_delta_f < 0:
            raise ValueError("tolerances must be non-negative")
        if self.trace_every < 1:
            raise ValueError("trace_every must be positive")
        if self.mode_order is not None:
            order = tuple(int(m) for m in self.mode_order)
            if sorted(order) != list(range(len(order))):
                raise ValueError(f"mode_order {order} is not a permutation")
            object.__setattr__(self, "mode_order", order)

    def order_for(self, d):
        if self.mode_order is None:
            return tuple(range(d))
        if len(self.mode_order) != d:
            raise DimMismatchError(f"mode_order has {len(self.mode_order)} entries for order {d}")
        return self.mode_order


@dataclass(frozen=True)
class SweepState:
    """Current iterate plus cached squared factor norms and objective value.

    ``sweep`` counts sweeps from 1, ``cursor`` is the position in the mode
    order of the next micro step and ``last_mode`` the most recently updated
    mode (``None`` before the first micro step).
    """

    factors: RankOneRep
    b_sq_norm: float
    sweep: int = 1
    cursor: int = 0
    sq_norms: np.ndarray = field(default=None, repr=False)
    f: float = 0.0
    last_mode: Optional[int] = None

    @classmethod
    def start(cls, b, init):
        b = as_dense(b)
        p = init if isinstance(init, RankOneRep) else RankOneRep(init, allow_zero=True)
        if p.dims != b.shape:
            raise DimMismatchError(f"initial guess dims {p.dims} != tensor dims {b.shape}")
        bb = inner(b, b)
        if bb == 0:
            raise ZeroTargetError("target tensor has zero norm")
        sq = p.sq_norms()
        vv = float(np.prod(sq))
        if vv == 0:
            raise ZeroInitialError("initial guess represents the zero tensor")
        bv = float(contract_all_but_one(b, p, 0) @ p[0])
        return cls(factors=p, b_sq_norm=float(bb), sq_norms=sq, f=float((0.5 * vv - bv) / bb))

    @property
    def norm_v(self):
        return float(np.sqrt(np.prod(self.sq_norms)))


def _others_product(sq, mu):
    g = 1.0
    for nu, s in enumerate(sq):
        if nu != mu:
            g *= s
    return g


def _normalized_factors(p):
    fs = []
    for mu, q in enumerate(p):
        n = np.linalg.norm(q)
        if n == 0:
            raise DegenerateFactorError(f"factor {mu} is zero")
        fs.append(q / n)
    return fs


def projection_apply(p, mu, t):
    """Apply ``Pi = ⊗_{nu != mu} p̂_nu p̂_nu^T ⊗ Id_mu`` to the dense tensor ``t``.

    ``p`` is a :class:`RankOneRep`, a :class:`SweepState` or a factor
    sequence. The projector is never formed; the cost is one contraction.
    """
    if isinstance(p, SweepState):
        p = p.factors
    fs = _normalized_factors(p)
    t = np.asarray(t, dtype=np.float64)
    w = contract_except(t, {nu: fs[nu] for nu in range(len(fs)) if nu != mu})
    fs[mu] = w
    return outer(fs)


def _update(state, b, mu):
    fs = state.factors.factors
    w = contract_all_but_one(b, fs, mu)
    g = _others_product(state.sq_norms, mu)
    p_new = w / g
    nsq = float(p_new @ p_new)
    if not np.sqrt(nsq) >= DEGENERATE_NORM:
        raise DegenerateIterateError(
            f"updated factor has norm {np.sqrt(nsq):.3e}; target is orthogonal to the fixed subspace",
            sweep=state.sweep,
            mode=mu,
        )
    sq = state.sq_norms.copy()
    sq[mu] = nsq
    f = float((0.5 * g * nsq - float(w @ p_new)) / state.b_sq_norm)
    new = list(fs)
    new[mu] = p_new
    return p_new, sq, f, RankOneRep(new)


def _record(state, new_factors, b, mu):
    bb = state.b_sq_norm
    old = state.factors
    v_before = evaluate_rank_one(old)
    v_after = evaluate_rank_one(new_factors)
    f_before = objective_f(v_before, b)
    f_after = objective_f(v_after, b)
    r = b - v_before
    pr = projection_apply(old, mu, r)
    pred = 0.5 * inner(pr, r) / bb
    grads = gradient_F(new_factors, b)
    norm_v = float(np.linalg.norm(v_after))
    cos2 = inner(projection_apply(old, mu, b), b) / bb
    return MicroStepRecord(
        k=state.sweep,
        mu=mu,
        f_before=f_before,
        f_after=f_after,
        norm_v_before=float(np.linalg.norm(v_before)),
        norm_v=norm_v,
        descent_predicted=pred,
        identity_residual=abs(f_before - f_after - pred),
        value_residual=abs(f_after + norm_v**2 / (2 * bb)),
        projection_residual=float(np.linalg.norm(v_after - v_before - pr)),
        factor_norm_before=float(np.linalg.norm(old[mu])),
        factor_norm=float(np.linalg.norm(new_factors[mu])),
        grad_norm=max(float(np.linalg.norm(g)) for g in grads),
        cos2=cos2,
        factor=np.array(new_factors[mu]),
    )


def micro_step(state, b, mu, record=True):
    """Update factor ``mu``; returns ``(new_state, record)``.

    ``record`` is ``None`` when ``record=False`` (fast path, no dense work).
    Raises :class:`DegenerateIterateError` if the update vanishes.
    """
    b = np.asarray(b, dtype=np.float64)
    _, sq, f, new_factors = _update(state, b, mu)
    rec = _record(state, new_factors, b, mu) if record else None
    new = replace(state, factors=new_factors, sq_norms=sq, f=f, last_mode=mu)
    return new, rec


def gram_micro_step(state, b, mu):
    """Update of factor ``mu`` computed through the Gram recursion.

    With ``prev`` the most recently updated mode and ``A`` the contraction
    matrix between ``prev`` and ``mu`` (all other factors fixed), the new
    factor is ``A A^T p_mu / (G_mu G_prev)`` where ``G_x`` is the product of
    squared norms of all factors but ``x``. Valid only once ``prev`` has
    been updated from the current ``p_mu``, i.e. not for the very first
    micro step of a run.
    """
    prev = state.last_mode
    if prev is None or prev == mu:
        raise ValueError("the Gram route needs the preceding mode to be updated first")
    fs = state.factors
    A = contraction_matrix(b, partial_vectors(fs, prev, mu), prev, mu)
    g_mu = _others_product(state.sq_norms, mu)
    g_prev = _others_product(state.sq_norms, prev)
    # A^T p_mu / G_prev is the factor computed for prev; reapply A for mu
    p_new = A @ (A.T @ fs[mu]) / (g_mu * g_prev)
    if not np.linalg.norm(p_new) >= DEGENERATE_NORM:
        raise DegenerateIterateError("updated factor vanishes", sweep=state.sweep, mode=mu)
    return p_new


def gram_iteration_matrix(state, b, mu):
    """Normalized iteration matrix ``A A^T / (G_mu G_prev)`` of the Gram route."""
    prev = state.last_mode
    if prev is None or prev == mu:
        raise ValueError("the Gram route needs the preceding mode to be updated first")
    fs = state.factors
    A = contraction_matrix(b, partial_vectors(fs, prev, mu), prev, mu)
    return A @ A.T / (_others_product(state.sq_norms, mu) * _others_product(state.sq_norms, prev))


def rebalanced(p):
    """Same tensor, all factors rescaled to the common norm ``(prod ||p_mu||)^(1/d)``."""
    norms = np.sqrt(p.sq_norms())
    s = float(np.prod(norms)) ** (1.0 / p.order)
    return RankOneRep([q * (s / n) for q, n in zip(p, norms)])


def sweep(state, b, config=None, record=True, on_step=None):
    """Run one sweep over ``config``'s mode order; returns ``(state, records)``.

    ``on_step(before, after, record)`` is called after every micro step.
    """
    config = config or SolverConfig()
    b = np.asarray(b, dtype=np.float64)
    order = config.order_for(b.ndim)
    records = []
    for pos in range(state.cursor, len(order)):
        mu = order[pos]
        before = state
        state, rec = micro_step(state, b, mu, record=record)
        state = replace(state, cursor=pos + 1)
        if rec is not None:
            records.append(rec)
        if on_step is not None:
            on_step(before, state, rec)
    if config.rebalance:
        p = rebalanced(state.factors)
        state = replace(state, factors=p, sq_norms=p.sq_norms())
    state = replace(state, sweep=state.sweep + 1, cursor=0)
    return state, records


class SolveResult(NamedTuple):
    rep: RankOneRep
    trace: SweepTrace
    reason: TerminationReason

    @property
    def converged(self):
        """True when the run stopped on the gradient tolerance."""
        return self.reason is TerminationReason.GRADIENT


def _max_grad(state, b):
    fs = state.factors.factors
    bb = state.b_sq_norm
    out = 0.0
    for mu in range(len(fs)):
        g = (_others_product(state.sq_norms, mu) * fs[mu] - contract_all_but_one(b, fs, mu)) / bb
        out = max(out, float(np.linalg.norm(g)))
    return out


def _attach_reference(records, reference, prev_tan):
    from .diagnostics import tan_angle_tensor

    ref = evaluate_rank_one(reference)
    out = []
    for rec, v in records:
        try:
            t = tan_angle_tensor(v, ref)
        except ValueError:
            t = None
        q = t / prev_tan if (t is not None and prev_tan) else None
        out.append(replace(rec, tan_angle_ref=t, q_ratio_ref=q))
        prev_tan = t
    return out, prev_tan


def solve(b, init, config=None, reference=None, on_step=None):
    """Run ALS from ``init`` until a stopping rule fires.

    Returns ``(rep, trace, reason)``. With a ``reference`` representation
    the tensor-space tangent to it is recorded per micro step.
    Degenerate updates propagate as :class:`DegenerateIterateError` with the
    sweep and mode attached.
    """
    config = config or SolverConfig()
    b = as_dense(b)
    state = SweepState.start(b, init)
    order = config.order_for(b.ndim)
    trace = SweepTrace(mode_order=order, b_sq_norm=state.b_sq_norm, trace_every=config.trace_every)
    trace.reference = reference
    trace.snapshots.append(state.factors)
    trace.sweep_f.append(state.f)
    trace.sweep_grad.append(_max_grad(state, b))
    prev_tan = None
    if reference is not None:
        from .diagnostics import tan_angle_tensor

        try:
            prev_tan = tan_angle_tensor(evaluate_rank_one(state.factors), evaluate_rank_one(reference))
        except ValueError:
            prev_tan = None

    reason = TerminationReason.MAX_SWEEPS
    for k in range(1, config.max_sweeps + 1):
        record = config.trace_every == 1 or k % config.trace_every == 0
        f_prev = state.f
        if record and reference is not None:
            pairs = []

            def hook(before, after, rec):
                pairs.append((rec, evaluate_rank_one(after.factors)))
                if on_step is not None:
                    on_step(before, after, rec)

            state, _ = sweep(state, b, config, record=True, on_step=hook)
            recs, prev_tan = _attach_reference(pairs, reference, prev_tan)
        else:
            state, recs = sweep(state, b, config, record=record, on_step=on_step)
            if reference is not None:
                prev_tan = None
        trace.records.extend(recs)
        trace.snapshots.append(state.factors)
        trace.sweep_f.append(state.f)
        grad = _max_grad(state, b)
        trace.sweep_grad.append(grad)
        if config.tol_delta_f > 0 and (f_prev - state.f) <= config.tol_delta_f * max(abs(state.f), 1e-300):
            reason = TerminationReason.DELTA_F
            break
        if grad <= config.tol_grad:
            reason = TerminationReason.GRADIENT
            break
    return SolveResult(state.factors, trace, reason)


def tucker_gamma(t, p, nu, mu):
    """Coefficient matrix ``Gamma`` (shape ``t_nu x t_mu``) of the Tucker contraction.

    ``Gamma[i_nu, i_mu] = sum beta[i] prod_{xi != nu, mu} <b_{xi, i_xi}, p_xi>``
    so that ``contraction_matrix(dense, ..., nu, mu) = B_mu Gamma^T B_nu^T``.
    """
    if nu == mu:
        raise BadDimsError("nu and mu must differ")
    fs = p.factors if isinstance(p, RankOneRep) else p
    if len(fs) != t.order:
        raise DimMismatchError(f"{len(fs)} factors for a Tucker tensor of order {t.order}")
    coeffs = {}
    for xi in range(t.order):
        if xi in (nu, mu):
            continue
        q = np.asarray(fs[xi], dtype=np.float64)
        if q.shape[0] != t.dims[xi]:
            raise DimMismatchError(f"mode {xi}: vector length {q.shape[0]} != {t.dims[xi]}")
        coeffs[xi] = t.factors[xi].T @ q
    g = contract_except(t.core, coeffs)
    # g carries axes (min, max); Gamma is indexed (nu, mu)
    return g if nu < mu else g.T
