"""Convergence-rate instrumentation.

Error is measured as the tangent of the angle to a reference point, either
in the full tensor space or per mode factor. The complement of the
reference direction is never formed: the sine part is the norm of the
residual after removing the reference component.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    AuditFailure,
    BadDimsError,
    DegenerateFactorError,
    InsufficientTraceError,
    NoDominanceError,
    OrderTooSmallError,
    OrthogonalToReferenceError,
    ZeroCoefficientError,
)
from .tensors import CPTensor, RankOneRep, evaluate_rank_one

SUPERLINEAR = "Q-superlinear"
LINEAR = "Q-linear"
SUBLINEAR = "sublinear"

SUPERLINEAR_FINAL = 0.05
SUBLINEAR_THRESHOLD = 0.98
LINEAR_BAND = 0.10


def coefficient_split(v, ref):
    """Return ``(c, s_norm)`` with ``c = <v, ref/||ref||>`` and ``s_norm = ||v - c ref/||ref||||``."""
    v = np.asarray(v, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if v.shape != ref.shape:
        raise BadDimsError(f"shapes differ: {v.shape} vs {ref.shape}")
    rn = np.linalg.norm(ref)
    if rn == 0:
        raise DegenerateFactorError("reference is zero")
    u = ref / rn
    c = float(v @ u)
    return c, float(np.linalg.norm(v - c * u))


def _tan(v, ref):
    if not np.any(v):
        raise DegenerateFactorError("vector is zero")
    c, s = coefficient_split(v, ref)
    if c == 0:
        raise OrthogonalToReferenceError("vector is orthogonal to the reference")
    return s / abs(c)


def tan_angle_tensor(v, ref):
    """``tan`` of the angle between two tensors; invariant under nonzero scaling of either."""
    return _tan(v, ref)


def component_tan_angle(p, ref):
    """``tan`` of the angle between two vectors (one mode factor and its reference)."""
    return _tan(p, ref)


def q_components(before, after, ref):
    """Sine and cosine contraction factors ``(q_s, q_c)`` of one step.

    ``tan(after) = (q_s / q_c) * tan(before)`` holds identically.
    """
    c0, s0 = coefficient_split(before, ref)
    c1, s1 = coefficient_split(after, ref)
    if c0 == 0:
        raise OrthogonalToReferenceError("previous iterate is orthogonal to the reference")
    if s0 == 0:
        raise ZeroCoefficientError("previous iterate has no component off the reference")
    return s1 / s0, abs(c1) / abs(c0)


def ratio_series(tangents, floor=0.0, successor_floor=None):
    """Consecutive ratios ``t[k+1] / t[k]`` over pairs with ``t[k] > floor``.

    ``successor_floor`` (default: ``floor``) additionally drops pairs whose
    second tangent is at or below it; use a positive value when the
    reference is itself an iterate and tiny tangents are meaningless. Pass
    ``successor_floor=0`` to keep ratios that collapse to zero.
    """
    if successor_floor is None:
        successor_floor = floor
    t = np.asarray(tangents, dtype=np.float64)
    out = []
    for a, b in zip(t[:-1], t[1:]):
        if not (np.isfinite(a) and np.isfinite(b)) or a <= floor:
            continue
        if successor_floor > 0 and b <= successor_floor:
            continue
        out.append(b / a)
    return np.array(out)


def q_ratio_series(trace, mode, reference=None, floor=0.0, successor_floor=None):
    """Per-sweep ratios of the mode-``mode`` factor tangent to the reference factor."""
    return ratio_series(trace.mode_tangents(mode, reference), floor, successor_floor)


def tensor_tangents(trace, reference=None):
    """Tensor-space tangent after every recorded micro step (initial value first)."""
    ref = reference if reference is not None else trace.reference
    if ref is None:
        raise ValueError("no reference configured")
    r = evaluate_rank_one(ref)
    vals = []
    first = True
    for _, before, after in trace.iter_steps():
        pts = (before, after) if first else (after,)
        first = False
        for p in pts:
            try:
                vals.append(tan_angle_tensor(evaluate_rank_one(p), r))
            except ValueError:
                vals.append(np.nan)
    return np.array(vals)


@dataclass(frozen=True)
class RateEstimate:
    """Finite-window estimate of the limiting q-ratio and the implied rate class."""

    q_limsup: float
    classification: str
    rho_hat: Optional[float]
    tail_window: int
    tail: np.ndarray = field(repr=False)
    mode: Optional[int] = None

    def report_line(self):
        mode = "" if self.mode is None else self.mode + 1
        rho = "" if self.rho_hat is None else repr(self.rho_hat)
        return (
            f"mode={mode} q_limsup={self.q_limsup!r} classification={self.classification} "
            f"rho_hat={rho} tail_window={self.tail_window}"
        )


def estimate_rate(series, tail_window=20, mode=None):
    """Classify the tail of a q-ratio series.

    The limsup is estimated by the maximum over the last ``tail_window``
    ratios. Q-linear(rho) when every tail value lies within 10% of the
    tail median ``rho < 0.98``; Q-superlinear when the tail strictly
    decreases to below 0.05; sublinear when the estimate is at least 0.98.
    A tail below 0.98 that fits neither pattern is reported as Q-linear
    with ``rho_hat`` equal to the bound ``q_limsup``.
    """
    s = np.asarray(series, dtype=np.float64)
    s = s[np.isfinite(s)]
    if tail_window < 2:
        raise ValueError("tail_window must be at least 2")
    if s.size < tail_window:
        raise InsufficientTraceError(f"need {tail_window} finite ratios, have {s.size}")
    tail = s[-tail_window:]
    q = float(np.max(tail))
    med = float(np.median(tail))
    if med < SUBLINEAR_THRESHOLD and med > 0 and np.all(np.abs(tail - med) <= LINEAR_BAND * med):
        return RateEstimate(q, LINEAR, med, tail_window, tail, mode)
    if np.all(np.diff(tail) < 0) and tail[-1] < SUPERLINEAR_FINAL:
        return RateEstimate(q, SUPERLINEAR, None, tail_window, tail, mode)
    if q >= SUBLINEAR_THRESHOLD:
        return RateEstimate(q, SUBLINEAR, None, tail_window, tail, mode)
    return RateEstimate(q, LINEAR, q, tail_window, tail, mode)


def classify_mode(trace, mode, reference=None, tail_window=20, floor=0.0, successor_floor=None):
    """:func:`estimate_rate` on the per-sweep series of one mode.

    Short series (superlinear runs stop after a handful of sweeps) use
    their second half as the window, so the transient of the first sweeps
    does not enter the estimate; at least two ratios are required.
    """
    s = q_ratio_series(trace, mode, reference, floor, successor_floor)
    s = s[np.isfinite(s)]
    if s.size < 2:
        raise InsufficientTraceError(f"only {s.size} usable ratios for mode {mode}")
    return estimate_rate(s, min(tail_window, max(2, s.size // 2)), mode=mode)


def rate_report(estimates, header=True):
    """Flat ``key=value`` text block, one line per mode."""
    lines = []
    if header:
        lines.append(
            f"# limsup = max over tail window; Q-superlinear: tail strictly decreasing and final < {SUPERLINEAR_FINAL}; "
            f"Q-linear: tail within +-{int(LINEAR_BAND * 100)}% of median < {SUBLINEAR_THRESHOLD}; "
            f"sublinear: limsup >= {SUBLINEAR_THRESHOLD}"
        )
    lines.extend(e.report_line() for e in estimates)
    return "\n".join(lines) + "\n"


def _require_odeco(t, p):
    if not isinstance(t, CPTensor):
        raise TypeError("expected a CPTensor")
    if t.order < 3:
        raise OrderTooSmallError("dominance needs order d >= 3")
    if not t.orthonormal:
        raise BadDimsError("dominance analysis needs orthonormal factor matrices")
    fs = p.factors if isinstance(p, RankOneRep) else tuple(p)
    if len(fs) != t.order:
        raise BadDimsError(f"{len(fs)} factors for a CP tensor of order {t.order}")
    return fs


def dominance_scores(t, p):
    """Matrix ``S[j, mu] = lambda_j^(2/(d-2)) <b_{j mu}, p_mu>^2``."""
    fs = _require_odeco(t, p)
    d = t.order
    w = t.weights ** (2.0 / (d - 2))
    coef = np.stack([B.T @ q for B, q in zip(t.factors, fs)], axis=1)
    return w[:, None] * coef**2


def dominance_check(t, p, j_star):
    """True iff term ``j_star`` (0-based) strictly dominates in every mode."""
    s = dominance_scores(t, p)
    others = np.delete(s, j_star, axis=0)
    if others.size == 0:
        return True
    return bool(np.all(s[j_star][None, :] > others))


def dominating_term(t, p):
    """Index of the dominating term, or ``None``."""
    for j in range(t.rank):
        if dominance_check(t, p, j):
            return j
    return None


def superlinear_bound(t, p, j_star, mode=0, prev=None):
    """Contraction bound for the tangent of factor ``mode`` towards term ``j_star``.

    The product runs over all modes except ``mode`` and ``prev``, the mode
    updated just before (cyclic predecessor by default). For ``mode=0`` this
    is the product over modes ``1 .. d-2``.
    """
    fs = _require_odeco(t, p)
    if not dominance_check(t, p, j_star):
        raise NoDominanceError(f"term {j_star} does not dominate")
    d = t.order
    if prev is None:
        prev = (mode - 1) % d
    mids = [xi for xi in range(d) if xi not in (mode, prev)]
    vals = t.weights.copy()
    for xi in mids:
        vals = vals * (t.factors[xi].T @ fs[xi])
    vals = vals**2
    return float(np.max(np.delete(vals, j_star)) / vals[j_star])


def check_sharpness_r2(trace, t, j_star):
    """Largest deviation between measured tangent ratio and :func:`superlinear_bound`.

    Checked at every micro step after the first one where ``j_star``
    dominates before the step and the previous tangent is nonzero. Returns
    ``(max_deviation, n_checked)``.
    """
    worst = 0.0
    checked = 0
    prev_mode = None
    for rec, before, after in trace.iter_steps():
        mu = rec.mu
        if prev_mode is not None and dominance_check(t, before, j_star):
            ref = t.factors[mu][:, j_star]
            t0 = component_tan_angle(before[mu], ref)
            if t0 > 0:
                t1 = component_tan_angle(after[mu], ref)
                bound = superlinear_bound(t, before, j_star, mode=mu, prev=prev_mode)
                worst = max(worst, abs(t1 / t0 - bound))
                checked += 1
        prev_mode = mu
    return worst, checked


def basin_angle(lam1, lam2, d):
    """Angular radius ``arctan((lam1/lam2)^(1/(d-2)))`` of the global minimum's basin."""
    if d < 3:
        raise OrderTooSmallError("basin angle needs d >= 3")
    if not lam1 >= lam2 > 0:
        raise ValueError("need lam1 >= lam2 > 0")
    return float(np.arctan((lam1 / lam2) ** (1.0 / (d - 2))))


@dataclass(frozen=True)
class AuditReport:
    passed: bool
    n_records: int
    n_sweeps: int
    final_grad: float
    final_step: float
    step_distances: np.ndarray = field(repr=False)


def descent_audit(trace, b=None, step_tol=None, slack=1e-12):
    """Check monotone descent and a vanishing iterate step at termination.

    The objective must not increase between micro steps or sweeps (up to
    ``slack``). The step at termination is ``||v_{K+1} - v_K||`` for one
    probe sweep from the final iterate when the target ``b`` is given;
    without ``b`` the last recorded step ``||v_K - v_{K-1}||`` is used,
    which overstates it for superlinear runs. ``step_tol`` defaults to
    ``1e-4 ||b||``. Raises :class:`AuditFailure` at the first violation.
    """
    for i, rec in enumerate(trace.records):
        if rec.f_after > rec.f_before + slack * max(1.0, abs(rec.f_before)):
            raise AuditFailure("objective increased", i)
    fk = trace.sweep_f
    for k in range(1, len(fk)):
        if fk[k] > fk[k - 1] + slack * max(1.0, abs(fk[k - 1])):
            raise AuditFailure("objective increased across sweep", k)
    vs = [evaluate_rank_one(s) for s in trace.snapshots]
    steps = [float(np.linalg.norm(y - x)) for x, y in zip(vs[:-1], vs[1:])]
    if b is not None:
        from .als import SolverConfig, SweepState, sweep

        state = SweepState.start(b, trace.final)
        state, _ = sweep(state, b, SolverConfig(mode_order=trace.mode_order), record=False)
        steps.append(float(np.linalg.norm(evaluate_rank_one(state.factors) - vs[-1])))
    steps = np.array(steps)
    if step_tol is None:
        step_tol = 1e-4 * np.sqrt(trace.b_sq_norm)
    final_step = float(steps[-1]) if steps.size else 0.0
    if final_step > step_tol:
        raise AuditFailure(f"final step {final_step:.3e} exceeds {step_tol:.1e}", len(steps))
    return AuditReport(
        passed=True,
        n_records=len(trace.records),
        n_sweeps=trace.n_sweeps,
        final_grad=float(trace.sweep_grad[-1]),
        final_step=final_step,
        step_distances=steps,
    )
