"""Per-micro-step records and the sweep trace written by the solver."""

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tensors import RankOneRep

CSV_HEADER = (
    "k",
    "mu",
    "f",
    "norm_v",
    "delta_f",
    "identity_residual",
    "grad_norm",
    "factor_norm_mu",
    "tan_angle_ref",
    "q_ratio_ref",
)


@dataclass(frozen=True)
class MicroStepRecord:
    """Diagnostics of one ALS micro step (sweep ``k``, 0-based mode ``mu``).

    ``descent_predicted`` is ``0.5 <Pi r, r> / ||b||^2`` evaluated with the
    projection of this step; ``identity_residual`` compares it with the
    measured decrease ``f_before - f_after``. ``value_residual`` is
    ``|f_after + ||v||^2 / (2 ||b||^2)|`` and ``projection_residual`` is
    ``||v_after - v_before - Pi r||``. ``cos2`` is ``<Pi b, b> / ||b||^2``.
    """

    k: int
    mu: int
    f_before: float
    f_after: float
    norm_v_before: float
    norm_v: float
    descent_predicted: float
    identity_residual: float
    value_residual: float
    projection_residual: float
    factor_norm_before: float
    factor_norm: float
    grad_norm: float
    cos2: float
    factor: np.ndarray = field(repr=False)
    tan_angle_ref: Optional[float] = None
    q_ratio_ref: Optional[float] = None

    @property
    def delta_f(self):
        return self.f_after - self.f_before


@dataclass
class SweepTrace:
    """Everything recorded along one solver run.

    ``snapshots[k]`` holds the factors after sweep ``k`` (index 0 is the
    initial guess), so per-sweep quantities are available even when
    ``trace_every > 1`` thins out ``records``.
    """

    mode_order: tuple
    b_sq_norm: float
    trace_every: int = 1
    snapshots: list = field(default_factory=list)
    sweep_f: list = field(default_factory=list)
    sweep_grad: list = field(default_factory=list)
    records: list = field(default_factory=list)
    reference: Optional[RankOneRep] = None

    @property
    def n_sweeps(self):
        return len(self.snapshots) - 1

    @property
    def final(self):
        return self.snapshots[-1]

    def f_values(self):
        """Objective after every recorded micro step, preceded by the initial value."""
        if not self.records:
            return np.array(self.sweep_f)
        return np.array([self.records[0].f_before] + [r.f_after for r in self.records])

    def iter_steps(self):
        """Yield ``(record, factors_before, factors_after)`` for every micro step.

        Needs a complete trace (``trace_every == 1``).
        """
        if self.trace_every != 1:
            raise ValueError("micro-step reconstruction needs trace_every == 1")
        d = len(self.mode_order)
        for i, rec in enumerate(self.records):
            if i % d == 0:
                current = list(self.snapshots[rec.k - 1].factors)
            before = RankOneRep(current)
            current[rec.mu] = rec.factor
            yield rec, before, RankOneRep(current)

    def mode_tangents(self, mode, reference=None):
        """Tangent of the angle between factor ``mode`` and the reference factor, per sweep.

        Index ``k`` is the value after sweep ``k`` (0 is the initial guess).
        Values are ``nan`` where the factor is orthogonal to the reference.
        """
        from .diagnostics import component_tan_angle

        ref = reference if reference is not None else self.reference
        if ref is None:
            raise ValueError("no reference configured")
        r = ref[mode]
        out = np.empty(len(self.snapshots))
        for k, snap in enumerate(self.snapshots):
            try:
                out[k] = component_tan_angle(snap[mode], r)
            except ValueError:
                out[k] = np.nan
        return out

    def write_csv(self, fh):
        """Write the micro-step CSV (modes and sweeps 1-based)."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.records:
            w.writerow(
                [
                    r.k,
                    r.mu + 1,
                    repr(r.f_after),
                    repr(r.norm_v),
                    repr(r.delta_f),
                    repr(r.identity_residual),
                    repr(r.grad_norm),
                    repr(r.factor_norm),
                    "" if r.tan_angle_ref is None else repr(r.tan_angle_ref),
                    "" if r.q_ratio_ref is None else repr(r.q_ratio_ref),
                ]
            )

    def to_csv(self):
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()
