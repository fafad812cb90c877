"""Command-line front end.

Subcommands ``run``, ``sweep``, ``verify``, ``generate`` and ``reproduce``.
Modes and CP term indices are 1-based on the command line and in files.
Exit status: 0 when a run stops on a tolerance, 2 when ``--max-sweeps`` is
exhausted, 1 on any error (including usage errors).
"""

import argparse
import concurrent.futures
import csv
import io
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import generators as gen
from .als import SolverConfig, TerminationReason, solve
from .diagnostics import classify_mode, rate_report, tan_angle_tensor
from .errors import (
    ConfigError,
    InsufficientTraceError,
    NotStationaryError,
    RankOneError,
    UnknownFigureError,
)
from .oracles import (
    b_lambda_rate,
    b_lambda_threshold,
    finite_diff_gradient_check,
    hosvd_start,
    random_start,
    singular_certificate,
    stationarity_residual,
)
from .tensor_io import dumps, read_rank_one, read_tensor, write_tensor
from .tensors import CPTensor, RankOneRep, evaluate_rank_one, objective_f, to_dense

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2

# a limit within this tangent of a CP term is reported as that term
TERM_MATCH_TAN = 1e-6
# tangents below this are round-off when the reference is the final iterate
SELF_REFERENCE_FLOOR = 1e-7
# ratios with a smaller predecessor tangent are dominated by rounding
RATIO_FLOOR = 1e-9

FIGURES = ("fig-tan", "fig-q1", "fig-q2", "fig-blambda-02", "fig-blambda-05", "ordering-demo")


class UsageError(RankOneError, ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for budget exhaustion
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


@dataclass
class Problem:
    """Target tensor plus what the generator knows about it.

    ``terms`` are candidate limits addressable with ``--reference-term``;
    ``init`` is a generator-supplied starting point and ``limit`` a limit
    known in closed form, used as the default rate reference.
    """

    tensor: object
    dense: np.ndarray
    terms: list = field(default_factory=list)
    init: Optional[RankOneRep] = None
    label: str = ""
    limit: Optional[RankOneRep] = None


def _parse_list(text, cast=float):
    return tuple(cast(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _params(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise UsageError(f"generator parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _take(params, key, cast, default):
    if key not in params:
        return default
    try:
        return cast(params.pop(key))
    except ValueError as exc:
        raise UsageError(f"bad value for generator parameter {key}: {exc}") from None


def generate_problem(name, params):
    """Build a :class:`Problem` from a generator name and string parameters."""
    params = dict(params)
    if name == "mohlenkamp":
        t = gen.gen_mohlenkamp()
        prob = Problem(t, to_dense(t), [t.term(j) for j in range(t.rank)], label=name)
    elif name == "b_lambda":
        lam = _take(params, "lambda", float, 0.2)
        d = _take(params, "d", int, 3)
        n = _take(params, "n", int, 2)
        seed = _take(params, "seed", int, 0)
        b, p, _ = gen.gen_b_lambda(lam, d=d, n=n, seed=seed)
        pp = RankOneRep([p] * d)
        # ⊗p is the unique best approximation up to the threshold
        limit = pp if lam <= b_lambda_threshold(d) else None
        prob = Problem(b, b, [pp], label=f"{name}(lambda={lam!r})", limit=limit)
    elif name == "orthogonal_cp":
        w = _take(params, "weights", _parse_list, (2.0, 1.0))
        dims = _take(params, "dims", lambda s: _parse_list(s, int), (3, 3, 3))
        seed = _take(params, "seed", int, 0)
        t = gen.gen_orthogonal_cp(w, dims, len(w), seed=seed)
        prob = Problem(t, to_dense(t), [t.term(j) for j in range(t.rank)], label=name)
    elif name == "ordering":
        lam = _take(params, "lambda", float, 0.9)
        a2 = _take(params, "alpha2", float, 2.0)
        a3 = _take(params, "alpha3", float, 0.72)
        t, init = gen.gen_ordering_example(lam, a2, a3)
        prob = Problem(t, to_dense(t), [t.term(j) for j in range(t.rank)], init, label=name)
    elif name == "synthetic_order4":
        seed = _take(params, "seed", int, 0)
        dims = _take(params, "dims", lambda s: _parse_list(s, int), (6, 6, 6, 6))
        ranks = _take(params, "ranks", lambda s: _parse_list(s, int), (3, 3, 3, 3))
        t = gen.gen_synthetic_order4(seed, dims, ranks)
        prob = Problem(t, to_dense(t), label=name)
    else:
        raise UsageError(f"unknown generator {name!r}; choose from {', '.join(gen.GENERATORS)}")
    if params:
        raise UsageError(f"unknown parameters for {name}: {', '.join(sorted(params))}")
    return prob


def load_problem(path):
    t = read_tensor(path)
    terms = [t.term(j) for j in range(t.rank)] if isinstance(t, CPTensor) else []
    return Problem(t, to_dense(t), terms, label=os.path.basename(path))


def _problem_from_args(args, extra_params=None):
    if bool(args.tensor) == bool(args.generate):
        raise UsageError("give exactly one of --tensor PATH or --generate NAME")
    if args.tensor:
        return load_problem(args.tensor)
    params = _params(args.param)
    if extra_params:
        params.update(extra_params)
    return generate_problem(args.generate, params)


def _init_from_args(args, prob, tau=None):
    init_args = list(args.init or [])
    if tau is None and args.init_tau is not None:
        tau = args.init_tau
    if tau is not None:
        init_args = ["tau", str(tau)]
    if not init_args:
        if prob.init is not None:
            return prob.init
        init_args = ["random"]
    kind = init_args[0]
    if kind == "file":
        if len(init_args) != 2:
            raise UsageError("--init file needs a path")
        return read_rank_one(init_args[1])
    if kind == "tau":
        if len(init_args) != 2:
            raise UsageError("--init tau needs a value")
        return gen.gen_initial_tau(float(init_args[1]), d=prob.dense.ndim)
    if len(init_args) != 1:
        raise UsageError(f"--init {kind} takes no argument")
    if kind == "random":
        return random_start(prob.dense.shape, np.random.default_rng(args.seed))
    if kind == "hosvd":
        return hosvd_start(prob.dense)
    raise UsageError(f"unknown init kind {kind!r}")


def _config_from_args(args):
    order = None
    if args.order:
        order = tuple(m - 1 for m in _parse_list(args.order, int))
    return SolverConfig(
        max_sweeps=args.max_sweeps,
        tol_grad=args.tol_grad,
        tol_delta_f=args.tol_df,
        mode_order=order,
        rebalance=args.rebalance,
        trace_every=args.trace_every,
    )


def _reference_from_args(args, prob):
    if args.reference and args.reference_term is not None:
        raise UsageError("give at most one of --reference and --reference-term")
    if args.reference:
        return read_rank_one(args.reference)
    if args.reference_term is not None:
        j = args.reference_term
        if not 1 <= j <= len(prob.terms):
            raise UsageError(f"--reference-term {j}: the tensor has {len(prob.terms)} known terms")
        return prob.terms[j - 1]
    return None


def nearest_term(prob, rep):
    """1-based index of the known term matching ``rep``, or ``None``."""
    v = evaluate_rank_one(rep)
    for j, term in enumerate(prob.terms):
        t = evaluate_rank_one(term)
        try:
            tan = tan_angle_tensor(v, t)
        except ValueError:
            continue
        if tan <= TERM_MATCH_TAN and abs(np.linalg.norm(v) - np.linalg.norm(t)) <= TERM_MATCH_TAN * np.linalg.norm(t):
            return j + 1
    return None


def rate_reference(prob, result, reference):
    """Reference for the rate report with its ``(floor, successor_floor)``."""
    if reference is not None:
        return reference, (RATIO_FLOOR, 0.0), "given"
    if prob.limit is not None:
        return prob.limit, (RATIO_FLOOR, 0.0), "known limit"
    j = nearest_term(prob, result.rep)
    if j is not None:
        return prob.terms[j - 1], (RATIO_FLOOR, 0.0), f"term {j}"
    return result.rep, (SELF_REFERENCE_FLOOR, SELF_REFERENCE_FLOOR), "final iterate"


def rate_estimates(result, reference, floors, modes=None):
    d = len(result.rep.factors)
    out = []
    for mode in modes if modes is not None else range(d):
        try:
            out.append(classify_mode(result.trace, mode, reference, floor=floors[0], successor_floor=floors[1]))
        except (InsufficientTraceError, ValueError):
            out.append(None)
    return out


def _report_text(prob, result, ref_label, estimates):
    lines = [
        f"tensor={prob.label}",
        f"termination={result.reason.value}",
        f"sweeps={result.trace.n_sweeps}",
        f"final_f={result.trace.sweep_f[-1]!r}",
        f"final_norm_v={float(np.linalg.norm(evaluate_rank_one(result.rep)))!r}",
        f"final_grad={result.trace.sweep_grad[-1]!r}",
        f"rate_reference={ref_label}",
    ]
    body = [e for e in estimates if e is not None]
    text = "\n".join(lines) + "\n" + rate_report(body)
    for mode, e in enumerate(estimates):
        if e is None:
            text += f"mode={mode + 1} classification=insufficient_trace\n"
    return text


def plot_script(csv_paths, title, column="tan_angle_ref", ylabel="tan angle to reference", xlabel="micro step"):
    """Gnuplot script drawing ``column`` of each CSV on a log scale."""
    col = {"tan_angle_ref": 9, "q_ratio_ref": 10, "grad_norm": 7, "tan": 3, "q_ratio": 4}[column]
    out = io.StringIO()
    out.write("set datafile separator ','\n")
    out.write("set key autotitle columnhead\n")
    out.write("set logscale y\n")
    out.write("set format y '10^{%L}'\n")
    out.write(f"set title '{title}'\n")
    out.write(f"set xlabel '{xlabel}'\n")
    out.write(f"set ylabel '{ylabel}'\n")
    plots = [f"'{os.path.basename(p)}' using 0:{col} with linespoints title '{os.path.basename(p)}'" for p in csv_paths]
    out.write("plot " + ", \\\n     ".join(plots) + "\n")
    return out.getvalue()


def _check_writable(*paths):
    for p in paths:
        if not p:
            continue
        d = os.path.dirname(os.path.abspath(p))
        os.makedirs(d, exist_ok=True)
        if not os.access(d, os.W_OK):
            raise UsageError(f"output directory {d} is not writable")


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _exit_for(reason):
    return EXIT_BUDGET if reason is TerminationReason.MAX_SWEEPS else EXIT_OK


def cmd_run(args, out=sys.stdout):
    prob = _problem_from_args(args)
    init = _init_from_args(args, prob)
    config = _config_from_args(args)
    reference = _reference_from_args(args, prob)
    plot_out = args.plot_out
    if plot_out is None and args.trace_out:
        plot_out = os.path.splitext(args.trace_out)[0] + ".gp"
    _check_writable(args.trace_out, args.report_out, plot_out)
    result = solve(prob.dense, init, config, reference=reference)
    ref, floors, label = rate_reference(prob, result, reference)
    report = _report_text(prob, result, label, rate_estimates(result, ref, floors))
    if args.trace_out:
        _write_text(args.trace_out, result.trace.to_csv())
    if plot_out and args.trace_out:
        column = "tan_angle_ref" if reference is not None else "grad_norm"
        _write_text(plot_out, plot_script([args.trace_out], prob.label, column))
    if args.report_out:
        _write_text(args.report_out, report)
    out.write(report)
    return _exit_for(result.reason)


def _grid_point(argv, key, value, trace_out):
    """Run one grid point in a worker; never raises."""
    row = {"param": f"{key}={value}", "converged_to": "", "final_f": "", "q_limsup": "", "classification": "", "error": ""}
    try:
        args = build_parser().parse_args(argv)
        extra = {}
        tau = None
        if key == "tau":
            tau = value
        elif key == "seed":
            args.seed = int(value)
        else:
            extra[key] = value
        prob = _problem_from_args(args, extra)
        init = _init_from_args(args, prob, tau=tau)
        reference = _reference_from_args(args, prob)
        result = solve(prob.dense, init, _config_from_args(args), reference=reference)
        if trace_out:
            _write_text(trace_out, result.trace.to_csv())
        j = nearest_term(prob, result.rep)
        if j is not None:
            row["converged_to"] = f"b{j}"
        elif result.reason is TerminationReason.MAX_SWEEPS:
            row["converged_to"] = "none"
        else:
            row["converged_to"] = "critical"
        row["final_f"] = repr(result.trace.sweep_f[-1])
        ref, floors, _ = rate_reference(prob, result, reference)
        est = rate_estimates(result, ref, floors, modes=[0])[0]
        if est is None:
            row["classification"] = "insufficient_trace"
        else:
            row["q_limsup"] = repr(est.q_limsup)
            row["classification"] = est.classification
    except (RankOneError, ValueError, OSError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


SUMMARY_HEADER = ("param", "converged_to", "final_f", "q_limsup", "classification", "error")


def cmd_sweep(args, argv, out=sys.stdout):
    if not args.grid or "=" not in args.grid:
        raise UsageError("--grid KEY=V1,V2,... is required (KEY is tau, seed or a generator parameter)")
    key, values = args.grid.split("=", 1)
    key = key.strip()
    values = [v.strip() for v in values.split(",") if v.strip()]
    if not values:
        raise UsageError("empty grid")
    if key == "tau" and (args.init or args.init_tau is not None):
        raise UsageError("a tau grid sets the initial guess; drop --init/--init-tau")
    out_dir = args.out_dir
    _check_writable(os.path.join(out_dir, "summary.csv"))
    base = _strip_sweep_args(argv)
    jobs = [(base, key, v, os.path.join(out_dir, f"trace_{i:03d}_{key}={v}.csv")) for i, v in enumerate(values)]
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_grid_point, *zip(*jobs)))
    else:
        rows = [_grid_point(*j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in rows:
        w.writerow([r[h] for h in SUMMARY_HEADER])
    summary = buf.getvalue()
    summary_path = args.summary_out or os.path.join(out_dir, "summary.csv")
    _check_writable(summary_path)
    _write_text(summary_path, summary)
    _write_text(
        os.path.join(out_dir, "sweep.gp"),
        plot_script([j[3] for j in jobs], f"{args.generate or args.tensor}: {key} grid", "grad_norm", "max gradient norm"),
    )
    out.write(summary)
    if any(r["error"] for r in rows):
        return EXIT_ERROR
    if any(r["converged_to"] == "none" for r in rows):
        return EXIT_BUDGET
    return EXIT_OK


def _strip_sweep_args(argv):
    """Turn a ``sweep`` argv into a ``run`` argv for the workers."""
    skip_value = {"--grid", "--out-dir", "--summary-out", "--jobs", "--config"}
    out = ["run"]
    it = iter(argv[1:])
    for tok in it:
        opt = tok.split("=", 1)[0]
        if opt in skip_value:
            if "=" not in tok:
                next(it, None)
            continue
        out.append(tok)
    return out


def cmd_verify(args, out=sys.stdout):
    prob = _problem_from_args(args)
    b = prob.dense
    if args.point:
        point = read_rank_one(args.point)
        if point.dims != b.shape:
            raise UsageError(f"point dims {point.dims} != tensor dims {b.shape}")
    else:
        result = solve(b, _init_from_args(args, prob), _config_from_args(args))
        point = result.rep
        out.write(f"solve termination={result.reason.value} sweeps={result.trace.n_sweeps}\n")
    res = stationarity_residual(point, b)
    out.write(f"stationarity_residual={res!r}\n")
    if res > args.stationary_tol:
        raise NotStationaryError(res, args.stationary_tol)
    d = b.ndim
    ok = True
    warn = False
    for nu in range(d):
        for mu in range(nu + 1, d):
            c = singular_certificate(point, b, nu, mu, stationary_tol=args.stationary_tol)
            out.write(
                f"pair=({nu + 1},{mu + 1}) sigma_max={c.sigma_max!r} gap={c.gap!r} norm_v={c.norm_v!r} "
                f"is_singular_value={c.is_singular_value} matches_norm={c.matches_norm}\n"
            )
            ok &= c.is_singular_value
            warn |= not c.matches_norm
    v = evaluate_rank_one(point)
    f = objective_f(v, b)
    vid = abs(f + float(v.ravel() @ v.ravel()) / (2 * float(b.ravel() @ b.ravel())))
    out.write(f"value_identity_residual={vid!r}\n")
    ok &= vid <= 1e-10 * max(1.0, abs(f))
    fd = finite_diff_gradient_check(point, b)
    out.write(f"gradient_fd_deviation={fd!r}\n")
    ok &= fd <= 1e-6
    if warn:
        out.write("warning=norm_not_largest_singular_value (critical point is not a global minimizer)\n")
    out.write(f"status={'pass' if ok else 'fail'}\n")
    return EXIT_OK if ok else EXIT_ERROR


def cmd_generate(args, out=sys.stdout):
    prob = generate_problem(args.name, _params(args.param))
    text = dumps(prob.tensor)
    if args.out:
        _check_writable(args.out, args.init_out)
        write_tensor(prob.tensor, args.out)
    else:
        out.write(text)
    if args.init_out:
        if prob.init is None:
            raise UsageError(f"generator {args.name} provides no initial guess")
        write_tensor(prob.init, args.init_out)
    return EXIT_OK


def _tan_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("param", "k", "tan", "q_ratio"))
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _per_sweep_rows(param, tangents):
    rows = []
    prev = None
    for k, t in enumerate(tangents):
        q = "" if (prev is None or not prev > 0 or not np.isfinite(t)) else repr(float(t / prev))
        rows.append((param, k, repr(float(t)), q))
        prev = t
    return rows


def reproduce(figure, out_dir, out=sys.stdout):
    """Run one canned experiment; returns a dict of computed series."""
    if figure not in FIGURES:
        raise UnknownFigureError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    os.makedirs(out_dir, exist_ok=True)
    data = {}
    if figure in ("fig-tan", "fig-q1", "fig-q2"):
        taus = (0.5001, 0.505, 0.6) if figure == "fig-q1" else (0.4, 0.495, 0.4999)
        term = 1 if figure == "fig-q1" else 2
        t = gen.gen_mohlenkamp()
        b = to_dense(t)
        ref = t.term(term - 1)
        paths = []
        rows = []
        for tau in taus:
            res = solve(b, gen.gen_initial_tau(tau), SolverConfig(max_sweeps=100), reference=ref)
            path = os.path.join(out_dir, f"{figure}_tau={tau!r}.csv")
            _write_text(path, res.trace.to_csv())
            paths.append(path)
            tans = res.trace.mode_tangents(0, ref)
            rows.extend(_per_sweep_rows(tau, tans))
            data[tau] = {"result": res, "tangents": tans}
            ratios = [r[3] for r in _per_sweep_rows(tau, tans) if r[3]]
            out.write(f"tau={tau!r} limit=b{term} final_f={res.trace.sweep_f[-1]!r} ratios={' '.join(ratios)}\n")
        _write_text(os.path.join(out_dir, f"{figure}_ratios.csv"), _tan_csv(rows))
        if figure == "fig-tan":
            script = plot_script(paths, "tangent to the limit, Mohlenkamp tensor", "tan_angle_ref")
        else:
            script = plot_script(paths, f"q-ratios towards term {term}", "q_ratio_ref", "q ratio")
        _write_text(os.path.join(out_dir, f"{figure}.gp"), script)
    elif figure in ("fig-blambda-02", "fig-blambda-05"):
        lam = 0.2 if figure == "fig-blambda-02" else 0.5
        b, p, _ = gen.gen_b_lambda(lam, seed=0)
        ref = RankOneRep([p, p, p])
        init = random_start(b.shape, np.random.default_rng(0))
        if lam < 0.5:
            config = SolverConfig(max_sweeps=200, tol_grad=0.0, tol_delta_f=0.0)
        else:
            config = SolverConfig(max_sweeps=6000, tol_grad=0.0, tol_delta_f=0.0)
        res = solve(b, init, config)
        tans = res.trace.mode_tangents(0, ref)
        est = classify_mode(res.trace, 0, ref, floor=RATIO_FLOOR, successor_floor=0.0)
        rows = _per_sweep_rows(lam, tans)
        path = os.path.join(out_dir, f"{figure}.csv")
        _write_text(path, _tan_csv(rows))
        _write_text(
            os.path.join(out_dir, f"{figure}.gp"),
            plot_script([path], f"b_lambda, lambda={lam}", "tan", "tan angle of factor 1 to p", "sweep"),
        )
        predicted = b_lambda_rate(lam) if lam < 0.5 else 1.0
        out.write(
            f"lambda={lam!r} sweeps={res.trace.n_sweeps} terminal_ratio={float(est.tail[-1])!r} "
            f"q_limsup={est.q_limsup!r} classification={est.classification} predicted={predicted!r}\n"
        )
        data = {"result": res, "tangents": tans, "estimate": est, "predicted": predicted}
    else:
        t, init = gen.gen_ordering_example(0.9, 2.0, 0.72)
        b = to_dense(t)
        prob = Problem(t, b, [t.term(j) for j in range(t.rank)], init)
        bb = float(b.ravel() @ b.ravel())
        paths = []
        for order in ((0, 1, 2), (0, 2, 1)):
            res = solve(b, init, SolverConfig(mode_order=order))
            v = evaluate_rank_one(res.rep)
            f = objective_f(v, b)
            predicted = -float(v.ravel() @ v.ravel()) / (2 * bb)
            j = nearest_term(prob, res.rep)
            label = ",".join(str(m + 1) for m in order)
            path = os.path.join(out_dir, f"ordering-demo_order={label}.csv")
            _write_text(path, res.trace.to_csv())
            paths.append(path)
            data[order] = {"result": res, "f": f, "term": j}
            out.write(f"order=({label}) limit=b{j} f={f!r} minus_norm_sq_over_2b={predicted!r}\n")
        f1, f2 = data[(0, 1, 2)]["f"], data[(0, 2, 1)]["f"]
        out.write(f"gap={f2 - f1!r}\n")
        _write_text(os.path.join(out_dir, "ordering-demo.gp"), plot_script(paths, "mode ordering", "grad_norm", "max gradient norm"))
    return data


def cmd_reproduce(args, out=sys.stdout):
    reproduce(args.figure, args.out_dir, out=out)
    return EXIT_OK


def _add_problem_args(p):
    src = p.add_argument_group("tensor source")
    src.add_argument("--tensor", metavar="PATH", help="tensor file")
    src.add_argument("--generate", metavar="NAME", help=f"generator: {', '.join(gen.GENERATORS)}")
    src.add_argument("-P", "--param", action="append", metavar="KEY=VALUE", help="generator parameter (repeatable)")


def _add_solver_args(p):
    p.add_argument("--init", nargs="+", metavar="KIND", help="file PATH | tau T | random | hosvd")
    p.add_argument("--init-tau", type=float, metavar="T", help="shorthand for --init tau T")
    p.add_argument("--seed", type=int, default=0, help="seed of the random initial guess")
    p.add_argument("--order", metavar="PERM", help="comma-separated 1-based mode order")
    p.add_argument("--max-sweeps", type=int, default=100_000)
    p.add_argument("--tol-grad", type=float, default=1e-10)
    p.add_argument("--tol-df", type=float, default=1e-15)
    p.add_argument("--rebalance", action="store_true")
    p.add_argument("--trace-every", type=int, default=1)
    p.add_argument("--reference", metavar="PATH", help="rank-one file to measure angles against")
    p.add_argument("--reference-term", type=int, metavar="J", help="1-based CP term to measure angles against")
    p.add_argument("--config", metavar="PATH", help="key=value file; command-line flags take precedence")


def build_parser():
    parser = _Parser(prog="rankone-als", description="Rank-one ALS with convergence instrumentation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="solve one problem and write its trace")
    _add_problem_args(run)
    _add_solver_args(run)
    run.add_argument("--trace-out", metavar="PATH")
    run.add_argument("--report-out", metavar="PATH")
    run.add_argument("--plot-out", metavar="PATH")

    sw = sub.add_parser("sweep", help="run a parameter grid")
    _add_problem_args(sw)
    _add_solver_args(sw)
    sw.add_argument("--grid", metavar="KEY=V1,V2,...", help="tau, seed or a generator parameter")
    sw.add_argument("--out-dir", default="sweep_out")
    sw.add_argument("--summary-out", metavar="PATH")
    sw.add_argument("--jobs", type=int, default=1)

    ver = sub.add_parser("verify", help="certify a critical point")
    _add_problem_args(ver)
    _add_solver_args(ver)
    ver.add_argument("--point", metavar="PATH", help="rank-one file; solved for when omitted")
    ver.add_argument("--stationary-tol", type=float, default=1e-8)

    g = sub.add_parser("generate", help="write a generated tensor file")
    g.add_argument("name", choices=gen.GENERATORS)
    g.add_argument("-P", "--param", action="append", metavar="KEY=VALUE")
    g.add_argument("-o", "--out", metavar="PATH", help="output file (stdout when omitted)")
    g.add_argument("--init-out", metavar="PATH", help="also write the generator's initial guess")

    rep = sub.add_parser("reproduce", help="rerun a canned experiment")
    rep.add_argument("figure", help=", ".join(FIGURES))
    rep.add_argument("--out-dir", default="reproduce_out")
    return parser


def read_config(path):
    """Parse a ``key=value`` file into command-line tokens."""
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: expected key=value", lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if value.lower() in ("true", "yes", "on"):
                tokens.append(flag)
            elif value.lower() in ("false", "no", "off"):
                continue
            elif flag in ("--init", "--param"):
                tokens.append(flag)
                tokens.extend(value.split())
            else:
                tokens.extend([flag, value])
    return tokens


def _expand_config(argv):
    if not argv or "--config" not in " ".join(argv):
        return argv
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv[1:])
    if not known.config:
        return argv
    # config values come first so later command-line flags override them
    return [argv[0], *read_config(known.config), *argv[1:]]


def main(argv=None, out=None):
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return exc.code if isinstance(exc.code, int) else EXIT_ERROR
        if args.command == "run":
            return cmd_run(args, out)
        if args.command == "sweep":
            return cmd_sweep(args, argv, out)
        if args.command == "verify":
            return cmd_verify(args, out)
        if args.command == "generate":
            return cmd_generate(args, out)
        return cmd_reproduce(args, out)
    except NotStationaryError as exc:
        print(f"error: NotStationary: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (RankOneError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
