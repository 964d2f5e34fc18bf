"""Command-line front end: ``circleflow <curvature|verify|minimize|flow|extremal>``.

Every command reads the layered :class:`~circleflow.config.RunConfig`, writes
its results under ``--out`` and returns a process exit code:
0 ok, 1 verification failure, 2 bad input, 3 positivity, 4 optimizer
non-convergence, 5 flow blow-up.

Factor grammar accepted by ``--factor`` and ``--start``::

    1.5                                  constant
    coeffs: c0, a1, b1, a2, b2, ...      trigonometric polynomial
    expcoeffs: c0, a1, b1, ...           exp of a trigonometric polynomial
    family:QEXT,c=1,lambda=2,alpha=0.3   extremal family member
    csv:path/to/factor.csv               nodal 'theta,value' samples
"""

from __future__ import annotations

import argparse
from collections.abc import Sequence
import logging
from pathlib import Path

import numpy as np

from circleflow import extremals, flows, functionals, optimize, verify
from circleflow.config import RunConfig, load_config, save_config
from circleflow.errors import (
    CircleflowError,
    ConvergenceFailure,
    InvalidInputError,
    VerificationFailed,
)
from circleflow.extremals import ExtremalParams, Family
from circleflow.flows import FlowKind, FlowOptions
from circleflow.functionals import FunctionalKind
from circleflow.geometry import ConformalMetric, Convention, CurvatureQuantity, compute_curvature
from circleflow.optimize import MinimizeOptions
from circleflow.results import (
    read_function_csv,
    write_function_csv,
    write_json,
    write_plot_data,
    write_table,
)
from circleflow.spectral_core import PeriodicFunction, from_trig_coefficients, random_positive
from circleflow.utils import setup_logging
from circleflow.yaml_store import YamlStoreError

_logger: logging.Logger = logging.getLogger(__name__)

_FLOW_FAMILY = {
    FlowKind.AFFINE: Family.BS,
    FlowKind.YAMABE: Family.YAM,
    FlowKind.SYM_Q: Family.SYMQ_CONJ,
    FlowKind.Q_FLOW: Family.QEXT,
}
_FAMILY_FUNCTIONAL = {
    Family.BS: FunctionalKind.J_BS,
    Family.YAM: FunctionalKind.Y_YAMABE,
    Family.SYMQ_CONJ: FunctionalKind.F_SYMQ,
    Family.QEXT: FunctionalKind.F_Q,
}
_FAMILY_KEYS = {"c": "c", "lambda": "lam", "lam": "lam", "alpha": "alpha"}


def _parse_numbers(body: str, text: str) -> list[float]:
    try:
        return [float(item) for item in body.replace(",", " ").split()]
    except ValueError as err:
        raise InvalidInputError(f"Bad coefficient list in factor {text!r}: {err}") from err


def _parse_family(body: str, text: str, n: int) -> PeriodicFunction:
    name, *assignments = [part.strip() for part in body.split(",")]
    try:
        family = Family(name.upper())
    except ValueError:
        choices = ", ".join(Family)
        raise InvalidInputError(f"Unknown family {name!r}; expected one of {choices}") from None
    values: dict[str, float] = {}
    for assignment in assignments:
        key, sep, raw = assignment.partition("=")
        field_name = _FAMILY_KEYS.get(key.strip())
        if not sep or field_name is None:
            raise InvalidInputError(f"Bad family parameter {assignment!r} in {text!r}")
        try:
            values[field_name] = float(raw)
        except ValueError as err:
            raise InvalidInputError(f"Bad value for {key!r} in {text!r}") from err
    try:
        params = ExtremalParams(family, **values)
    except ValueError as err:
        raise InvalidInputError(str(err)) from err
    return extremals.sample(params, n)


def parse_factor(text: str, n: int) -> PeriodicFunction:
    """Parse the factor mini-language into nodal values on an n-point grid.

    Raises:
        InvalidInputError: If ``text`` does not follow the grammar.
    """
    source = text.strip()
    prefix, sep, body = source.partition(":")
    prefix = prefix.strip().lower()
    if not sep:
        try:
            return PeriodicFunction.constant(float(source), n)
        except ValueError:
            raise InvalidInputError(f"Unrecognized factor {text!r}") from None
    if prefix in {"coeffs", "expcoeffs"}:
        coeffs = _parse_numbers(body, text)
        if not coeffs:
            raise InvalidInputError(f"Factor {text!r} has no coefficients")
        poly = from_trig_coefficients(coeffs, n)
        return PeriodicFunction(np.exp(poly.values)) if prefix == "expcoeffs" else poly
    if prefix == "family":
        return _parse_family(body, text, n)
    if prefix == "csv":
        return read_function_csv(Path(body.strip()), n)
    raise InvalidInputError(f"Unknown factor prefix {prefix!r} in {text!r}")


def _start_factor(config: RunConfig, text: str | None) -> PeriodicFunction:
    if text is None:
        return random_positive(np.random.default_rng(config.seed), config.n)
    return parse_factor(text, config.n)


def _prepare_output(config: RunConfig) -> Path:
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    save_config(config, out / "config.yaml")
    return out


def cmd_curvature(
    config: RunConfig,
    factor: str,
    convention: Convention,
    quantity: CurvatureQuantity,
    alpha: float | None = None,
) -> list[Path]:
    """Write the curvature field CSV and a JSON summary for one metric."""
    out = _prepare_output(config)
    g = ConformalMetric(parse_factor(factor, config.n), Convention(convention))
    rep = compute_curvature(g, CurvatureQuantity(quantity), alpha)
    csv_path = out / "curvature.csv"
    json_path = out / "curvature.json"
    metadata = {"quantity": str(quantity), "convention": str(convention)}
    write_function_csv(csv_path, rep.field, metadata)
    write_json(
        json_path,
        {
            "quantity": str(quantity),
            "convention": str(convention),
            "alpha": alpha,
            "factor": factor,
            "n": config.n,
            "mean": rep.mean,
            "total": rep.total,
            "length": rep.length,
            "min": rep.field.min(),
            "max": rep.field.max(),
        },
    )
    _logger.info("[CLI] %s mean=%.12g length=%.12g", quantity, rep.mean, rep.length)
    return [csv_path, json_path]


def cmd_verify(config: RunConfig, suites: Sequence[str], corrupt: bool = False) -> list[Path]:
    """Run identity suites and write one JSON report per suite.

    Raises:
        VerificationFailed: If any residual is above its tolerance.
    """
    out = _prepare_output(config)
    paths = []
    failed = []
    for name in suites:
        report = verify.run_suite(name, config, corrupt=corrupt)
        path = out / f"verify_{name}.json"
        write_json(path, report.model_dump(mode="json"))
        paths.append(path)
        if not report.passed:
            failed.append(name)
    if failed:
        raise VerificationFailed(f"Suites with residuals above tolerance: {', '.join(failed)}")
    return paths


def _fit_summary(u: PeriodicFunction, family: Family) -> dict[str, object]:
    try:
        params, error = extremals.fit_family(u, family)
    except ConvergenceFailure as err:
        _logger.warning("[CLI] %s fit failed: %s", family, err)
        return {"fit_family": str(family), "fit_error": None}
    return {
        "fit_family": str(family),
        "fit_c": params.c,
        "fit_lambda": params.lam,
        "fit_alpha_rad": params.alpha,
        "fit_error": error,
    }


def cmd_minimize(
    config: RunConfig,
    kind: FunctionalKind,
    start: str | None = None,
    log_space: bool = False,
) -> list[Path]:
    """Minimize one functional and write minimizer, history and summary.

    Raises:
        ConvergenceFailure: After writing the outputs, if the minimizer did not converge.
    """
    kind = FunctionalKind(kind)
    out = _prepare_output(config)
    u0 = _start_factor(config, start)
    opts = MinimizeOptions(
        gtol=config.gradient_tol,
        max_iter=config.max_iter,
        constraint_tol=config.constraint_tol,
        log_space=log_space,
    )
    result = optimize.minimize(kind, u0, opts)
    minimizer_path = out / "minimizer.csv"
    history_path = out / "history.csv"
    summary_path = out / "minimize.json"
    write_function_csv(minimizer_path, result.minimizer, {"kind": str(kind), "seed": config.seed})
    write_table(
        history_path,
        ("iteration", "value", "grad_norm", "constraint_residual"),
        ((r.iteration, r.value, r.grad_norm, r.constraint_residual) for r in result.history),
    )
    sharp = functionals.sharp_constant(kind)
    multipliers = optimize.lagrange_multipliers(kind, result.minimizer)
    summary: dict[str, object] = {
        "kind": str(kind),
        "n": config.n,
        "seed": config.seed,
        "value": result.value,
        "sharp_constant": sharp,
        "relative_gap": None if sharp is None else (result.value - sharp) / abs(sharp),
        "converged": result.converged,
        "iterations": result.iterations,
        "grad_norm": result.grad_norm,
        "constraint_residuals": result.constraint_residuals,
        "tau": multipliers.tau,
        "moment_multipliers": multipliers.multipliers,
        "euler_lagrange_residual": multipliers.residual,
    }
    summary.update(_fit_summary(result.minimizer, extremals.sharp_family(kind)))
    write_json(summary_path, summary)
    if not result.converged:
        raise ConvergenceFailure(
            f"{kind} minimization stopped at grad_norm {result.grad_norm:.3e} "
            f"after {result.iterations} iterations; partial results in {out}"
        )
    return [minimizer_path, history_path, summary_path]


def cmd_flow(
    config: RunConfig,
    kind: FlowKind,
    start: str | None = None,
    t_end: float | None = None,
) -> list[Path]:
    """Run one normalized flow and write trajectory, final factor and verdict."""
    kind = FlowKind(kind)
    out = _prepare_output(config)
    w0 = _start_factor(config, start)
    opts = FlowOptions(
        dt0=config.flow_dt0,
        dt_max=config.flow_dt_max,
        stationarity_tol=config.stationarity_tol,
    )
    state = flows.evolve(kind, w0, config.t_end if t_end is None else t_end, opts)
    report = flows.monotonicity_report(state)
    trajectory_path = out / "trajectory.csv"
    final_path = out / "final_factor.csv"
    verdict_path = out / "monotonicity.json"
    plot_path = out / "trajectory.dat"
    write_table(
        trajectory_path,
        ("t", "mean", "length", "functional"),
        ((s.t, s.mean, s.length, s.functional) for s in state.history),
        {"kind": str(kind), "seed": config.seed},
    )
    write_function_csv(final_path, state.metric.factor, {"kind": str(kind), "t": state.t})
    write_plot_data(plot_path, [s.t for s in state.history], report.values)
    verdict: dict[str, object] = {
        "kind": str(kind),
        "t_final": state.t,
        "steps": state.steps,
        "stationary": state.stationary,
        "quantity": report.quantity,
        "direction": report.direction,
        "monotone": report.monotone,
        "worst_violation_rate": report.worst_violation,
        "length_drift": report.length_drift,
        "bound": report.bound,
        "bounded": report.bounded,
    }
    verdict.update(_fit_summary(state.metric.factor, _FLOW_FAMILY[kind]))
    write_json(verdict_path, verdict)
    return [trajectory_path, final_path, verdict_path, plot_path]


def cmd_extremal(
    config: RunConfig, family: Family, c: float, lam: float, alpha: float
) -> list[Path]:
    """Sample one extremal family member and report its residuals and functional value."""
    params = ExtremalParams(Family(family), c, lam, alpha)
    out = _prepare_output(config)
    u = extremals.sample(params, config.n)
    tau, residual = extremals.el_residual(u, params.family)
    kind = _FAMILY_FUNCTIONAL[params.family]
    value = functionals.evaluate(kind, u)
    sharp = functionals.sharp_constant(kind)
    summary: dict[str, object] = {
        "family": str(params.family),
        "c": params.c,
        "lambda": params.lam,
        "alpha_rad": params.alpha,
        "n": config.n,
        "tau": tau,
        "euler_lagrange_residual": residual,
        "functional": str(kind),
        "value": value,
        "sharp_constant": sharp,
        "relative_gap": None if sharp is None else (value - sharp) / abs(sharp),
    }
    if params.family is Family.QEXT:
        summary["greens_residual"] = extremals.greens_residual(u)
    csv_path = out / "extremal.csv"
    json_path = out / "extremal.json"
    write_function_csv(csv_path, u, {"family": str(params.family), "lambda": params.lam})
    write_json(json_path, summary)
    return [csv_path, json_path]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=None, help="grid size (power of two)")
    parser.add_argument("--seed", type=int, default=None, help="random seed")
    parser.add_argument("--tol", type=float, default=None, help="gradient tolerance")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--config", type=Path, default=None, help="YAML configuration file")
    parser.add_argument("--log-level", default=None, help="logging level (overrides LOGLEVEL)")


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser for all subcommands."""
    parser = argparse.ArgumentParser(
        prog="circleflow",
        description="Conformal curvature on the circle: inequalities, extremals and flows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curvature", help="curvature field of a conformal metric")
    _add_common(p)
    p.add_argument("--factor", required=True, help="conformal factor (see grammar)")
    p.add_argument("--convention", choices=[c.value for c in Convention], default="pow4")
    p.add_argument("--quantity", choices=[q.value for q in CurvatureQuantity], default="R1")
    p.add_argument("--alpha", type=float, default=None)

    p = sub.add_parser("verify", help="run identity suites")
    _add_common(p)
    p.add_argument("--suite", choices=[*verify.SUITE_NAMES, "all"], default="all")
    p.add_argument("--corrupt", action="store_true", help="perturb a coefficient on purpose")

    p = sub.add_parser("minimize", help="minimize a sharp functional")
    _add_common(p)
    minimizable = [k.value for k in FunctionalKind if k is not FunctionalKind.TOTAL_Q]
    p.add_argument("--kind", choices=minimizable, required=True)
    p.add_argument("--start", default=None, help="start factor (default: seeded random)")
    p.add_argument("--log-space", action="store_true", help="descend in log u")

    p = sub.add_parser("flow", help="run a normalized curvature flow")
    _add_common(p)
    p.add_argument("--kind", choices=[k.value for k in FlowKind], required=True)
    p.add_argument("--start", default=None, help="start factor (default: seeded random)")
    p.add_argument("--t-end", type=float, default=None)

    p = sub.add_parser("extremal", help="sample an extremal family member")
    _add_common(p)
    p.add_argument("--family", choices=[f.value for f in Family], required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.0)
    return parser


def _dispatch(args: argparse.Namespace, config: RunConfig) -> list[Path]:
    if args.command == "curvature":
        return cmd_curvature(
            config,
            args.factor,
            Convention(args.convention),
            CurvatureQuantity(args.quantity),
            args.alpha,
        )
    if args.command == "verify":
        suites = list(verify.SUITE_NAMES) if args.suite == "all" else [args.suite]
        return cmd_verify(config, suites, args.corrupt)
    if args.command == "minimize":
        return cmd_minimize(config, FunctionalKind(args.kind), args.start, args.log_space)
    if args.command == "flow":
        return cmd_flow(config, FlowKind(args.kind), args.start, args.t_end)
    return cmd_extremal(config, Family(args.family), args.c, args.lam, args.alpha)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    overrides = {"n": args.n, "seed": args.seed, "gradient_tol": args.tol, "output_dir": args.out}
    try:
        config = load_config(args.config, overrides)
        paths = _dispatch(args, config)
    except CircleflowError as err:
        _logger.error("[CLI] %s: %s", type(err).__name__, err)
        return err.exit_code
    except YamlStoreError as err:
        _logger.error("[CLI] %s", err)
        return 2
    except ValueError as err:
        _logger.error("[CLI] invalid input: %s", err)
        return 2
    for path in paths:
        _logger.info("[CLI] wrote %s", path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
