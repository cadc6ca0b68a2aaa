"""
Command-line front end.
Exit codes: 0 success, 1 semantic negative, 2 input error, 3 non-convergence.
"""

import argparse
import csv
import io
import sys
from typing import Any, Callable, Dict, List, Optional
import numpy as np
from pydantic import ValidationError

from barycentric_ot.exceptions import (
    CertificateError, MalformedFile, OrderViolated, SolverError, WotError
)
from barycentric_ot.models import RunConfig
from barycentric_ot.services.analysis import (
    check_c2_monotonicity, check_equality_w2_t2, check_map_regularity, check_submartingale_1d
)
from barycentric_ot.services.costs import solve_lambda
from barycentric_ot.services.dual import build_dual_potential, duality_gap
from barycentric_ot.services.linprog import w2_squared
from barycentric_ot.services.order import (
    build_martingale_coupling, check_convex_order, check_icx_order_1d, check_stochastic_order_1d,
    compose_chain
)
from barycentric_ot.services.simplex import simplex_projection_measure
from barycentric_ot.services.wot_solver import barycentric_solver
from barycentric_ot.utils.logger import logger
from barycentric_ot.utils.measure_io import read_measure, read_result
from barycentric_ot.utils.serialization import (
    certificate_payload, dumps, measure_payload, order_payload, plan_payload, report_payload
)


EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _require(cfg: RunConfig, *names: str) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(cfg, name) is None]
    if missing:
        raise MalformedFile(f"missing required option(s): {', '.join(missing)}")


def _solve(cfg: RunConfig, mu, nu):
    return barycentric_solver.solve(
        mu, nu,
        tol=cfg.tol,
        max_iters=cfg.max_iters,
        start=cfg.start,
        away_steps=False if cfg.plain_fw else None,
        seed=cfg.seed,
    )


def _solution_summary(solution) -> Dict[str, Any]:
    return {
        "value": solution.value,
        "fw_gap": solution.fw_gap,
        "iterations": solution.iterations,
        "converged": solution.converged,
    }


def cmd_project(cfg: RunConfig) -> int:
    """Full pipeline: projection, martingale completion, dual certificate and checks."""
    _require(cfg, "mu", "nu")
    mu, nu = read_measure(cfg.mu), read_measure(cfg.nu)
    solution = _solve(cfg, mu, nu)
    payload: Dict[str, Any] = _solution_summary(solution)
    payload["mu"] = measure_payload(mu)
    payload["barycenters"] = solution.barycenters
    if not solution.converged:
        _emit(cfg, dumps(payload))
        return EXIT_NOT_CONVERGED

    projection = barycentric_solver.extract_projection(solution)
    kernel = build_martingale_coupling(projection.measure, nu)
    chain = compose_chain(mu, solution.barycenters, kernel, atom_index=projection.atom_index)
    potential = build_dual_potential(solution)
    certificate = duality_gap(mu, nu, solution, potential)

    checks = {
        "c2_monotone": report_payload(check_c2_monotonicity(solution.plan)),
        "lipschitz": report_payload(check_map_regularity(mu.points, solution.barycenters)),
    }
    if mu.dim == 1 and check_icx_order_1d(mu, nu).holds:
        checks["submartingale"] = report_payload(check_submartingale_1d(mu, nu, solution))

    payload.update({
        "mu_bar": measure_payload(projection.measure),
        "plan": plan_payload(solution.plan),
        "martingale_kernel": plan_payload(kernel),
        "chain_plan": plan_payload(chain),
        "dual_gap": certificate.gap,
        "dual": certificate_payload(certificate, potential.f_circ),
        "checks": checks,
    })
    _emit(cfg, dumps(payload))
    return EXIT_OK if certificate.certified else EXIT_NOT_CONVERGED


def cmd_solve(cfg: RunConfig) -> int:
    _require(cfg, "mu", "nu")
    solution = _solve(cfg, read_measure(cfg.mu), read_measure(cfg.nu))
    _emit(cfg, dumps(_solution_summary(solution)))
    return EXIT_OK if solution.converged else EXIT_NOT_CONVERGED


def cmd_w2(cfg: RunConfig) -> int:
    _require(cfg, "mu", "nu")
    result = w2_squared(read_measure(cfg.mu), read_measure(cfg.nu))
    _emit(cfg, dumps({
        "value": result.value,
        "plan": plan_payload(result.plan),
        "row_potentials": result.row_potentials,
        "col_potentials": result.col_potentials,
    }))
    return EXIT_OK


def cmd_check_order(cfg: RunConfig) -> int:
    _require(cfg, "mu", "nu")
    mu, nu = read_measure(cfg.mu), read_measure(cfg.nu)
    checks: Dict[str, Callable] = {
        "convex": check_convex_order,
        "icx": check_icx_order_1d,
        "stochastic": check_stochastic_order_1d,
    }
    if cfg.relation not in checks:
        raise MalformedFile(f"unknown relation {cfg.relation!r}")
    certificate = checks[cfg.relation](mu, nu)
    _emit(cfg, dumps(order_payload(certificate)))
    return EXIT_OK if certificate.holds else EXIT_NEGATIVE


def cmd_simplex(cfg: RunConfig) -> int:
    target = cfg.simplex or cfg.nu
    if cfg.mu is None or target is None:
        raise MalformedFile("simplex needs --mu and --simplex")
    mu = read_measure(cfg.mu)
    result = simplex_projection_measure(mu, read_measure(target))
    _emit(cfg, dumps({
        "value": result.value,
        "translation": result.translation,
        "images": result.projection.images,
        "mu_bar": measure_payload(result.projection.measure),
        "phi_values": result.phi_values,
        "gradient_error": result.gradient_error,
    }))
    return EXIT_OK


def cmd_monotone_check(cfg: RunConfig) -> int:
    _require(cfg, "mu", "nu")
    mu, nu = read_measure(cfg.mu), read_measure(cfg.nu)
    solution = _solve(cfg, mu, nu)
    if not solution.converged:
        _emit(cfg, dumps(_solution_summary(solution)))
        return EXIT_NOT_CONVERGED
    c2 = check_c2_monotonicity(solution.plan)
    lipschitz = check_map_regularity(mu.points, solution.barycenters)
    _emit(cfg, dumps({"c2_monotone": report_payload(c2), "lipschitz": report_payload(lipschitz)}))
    return EXIT_OK if c2.passed and lipschitz.passed else EXIT_NEGATIVE


def cmd_compare(cfg: RunConfig) -> int:
    _require(cfg, "mu", "nu")
    report = check_equality_w2_t2(read_measure(cfg.mu), read_measure(cfg.nu), tol=cfg.tol)
    _emit(cfg, dumps(report_payload(report)))
    return EXIT_OK if report.passed else EXIT_NEGATIVE


def cmd_lambda(cfg: RunConfig) -> int:
    _require(cfg, "mu", "nu", "lam")
    result = solve_lambda(read_measure(cfg.mu), read_measure(cfg.nu), cfg.lam,
                          tol=cfg.tol, max_iters=cfg.max_iters, seed=cfg.seed)
    if cfg.format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        for row in result.plan.matrix:
            writer.writerow([repr(float(v)) for v in row])
        _emit(cfg, buffer.getvalue())
    else:
        _emit(cfg, dumps({
            "lambda": cfg.lam,
            "value": result.value,
            "constant": result.reduction.constant if result.reduction else None,
            "plan": plan_payload(result.plan),
            "converged": result.converged,
        }))
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _plot_source(cfg: RunConfig):
    if cfg.solution is not None:
        data = read_result(cfg.solution)
        try:
            mu = data["mu"]
            points = np.asarray(mu["points"], dtype=float)
            weights = np.asarray(mu["weights"], dtype=float)
            images = np.asarray(data["barycenters"], dtype=float)
            mu_bar = data["mu_bar"]
            atoms = np.asarray(mu_bar["points"], dtype=float)
            atom_weights = np.asarray(mu_bar["weights"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFile(f"{cfg.solution}: missing or invalid field {exc}") from exc
        if points.ndim != 2 or images.shape != points.shape or atoms.ndim != 2:
            raise MalformedFile(f"{cfg.solution}: inconsistent array shapes")
        return points, images, weights, atoms, atom_weights

    _require(cfg, "mu", "nu")
    mu, nu = read_measure(cfg.mu), read_measure(cfg.nu)
    solution = _solve(cfg, mu, nu)
    projection = barycentric_solver.extract_projection(solution)
    return mu.points, solution.barycenters, mu.weights, projection.measure.points, projection.measure.weights


def cmd_plot_data(cfg: RunConfig) -> int:
    """CSV of displacement arrows x_i -> b_i and of the projection atoms."""
    points, images, weights, atoms, atom_weights = _plot_source(cfg)
    d = points.shape[1]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["kind"] + [f"x{k}" for k in range(d)] + [f"b{k}" for k in range(d)] + ["weight"])
    for x, b, w in zip(points, images, weights):
        writer.writerow(["arrow"] + [repr(float(c)) for c in x] + [repr(float(c)) for c in b] + [repr(float(w))])
    for z, w in zip(atoms, atom_weights):
        writer.writerow(["atom"] + [repr(float(c)) for c in z] + [""] * d + [repr(float(w))])
    _emit(cfg, buffer.getvalue())
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "project": cmd_project,
    "solve": cmd_solve,
    "w2": cmd_w2,
    "check-order": cmd_check_order,
    "simplex": cmd_simplex,
    "monotone-check": cmd_monotone_check,
    "compare": cmd_compare,
    "lambda": cmd_lambda,
    "plot-data": cmd_plot_data,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="barycentric-ot",
        description="Barycentric weak optimal transport between discrete measures",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--mu", help="source measure (CSV or JSON)")
        cmd.add_argument("--nu", help="target measure (CSV or JSON)")
        cmd.add_argument("--output", "-o", help="write the result here instead of stdout")
        cmd.add_argument("--tol", type=float)
        cmd.add_argument("--max-iters", dest="max_iters", type=int)
        cmd.add_argument("--seed", type=int, default=0)
        cmd.add_argument("--start", choices=["product", "random_vertex"], default="product")
        cmd.add_argument("--plain-fw", dest="plain_fw", action="store_true",
                         help="disable away steps")
        if name == "check-order":
            cmd.add_argument("--relation", choices=["convex", "icx", "stochastic"], default="convex")
        if name == "simplex":
            cmd.add_argument("--simplex", help="vertex measure file")
        if name == "lambda":
            cmd.add_argument("--lam", "--lambda", dest="lam", type=float, required=True)
            cmd.add_argument("--format", choices=["json", "csv"], default="json")
        if name == "plot-data":
            cmd.add_argument("--solution", help="JSON output of a previous project run")
            cmd.add_argument("--format", choices=["csv"], default="csv")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(**vars(args))
    except ValidationError as exc:
        sys.stderr.write(f"InvalidArgument: {exc.errors()[0]['loc'][0]} {exc.errors()[0]['msg']}\n")
        return EXIT_INPUT

    try:
        return COMMANDS[cfg.subcommand](cfg)
    except (SolverError, CertificateError, OrderViolated) as exc:
        # raised after the inputs were read: the solve pipeline broke down
        logger.error(f"{cfg.subcommand} failed: {exc}")
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_NOT_CONVERGED
    except WotError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_INPUT
    except OSError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_INPUT
