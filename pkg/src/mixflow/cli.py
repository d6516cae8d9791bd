"""Command-line front end.

Every subcommand writes its outputs plus ``run.json`` (the full flag set and
package version) into ``--out``.  Exit status: 0 success, 1 usage error, 2
numerical or contract failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .control import ControlPath, read_control, write_control
from .errors import MixflowError
from .field import TWO_PI, Grid, ScalarField, VectorField
from .fieldio import read_field, read_trajectory, write_field, write_trajectory

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# helpers


def _grid(args) -> Grid:
    nx = args.nx or args.n
    ny = args.ny or args.n
    return Grid(nx, ny, args.lx, args.ly)


def _density(text: str, grid: Grid) -> ScalarField:
    from .initial import parse_density
    if text.endswith(".fld"):
        f, _ = read_field(text)
        if not isinstance(f, ScalarField):
            raise UsageError(f"{text} holds a vector field, expected a density")
        return f
    return parse_density(text, grid)


def _velocity(text: str, grid: Grid) -> VectorField:
    from .initial import parse_velocity
    if text.endswith(".fld"):
        f, _ = read_field(text)
        if not isinstance(f, VectorField):
            raise UsageError(f"{text} holds a scalar field, expected a velocity")
        return f
    return parse_velocity(text, grid)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _record(out: Path, args):
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    _write_json(out / "run.json", {"command": args.command, "flags": flags,
                                   "version": __version__})


def _add_grid(p, n=64):
    p.add_argument("--n", type=int, default=n, help="grid points per axis (power of two)")
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--lx", type=float, default=TWO_PI)
    p.add_argument("--ly", type=float, default=TWO_PI)


def _add_problem(p):
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--nt", type=int, default=16, help="control time intervals")
    p.add_argument("--dt", type=float, default=None, help="transport step (default T/(4 nt))")
    p.add_argument("--norm", default="l2", choices=["l2", "h1", "enstrophy", "palenstrophy"])
    p.add_argument("--metric", default="hneg:1", help="l2 or hneg[:s]")
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--init-noise", type=float, default=1e-2,
                   help="amplitude of the seeded random initial control (0 for zero control)")
    p.add_argument("--seed", type=int, default=0)


def _initial_control(args, grid):
    if args.init_noise <= 0:
        return None
    rng = np.random.default_rng(args.seed)
    return ControlPath.random(grid, args.T, args.nt, rng, args.init_noise, kmax=3.0,
                              mean_amplitude=args.init_noise)


def _opts(args):
    from .mixing import OptimizerOptions
    return OptimizerOptions(max_iters=args.max_iters, grad_tol=args.grad_tol)


# ---------------------------------------------------------------------------
# subcommands


def cmd_make_field(args):
    grid = _grid(args)
    if (args.density is None) == (args.velocity is None):
        raise UsageError("give exactly one of --density or --velocity")
    out = _out(args)
    if args.density is not None:
        f = _density(args.density, grid)
    else:
        f = _velocity(args.velocity, grid)
    write_field(out / f"{args.name}.fld", f, name=args.name)
    _record(out, args)


def cmd_transport(args):
    from .transport import integrate_transport, reachability_check
    grid = _grid(args)
    rho0 = _density(args.rho, grid)
    if args.control is not None:
        source = read_control(args.control)
    else:
        source = _velocity(args.velocity, rho0.grid)
    out = _out(args)
    traj = integrate_transport(rho0, source, args.T, args.dt, direction=args.direction,
                               stride=args.stride)
    write_trajectory(out / "density", traj.times, traj.snapshots, name="rho")
    traj.write_csv(out / "diagnostics.csv")
    v = reachability_check(traj.initial, traj.final)
    _write_json(out / "summary.json", {
        "mass_drift": traj.mass_drift, "l2_drift": traj.l2_drift, "steps": traj.meta.get("steps"),
        "pushforward_mass_gap": v.mass_gap, "pushforward_w1_gap": v.w1_gap})
    _record(out, args)


def cmd_euler(args):
    from .euler import integrate_euler
    grid = _grid(args)
    v0 = _velocity(args.init, grid)
    out = _out(args)
    traj = integrate_euler(v0, args.T, args.dt, stride=args.stride)
    traj.write(out)
    _write_json(out / "summary.json", {"energy_drift": traj.energy_drift,
                                       "enstrophy_drift": traj.enstrophy_drift})
    _record(out, args)


def cmd_decompose(args):
    from .helmholtz import weighted_helmholtz_decompose
    grid = _grid(args)
    v = _velocity(args.velocity, grid)
    mu = _density(args.mu, v.grid) if args.mu else None
    out = _out(args)
    d = weighted_helmholtz_decompose(v, mu, tol=args.tol)
    write_field(out / "potential.fld", d.v_p, name="potential")
    write_field(out / "rotational.fld", d.v_r, name="rotational")
    write_field(out / "xi.fld", d.xi, name="xi")
    _write_json(out / "summary.json", {"residual": d.residual})
    _record(out, args)


def cmd_select_velocity(args):
    from .metrics import select_velocity
    from .transport import continuity_rhs
    grid = _grid(args)
    rho = _density(args.rho, grid)
    if (args.tau is None) == (args.tau_velocity is None):
        raise UsageError("give exactly one of --tau or --tau-velocity")
    if args.tau is not None:
        tau = _density(args.tau, rho.grid)
    else:
        tau = continuity_rhs(rho, _velocity(args.tau_velocity, rho.grid))
    out = _out(args)
    sel = select_velocity(rho, tau, args.norm, tol=args.tol)
    write_field(out / "velocity.fld", sel.v, name="velocity")
    write_field(out / "lambda.fld", sel.lam, name="lambda")
    write_field(out / "gamma.fld", sel.gamma, name="gamma")
    _write_json(out / "summary.json", {
        "metric_derivative": sel.effort, "constraint_residual": sel.constraint_residual,
        "divergence_residual": sel.divergence_residual,
        "stationarity_residual": sel.stationarity_residual, "iterations": sel.iterations})
    _record(out, args)


def cmd_mix(args):
    from .initial import uniform_like
    from .metrics import mix_distance
    from .mixing import MixingProblemSpec, optimize_mixing
    grid = _grid(args)
    rho_i = _density(args.rho_i, grid)
    rho_star = uniform_like(rho_i) if args.rho_star is None else _density(args.rho_star, rho_i.grid)
    spec = MixingProblemSpec(rho_i, rho_star, args.alpha, args.T, args.nt, args.norm,
                             args.metric, args.dt)
    res = optimize_mixing(spec, _opts(args), initial=_initial_control(args, rho_i.grid))
    out = _out(args)
    res.write(out)
    d0 = mix_distance(rho_i, rho_star, spec.metric)
    d1 = mix_distance(res.rho_T, rho_star, spec.metric)
    _write_json(out / "summary.json", {"status": res.status, "iterations": res.iterations,
                                       "J": res.J, "distance_initial": d0,
                                       "distance_final": d1})
    _record(out, args)


def cmd_transfer(args):
    from .mixing import transfer_continuation
    grid = _grid(args)
    rho_i = _density(args.rho_i, grid)
    rho_f = _density(args.rho_f, rho_i.grid)
    est = transfer_continuation(rho_i, rho_f, args.T, args.nt, args.norm, args.metric, args.dt,
                                alpha0=args.alpha0, K=args.K, gap_tol=args.gap_tol,
                                opts=_opts(args), initial=_initial_control(args, rho_i.grid),
                                force=args.force)
    out = _out(args)
    if est.result is not None:
        est.result.write(out)
    else:
        write_control(out / "control", est.control)
    with open(out / "continuation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "J", "effort", "gap"])
        for h in est.history:
            w.writerow([repr(h["alpha"]), repr(h["J"]), repr(h["effort"]), repr(h["gap"])])
    _write_json(out / "summary.json", {"m_upper": est.m_upper, "gap": est.gap,
                                       "reached": est.reached, "stages": len(est.history)})
    print(f"m_upper = {est.m_upper!r}  gap = {est.gap!r}  reached = {est.reached}")
    _record(out, args)


def _sigma_from_text(text: str, T_new: float, T: float):
    kind, _, arg = text.partition(":")
    if kind == "linear":
        return None, None
    if kind == "power":
        p = float(arg or 2.0)
        return (lambda t: T * (t / T_new) ** p), (lambda t: T * p * (t / T_new) ** (p - 1) / T_new)
    if kind == "table":
        return np.loadtxt(arg, dtype=float, ndmin=1), None
    raise UsageError(f"unknown --sigma {text!r}; use linear, power:P or table:FILE")


def cmd_rescale(args):
    from .mixing import control_effort, rescale_control
    control = read_control(args.control)
    T_new = args.T_new if args.T_new is not None else control.T
    sigma, dsigma = _sigma_from_text(args.sigma, T_new, control.T)
    new = rescale_control(control, T_new, sigma, dsigma, n_nodes=args.nodes)
    out = _out(args)
    write_control(out / "control", new)
    _write_json(out / "summary.json", {
        "effort_original": control_effort(control, args.norm),
        "effort_rescaled": control_effort(new, args.norm), "T_original": control.T,
        "T_new": new.T})
    _record(out, args)


def cmd_diagnose(args):
    from .metrics import MetricKind
    from .mixing import MixingProblemSpec, evaluate_control, geodesic_diagnostics
    res_dir = Path(args.result)
    problem = json.loads((res_dir / "problem.json").read_text())
    control = read_control(res_dir / "control")
    rho_i, _ = read_field(res_dir / "rho_i.fld")
    rho_star, _ = read_field(res_dir / "rho_star.fld")
    spec = MixingProblemSpec(rho_i, rho_star, problem["alpha"], problem["T"],
                             problem["n_intervals"], problem["norm"],
                             MetricKind.parse(problem["metric"]), problem["dt"], mass_tol=1e-6)
    rep = geodesic_diagnostics(evaluate_control(control, spec))
    out = _out(args)
    er = rep.euler_residual
    with open(out / "geodesic.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "time", "speed", "stationarity", "euler_residual"])
        for n, t in enumerate(control.times):
            e = "" if er is None or n == 0 or n == control.n_nodes - 1 else repr(float(er[n - 1]))
            w.writerow([n, repr(float(t)), repr(float(rep.speed[n])),
                        repr(float(rep.stationarity[n])), e])
    _write_json(out / "summary.json", {
        "speed_cv": rep.speed_cv, "stationarity_max": float(np.max(rep.stationarity)),
        "euler_residual_max": None if er is None or len(er) == 0 else float(np.max(er))})
    _record(out, args)


def _pgm_array(field, component):
    if isinstance(field, ScalarField):
        return field.values
    if component == "x":
        return field.x
    if component == "y":
        return field.y
    return np.hypot(field.x, field.y)


def cmd_export_pgm(args):
    src = Path(args.input)
    if src.is_dir():
        times, fields = read_trajectory(src)
        f = fields[args.index]
    else:
        f, _ = read_field(src)
    a = _pgm_array(f, args.component)
    lo, hi = float(a.min()), float(a.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = np.clip(np.rint((a - lo) * scale), 0, 255).astype(np.uint8)[::-1]
    out = _out(args)
    ny, nx = img.shape
    with open(out / f"{args.name}.pgm", "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    (out / f"{args.name}.pgm.txt").write_text(f"min {lo!r}\nmax {hi!r}\n")
    _record(out, args)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mixflow", description="Optimal mixing and transport on the 2D torus.")
    ap.add_argument("--version", action="version", version=f"mixflow {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("make-field", help="write an analytic density or velocity")
    _add_grid(p)
    p.add_argument("--density")
    p.add_argument("--velocity")
    p.add_argument("--name", default="field")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_field)

    p = sub.add_parser("transport", help="advect a density by a velocity or control")
    _add_grid(p)
    p.add_argument("--rho", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--velocity")
    src.add_argument("--control", help="control directory written by mix/transfer/rescale")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--direction", choices=["forward", "backward"], default="forward")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("euler", help="integrate incompressible Euler flow")
    _add_grid(p)
    p.add_argument("--init", default="taylor-green")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_euler)

    p = sub.add_parser("decompose", help="weighted Helmholtz decomposition")
    _add_grid(p)
    p.add_argument("--velocity", required=True)
    p.add_argument("--mu", default=None, help="weight density (default 1)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("select-velocity", help="least-effort velocity for a density tangent")
    _add_grid(p)
    p.add_argument("--rho", required=True)
    p.add_argument("--tau", default=None, help="tangent field (.fld)")
    p.add_argument("--tau-velocity", default=None,
                   help="build the tangent as -div(rho v) from this velocity")
    p.add_argument("--norm", default="l2", choices=["l2", "h1", "enstrophy", "palenstrophy"])
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select_velocity)

    p = sub.add_parser("mix", help="optimal mixing toward a target density")
    _add_grid(p, n=32)
    p.add_argument("--rho-i", default="stripe")
    p.add_argument("--rho-star", default=None, help="target (default: uniform, same mass)")
    p.add_argument("--alpha", type=float, default=10.0)
    _add_problem(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("transfer", help="upper bound on the transfer metric")
    _add_grid(p, n=32)
    p.add_argument("--rho-i", required=True)
    p.add_argument("--rho-f", required=True)
    p.add_argument("--alpha0", type=float, default=10.0)
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--gap-tol", type=float, default=None,
                   help="endpoint gap tolerance (default 1%% of the initial gap)")
    p.add_argument("--force", action="store_true",
                   help="continue when the pushforward necessary condition fails")
    _add_problem(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("rescale", help="reparameterize a control in time")
    p.add_argument("--control", required=True)
    p.add_argument("--T-new", type=float, default=None)
    p.add_argument("--sigma", default="linear", help="linear, power:P or table:FILE")
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--norm", default="l2", choices=["l2", "h1", "enstrophy", "palenstrophy"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rescale)

    p = sub.add_parser("diagnose", help="geodesic diagnostics of a mix/transfer result")
    p.add_argument("--result", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("export-pgm", help="write a field as a binary PGM heatmap")
    p.add_argument("--input", required=True, help=".fld file or trajectory directory")
    p.add_argument("--index", type=int, default=-1, help="snapshot index for trajectories")
    p.add_argument("--component", choices=["x", "y", "speed"], default="speed")
    p.add_argument("--name", default="field")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_pgm)
    return ap


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except MixflowError as exc:
        print(f"mixflow {getattr(args, 'command', '')}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, FileNotFoundError) as exc:
        print(f"mixflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main():
    sys.exit(run_command())
