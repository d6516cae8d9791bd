"""Optimal mixing and state transfer by adjoint gradient descent.

The objective is ``J = int_0^T ||v_t||^2 dt + alpha d^2(rho_T, rho_*)`` over
controls ``v_t = perp_grad(psi_t) + U_t``.  Cost and gradient share one
discretization: trapezoidal effort on the control nodes, RK4 transport on a
uniform step grid, piecewise-linear velocity in time.  The gradient is the
exact transpose of that discrete map (discretize-then-optimize), so it agrees
with finite differences to roundoff-limited accuracy.

Sign conventions: the costate is ``lambda = -dJ/drho`` (L2 representer), so
``lambda_T = -alpha grad d^2`` and the velocity gradient at a node reads
``w_n (2 K*K v_n - rho_n grad lambda_n)``.  With unit quadrature weight this
is twice the stationarity expression ``K*K v - rho grad(lambda/2)``; i.e. the
multiplier of the velocity-selection problem is half of ``lambda`` here.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .control import ControlPath
from .errors import ConfigurationError, DegeneracyError, ReachabilityError, StepSizeError
from .field import EPS_DENSITY, Grid, ScalarField, VectorField
from .metrics import MetricKind, NormKind, mix_distance, mix_distance_sq_arrays, norm_sq_arrays
from .transport import (CFL_SAFETY, DensityTrajectory, _rk4, flux_divergence,
                        flux_transpose_rho, flux_transpose_velocity, n_steps,
                        reachability_check)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MixingProblemSpec:
    rho_i: ScalarField
    rho_star: ScalarField
    alpha: float = 10.0
    T: float = 1.0
    n_intervals: int = 16
    norm: NormKind = NormKind.L2
    metric: MetricKind = MetricKind()
    dt: float | None = None
    mass_tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "norm", NormKind.parse(self.norm))
        object.__setattr__(self, "metric", MetricKind.parse(self.metric))
        self.rho_i.grid.check_same(self.rho_star.grid)
        if self.alpha < 0:
            raise ConfigurationError("alpha must be nonnegative")
        if not self.T > 0 or self.n_intervals < 1:
            raise ConfigurationError("need T > 0 and at least one control interval")
        if self.rho_i.min() < EPS_DENSITY:
            raise DegeneracyError(f"initial density minimum {self.rho_i.min():.3e} "
                                  f"below {EPS_DENSITY:.1e}")
        mi, ms = self.rho_i.mass(), self.rho_star.mass()
        if abs(mi - ms) > self.mass_tol * max(abs(mi), 1e-300):
            raise ConfigurationError(f"mass mismatch {mi:.12g} vs {ms:.12g}: "
                                     "transport conserves mass")

    @property
    def grid(self) -> Grid:
        return self.rho_i.grid

    @property
    def step(self) -> float:
        """Transport time step actually used."""
        dt = self.dt if self.dt is not None else self.T / (4 * self.n_intervals)
        return self.T / n_steps(self.T, dt)

    @property
    def controls_mean(self) -> bool:
        """Whether the mean velocity is an optimization variable for this norm."""
        return not self.norm.kills_constants

    def zero_control(self) -> ControlPath:
        return ControlPath.zeros(self.grid, self.T, self.n_intervals)


# ---------------------------------------------------------------------------
# forward model


@dataclass
class _Forward:
    states: list          # rho at every step boundary
    vels: list            # per step: (t_a, t_b, t_c) dealiased velocities
    times: np.ndarray
    effort: float
    penalty: float

    @property
    def J(self):
        return self.effort + self.penalty


def _effort(control: ControlPath, norm: NormKind) -> float:
    g = control.grid
    f = norm.factor(g)
    w = control.quadrature_weights()
    return float(sum(w[n] * norm_sq_arrays(g, *control.node_velocity_arrays(n), f)
                     for n in range(control.n_nodes)))


def _check_compat(control: ControlPath, spec: MixingProblemSpec):
    spec.grid.check_same(control.grid)
    if abs(control.T - spec.T) > 1e-12 * spec.T:
        raise ConfigurationError(f"control horizon {control.T} differs from problem T {spec.T}")


def _forward(control: ControlPath, spec: MixingProblemSpec, keep_states=True) -> _Forward:
    _check_compat(control, spec)
    g = spec.grid
    S = n_steps(spec.T, spec.step)
    h = spec.T / S
    dmin = min(g.dx, g.dy)
    vmax = max(np.sqrt(np.max(vx ** 2 + vy ** 2))
               for vx, vy in (control.node_velocity_arrays(n) for n in range(control.n_nodes)))
    if vmax > 0 and h > CFL_SAFETY * dmin / vmax:
        raise StepSizeError(f"dt={h:.4g} exceeds CFL bound {CFL_SAFETY * dmin / vmax:.4g}")

    def vel(t):
        vx, vy = control.velocity_arrays(min(t, control.T))
        return g.dealias(vx), g.dealias(vy)

    rho = np.array(spec.rho_i.values)
    states = [rho]
    vels = []
    va = vel(0.0)
    for k in range(S):
        t = k * h
        vb = vel(t + 0.5 * h)
        vc = vel((k + 1) * h)
        rho = _rk4(g, rho, va, vb, vc, h)
        if keep_states:
            states.append(rho)
            vels.append((va, vb, vc))
        va = vc
    if not keep_states:
        states.append(rho)
    effort = _effort(control, spec.norm)
    penalty = spec.alpha * mix_distance_sq_arrays(g, rho, spec.rho_star.values, spec.metric)
    return _Forward(states, vels, np.arange(S + 1) * h, effort, float(penalty))


@dataclass(frozen=True)
class CostReport:
    J: float
    effort: float
    penalty: float
    rho_T: ScalarField


def mixing_cost(control: ControlPath, spec: MixingProblemSpec) -> CostReport:
    """Evaluate ``J = effort + alpha d^2(rho_T, rho_*)`` and return the parts."""
    fw = _forward(control, spec, keep_states=False)
    return CostReport(fw.J, fw.effort, fw.penalty, ScalarField(spec.grid, fw.states[-1]))


# ---------------------------------------------------------------------------
# adjoint


@dataclass
class MixingGradient:
    """Derivatives of ``J`` with respect to the control.

    ``psi`` holds L2 representers per node, so a perturbation changes ``J``
    by ``sum_n <psi_n, dpsi_n>_L2 + sum_n mean_n . dU_n``.  ``velocity``
    holds the L2 gradient with respect to each node velocity before the
    streamfunction pullback; ``transport`` is its costate part.
    """

    psi: np.ndarray
    mean: np.ndarray
    velocity: list
    transport: list
    costate: list
    cost: float
    effort: float
    penalty: float

    def directional(self, dpsi, dmean, grid: Grid) -> float:
        return float(np.sum(self.psi * dpsi) * grid.cell + np.sum(self.mean * dmean))


def _adjoint(control: ControlPath, spec: MixingProblemSpec, fw: _Forward) -> MixingGradient:
    g = spec.grid
    cell = g.cell
    S = len(fw.vels)
    h = spec.T / S
    nn = control.n_nodes
    vbar = [[np.zeros(g.shape), np.zeros(g.shape)] for _ in range(nn)]

    def scatter(t, gx, gy):
        for n, w in control.interp_weights(min(t, control.T)):
            vbar[n][0] += w * gx
            vbar[n][1] += w * gy

    rhoT = fw.states[-1]
    abar = spec.alpha * 2.0 * cell * g.apply_factor(rhoT - spec.rho_star.values,
                                                    spec.metric.factor(g))
    costate = [None] * (S + 1)
    costate[S] = -abar / cell
    for k in range(S - 1, -1, -1):
        rho = fw.states[k]
        va, vb, vc = fw.vels[k]
        k1 = flux_divergence(g, rho, *va)
        y2 = rho + 0.5 * h * k1
        k2 = flux_divergence(g, y2, *vb)
        y3 = rho + 0.5 * h * k2
        k3 = flux_divergence(g, y3, *vb)
        y4 = rho + h * k3

        kb4 = (h / 6.0) * abar
        kb3 = (h / 3.0) * abar
        kb2 = (h / 3.0) * abar
        kb1 = (h / 6.0) * abar
        rbar = abar.copy()

        yb = flux_transpose_rho(g, kb4, *vc)
        scatter((k + 1) * h, *flux_transpose_velocity(g, y4, kb4))
        rbar += yb
        kb3 = kb3 + h * yb

        yb = flux_transpose_rho(g, kb3, *vb)
        gb3 = flux_transpose_velocity(g, y3, kb3)
        rbar += yb
        kb2 = kb2 + 0.5 * h * yb

        yb = flux_transpose_rho(g, kb2, *vb)
        gb2 = flux_transpose_velocity(g, y2, kb2)
        scatter(k * h + 0.5 * h, gb3[0] + gb2[0], gb3[1] + gb2[1])
        rbar += yb
        kb1 = kb1 + 0.5 * h * yb

        rbar += flux_transpose_rho(g, kb1, *va)
        scatter(k * h, *flux_transpose_velocity(g, rho, kb1))
        abar = rbar
        costate[k] = -abar / cell

    f = spec.norm.factor(g)
    w = control.quadrature_weights()
    psi_g = np.empty((nn,) + g.shape)
    mean_g = np.empty((nn, 2))
    velocity, transport = [], []
    for n in range(nn):
        tx, ty = vbar[n][0] / cell, vbar[n][1] / cell
        vx, vy = control.node_velocity_arrays(n)
        ex = 2.0 * w[n] * g.apply_factor(vx, f)
        ey = 2.0 * w[n] * g.apply_factor(vy, f)
        gx, gy = ex + tx, ey + ty
        transport.append(VectorField(g, tx, ty))
        velocity.append(VectorField(g, gx, gy))
        psi_g[n] = g.curl_adjoint(gx, gy)
        mean_g[n] = (np.sum(gx) * cell, np.sum(gy) * cell)
    return MixingGradient(psi_g, mean_g, velocity, transport,
                          [ScalarField(g, c) for c in costate], fw.J, fw.effort, fw.penalty)


def mixing_gradient(control: ControlPath, spec: MixingProblemSpec) -> MixingGradient:
    """Exact discrete gradient of :func:`mixing_cost` via a backward sweep."""
    fw = _forward(control, spec)
    return _adjoint(control, spec, fw)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimizerOptions:
    max_iters: int = 200
    grad_tol: float = 1e-6
    c1: float = 1e-4
    initial_step: float = 1.0
    grow: float = 1.5
    max_halvings: int = 40


@dataclass
class OptimizerResult:
    control: ControlPath
    spec: MixingProblemSpec
    density: DensityTrajectory
    costate: list
    cost_history: list
    grad_norm_history: list
    step_history: list
    stationarity: np.ndarray
    status: str
    iterations: int
    gradient: MixingGradient | None = dc_field(default=None, repr=False)

    @property
    def J(self) -> float:
        return self.cost_history[-1]["J"]

    @property
    def rho_T(self) -> ScalarField:
        return self.density.final

    def write(self, directory):
        """Write control, trajectories, log and problem description under ``directory``."""
        import json
        from pathlib import Path
        from .control import write_control
        from .fieldio import write_field, write_trajectory

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        write_control(directory / "control", self.control)
        write_trajectory(directory / "density", self.density.times, self.density.snapshots, "rho")
        write_trajectory(directory / "costate", self.density.times, self.costate, "lambda")
        write_field(directory / "rho_i.fld", self.spec.rho_i, name="rho_i")
        write_field(directory / "rho_star.fld", self.spec.rho_star, name="rho_star")
        self.density.write_csv(directory / "density.csv")
        self.write_log(directory / "log.csv")
        with open(directory / "stationarity.csv", "w", encoding="ascii") as fh:
            fh.write("node,time,residual\n")
            for n, (t, r) in enumerate(zip(self.control.times, self.stationarity)):
                fh.write(f"{n},{float(t)!r},{float(r)!r}\n")
        problem = {"alpha": self.spec.alpha, "T": self.spec.T,
                   "n_intervals": self.spec.n_intervals, "norm": self.spec.norm.value,
                   "metric": str(self.spec.metric), "dt": self.spec.step,
                   "status": self.status, "iterations": self.iterations,
                   "J": self.J, "effort": self.cost_history[-1]["effort"],
                   "penalty": self.cost_history[-1]["penalty"]}
        (directory / "problem.json").write_text(json.dumps(problem, indent=2, sort_keys=True) + "\n")
        return directory

    def write_log(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "J", "effort", "penalty", "grad_norm", "step"])
            for i, (c, gn, st) in enumerate(zip(self.cost_history, self.grad_norm_history,
                                                self.step_history)):
                w.writerow([i, repr(c["J"]), repr(c["effort"]), repr(c["penalty"]),
                            repr(gn), repr(st)])


class _Preconditioner:
    """Inverse of the effort Hessian per node (the Riesz map of the effort metric)."""

    def __init__(self, control: ControlPath, spec: MixingProblemSpec):
        g = spec.grid
        w = control.quadrature_weights()
        f = spec.norm.factor(g)
        kf = g.kd2 * f
        inv = np.zeros_like(kf)
        inv[kf > 0] = 1.0 / kf[kf > 0]
        self.g = g
        # Euclidean Hessian of w_n ||K perp_grad psi||^2 is 2 w_n cell |k|^2 f(k)
        self.psi_scale = [inv / (2.0 * w[n]) for n in range(control.n_nodes)]
        f0 = float(f[0, 0])
        self.mean_scale = np.zeros(control.n_nodes)
        if spec.controls_mean and f0 > 0:
            self.mean_scale = 1.0 / (2.0 * w * g.area * f0)

    def direction(self, grad: MixingGradient):
        """Return ``(dpsi, dmean, |g|_P^2)`` with ``d = -P g``."""
        g = self.g
        dpsi = np.empty_like(grad.psi)
        for n, scale in enumerate(self.psi_scale):
            dpsi[n] = -g.apply_factor(grad.psi[n], scale)
        dmean = -self.mean_scale[:, None] * grad.mean
        gnorm2 = -grad.directional(dpsi, dmean, g)
        return dpsi, dmean, max(gnorm2, 0.0)


def stationarity_residuals(grad: MixingGradient, control: ControlPath,
                           spec: MixingProblemSpec) -> np.ndarray:
    """Per-node relative size of the divergence-free part of ``2K*Kv - rho grad lambda``.

    The pure-gradient part is invisible to divergence-free controls; what
    remains must vanish at a stationary point.  Zero when both terms vanish.
    """
    g = spec.grid
    f = spec.norm.factor(g)
    w = control.quadrature_weights()
    out = np.zeros(control.n_nodes)
    for n in range(control.n_nodes):
        gv = grad.velocity[n]
        px, py = g.leray(gv.x / w[n], gv.y / w[n])
        if not spec.controls_mean:
            px, py = px - px.mean(), py - py.mean()
        num = np.sqrt(np.sum(px ** 2 + py ** 2) * g.cell)
        vx, vy = control.node_velocity_arrays(n)
        kk = 2.0 * np.sqrt(np.sum(g.apply_factor(vx, f) ** 2 + g.apply_factor(vy, f) ** 2) * g.cell)
        tr = grad.transport[n].norm() / w[n]
        den = max(kk, tr)
        out[n] = num / den if den > 0 else 0.0
    return out


def _density_trajectory(fw: _Forward, spec: MixingProblemSpec, stride: int) -> DensityTrajectory:
    g = spec.grid
    S = len(fw.states) - 1
    idx = sorted(set(range(0, S + 1, stride)) | {S})
    snaps = [ScalarField(g, fw.states[k]) for k in idx]
    m0, m1 = snaps[0].mass(), snaps[-1].mass()
    n0, n1 = snaps[0].norm(), snaps[-1].norm()
    return DensityTrajectory(fw.times[idx], snaps, "control-path", "forward",
                             abs(m1 - m0) / max(abs(m0), 1e-300), abs(n1 - n0) / max(n0, 1e-300),
                             {"dt": spec.step, "steps": S})


def _result(control, spec, fw, grad, costs, gnorms, steps, status, it, stride=None):
    if stride is None:
        stride = max(1, (len(fw.states) - 1) // control.n_intervals)
    dens = _density_trajectory(fw, spec, stride)
    S = len(fw.states) - 1
    idx = sorted(set(range(0, S + 1, stride)) | {S})
    return OptimizerResult(control, spec, dens, [grad.costate[k] for k in idx], costs, gnorms,
                           steps, stationarity_residuals(grad, control, spec), status, it, grad)


def evaluate_control(control: ControlPath, spec: MixingProblemSpec) -> OptimizerResult:
    """Wrap a given control as a zero-iteration result (for diagnostics and I/O)."""
    fw = _forward(control, spec)
    grad = _adjoint(control, spec, fw)
    gn2 = _Preconditioner(control, spec).direction(grad)[2]
    costs = [{"J": fw.J, "effort": fw.effort, "penalty": fw.penalty}]
    return _result(control, spec, fw, grad, costs, [math.sqrt(gn2)], [0.0], "evaluated", 0)


def optimize_mixing(spec: MixingProblemSpec, opts: OptimizerOptions | None = None,
                    initial: ControlPath | None = None, stride: int | None = None,
                    callback=None) -> OptimizerResult:
    """Preconditioned gradient descent with Armijo backtracking.

    The search direction is the gradient mapped through the inverse effort
    Hessian (spectral, per node), and ``|g|`` is measured in that metric.
    A trial is accepted when ``J`` drops by ``c1 * step * |g|^2``; the step
    halves on rejection and grows by ``grow`` after acceptance.
    """
    opts = opts or OptimizerOptions()
    control = initial if initial is not None else spec.zero_control()
    _check_compat(control, spec)
    if not spec.controls_mean and np.any(control.mean != 0):
        control = control.replace(mean=np.zeros_like(control.mean))
    pre = _Preconditioner(control, spec)
    fw = _forward(control, spec)
    grad = _adjoint(control, spec, fw)
    dpsi, dmean, gn2 = pre.direction(grad)
    g0 = math.sqrt(gn2)
    costs = [{"J": fw.J, "effort": fw.effort, "penalty": fw.penalty}]
    gnorms = [g0]
    steps = [0.0]
    step = opts.initial_step
    status = "max_iters"
    it = 0
    while True:
        gnorm = math.sqrt(gn2)
        if gnorm <= opts.grad_tol * max(1.0, g0):
            status = "converged"
            break
        if it >= opts.max_iters:
            break
        accepted = False
        for _ in range(opts.max_halvings):
            trial = control.replace(psi=control.psi + step * dpsi,
                                    mean=control.mean + step * dmean)
            try:
                tf = _forward(trial, spec)
            except StepSizeError:
                step *= 0.5
                continue
            if tf.J <= fw.J - opts.c1 * step * gn2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = "stalled"
            break
        control, fw = trial, tf
        grad = _adjoint(control, spec, fw)
        dpsi, dmean, gn2 = pre.direction(grad)
        it += 1
        costs.append({"J": fw.J, "effort": fw.effort, "penalty": fw.penalty})
        gnorms.append(math.sqrt(gn2))
        steps.append(step)
        if callback is not None:
            callback(it, costs[-1], gnorms[-1])
        log.debug("iter %d J=%.6e |g|=%.3e step=%.3e", it, fw.J, gnorms[-1], step)
        step *= opts.grow
    return _result(control, spec, fw, grad, costs, gnorms, steps, status, it, stride)


# ---------------------------------------------------------------------------
# state transfer by penalty continuation


@dataclass
class TransferEstimate:
    m_upper: float
    gap: float
    history: list
    control: ControlPath
    reached: bool
    result: OptimizerResult | None = dc_field(default=None, repr=False)


def transfer_continuation(rho_i: ScalarField, rho_f: ScalarField, T: float = 1.0,
                          n_intervals: int = 16, norm=NormKind.L2, metric=MetricKind(),
                          dt: float | None = None, alpha0: float = 10.0, K: int = 3,
                          gap_tol: float | None = None, opts: OptimizerOptions | None = None,
                          initial: ControlPath | None = None, force: bool = False,
                          nbins: int = 64) -> TransferEstimate:
    """Upper bound on the transfer metric ``m(rho_i, rho_f)``.

    Solves penalized problems with ``alpha = alpha0 * 10**k``, ``k = 0..K``,
    warm-starting each from the previous, and stops once the endpoint gap
    ``d(rho_T, rho_f)`` is within ``gap_tol`` (default: 1% of the initial
    gap).  ``m_upper = sqrt(T * effort)`` of the cheapest control meeting the
    tolerance; it is a certificate-style upper bound, never a lower bound.
    """
    metric = MetricKind.parse(metric)
    verdict = reachability_check(rho_i, rho_f, nbins=nbins)
    if not verdict.passed:
        msg = (f"pushforward necessary condition fails (mass gap {verdict.mass_gap:.3e}, "
               f"W1 gap {verdict.w1_gap:.3e}); rho_f is not reachable, m may be infinite")
        if not force:
            raise ReachabilityError(msg)
        warnings.warn(msg)
    d0 = mix_distance(rho_i, rho_f, metric)
    if gap_tol is None:
        gap_tol = 1e-2 * d0
    base = MixingProblemSpec(rho_i, rho_f, alpha0, T, n_intervals, norm, metric, dt,
                             mass_tol=1e-6 if force else 1e-10)
    control = initial if initial is not None else base.zero_control()
    if d0 <= gap_tol and initial is None:
        return TransferEstimate(0.0, d0, [{"alpha": 0.0, "J": 0.0, "effort": 0.0, "gap": d0}],
                                control, True)
    history = []
    best = None
    result = None
    for k in range(K + 1):
        spec = replace(base, alpha=alpha0 * 10.0 ** k)
        result = optimize_mixing(spec, opts, initial=control)
        control = result.control
        gap = mix_distance(result.rho_T, rho_f, metric)
        effort = result.cost_history[-1]["effort"]
        history.append({"alpha": spec.alpha, "J": result.J, "effort": effort, "gap": gap,
                        "status": result.status, "iterations": result.iterations})
        if gap <= gap_tol:
            if best is None or effort < best[0]:
                best = (effort, gap, control, result)
            break
    if best is None:
        effort, gap = history[-1]["effort"], history[-1]["gap"]
        return TransferEstimate(math.sqrt(T * effort), gap, history, control, False, result)
    effort, gap, control, result = best
    return TransferEstimate(math.sqrt(T * effort), gap, history, control, True, result)


# ---------------------------------------------------------------------------
# time reparameterization


def rescale_control(control: ControlPath, T_new: float | None = None, sigma=None,
                    dsigma=None, n_nodes: int | None = None) -> ControlPath:
    """Reparameterize time: ``v~(t) = sigma'(t) v(sigma(t))`` on ``[0, T_new]``.

    With only ``T_new`` the map is linear and node values scale by
    ``T / T_new``, so the trapezoidal effort scales by exactly ``T / T_new``.
    ``sigma`` may be a callable (with optional derivative ``dsigma``) or a
    table of values at ``n_nodes`` uniform new nodes; a table's derivative is
    taken by second-order differences.  ``sigma`` must be nondecreasing and
    map ``[0, T_new]`` onto ``[0, T]``.
    """
    T = control.T
    if T_new is None:
        T_new = T
    if not T_new > 0:
        raise ConfigurationError("T_new must be positive")
    if sigma is None:
        c = T / T_new
        if c == 1.0:
            return ControlPath(control.grid, T_new, control.psi, control.mean, gauge=False)
        return ControlPath(control.grid, T_new, control.psi * c, control.mean * c, gauge=False)

    if callable(sigma):
        n = n_nodes or control.n_nodes
        tn = np.linspace(0.0, T_new, n)
        s = np.array([float(sigma(t)) for t in tn])
        if dsigma is not None:
            ds = np.array([float(dsigma(t)) for t in tn])
        else:
            ds = np.gradient(s, tn, edge_order=2)
    else:
        s = np.asarray(sigma, dtype=float)
        n = len(s)
        tn = np.linspace(0.0, T_new, n)
        ds = np.gradient(s, tn, edge_order=2)
    if np.any(np.diff(s) < 0):
        raise ConfigurationError("time map must be monotone nondecreasing")
    if abs(s[0]) > 1e-12 * T or abs(s[-1] - T) > 1e-12 * T:
        raise ConfigurationError("time map must send [0, T_new] onto [0, T]")
    psi = np.empty((n,) + control.grid.shape)
    mean = np.empty((n, 2))
    for j, (sj, dj) in enumerate(zip(s, ds)):
        p = np.zeros(control.grid.shape)
        m = np.zeros(2)
        for node, w in control.interp_weights(min(max(sj, 0.0), T)):
            p += w * control.psi[node]
            m += w * control.mean[node]
        psi[j] = dj * p
        mean[j] = dj * m
    return ControlPath(control.grid, T_new, psi, mean)


def control_effort(control: ControlPath, norm=NormKind.L2) -> float:
    """Trapezoidal ``int ||v_t||^2 dt`` on the nodes."""
    return _effort(control, NormKind.parse(norm))


# ---------------------------------------------------------------------------
# geodesic diagnostics


@dataclass(frozen=True)
class GeodesicReport:
    speed: np.ndarray
    speed_cv: float
    stationarity: np.ndarray
    euler_residual: np.ndarray | None


def geodesic_diagnostics(result: OptimizerResult) -> GeodesicReport:
    """Constant-speed and Euler-flow checks on an optimizer result.

    ``speed`` is the effort norm of each node velocity; ``speed_cv`` its
    coefficient of variation (0 when all speeds vanish).  The Euler residual
    is only defined for the kinetic-energy norm.
    """
    from .euler import VelocityTrajectory, euler_residual
    from .metrics import control_norm

    control, spec = result.control, result.spec
    vels = [control.node_velocity(n) for n in range(control.n_nodes)]
    speed = np.array([control_norm(v, spec.norm) for v in vels])
    mu = float(np.mean(speed))
    cv = float(np.std(speed) / mu) if mu > 0 else 0.0
    grad = result.gradient if result.gradient is not None else mixing_gradient(control, spec)
    stat = stationarity_residuals(grad, control, spec)
    er = None
    if spec.norm is NormKind.L2 and control.n_nodes >= 3:
        er = euler_residual(VelocityTrajectory.from_velocities(control.times, vels))
    return GeodesicReport(speed, cv, stat, er)
