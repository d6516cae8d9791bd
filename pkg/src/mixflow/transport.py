"""Continuity-equation transport under divergence-free velocities.

The right-hand side is the conservative form ``-div(rho v)`` evaluated
pseudo-spectrally with 2/3-rule truncation of both factors and of the
result.  The k=0 mode of a spectral divergence vanishes, so mass is
conserved to roundoff.  Time stepping is classical RK4.

The same integrator advects the costate: for divergence-free ``v``,
``lambda_dot + v . grad(lambda) = 0`` integrated backwards is forward
transport under the time-reversed, sign-flipped velocity.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field
from typing import Callable, Union

import numpy as np

from .control import ControlPath
from .errors import ConstraintViolationError, DimensionError, DivergenceError, StepSizeError
from .field import Grid, ScalarField, VectorField

CFL_SAFETY = 0.5
DIV_TOL = 1e-8

VelocitySource = Union[ControlPath, VectorField, Callable[[float], VectorField]]


# ---------------------------------------------------------------------------
# right-hand side and its transposes (array level)


def flux_divergence(grid: Grid, rho: np.ndarray, dvx: np.ndarray, dvy: np.ndarray) -> np.ndarray:
    """``-D div(D(rho) * v)`` for an already truncated velocity ``(dvx, dvy)``."""
    m = grid.dealias_mask
    r = grid.ifft(m * grid.fft(rho))
    fh = 1j * grid.kxd * grid.fft(r * dvx) + 1j * grid.kyd * grid.fft(r * dvy)
    return grid.ifft(-m * fh)


def flux_transpose_rho(grid: Grid, a: np.ndarray, dvx, dvy) -> np.ndarray:
    """Transpose of ``rho -> flux_divergence(rho, v)`` applied to ``a``: ``D(v . grad D a)``."""
    m = grid.dealias_mask
    ah = m * grid.fft(a)
    ax = grid.ifft(1j * grid.kxd * ah)
    ay = grid.ifft(1j * grid.kyd * ah)
    return grid.ifft(m * grid.fft(dvx * ax + dvy * ay))


def flux_transpose_velocity(grid: Grid, rho: np.ndarray, a: np.ndarray):
    """Transpose of ``v -> flux_divergence(rho, D v)`` applied to ``a``.

    Equals ``D(D(rho) grad(D a))``, the truncated product ``rho grad(a)``.
    """
    m = grid.dealias_mask
    r = grid.ifft(m * grid.fft(rho))
    ah = m * grid.fft(a)
    gx = r * grid.ifft(1j * grid.kxd * ah)
    gy = r * grid.ifft(1j * grid.kyd * ah)
    return grid.ifft(m * grid.fft(gx)), grid.ifft(m * grid.fft(gy))


def _rk4(grid, rho, va, vb, vc, dt):
    k1 = flux_divergence(grid, rho, *va)
    k2 = flux_divergence(grid, rho + 0.5 * dt * k1, *vb)
    k3 = flux_divergence(grid, rho + 0.5 * dt * k2, *vb)
    k4 = flux_divergence(grid, rho + dt * k3, *vc)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_div(grid, vx, vy, tol=DIV_TOL):
    dv = grid.div(vx, vy)
    dn = np.sqrt(np.sum(dv ** 2))
    vn = np.sqrt(np.sum(vx ** 2 + vy ** 2))
    if dn > tol * max(vn, 1e-300) and dn > 1e-14:
        raise ConstraintViolationError("velocity is not divergence-free",
                                       violation=float(dn * np.sqrt(grid.cell)))


def continuity_rhs(rho: ScalarField, v: VectorField, div_tol: float = DIV_TOL) -> ScalarField:
    """Tangent ``tau = -div(rho v)`` (dealiased conservative form)."""
    g = rho.grid
    g.check_same(v.grid)
    _check_div(g, v.x, v.y, div_tol)
    return ScalarField(g, flux_divergence(g, rho.values, g.dealias(v.x), g.dealias(v.y)))


def advective_rhs(rho: ScalarField, v: VectorField) -> ScalarField:
    """``-v . grad(rho)`` with the same truncation; equals :func:`continuity_rhs` for div-free v."""
    g = rho.grid
    vx, vy = g.dealias(v.x), g.dealias(v.y)
    rx, ry = g.grad(g.dealias(rho.values))
    return ScalarField(g, -g.dealias(vx * rx + vy * ry))


def rho_grad_lambda(rho: ScalarField, lam: ScalarField) -> VectorField:
    """Truncated product ``rho grad(lambda)``; the transpose of ``v -> -div(rho v)``."""
    g = rho.grid
    gx, gy = flux_transpose_velocity(g, rho.values, lam.values)
    return VectorField(g, gx, gy)


# ---------------------------------------------------------------------------
# velocity sources


def _velocity_fn(control: VelocitySource, grid: Grid):
    """Return ``(fn(t) -> (vx, vy), needs_div_check)``."""
    if isinstance(control, ControlPath):
        grid.check_same(control.grid)
        return control.velocity_arrays, False
    if isinstance(control, VectorField):
        grid.check_same(control.grid)
        vx, vy = control.x, control.y
        return (lambda t: (vx, vy)), True
    if callable(control):
        def fn(t):
            v = control(t)
            grid.check_same(v.grid)
            return v.x, v.y
        return fn, True
    raise TypeError(f"unsupported velocity source {type(control).__name__}")


def _source_name(control) -> str:
    if isinstance(control, ControlPath):
        return f"control-path(nodes={control.n_nodes},T={control.T!r})"
    if isinstance(control, VectorField):
        return "steady-field"
    return getattr(control, "__name__", "analytic-field")


def n_steps(T: float, dt: float) -> int:
    if not (T > 0 and dt > 0):
        raise StepSizeError("T and dt must be positive")
    return max(1, int(np.ceil(T / dt - 1e-9)))


@dataclass
class DensityTrajectory:
    times: np.ndarray
    snapshots: list
    source: str
    direction: str = "forward"
    mass_drift: float = 0.0
    l2_drift: float = 0.0
    meta: dict = dc_field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    @property
    def initial(self) -> ScalarField:
        return self.snapshots[0]

    @property
    def final(self) -> ScalarField:
        return self.snapshots[-1]

    def diagnostics(self) -> list[dict]:
        from .metrics import MetricKind, mix_distance
        rows = []
        hneg = MetricKind.hneg(1.0)
        for t, rho in zip(self.times, self.snapshots):
            uniform = ScalarField.constant(rho.grid, rho.mean())
            rows.append({
                "time": float(t), "mass": rho.mass(), "l2_norm": rho.norm(),
                "min": rho.min(), "max": rho.max(),
                "hneg_mixnorm": mix_distance(rho, uniform, hneg),
            })
        return rows

    def write_csv(self, path):
        rows = self.diagnostics()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) for k, v in r.items()})


def integrate_transport(rho0: ScalarField, control: VelocitySource, T: float, dt: float,
                        direction: str = "forward", stride: int = 1, t0: float = 0.0,
                        cfl_safety: float = CFL_SAFETY) -> DensityTrajectory:
    """RK4 integration of ``rho_dot = -div(rho v)`` on ``[t0, t0 + T]``.

    ``direction='backward'`` treats ``rho0`` as the state at ``t0 + T`` and
    integrates under ``-v(t0 + T - s)``; the returned times are the elapsed
    reversed time ``s``.

    Raises
    ------
    StepSizeError
        ``dt`` violates the CFL bound for some evaluated velocity.
    ConstraintViolationError
        An analytic velocity is not divergence-free.
    DivergenceError
        Non-finite values appear; carries the last valid time.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    g = rho0.grid
    fn, check = _velocity_fn(control, g)
    if direction == "backward":
        base = fn
        t_end = t0 + T

        def fn(s):
            vx, vy = base(t_end - s + t0)
            return -vx, -vy
        s0 = t0
    else:
        s0 = t0
    nsteps = n_steps(T, dt)
    h = T / nsteps
    dmin = min(g.dx, g.dy)

    cache = {}

    def vel(t):
        key = float(t)
        if key not in cache:
            vx, vy = fn(t)
            if check:
                _check_div(g, vx, vy)
            vmax = float(np.sqrt(np.max(vx ** 2 + vy ** 2)))
            if vmax > 0 and h > cfl_safety * dmin / vmax:
                raise StepSizeError(f"dt={h:.4g} exceeds CFL bound "
                                    f"{cfl_safety * dmin / vmax:.4g} at t={t:.4g}")
            cache.clear()
            cache[key] = (g.dealias(vx), g.dealias(vy))
        return cache[key]

    rho = np.array(rho0.values)
    times = [0.0]
    snaps = [rho0]
    for k in range(nsteps):
        t = s0 + k * h
        va = vel(t)
        vb = vel(t + 0.5 * h)
        vc = vel(t + h)
        new = _rk4(g, rho, va, vb, vc, h)
        if not np.all(np.isfinite(new)):
            raise DivergenceError("non-finite density", last_time=k * h)
        rho = new
        if (k + 1) % stride == 0 or k + 1 == nsteps:
            times.append((k + 1) * h)
            snaps.append(ScalarField(g, rho))
    m0, m1 = rho0.mass(), snaps[-1].mass()
    n0, n1 = rho0.norm(), snaps[-1].norm()
    return DensityTrajectory(
        times=np.array(times), snapshots=snaps, source=_source_name(control),
        direction=direction,
        mass_drift=abs(m1 - m0) / max(abs(m0), 1e-300),
        l2_drift=abs(n1 - n0) / max(n0, 1e-300),
        meta={"dt": h, "steps": nsteps, "t0": t0},
    )


# ---------------------------------------------------------------------------
# pushforward measure and the reachability necessary condition


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    masses: np.ndarray
    clamped: int = 0

    @property
    def total(self) -> float:
        return float(np.sum(self.masses))


def pushforward_histogram(rho: ScalarField, nbins: int, range: tuple[float, float]) -> Histogram:
    """Cell measure accumulated per value bin (discrete ``rho_# ell``).

    Values outside ``range`` land in the end bins and are counted in
    ``clamped``.
    """
    lo, hi = map(float, range)
    if nbins < 1 or not hi > lo:
        raise ValueError("need nbins >= 1 and hi > lo")
    v = rho.values.ravel()
    idx = np.floor((v - lo) / (hi - lo) * nbins).astype(np.int64)
    outside = int(np.count_nonzero((v < lo) | (v > hi)))
    idx = np.clip(idx, 0, nbins - 1)
    counts = np.bincount(idx, minlength=nbins)
    return Histogram(np.linspace(lo, hi, nbins + 1), counts * rho.grid.cell, outside)


@dataclass(frozen=True)
class ReachabilityVerdict:
    passed: bool
    mass_gap: float
    w1_gap: float
    mass_gap_rel: float
    w1_gap_rel: float

    # the condition is necessary only: a pass does not certify reachability
    def __bool__(self):
        return self.passed


def histogram_w1(a: Histogram, b: Histogram) -> float:
    """Exact 1D Wasserstein-1 distance between histograms on shared bins."""
    if a.edges.shape != b.edges.shape or not np.array_equal(a.edges, b.edges):
        raise DimensionError("histograms need identical bins")
    width = np.diff(a.edges)
    ca, cb = np.cumsum(a.masses), np.cumsum(b.masses)
    return float(np.sum(np.abs(ca - cb)[:-1] * width[:-1]))


def _sampling_allowance(rho: ScalarField) -> float:
    """Half a cell times the mean slope.

    A displacement ``delta`` changes ``rho`` by at most ``delta ||grad rho||_1``
    in L1, which bounds the W1 change of its value distribution.
    """
    g = rho.grid
    gx, gy = g.grad(rho.values)
    return 0.5 * max(g.dx, g.dy) * float(np.mean(np.sqrt(gx ** 2 + gy ** 2)))


def reachability_check(rho_a: ScalarField, rho_b: ScalarField, nbins: int = 64,
                       tol: float = 2e-2) -> ReachabilityVerdict:
    """Compare mass and value distributions of two densities.

    A failing verdict proves ``rho_b`` is not reachable from ``rho_a``; a
    passing one proves nothing.  Gaps are judged relative to the mass and to
    ``area * value range`` respectively.  The W1 threshold adds the two
    discretization floors of a sampled rearrangement: one bin width and the
    value change caused by a half-cell displacement.
    """
    rho_a.grid.check_same(rho_b.grid)
    lo = min(rho_a.min(), rho_b.min())
    hi = max(rho_a.max(), rho_b.max())
    if hi <= lo:
        hi = lo + 1.0
    ha = pushforward_histogram(rho_a, nbins, (lo, hi))
    hb = pushforward_histogram(rho_b, nbins, (lo, hi))
    ma, mb = rho_a.mass(), rho_b.mass()
    mass_gap = abs(ma - mb)
    w1 = histogram_w1(ha, hb)
    mass_rel = mass_gap / max(abs(ma), abs(mb), 1e-300)
    w1_rel = w1 / (rho_a.grid.area * (hi - lo))
    floor = 1.0 / nbins + max(_sampling_allowance(rho_a), _sampling_allowance(rho_b)) / (hi - lo)
    return ReachabilityVerdict(mass_rel <= tol and w1_rel <= tol + floor, mass_gap, w1,
                               mass_rel, w1_rel)
