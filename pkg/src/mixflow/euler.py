"""2D incompressible Euler flow in vorticity-streamfunction form.

Velocity is rebuilt as ``perp_grad(lap^-1 omega) + U`` where ``U`` is the mean
velocity, which the vorticity cannot see on the torus and which Euler flow
conserves.  Because the velocity always comes from a streamfunction, it is
divergence-free to roundoff.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DivergenceError, StepSizeError
from .field import Grid, ScalarField, VectorField
from .fieldio import write_trajectory
from .transport import CFL_SAFETY, n_steps


@dataclass
class VelocityTrajectory:
    times: np.ndarray
    velocities: list
    vorticities: list
    energy: list = dc_field(default_factory=list)
    enstrophy: list = dc_field(default_factory=list)

    @property
    def grid(self) -> Grid:
        return self.velocities[0].grid

    @property
    def energy_drift(self) -> float:
        return abs(self.energy[-1] - self.energy[0]) / max(self.energy[0], 1e-300)

    @property
    def enstrophy_drift(self) -> float:
        return abs(self.enstrophy[-1] - self.enstrophy[0]) / max(self.enstrophy[0], 1e-300)

    @classmethod
    def from_velocities(cls, times, velocities):
        vort = [ScalarField(v.grid, v.grid.curl(v.x, v.y)) for v in velocities]
        return cls(np.asarray(times, dtype=float), list(velocities), vort,
                   [0.5 * v.norm() ** 2 for v in velocities],
                   [0.5 * w.norm() ** 2 for w in vort])

    def write(self, directory):
        directory = Path(directory)
        write_trajectory(directory / "velocity", self.times, self.velocities, name="velocity")
        write_trajectory(directory / "vorticity", self.times, self.vorticities, name="vorticity")
        with open(directory / "energy.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "energy", "enstrophy", "omega_min", "omega_max"])
            for t, e, z, om in zip(self.times, self.energy, self.enstrophy, self.vorticities):
                w.writerow([repr(float(t)), repr(e), repr(z), repr(om.min()), repr(om.max())])


def _velocity_from_vorticity(grid: Grid, omega_hat, mean):
    psi_hat = -grid.inv_kd2 * omega_hat
    vx = grid.ifft(-1j * grid.kyd * psi_hat) + mean[0]
    vy = grid.ifft(1j * grid.kxd * psi_hat) + mean[1]
    return vx, vy


def _vorticity_rhs(grid: Grid, omega, mean):
    m = grid.dealias_mask
    wh = m * grid.fft(omega)
    w = grid.ifft(wh)
    vx, vy = _velocity_from_vorticity(grid, wh, mean)
    fh = 1j * grid.kxd * grid.fft(w * vx) + 1j * grid.kyd * grid.fft(w * vy)
    return grid.ifft(-m * fh)


def integrate_euler(v0: VectorField, T: float, dt: float, stride: int = 1,
                    cfl_safety: float = CFL_SAFETY) -> VelocityTrajectory:
    """Evolve ``omega_t + v . grad(omega) = 0`` (RK4, 2/3 dealiasing).

    ``v0`` is Leray-projected first; its mean is carried unchanged.
    """
    g = v0.grid
    px, py = g.leray(v0.x, v0.y)
    mean = (float(np.mean(px)), float(np.mean(py)))
    omega = g.curl(px, py)
    nsteps = n_steps(T, dt)
    h = T / nsteps
    dmin = min(g.dx, g.dy)

    def snapshot(om):
        vx, vy = _velocity_from_vorticity(g, g.fft(om), mean)
        return VectorField(g, vx, vy), ScalarField(g, om)

    v_s, w_s = snapshot(omega)
    times, vels, vorts = [0.0], [v_s], [w_s]
    for k in range(nsteps):
        vmax = _max_speed(g, omega, mean)
        if vmax > 0 and h > cfl_safety * dmin / vmax:
            raise StepSizeError(f"dt={h:.4g} exceeds CFL bound {cfl_safety * dmin / vmax:.4g}")
        k1 = _vorticity_rhs(g, omega, mean)
        k2 = _vorticity_rhs(g, omega + 0.5 * h * k1, mean)
        k3 = _vorticity_rhs(g, omega + 0.5 * h * k2, mean)
        k4 = _vorticity_rhs(g, omega + h * k3, mean)
        new = omega + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(new)):
            raise DivergenceError("non-finite vorticity", last_time=k * h)
        omega = new
        if (k + 1) % stride == 0 or k + 1 == nsteps:
            v_s, w_s = snapshot(omega)
            times.append((k + 1) * h)
            vels.append(v_s)
            vorts.append(w_s)
    return VelocityTrajectory(np.array(times), vels, vorts,
                              [0.5 * v.norm() ** 2 for v in vels],
                              [0.5 * w.norm() ** 2 for w in vorts])


def _max_speed(grid, omega, mean):
    vx, vy = _velocity_from_vorticity(grid, grid.fft(omega), mean)
    return float(np.sqrt(np.max(vx ** 2 + vy ** 2)))


def advection_term(v: VectorField) -> VectorField:
    """Truncated ``(v . grad) v``."""
    g = v.grid
    vx, vy = g.dealias(v.x), g.dealias(v.y)
    ax = vx * g.ddx(vx) + vy * g.ddy(vx)
    ay = vx * g.ddx(vy) + vy * g.ddy(vy)
    return VectorField(g, g.dealias(ax), g.dealias(ay))


def primitive_rhs(v: VectorField) -> VectorField:
    """Right side of ``v_t = -P((v . grad) v)`` with the Leray projector ``P``."""
    a = advection_term(v)
    px, py = v.grid.leray(a.x, a.y)
    return VectorField(v.grid, -px, -py)


def vorticity_rhs(v: VectorField) -> ScalarField:
    g = v.grid
    mean = v.mean()
    return ScalarField(g, _vorticity_rhs(g, g.curl(v.x, v.y), mean))


def pressure(v: VectorField) -> ScalarField:
    """Pressure ``p`` with ``v_t + (v . grad) v = grad p``: solves ``lap p = div((v . grad) v)``."""
    a = advection_term(v)
    g = v.grid
    return ScalarField(g, g.inv_laplacian(g.div(a.x, a.y)))


def euler_residual(traj: VelocityTrajectory, eps: float = 1e-300) -> np.ndarray:
    """Normalized Euler defect at interior snapshots.

    ``r_n = ||P(v_dot + (v . grad) v)|| / max(||v||^2, eps)`` with a centered
    difference for ``v_dot``; the projector removes the pressure gradient.
    """
    times = np.asarray(traj.times, dtype=float)
    if len(times) < 3:
        raise ConfigurationError("euler_residual needs at least 3 snapshots")
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
        raise ConfigurationError("euler_residual needs a uniform snapshot stride")
    h = dts[0]
    vs = traj.velocities
    g = vs[0].grid
    out = np.empty(len(vs) - 2)
    for n in range(1, len(vs) - 1):
        v = vs[n]
        a = advection_term(v)
        rx = (vs[n + 1].x - vs[n - 1].x) / (2 * h) + a.x
        ry = (vs[n + 1].y - vs[n - 1].y) / (2 * h) + a.y
        px, py = g.leray(rx, ry)
        num = np.sqrt(np.sum(px ** 2 + py ** 2) * g.cell)
        out[n - 1] = num / max(v.norm() ** 2, eps) if num > 0 else 0.0
    return out
