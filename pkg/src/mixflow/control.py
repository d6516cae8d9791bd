"""Time-discretized divergence-free controls.

A :class:`ControlPath` stores one streamfunction per node on a uniform time
grid plus a spatially constant (mean) velocity per node, so the node velocity
is ``perp_grad(psi_n) + U_n``.  Streamfunctions alone cannot represent a
uniform translation on the torus, hence the extra mean component.  Between
nodes the velocity is linear in time.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, DimensionError
from .field import Grid, ScalarField, VectorField


class ControlPath:
    __slots__ = ("grid", "T", "psi", "mean")

    def __init__(self, grid: Grid, T: float, psi, mean=None, gauge: bool = True):
        psi = np.array(psi, dtype=float)
        if psi.ndim != 3 or psi.shape[1:] != grid.shape or psi.shape[0] < 2:
            raise DimensionError(f"psi must have shape (n_nodes>=2, {grid.ny}, {grid.nx})")
        if not T > 0:
            raise ConfigurationError("control horizon must be positive")
        if mean is None:
            mean = np.zeros((psi.shape[0], 2))
        mean = np.array(mean, dtype=float).reshape(psi.shape[0], 2)
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(mean))):
            raise ValueError("control values must be finite")
        if gauge:
            # streamfunctions carry no mean
            psi = psi - psi.mean(axis=(1, 2), keepdims=True)
        psi.setflags(write=False)
        mean.setflags(write=False)
        self.grid = grid
        self.T = float(T)
        self.psi = psi
        self.mean = mean

    # -- construction helpers ---------------------------------------------
    @classmethod
    def zeros(cls, grid, T, n_intervals):
        return cls(grid, T, np.zeros((n_intervals + 1,) + grid.shape))

    @classmethod
    def constant(cls, grid, T, n_intervals, ux=0.0, uy=0.0, psi=None):
        n = n_intervals + 1
        ps = np.zeros((n,) + grid.shape) if psi is None else np.broadcast_to(
            np.asarray(psi, dtype=float), (n,) + grid.shape)
        return cls(grid, T, ps, np.tile([float(ux), float(uy)], (n, 1)))

    @classmethod
    def random(cls, grid, T, n_intervals, rng, amplitude=1.0, kmax=3.0, mean_amplitude=0.0):
        from .field import random_band_limited
        n = n_intervals + 1
        psi = np.stack([random_band_limited(grid, kmax, rng, amplitude) for _ in range(n)])
        mean = mean_amplitude * rng.standard_normal((n, 2))
        return cls(grid, T, psi, mean)

    def replace(self, psi=None, mean=None, T=None):
        return ControlPath(self.grid, self.T if T is None else T,
                           self.psi if psi is None else psi,
                           self.mean if mean is None else mean, gauge=psi is not None)

    # -- geometry ---------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return self.psi.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.psi.shape[0] - 1

    @property
    def spacing(self) -> float:
        return self.T / self.n_intervals

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_nodes)

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoidal weights on the nodes."""
        w = np.full(self.n_nodes, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def interp_weights(self, t: float):
        """``[(node, weight), ...]`` for the piecewise-linear value at ``t``."""
        h = self.spacing
        if t < -1e-12 * self.T or t > self.T * (1 + 1e-12):
            raise ValueError(f"time {t} outside control horizon [0, {self.T}]")
        s = min(max(t / h, 0.0), float(self.n_intervals))
        n = min(int(np.floor(s)), self.n_intervals - 1)
        a = s - n
        if a == 0.0:
            return [(n, 1.0)]
        if a == 1.0:
            return [(n + 1, 1.0)]
        return [(n, 1.0 - a), (n + 1, a)]

    # -- velocity ---------------------------------------------------------
    def node_velocity_arrays(self, n: int):
        vx, vy = self.grid.perp_grad(self.psi[n])
        return vx + self.mean[n, 0], vy + self.mean[n, 1]

    def node_velocity(self, n: int) -> VectorField:
        vx, vy = self.node_velocity_arrays(n)
        return VectorField(self.grid, vx, vy)

    def velocity_arrays(self, t: float):
        psi = 0.0
        mean = np.zeros(2)
        for n, w in self.interp_weights(t):
            psi = psi + w * self.psi[n]
            mean = mean + w * self.mean[n]
        vx, vy = self.grid.perp_grad(psi)
        return vx + mean[0], vy + mean[1]

    def velocity(self, t: float) -> VectorField:
        vx, vy = self.velocity_arrays(t)
        return VectorField(self.grid, vx, vy)

    def streamfunction(self, n: int) -> ScalarField:
        return ScalarField(self.grid, self.psi[n])

    def time_reversed(self) -> "ControlPath":
        """Control ``-v(T - t)``; drives the final state back to the initial one."""
        return ControlPath(self.grid, self.T, -self.psi[::-1], -self.mean[::-1], gauge=False)

    def __repr__(self):
        return (f"ControlPath({self.grid.nx}x{self.grid.ny}, T={self.T}, "
                f"nodes={self.n_nodes})")


def write_control(directory, control: ControlPath):
    """Store ``psi`` nodes as a trajectory in ``directory/psi`` plus ``mean.csv``."""
    from pathlib import Path
    from .fieldio import write_trajectory

    directory = Path(directory)
    write_trajectory(directory / "psi", control.times,
                     [control.streamfunction(n) for n in range(control.n_nodes)], name="psi")
    with open(directory / "mean.csv", "w", encoding="ascii") as fh:
        fh.write("time,ux,uy\n")
        for t, (ux, uy) in zip(control.times, control.mean):
            fh.write(f"{float(t)!r},{float(ux)!r},{float(uy)!r}\n")
    return directory


def read_control(directory) -> ControlPath:
    from pathlib import Path
    from .errors import FormatError
    from .fieldio import read_trajectory

    directory = Path(directory)
    times, fields = read_trajectory(directory / "psi")
    if len(fields) < 2 or not np.allclose(np.diff(times), times[1] - times[0], rtol=1e-9):
        raise FormatError("control nodes must be uniform in time")
    mean = np.zeros((len(fields), 2))
    mpath = directory / "mean.csv"
    if mpath.exists():
        rows = mpath.read_text(encoding="ascii").splitlines()[1:]
        if len(rows) != len(fields):
            raise FormatError("mean.csv does not match the psi trajectory")
        mean = np.array([[float(x) for x in r.split(",")[1:]] for r in rows])
    return ControlPath(fields[0].grid, float(times[-1]), np.stack([f.values for f in fields]),
                       mean, gauge=False)
