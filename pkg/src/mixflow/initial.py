"""Built-in analytic densities and velocity fields.

Indicator-type data are smoothed with a tanh profile of width ``delta``
(default four grid cells) and mapped affinely into ``[EPS_DENSITY, 1]`` so
that spectral operators see a smooth, strictly positive density.
"""
from __future__ import annotations

import numpy as np

from .field import EPS_DENSITY, Grid, ScalarField, VectorField, random_band_limited
from .helmholtz import leray_project

_IMAGES = (-2, -1, 0, 1, 2)


def _band(x, a, b, delta, period):
    s = np.zeros_like(x)
    for m in _IMAGES:
        xm = x + m * period
        s += 0.5 * (np.tanh((xm - a) / delta) - np.tanh((xm - b) / delta))
    return s


def _to_density(s, eps=EPS_DENSITY):
    return eps + (1.0 - eps) * s


def stripe(grid: Grid, center=None, width=None, shift: float = 0.0, delta=None,
           axis: str = "x") -> ScalarField:
    """Smoothed indicator of the band ``|x - center| < width / 2`` (periodic).

    ``shift`` translates the band along ``axis``; the result is the exact
    analytic translate, not a resampled one.
    """
    length = grid.lx if axis == "x" else grid.ly
    spacing = grid.dx if axis == "x" else grid.dy
    center = 0.5 * length if center is None else center
    width = 0.5 * length if width is None else width
    delta = 4 * spacing if delta is None else delta
    X, Y = grid.coords()
    q = (X if axis == "x" else Y) - shift
    c = center
    s = _band(q, c - 0.5 * width, c + 0.5 * width, delta, length)
    return ScalarField(grid, _to_density(s))


def disk(grid: Grid, center=None, radius=None, delta=None) -> ScalarField:
    """Smoothed indicator of a disk, summed over neighbouring periodic images."""
    cx, cy = (0.5 * grid.lx, 0.5 * grid.ly) if center is None else center
    radius = 0.25 * min(grid.lx, grid.ly) if radius is None else radius
    delta = 4 * min(grid.dx, grid.dy) if delta is None else delta
    X, Y = grid.coords()
    s = np.zeros(grid.shape)
    for mx in (-1, 0, 1):
        for my in (-1, 0, 1):
            r = np.hypot(X - cx + mx * grid.lx, Y - cy + my * grid.ly)
            s += 0.5 * (1.0 + np.tanh((radius - r) / delta))
    return ScalarField(grid, _to_density(np.clip(s, 0.0, 1.0)))


def uniform_like(rho: ScalarField) -> ScalarField:
    """Perfectly mixed target with the same mass as ``rho``."""
    return ScalarField.constant(rho.grid, rho.mean())


def random_density(grid: Grid, seed: int = 0, kmax: float = 4.0, amplitude: float = 0.3) -> ScalarField:
    """Smooth random density with mean 1 and values in ``[1 - amplitude, 1 + amplitude]``."""
    rng = np.random.default_rng(seed)
    a = random_band_limited(grid, kmax, rng)
    peak = np.max(np.abs(a))
    return ScalarField(grid, 1.0 + amplitude * a / peak if peak > 0 else 1.0 + a)


def taylor_green(grid: Grid, amplitude: float = 1.0) -> VectorField:
    X, Y = grid.coords()
    kx, ky = 2 * np.pi / grid.lx, 2 * np.pi / grid.ly
    return VectorField(grid, amplitude * np.sin(kx * X) * np.cos(ky * Y),
                       -amplitude * (kx / ky) * np.cos(kx * X) * np.sin(ky * Y))


def shear(grid: Grid, amplitude: float = 1.0) -> VectorField:
    X, Y = grid.coords()
    return VectorField(grid, amplitude * np.sin(2 * np.pi / grid.ly * Y), np.zeros(grid.shape))


def random_velocity(grid: Grid, seed: int = 0, kmax: float = 4.0, amplitude: float = 1.0) -> VectorField:
    """Seeded band-limited divergence-free field with unit-ish RMS speed."""
    rng = np.random.default_rng(seed)
    psi = random_band_limited(grid, kmax, rng, 1.0)
    vx, vy = grid.perp_grad(psi)
    rms = np.sqrt(np.mean(vx ** 2 + vy ** 2))
    return leray_project(VectorField(grid, amplitude * vx / rms, amplitude * vy / rms))


def parse_density(name: str, grid: Grid) -> ScalarField:
    """``stripe``, ``stripe-shifted:A``, ``disk``, ``uniform``, ``random[:seed]``."""
    head, _, arg = name.partition(":")
    if head == "stripe":
        return stripe(grid)
    if head == "stripe-shifted":
        return stripe(grid, shift=float(arg or 0.0))
    if head == "disk":
        return disk(grid)
    if head == "uniform":
        return uniform_like(stripe(grid))
    if head == "random":
        return random_density(grid, seed=int(arg or 0))
    raise ValueError(f"unknown density {name!r}")


def parse_velocity(name: str, grid: Grid) -> VectorField:
    """``taylor-green``, ``shear``, ``random[:seed]``, ``constant:UX,UY``."""
    head, _, arg = name.partition(":")
    if head == "taylor-green":
        return taylor_green(grid)
    if head == "shear":
        return shear(grid)
    if head == "random":
        return random_velocity(grid, seed=int(arg or 0))
    if head == "constant":
        ux, _, uy = arg.partition(",")
        return VectorField.constant(grid, float(ux or 0.0), float(uy or 0.0))
    raise ValueError(f"unknown velocity {name!r}")
