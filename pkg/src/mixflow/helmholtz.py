"""Density-weighted Helmholtz decomposition ``v = mu grad(xi) + v_r``.

The rotational part satisfies ``div(mu v_r) = 0`` and is L2-orthogonal to the
potential part.  The weighted case needs the elliptic solve
``div(mu^2 grad xi) = div(mu v)``; for ``mu == 1`` everything is diagonal in
Fourier space and is applied exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegeneracyError, SolvabilityError
from .field import EPS_DENSITY, Grid, ScalarField, VectorField

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class Decomposition:
    v_p: VectorField
    v_r: VectorField
    xi: ScalarField
    residual: float


def _kernel_modes(grid: Grid, ah: np.ndarray) -> np.ndarray:
    """Coefficients of ``ah`` on modes annihilated by the spectral gradient."""
    mask = grid.kd2 == 0
    return ah[mask]


def _check_rhs(grid: Grid, rhs: np.ndarray):
    norm = np.sqrt(np.sum(rhs ** 2) * grid.cell)
    if norm == 0:
        return 0.0
    if abs(np.mean(rhs)) >= 1e-10 * norm:
        raise SolvabilityError(f"rhs has nonzero mean {np.mean(rhs):.3e}; "
                               "a periodic Poisson problem needs mean-zero data")
    # Nyquist-only modes are also in the kernel of div(c grad .)
    kern = _kernel_modes(grid, grid.fft(rhs)) / grid.size
    if np.max(np.abs(kern)) * np.sqrt(grid.area) >= 1e-10 * norm:
        raise SolvabilityError("rhs has components on Nyquist kernel modes")
    return norm


def _solve(coeff: np.ndarray, rhs: np.ndarray, grid: Grid, tol: float,
           maxiter: int | None):
    """PCG for ``-div(coeff grad xi) = -rhs``; returns (xi, rel_residual, iters)."""
    rhs_norm = _check_rhs(grid, rhs)
    if rhs_norm == 0:
        return np.zeros(grid.shape), 0.0, 0
    if maxiter is None:
        maxiter = 20 * (grid.nx + grid.ny)
    inv_coeff = 1.0 / coeff

    def apply(x):
        gx, gy = grid.grad(x)
        return -grid.div(coeff * gx, coeff * gy)

    # L^-1 D^T C^-1 D L^-1: exact for constant coeff, robust at high contrast
    def precond(r):
        y = grid.ifft(grid.inv_kd2 * grid.fft(r))
        gx, gy = grid.grad(y)
        w = -grid.div(inv_coeff * gx, inv_coeff * gy)
        return grid.ifft(grid.inv_kd2 * grid.fft(w))

    b = -rhs
    bnorm = np.linalg.norm(b)
    x = precond(b)
    it = 0
    for _restart in range(4):
        r = b - apply(x)
        z = precond(r)
        p = z.copy()
        rz = np.vdot(r, z)
        while it < maxiter:
            if np.linalg.norm(r) <= 0.5 * tol * bnorm:
                break
            Ap = apply(p)
            pAp = np.vdot(p, Ap)
            if pAp <= 0:
                break
            step = rz / pAp
            x = x + step * p
            r = r - step * Ap
            z = precond(r)
            rz_new = np.vdot(r, z)
            p = z + (rz_new / rz) * p
            rz = rz_new
            it += 1
        true_res = np.linalg.norm(b - apply(x)) / bnorm
        if true_res <= tol:
            break
        if it >= maxiter:
            break
    x = x - np.mean(x)
    x = grid.ifft(np.where(grid.kd2 == 0, 0.0, 1.0) * grid.fft(x))
    true_res = float(np.linalg.norm(b - apply(x)) / bnorm)
    if true_res > tol:
        raise ConvergenceError("weighted Poisson solve did not reach tolerance",
                               residual=true_res, iterations=it)
    return x, true_res, it


def weighted_poisson_solve(coeff: ScalarField, rhs: ScalarField, tol: float = DEFAULT_TOL,
                           maxiter: int | None = None, floor: float = EPS_DENSITY) -> ScalarField:
    """Solve ``div(coeff grad xi) = rhs`` on the torus for mean-zero ``xi``.

    Preconditioned conjugate gradients; the preconditioner is the exact
    inverse of the constant-coefficient operator with coefficient
    ``mean(coeff)``.

    Raises
    ------
    SolvabilityError
        ``rhs`` has nonzero mean.
    DegeneracyError
        ``min(coeff) < floor``.
    ConvergenceError
        Iteration cap reached; carries the achieved residual.
    """
    coeff.grid.check_same(rhs.grid)
    if coeff.min() < floor:
        raise DegeneracyError(f"coefficient minimum {coeff.min():.3e} below {floor:.1e}")
    xi, _, _ = _solve(coeff.values, rhs.values, coeff.grid, tol, maxiter)
    return ScalarField(coeff.grid, xi)


def leray_project(v: VectorField) -> VectorField:
    """Rotational projector for the uniform density (exact, spectral)."""
    rx, ry = v.grid.leray(v.x, v.y)
    return VectorField(v.grid, rx, ry)


def _is_uniform_one(mu) -> bool:
    return mu is None or bool(np.all(mu.values == 1.0))


def weighted_helmholtz_decompose(v: VectorField, mu: ScalarField | None = None,
                                 tol: float = DEFAULT_TOL,
                                 maxiter: int | None = None) -> Decomposition:
    """Split ``v`` into ``mu grad(xi)`` plus a part with ``div(mu v_r) = 0``.

    ``mu=None`` (or an all-ones field) uses the exact spectral Leray
    projector.
    """
    g = v.grid
    if _is_uniform_one(mu):
        xi = g.inv_laplacian(g.div(v.x, v.y))
        px, py = g.grad(xi)
        v_p = VectorField(g, px, py)
        v_r = VectorField(g, v.x - px, v.y - py)
        return Decomposition(v_p, v_r, ScalarField(g, xi), 0.0)
    g.check_same(mu.grid)
    if mu.min() < EPS_DENSITY:
        raise DegeneracyError(f"density minimum {mu.min():.3e} below {EPS_DENSITY:.1e}")
    m = mu.values
    rhs = g.div(m * v.x, m * v.y)
    xi, res, _ = _solve(m * m, rhs, g, tol, maxiter)
    gx, gy = g.grad(xi)
    v_p = VectorField(g, m * gx, m * gy)
    v_r = VectorField(g, v.x - v_p.x, v.y - v_p.y)
    return Decomposition(v_p, v_r, ScalarField(g, xi), res)


def potential_projector(v, mu=None, tol=DEFAULT_TOL):
    return weighted_helmholtz_decompose(v, mu, tol).v_p


def rotational_projector(v, mu=None, tol=DEFAULT_TOL):
    return weighted_helmholtz_decompose(v, mu, tol).v_r
