"""Effort norms, mixedness metrics and minimum-effort velocity selection.

Effort norms have the form ``||v||^2 = ||K v||^2_{L2} = <K*K v, v>`` with
``K*K`` a Fourier multiplier.  The mixedness metric is either plain L2 or a
negative Sobolev (mix-norm) distance.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, InfeasibilityError
from .field import EPS_DENSITY, Grid, ScalarField, SpectralMultiplier, VectorField
from .transport import flux_divergence, flux_transpose_velocity


class NormKind(enum.Enum):
    L2 = "l2"
    H1 = "h1"
    ENSTROPHY = "enstrophy"
    PALENSTROPHY = "palenstrophy"

    @property
    def multiplier(self) -> SpectralMultiplier:
        return {
            NormKind.L2: SpectralMultiplier.IDENTITY,
            NormKind.H1: SpectralMultiplier.ONE_PLUS_NEG_LAPLACIAN,
            NormKind.ENSTROPHY: SpectralMultiplier.NEG_LAPLACIAN,
            NormKind.PALENSTROPHY: SpectralMultiplier.BILAPLACIAN,
        }[self]

    @property
    def kills_constants(self) -> bool:
        return self in (NormKind.ENSTROPHY, NormKind.PALENSTROPHY)

    def factor(self, grid: Grid) -> np.ndarray:
        return self.multiplier.factor(grid)

    def inverse_factor(self, grid: Grid) -> np.ndarray:
        return self.multiplier.inverse_factor(grid)

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        return cls(str(name).lower())


@dataclass(frozen=True)
class MetricKind:
    """``l2`` or ``hneg`` with ``d^2 = area * sum_k (1+|k|^2)^-s |a_k - b_k|^2``."""

    kind: str = "hneg"
    s: float = 1.0

    def __post_init__(self):
        if self.kind not in ("l2", "hneg"):
            raise ValueError(f"unknown metric {self.kind!r}")
        if self.kind == "hneg" and not self.s > 0:
            raise ValueError("hneg order s must be positive")

    @classmethod
    def l2(cls):
        return cls("l2", 0.0)

    @classmethod
    def hneg(cls, s=1.0):
        return cls("hneg", float(s))

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        text = str(text).lower()
        if text == "l2":
            return cls.l2()
        if text.startswith("hneg"):
            _, _, s = text.partition(":")
            return cls.hneg(float(s) if s else 1.0)
        raise ValueError(f"unknown metric {text!r}")

    def factor(self, grid: Grid) -> np.ndarray:
        if self.kind == "l2":
            return np.ones_like(grid.k2)
        return (1.0 + grid.k2) ** (-self.s)

    def __str__(self):
        return "l2" if self.kind == "l2" else f"hneg:{self.s:g}"


# ---------------------------------------------------------------------------
# norms and distances


def norm_sq_arrays(grid: Grid, vx, vy, factor) -> float:
    hx, hy = grid.fft(vx), grid.fft(vy)
    return grid.spectral_sum(hx, hx, factor) + grid.spectral_sum(hy, hy, factor)


def control_norm(v: VectorField, kind=NormKind.L2) -> float:
    """``<K*K v, v>^(1/2)`` evaluated spectrally."""
    kind = NormKind.parse(kind)
    return float(np.sqrt(max(norm_sq_arrays(v.grid, v.x, v.y, kind.factor(v.grid)), 0.0)))


def apply_kstar_k(v: VectorField, kind) -> VectorField:
    kind = NormKind.parse(kind)
    f = kind.factor(v.grid)
    return VectorField(v.grid, v.grid.apply_factor(v.x, f), v.grid.apply_factor(v.y, f))


def mix_distance(rho_a: ScalarField, rho_b: ScalarField, kind: MetricKind = MetricKind()) -> float:
    rho_a.grid.check_same(rho_b.grid)
    g = rho_a.grid
    eh = g.fft(rho_a.values - rho_b.values)
    return float(np.sqrt(max(g.spectral_sum(eh, eh, kind.factor(g)), 0.0)))


def mix_distance_sq_arrays(grid: Grid, rho, target, kind: MetricKind) -> float:
    eh = grid.fft(rho - target)
    return grid.spectral_sum(eh, eh, kind.factor(grid))


def mix_distance_gradient(rho: ScalarField, target: ScalarField,
                          kind: MetricKind = MetricKind()) -> ScalarField:
    """L2 gradient of ``d^2(., target)`` at ``rho``: ``2 M_s (rho - target)``."""
    rho.grid.check_same(target.grid)
    g = rho.grid
    return ScalarField(g, 2.0 * g.apply_factor(rho.values - target.values, kind.factor(g)))


# ---------------------------------------------------------------------------
# velocity field selection


@dataclass(frozen=True)
class VelocitySelection:
    v: VectorField
    lam: ScalarField
    gamma: ScalarField
    constraint_residual: float
    divergence_residual: float
    stationarity_residual: float
    iterations: int
    kind: NormKind

    @property
    def effort(self) -> float:
        return control_norm(self.v, self.kind)


# CG iterations without a 1% residual improvement before declaring stagnation;
# the window grows with the grid because plateaus lengthen with resolution
STAGNATION_WINDOW = 250


def stagnation_window(grid: Grid) -> int:
    return max(STAGNATION_WINDOW, grid.size // 4)


class _Selector:
    """Reduced operator ``A lam = B (K*K)^+ P B^T lam`` for one density."""

    def __init__(self, rho: ScalarField, kind: NormKind):
        self.g = rho.grid
        self.rho = rho.values
        self.kind = kind
        self.inv = kind.inverse_factor(self.g)

    def velocity(self, lam):
        g = self.g
        wx, wy = flux_transpose_velocity(g, self.rho, lam)
        px, py = g.leray(wx, wy)
        return g.apply_factor(px, self.inv), g.apply_factor(py, self.inv), (wx, wy)

    def constraint(self, vx, vy):
        g = self.g
        return flux_divergence(g, self.rho, g.dealias(vx), g.dealias(vy))

    def apply(self, lam):
        vx, vy, _ = self.velocity(lam)
        return self.constraint(vx, vy)


def select_velocity(rho: ScalarField, tau: ScalarField, kind=NormKind.L2, tol: float = 1e-8,
                    maxiter: int | None = None) -> VelocitySelection:
    """Least-effort divergence-free ``v`` with ``-div(rho v) = tau``.

    Solves the reduced multiplier system by conjugate gradients.  The
    incompressibility multiplier is eliminated exactly with the spectral
    Leray projector, so ``v = (K*K)^+ P(rho grad lam)`` and
    ``grad(gamma) = -(I - P)(rho grad lam)``.  For norms whose ``K`` kills
    constants the mean velocity is pinned to zero.

    Raises
    ------
    InfeasibilityError
        ``tau`` has nonzero mean, or CG stagnates (``tau`` is not a tangent
        vector at ``rho``).
    DegeneracyError
        ``min(rho) < EPS_DENSITY``.
    """
    kind = NormKind.parse(kind)
    g = rho.grid
    g.check_same(tau.grid)
    if rho.min() < EPS_DENSITY:
        raise DegeneracyError(f"density minimum {rho.min():.3e} below {EPS_DENSITY:.1e}")
    t = tau.values
    tnorm = np.linalg.norm(t)
    if tnorm == 0:
        z = np.zeros(g.shape)
        return VelocitySelection(VectorField.zeros(g), ScalarField(g, z), ScalarField(g, z),
                                 0.0, 0.0, 0.0, 0, kind)
    if abs(np.sum(t)) > 1e-10 * tnorm * np.sqrt(g.size):
        raise InfeasibilityError("tau has nonzero mean; incompressible transport conserves mass",
                                 best_residual=1.0)
    if maxiter is None:
        maxiter = min(4 * g.size, 4000)
    op = _Selector(rho, kind)
    window = stagnation_window(g)

    lam = np.zeros(g.shape)
    r = t.copy()
    p = r.copy()
    rr = np.vdot(r, r)
    best = 1.0
    best_it = 0
    it = 0
    while it < maxiter:
        rel = np.sqrt(rr) / tnorm
        if rel < best * 0.99:
            best, best_it = rel, it
        if rel <= tol:
            break
        if it - best_it > window:
            raise InfeasibilityError("CG stagnated; tau is not reachable at this density",
                                     best_residual=best)
        Ap = op.apply(p)
        pAp = np.vdot(p, Ap)
        if pAp <= 1e-14 * np.vdot(p, p) * max(1.0, np.max(np.abs(op.rho))) ** 2:
            raise InfeasibilityError("search direction lies in the constraint kernel",
                                     best_residual=min(best, rel))
        step = rr / pAp
        lam = lam + step * p
        r = r - step * Ap
        rr_new = np.vdot(r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1

    vx, vy, (wx, wy) = op.velocity(lam)
    cres = float(np.linalg.norm(op.constraint(vx, vy) - t) / tnorm)
    if cres > tol:
        raise InfeasibilityError("selection did not reach tolerance", best_residual=cres)
    v = VectorField(g, vx, vy)
    vnorm = max(np.linalg.norm(np.hypot(vx, vy)), 1e-300)
    divres = float(np.linalg.norm(g.div(vx, vy)) / vnorm)
    gamma = -g.inv_laplacian(g.div(wx, wy))
    gx, gy = g.grad(gamma)
    f = kind.factor(g)
    kx, ky = g.apply_factor(vx, f), g.apply_factor(vy, f)
    sx, sy = kx - wx - gx, ky - wy - gy
    if kind.kills_constants:
        sx, sy = sx - sx.mean(), sy - sy.mean()
    knorm = max(np.linalg.norm(np.hypot(kx, ky)), 1e-300)
    sres = float(np.linalg.norm(np.hypot(sx, sy)) / knorm)
    return VelocitySelection(v, ScalarField(g, lam), ScalarField(g, gamma), cres, divres,
                             sres, it, kind)


def metric_derivative(rho: ScalarField, tau: ScalarField, kind=NormKind.L2,
                      tol: float = 1e-8) -> float:
    """Instantaneous speed ``|rho_dot|``: the least effort norm generating ``tau``."""
    return select_velocity(rho, tau, kind, tol).effort


def tangent_inner(rho: ScalarField, tau1: ScalarField, tau2: ScalarField, kind=NormKind.L2,
                  tol: float = 1e-8) -> float:
    """Riemannian inner product ``<tau1, tau2>_rho`` via the selected velocities."""
    kind = NormKind.parse(kind)
    v1 = select_velocity(rho, tau1, kind, tol).v
    v2 = v1 if tau2 is tau1 else select_velocity(rho, tau2, kind, tol).v
    g = rho.grid
    f = kind.factor(g)
    return (g.spectral_sum(g.fft(v1.x), g.fft(v2.x), f)
            + g.spectral_sum(g.fft(v1.y), g.fft(v2.y), f))
