"""Periodic 2D grid, scalar/vector fields and spectral differential operators.

All fields live on the flat torus ``[0, lx) x [0, ly)``.  Arrays are stored
with shape ``(ny, nx)`` so that ``values.ravel()`` is row-major with the
y-index outer and the x-index inner; sample ``[j, i]`` sits at
``(i * lx / nx, j * ly / ny)``.

Spectral derivatives zero the Nyquist wavenumber.  This makes every
derivative a real antisymmetric matrix on the grid, which the adjoint code
relies on: transposes of the discrete operators are available in closed form.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, DimensionError

TWO_PI = 2.0 * np.pi

#: Smallest admissible density / elliptic coefficient (unit-mean scale).
EPS_DENSITY = 1e-3


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = TWO_PI
    ly: float = TWO_PI

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or not _is_pow2(int(n)) or n < 2:
                raise ConfigurationError(f"{name}={n} must be a power of two >= 2")
        if not (self.lx > 0 and self.ly > 0 and np.isfinite(self.lx) and np.isfinite(self.ly)):
            raise ConfigurationError("domain lengths must be positive and finite")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "lx", float(self.lx))
        object.__setattr__(self, "ly", float(self.ly))

    # -- geometry ---------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def cell(self) -> float:
        """Discrete Lebesgue measure of one grid cell."""
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        return np.meshgrid(x, y, indexing="xy")

    # -- wavenumbers (rfft2 layout: shape (ny, nx//2 + 1)) -----------------
    @cached_property
    def kx_int(self) -> np.ndarray:
        return np.arange(self.nx // 2 + 1, dtype=float)[None, :]

    @cached_property
    def ky_int(self) -> np.ndarray:
        return (np.fft.fftfreq(self.ny) * self.ny)[:, None]

    @cached_property
    def kx(self) -> np.ndarray:
        return TWO_PI / self.lx * self.kx_int

    @cached_property
    def ky(self) -> np.ndarray:
        return TWO_PI / self.ly * self.ky_int

    @cached_property
    def kxd(self) -> np.ndarray:
        k = self.kx.copy()
        k[:, self.nx // 2] = 0.0
        return k

    @cached_property
    def kyd(self) -> np.ndarray:
        k = self.ky.copy()
        k[self.ny // 2, :] = 0.0
        return k

    @cached_property
    def k2(self) -> np.ndarray:
        """Physical |k|^2 on the half spectrum."""
        return self.kx ** 2 + self.ky ** 2

    @cached_property
    def kd2(self) -> np.ndarray:
        """|k|^2 consistent with the (Nyquist-free) derivative operators."""
        return self.kxd ** 2 + self.kyd ** 2

    @cached_property
    def inv_kd2(self) -> np.ndarray:
        out = np.zeros_like(self.kd2)
        nz = self.kd2 > 0
        out[nz] = 1.0 / self.kd2[nz]
        return out

    @cached_property
    def half_weights(self) -> np.ndarray:
        """Multiplicity of each rfft column in the full spectrum (1 or 2)."""
        w = np.full((1, self.nx // 2 + 1), 2.0)
        w[0, 0] = 1.0
        w[0, self.nx // 2] = 1.0
        return w

    def spectral_sum(self, ah: np.ndarray, bh: np.ndarray, factor=1.0) -> float:
        """``area * sum_k factor(k) conj(a_k) b_k`` over the full normalized spectrum."""
        s = np.sum(self.half_weights * factor * np.real(np.conj(ah) * bh))
        return float(s * self.area / self.size ** 2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep_x = np.abs(self.kx_int) < self.nx / 3.0
        keep_y = np.abs(self.ky_int) < self.ny / 3.0
        return (keep_x & keep_y).astype(float)

    # -- array-level transforms and operators -----------------------------
    def fft(self, a: np.ndarray) -> np.ndarray:
        return sfft.rfft2(a)

    def ifft(self, ah: np.ndarray) -> np.ndarray:
        return sfft.irfft2(ah, s=self.shape)

    def ddx(self, a):
        return self.ifft(1j * self.kxd * self.fft(a))

    def ddy(self, a):
        return self.ifft(1j * self.kyd * self.fft(a))

    def grad(self, a):
        ah = self.fft(a)
        return self.ifft(1j * self.kxd * ah), self.ifft(1j * self.kyd * ah)

    def div(self, ax, ay):
        return self.ifft(1j * self.kxd * self.fft(ax) + 1j * self.kyd * self.fft(ay))

    def curl(self, ax, ay):
        return self.ifft(1j * self.kxd * self.fft(ay) - 1j * self.kyd * self.fft(ax))

    def perp_grad(self, psi):
        ph = self.fft(psi)
        return self.ifft(-1j * self.kyd * ph), self.ifft(1j * self.kxd * ph)

    def curl_adjoint(self, gx, gy):
        """Transpose of ``perp_grad``: d_y g^x - d_x g^y."""
        return self.ifft(1j * self.kyd * self.fft(gx) - 1j * self.kxd * self.fft(gy))

    def dealias(self, a):
        return self.ifft(self.dealias_mask * self.fft(a))

    def apply_factor(self, a, factor):
        return self.ifft(factor * self.fft(a))

    def inv_laplacian(self, a):
        """Pseudo-inverse of the spectral Laplacian (kernel modes set to 0)."""
        return self.ifft(-self.inv_kd2 * self.fft(a))

    def leray(self, ax, ay):
        """Orthogonal projection onto divergence-free fields (mean kept)."""
        axh, ayh = self.fft(ax), self.fft(ay)
        s = (self.kxd * axh + self.kyd * ayh) * self.inv_kd2
        return self.ifft(axh - self.kxd * s), self.ifft(ayh - self.kyd * s)

    def integrate(self, a) -> float:
        return float(np.sum(a) * self.cell)

    def check_same(self, other: "Grid"):
        if self != other:
            raise DimensionError(f"grid mismatch: {self} vs {other}")


def _as_values(grid: Grid, values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.size != grid.size:
        raise DimensionError(f"expected {grid.size} values, got {arr.size}")
    arr = arr.reshape(grid.shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("field values must be finite")
    arr.setflags(write=False)
    return arr


class ScalarField:
    """Immutable samples of a scalar function on a :class:`Grid`."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        self.grid = grid
        self.values = _as_values(grid, values)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid, fn):
        X, Y = grid.coords()
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def mass(self) -> float:
        return self.grid.integrate(self.values)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2) * self.grid.cell))

    def _other(self, other):
        if isinstance(other, ScalarField):
            self.grid.check_same(other.grid)
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def __repr__(self):
        return f"ScalarField({self.grid.nx}x{self.grid.ny}, mean={self.mean():.6g})"


class VectorField:
    """Immutable pair of component arrays sharing one grid."""

    __slots__ = ("grid", "x", "y")

    def __init__(self, grid: Grid, x, y):
        self.grid = grid
        self.x = _as_values(grid, x)
        self.y = _as_values(grid, y)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid, ux, uy):
        return cls(grid, np.full(grid.shape, float(ux)), np.full(grid.shape, float(uy)))

    @classmethod
    def from_function(cls, grid, fn):
        X, Y = grid.coords()
        fx, fy = fn(X, Y)
        return cls(grid, np.broadcast_to(fx, grid.shape), np.broadcast_to(fy, grid.shape))

    @property
    def components(self):
        return self.x, self.y

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.x ** 2 + self.y ** 2) * self.grid.cell))

    def max_speed(self) -> float:
        return float(np.sqrt(np.max(self.x ** 2 + self.y ** 2)))

    def mean(self) -> tuple[float, float]:
        return float(np.mean(self.x)), float(np.mean(self.y))

    def _other(self, other):
        if isinstance(other, VectorField):
            self.grid.check_same(other.grid)
            return other.x, other.y
        return other, other

    def __add__(self, other):
        ox, oy = self._other(other)
        return VectorField(self.grid, self.x + ox, self.y + oy)

    __radd__ = __add__

    def __sub__(self, other):
        ox, oy = self._other(other)
        return VectorField(self.grid, self.x - ox, self.y - oy)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            self.grid.check_same(other.grid)
            return VectorField(self.grid, self.x * other.values, self.y * other.values)
        return VectorField(self.grid, self.x * other, self.y * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ScalarField):
            return VectorField(self.grid, self.x / other.values, self.y / other.values)
        return VectorField(self.grid, self.x / other, self.y / other)

    def __neg__(self):
        return VectorField(self.grid, -self.x, -self.y)

    def __repr__(self):
        return f"VectorField({self.grid.nx}x{self.grid.ny}, norm={self.norm():.6g})"


# ---------------------------------------------------------------------------
# spectral representation


class SpectralField:
    """Full (two-sided) Fourier coefficients, normalized so ``coeff(0, 0)`` is the mean."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: Grid, coeffs: np.ndarray):
        self.grid = grid
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(grid.shape)

    def coeff(self, kx: int, ky: int) -> complex:
        g = self.grid
        if not (-g.nx // 2 <= kx < g.nx // 2 and -g.ny // 2 <= ky < g.ny // 2):
            raise IndexError(f"wavevector ({kx}, {ky}) outside resolved range")
        return complex(self.coeffs[ky % g.ny, kx % g.nx])

    def __add__(self, other):
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __mul__(self, c):
        return SpectralField(self.grid, self.coeffs * c)

    __rmul__ = __mul__


def spectral_transform(f: ScalarField) -> SpectralField:
    g = f.grid
    return SpectralField(g, sfft.fft2(f.values) / g.size)


def inverse_spectral_transform(fh: SpectralField) -> ScalarField:
    g = fh.grid
    return ScalarField(g, np.real(sfft.ifft2(fh.coeffs * g.size)))


class SpectralMultiplier(enum.Enum):
    """Per-mode real factors used for ``K*K`` of the effort norms."""

    IDENTITY = "identity"
    NEG_LAPLACIAN = "neg-laplacian"
    BILAPLACIAN = "bilaplacian"
    ONE_PLUS_NEG_LAPLACIAN = "one-plus-neg-laplacian"

    def factor(self, grid: Grid) -> np.ndarray:
        """Factor on the rfft half spectrum, shape ``(ny, nx//2+1)``."""
        k2 = grid.k2
        if self is SpectralMultiplier.IDENTITY:
            return np.ones_like(k2)
        if self is SpectralMultiplier.NEG_LAPLACIAN:
            return k2.copy()
        if self is SpectralMultiplier.BILAPLACIAN:
            return k2 ** 2
        return 1.0 + k2

    def inverse_factor(self, grid: Grid) -> np.ndarray:
        """Pseudo-inverse: zero wherever the factor vanishes (the kernel)."""
        f = self.factor(grid)
        out = np.zeros_like(f)
        nz = f > 0
        out[nz] = 1.0 / f[nz]
        return out


# ---------------------------------------------------------------------------
# field-level differential operators


def gradient(f: ScalarField) -> VectorField:
    gx, gy = f.grid.grad(f.values)
    return VectorField(f.grid, gx, gy)


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, v.grid.div(v.x, v.y))


def scalar_curl(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, v.grid.curl(v.x, v.y))


def perp_gradient(psi: ScalarField) -> VectorField:
    """``(-d psi/dy, d psi/dx)``; exactly divergence-free."""
    vx, vy = psi.grid.perp_grad(psi.values)
    return VectorField(psi.grid, vx, vy)


def laplacian(f: ScalarField) -> ScalarField:
    g = f.grid
    return ScalarField(g, g.ifft(-g.k2 * g.fft(f.values)))


def dealias(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.grid.dealias(f.values))


def inner_product_l2(a, b) -> float:
    """L2 inner product by cell-measure quadrature (scalar or vector fields)."""
    a.grid.check_same(b.grid)
    if isinstance(a, ScalarField) and isinstance(b, ScalarField):
        s = np.sum(a.values * b.values)
    elif isinstance(a, VectorField) and isinstance(b, VectorField):
        s = np.sum(a.x * b.x) + np.sum(a.y * b.y)
    else:
        raise DimensionError("inner product needs two scalar or two vector fields")
    return float(s * a.grid.cell)


def random_band_limited(grid: Grid, kmax: float, rng, amplitude: float = 1.0,
                        slope: float = 0.0) -> np.ndarray:
    """Random smooth real array with modes ``0 < |k|_int <= kmax``.

    Returned with zero mean and unit RMS times ``amplitude``; ``slope``
    tilts the spectrum as ``|k|^-slope``.
    """
    kint2 = grid.kx_int ** 2 + grid.ky_int ** 2
    shape = kint2.shape
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    keep = (kint2 > 0) & (kint2 <= kmax ** 2)
    w = np.where(keep, np.power(np.where(kint2 > 0, kint2, 1.0), -0.5 * slope), 0.0)
    a = grid.ifft(coef * w)
    rms = np.sqrt(np.mean(a ** 2))
    if rms == 0:
        return a
    return amplitude * a / rms
