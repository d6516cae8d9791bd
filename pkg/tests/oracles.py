"""Reference computations that share no code with the package.

Everything here is written with plain loops or dense matrices so that it
can be trusted independently of the FFT-based implementation.
"""
import numpy as np


def direct_dft(values, lx=2 * np.pi, ly=2 * np.pi):
    """O(N^2) Fourier sum, normalized by 1/N, indexed [ky % ny, kx % nx]."""
    ny, nx = values.shape
    j = np.arange(ny)[:, None]
    i = np.arange(nx)[None, :]
    out = np.zeros((ny, nx), dtype=complex)
    for ky in range(ny):
        for kx in range(nx):
            phase = np.exp(-2j * np.pi * (kx * i / nx + ky * j / ny))
            out[ky, kx] = np.sum(values * phase) / (nx * ny)
    return out


def quadrature(values, lx=2 * np.pi, ly=2 * np.pi):
    ny, nx = values.shape
    return float(np.sum(values) * (lx / nx) * (ly / ny))


def fd_directional(fun, x, dx, eps=1e-5):
    """Central finite difference of ``fun`` at ``x`` along ``dx``."""
    return (fun(x + eps * dx) - fun(x - eps * dx)) / (2 * eps)


def hneg_distance_loop(a, b, s=1.0, lx=2 * np.pi, ly=2 * np.pi):
    """Mix-norm distance by explicit summation over the direct DFT."""
    ny, nx = a.shape
    c = direct_dft(a - b)
    tot = 0.0
    for ky in range(ny):
        for kx in range(nx):
            kxi = kx if kx < nx // 2 else kx - nx
            kyi = ky if ky < ny // 2 else ky - ny
            k2 = (2 * np.pi * kxi / lx) ** 2 + (2 * np.pi * kyi / ly) ** 2
            tot += (1 + k2) ** (-s) * abs(c[ky, kx]) ** 2
    return np.sqrt(tot * lx * ly)


def w1_sorted(a, b, cell):
    """W1 between value distributions of two equal-size samples (sorted matching)."""
    return float(np.sum(np.abs(np.sort(a.ravel()) - np.sort(b.ravel()))) * cell)
