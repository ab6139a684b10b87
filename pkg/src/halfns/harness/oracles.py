"""Brute-force quadrature references for the spectral/product-integration
operators, on small grids only.

Each reference integrates the closed-form periodic kernel against the same
interpolant the fast operator uses: the trigonometric interpolant in the
tangential variable and the local cubic Lagrange interpolant in x_n.
"""

from __future__ import annotations

import math

import numpy as np

from ..grid import HalfSpaceGrid

__all__ = ["heat_reference", "poisson_reference", "newton_reference", "apply_newton_reference",
           "trig_cardinal", "cubic_cardinal", "graded_rule"]

_GX, _GW = np.polynomial.legendre.leggauss(20)


def graded_rule(a: float, b: float, toward: str | None = None, levels: int = 14,
                sigma: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss rule on [a, b], geometrically refined toward one end."""
    if toward is None:
        edges = np.array([a, b])
    else:
        frac = np.concatenate([[1.0], sigma ** np.arange(1, levels + 1), [0.0]])
        edges = b - (b - a) * frac if toward == "right" else a + (b - a) * frac
        edges = np.sort(edges)
    lo, hi = edges[:-1], edges[1:]
    x = ((lo + hi) / 2)[:, None] + ((hi - lo) / 2)[:, None] * _GX
    w = ((hi - lo) / 2)[:, None] * _GW
    return x.ravel(), w.ravel()


def trig_cardinal(theta: np.ndarray, N: int, L: float) -> np.ndarray:
    """Cardinal functions of the real trigonometric interpolant (Nyquist mode
    as a cosine), shape ``theta.shape + (N,)``."""
    kappa = 2 * math.pi / L
    d = theta[..., None] - L * np.arange(N) / N
    acc = np.ones_like(d)
    for m in range(1, N // 2):
        acc += 2 * np.cos(m * kappa * d)
    acc += np.cos(N // 2 * kappa * d)
    return acc / N


def cubic_cardinal(s: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Cardinal functions of the cell-local cubic interpolant (stencil of the
    cell and its neighbours, shifted inward at the ends)."""
    nz = len(z)
    cell = np.clip(np.searchsorted(z, s, side="right") - 1, 0, nz - 2)
    lo = np.clip(cell - 1, 0, nz - 4)
    out = np.zeros(s.shape + (nz,))
    for m in range(4):
        val = np.ones_like(s)
        for l in range(4):
            if l != m:
                val *= (s - z[lo + l]) / (z[lo + m] - z[lo + l])
        np.put_along_axis(out, (lo + m)[..., None], val[..., None], axis=-1)
    return out


def _periodic_gauss(d: np.ndarray, period: float, t: float, images: int = 6) -> np.ndarray:
    m = np.arange(-images, images + 1) * period
    return np.sum(np.exp(-(d[..., None] + m) ** 2 / (4 * t)), axis=-1) / math.sqrt(4 * math.pi * t)


def heat_reference(data: np.ndarray, grid: HalfSpaceGrid, t: float) -> np.ndarray:
    """Trapezoid sum of the periodized Gaussian against the zero extension
    of 2D node data; returns the half-space nodes."""
    if grid.n != 2:
        raise ValueError("reference implemented for n = 2")
    N = grid.N_nor
    ext = np.zeros((grid.N_tan, 2 * N))
    ext[:, :N + 1] = data
    ext[:, 0] *= 0.5
    ext[:, N] *= 0.5
    xs = grid.x_tan
    zs = grid.dz * np.arange(2 * N)
    A = _periodic_gauss(xs[:, None] - xs[None, :], grid.L, t) * grid.dx
    B = _periodic_gauss(grid.z[:, None] - zs[None, :], 2 * grid.H, t) * grid.dz
    return A @ ext @ B.T


def poisson_reference(g_data: np.ndarray, grid: HalfSpaceGrid, points: int = 2048) -> np.ndarray:
    """Harmonic extension by quadrature of the periodic Poisson kernel
    sinh(kz) / (L (cosh kz - cos k theta)); rows at x_n = 0 are left as NaN."""
    if grid.n != 2:
        raise ValueError("reference implemented for n = 2")
    L, kappa = grid.L, 2 * math.pi / grid.L
    theta = L * np.arange(points) / points
    g_fine = trig_cardinal(theta, grid.N_tan, L) @ g_data
    out = np.full(grid.shape, np.nan)
    d = grid.x_tan[:, None] - theta[None, :]
    for a, z in enumerate(grid.z):
        if z == 0:
            continue
        P = np.sinh(kappa * z) / (L * (np.cosh(kappa * z) - np.cos(kappa * d)))
        out[:, a] = P @ g_fine * (L / points)
    return out


def _newton_kernel(dtheta: np.ndarray, ds: np.ndarray, L: float) -> np.ndarray:
    # (1/4pi) log(1 - 2 r cos(k theta) + r^2) + |s| / 2L with r = e^{-k|s|},
    # written as (1 - r)^2 + 4 r sin^2(k theta / 2) to avoid cancellation
    kappa = 2 * math.pi / L
    s = np.abs(ds)
    r = np.exp(-kappa * s)
    arg = np.expm1(-kappa * s) ** 2 + 4 * r * np.sin(kappa * dtheta / 2) ** 2
    return np.log(arg) / (4 * math.pi) + s / (2 * L)


def newton_reference(grid: HalfSpaceGrid) -> np.ndarray:
    """Operator matrix M with (N f)[i, a] = sum_{j, b} M[i - j, a, b] f[j, b]
    for the Newtonian potential over the truncated half-space, by graded
    product-Gauss quadrature around every target point."""
    if grid.n != 2:
        raise ValueError("reference implemented for n = 2")
    L, z = grid.L, grid.z
    nz = len(z)
    M = np.zeros((grid.N_tan, nz, nz))
    th_l, wl = graded_rule(-L / 2, 0.0, "right")
    th_r, wr = graded_rule(0.0, L / 2, "left")
    th0 = np.concatenate([th_l, th_r])
    wth = np.concatenate([wl, wr])
    for a in range(nz):
        parts = []
        for c in range(nz - 1):
            toward = "left" if c == a else "right" if c + 1 == a else None
            parts.append(graded_rule(z[c], z[c + 1], toward))
        s = np.concatenate([p[0] for p in parts])
        ws = np.concatenate([p[1] for p in parts])
        Cw = cubic_cardinal(s, z) * ws[:, None]             # (s, b)
        for i in range(grid.N_tan):
            d = grid.x_tan[i]
            theta = d + th0                                 # graded toward theta = d
            Tw = trig_cardinal(theta, grid.N_tan, L)[:, 0] * wth
            K = _newton_kernel(d - theta[:, None], z[a] - s[None, :], L)
            M[i, a] = (Tw @ K) @ Cw
    return M


def apply_newton_reference(M: np.ndarray, f: np.ndarray) -> np.ndarray:
    N = f.shape[0]
    out = np.zeros_like(f)
    for i in range(N):
        for j in range(N):
            out[i] += M[(i - j) % N] @ f[j]
    return out
