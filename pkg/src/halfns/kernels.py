"""Heat, Newtonian and Poisson kernels on the half-space grid.

Everything uses a mixed representation: a Fourier transform in the periodic
tangential variables and, in the normal variable, either an FFT on the
doubled interval [-H, H) (heat kernel with reflections) or product
integration of an exponential kernel against the piecewise-cubic
interpolant of the data (Newtonian and boundary potentials).
"""

from __future__ import annotations

import enum
import math
import warnings
from functools import lru_cache

import numpy as np

from .grid import Field, HalfSpaceGrid, ScalarField, TimeGrid, lp_norm

__all__ = [
    "ReflectionKind",
    "HeatApplication",
    "gauss_kernel",
    "laplace_kernel",
    "heat_convolve",
    "heat_image",
    "heat_decay_profile",
    "newton_volume",
    "poisson_boundary",
    "riesz_tangential",
    "multiplier_decay_check",
    "normal_apply",
    "tan_fft",
    "tan_ifft",
]


class ReflectionKind(enum.Enum):
    NONE = "none"   # Gamma
    ODD = "odd"     # Gamma - Gamma*
    EVEN = "even"   # Gamma + Gamma*


def laplace_kernel(x, n: int) -> np.ndarray:
    """Fundamental solution of the Laplacian: ln|x| / 2pi for n = 2,
    1 / (omega_n (2 - n) |x|^{n-2}) for n >= 3 with omega_n the unit-sphere area."""
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x**2, axis=-1))
    if n == 2:
        return np.log(r) / (2 * math.pi)
    omega = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    return 1.0 / (omega * (2 - n) * r ** (n - 2))


def gauss_kernel(x, t: float, n: int) -> np.ndarray:
    """(4 pi t)^{-n/2} exp(-|x|^2 / 4t); ``x`` has its n coordinates last."""
    if not t > 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x**2, axis=-1) if x.ndim else x**2
    return (4 * math.pi * t) ** (-n / 2) * np.exp(-r2 / (4 * t))


# ---------------------------------------------------------------------------
# doubled-box transforms


def extend(data: np.ndarray, grid: HalfSpaceGrid, kind: str) -> np.ndarray:
    """Extend node data on [0, H] to the periodic interval [-H, H).

    ``zero`` keeps half values at the two jump nodes so the box trapezoid
    matches the half-space trapezoid; ``image`` holds only the mirror part,
    so zero + image = even and zero - image = odd.
    """
    N = grid.N_nor
    out = np.zeros(data.shape[:-1] + (2 * N,))
    mirror = data[..., N - 1:0:-1]
    if kind == "zero":
        out[..., :N + 1] = data
        out[..., 0] *= 0.5
        out[..., N] *= 0.5
    elif kind == "even":
        out[..., :N + 1] = data
        out[..., N + 1:] = mirror
    elif kind == "odd":
        out[..., 1:N] = data[..., 1:N]
        out[..., N + 1:] = -mirror
    elif kind == "image":
        out[..., N + 1:] = mirror
        out[..., 0] = 0.5 * data[..., 0]
        out[..., N] = 0.5 * data[..., N]
    else:
        raise ValueError(f"unknown extension {kind!r}")
    return out


def _box_axes(grid: HalfSpaceGrid, ndim: int) -> tuple[int, ...]:
    return tuple(range(ndim - grid.n, ndim))


def box_rfft(arr: np.ndarray, grid: HalfSpaceGrid) -> np.ndarray:
    return np.fft.rfftn(arr, axes=_box_axes(grid, arr.ndim))


def box_irfft(hat: np.ndarray, grid: HalfSpaceGrid) -> np.ndarray:
    axes = _box_axes(grid, hat.ndim)
    return np.fft.irfftn(hat, s=grid.box_shape, axes=axes)


@lru_cache(maxsize=32)
def box_kmag(grid: HalfSpaceGrid) -> np.ndarray:
    """|xi| on the real-FFT layout of the doubled box."""
    grid.require_uniform()
    kn = 2 * np.pi * np.fft.rfftfreq(2 * grid.N_nor, d=grid.dz)
    return np.sqrt(grid.kperp[..., None] ** 2 + kn**2)


def _heat_box(ext: np.ndarray, grid: HalfSpaceGrid, t: float) -> np.ndarray:
    hat = box_rfft(ext, grid)
    hat *= np.exp(-t * box_kmag(grid) ** 2)
    return box_irfft(hat, grid)


_EXT = {ReflectionKind.NONE: "zero", ReflectionKind.ODD: "odd", ReflectionKind.EVEN: "even"}


def heat_convolve(u0: Field, t: float, refl: ReflectionKind = ReflectionKind.NONE) -> Field:
    """Gamma_t * u0 (NONE), (Gamma - Gamma*)_t * u0 (ODD) or (Gamma + Gamma*)_t * u0 (EVEN)."""
    if not t > 0:
        raise ValueError(f"heat_convolve needs t > 0, got {t}")
    g = u0.grid
    ext = extend(u0.data, g, _EXT[ReflectionKind(refl)])
    return type(u0)(g, _heat_box(ext, g, t)[..., :g.N_nor + 1])


def heat_image(u0: Field, t: float) -> Field:
    """Gamma*_t * u0, the convolution with the reflected source."""
    if not t > 0:
        raise ValueError(f"heat_image needs t > 0, got {t}")
    g = u0.grid
    out = _heat_box(extend(u0.data, g, "image"), g, t)[..., :g.N_nor + 1]
    return type(u0)(g, out)


class HeatApplication:
    """Record of one heat-kernel application."""

    def __init__(self, u0: Field, t: float, reflection: ReflectionKind = ReflectionKind.NONE):
        if not t > 0:
            raise ValueError("t must be positive")
        self.u0 = u0
        self.t = t
        self.reflection = ReflectionKind(reflection)
        self.result = heat_convolve(u0, t, self.reflection)


def heat_decay_profile(u0: Field, times: TimeGrid, p: float, alpha: float,
                       refl: ReflectionKind = ReflectionKind.NONE) -> np.ndarray:
    """t_k^{alpha/2} ||Gamma_t * u0||_{L^p(half space)} over the time grid."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return np.array([t ** (alpha / 2) * lp_norm(heat_convolve(u0, t, refl), p)
                     for t in times.times])


# ---------------------------------------------------------------------------
# tangential transforms


def _tan_axes(grid: HalfSpaceGrid, ndim: int) -> tuple[int, ...]:
    return tuple(range(ndim - grid.n, ndim - 1))


def tan_fft(arr: np.ndarray, grid: HalfSpaceGrid) -> np.ndarray:
    return np.fft.fftn(arr, axes=_tan_axes(grid, arr.ndim))


def tan_ifft(hat: np.ndarray, grid: HalfSpaceGrid) -> np.ndarray:
    return np.fft.ifftn(hat, axes=_tan_axes(grid, hat.ndim)).real


def tan_symbol(grid: HalfSpaceGrid, i: int) -> np.ndarray:
    """i xi_i on the tangential grid (odd-derivative convention), broadcast
    with a trailing normal axis."""
    k = grid.kvec_deriv[i]
    return (1j * k)[..., None]


# ---------------------------------------------------------------------------
# normal product integration

_GL_POINTS = 8


def _kernel(kind: str, x: np.ndarray, y: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Normal kernels for one tangential frequency |xi'| = k (k = 0 regularized)."""
    kpos = np.where(k > 0, k, 1.0)
    zero = k == 0
    if kind == "free":
        s = np.abs(x - y)
        return np.where(zero, s / 2, -np.exp(-kpos * s) / (2 * kpos))
    if kind == "image":
        s = x + y
        return np.where(zero, s / 2, -np.exp(-kpos * s) / (2 * kpos))
    if kind == "dx_free":
        s = x - y
        return np.sign(s) * np.exp(-np.where(zero, 0.0, kpos) * np.abs(s)) / 2
    if kind == "dx_image":
        return np.exp(-np.where(zero, 0.0, kpos) * (x + y)) / 2
    if kind == "causal":
        s = x - y
        return np.where(s > 0, np.exp(-np.where(zero, 0.0, kpos) * np.maximum(s, 0)), 0.0)
    raise ValueError(f"unknown normal kernel {kind!r}")


def _cubic_basis(z: np.ndarray):
    """Gauss points, weights and local cubic Lagrange basis for each cell."""
    gx, gw = np.polynomial.legendre.leggauss(_GL_POINTS)
    ncell = len(z) - 1
    lo = np.clip(np.arange(ncell) - 1, 0, len(z) - 4)
    idx = lo[:, None] + np.arange(4)                     # (cell, 4)
    a, b = z[:-1], z[1:]
    y = (a + b)[:, None] / 2 + (b - a)[:, None] / 2 * gx  # (cell, q)
    w = (b - a)[:, None] / 2 * gw
    nodes = z[idx]                                        # (cell, 4)
    basis = np.ones(y.shape + (4,))
    for m in range(4):
        for l in range(4):
            if l != m:
                basis[..., m] *= (y - nodes[:, l, None]) / (nodes[:, m, None] - nodes[:, l, None])
    return y, w, idx, basis


@lru_cache(maxsize=16)
def _unique_k(grid: HalfSpaceGrid):
    kp = np.round(grid.kperp.ravel(), 12)
    ku, inv = np.unique(kp, return_inverse=True)
    groups = [np.flatnonzero(inv == u) for u in range(len(ku))]
    return ku, groups


@lru_cache(maxsize=64)
def normal_matrices(grid: HalfSpaceGrid, kind: str) -> np.ndarray:
    """Product-integration matrices W[u] with (W g)(z_i) ~ int_0^H K(z_i, y) g(y) dy."""
    z = grid.z
    ku, _ = _unique_k(grid)
    y, w, idx, basis = _cubic_basis(z)
    nz = len(z)
    ncell = nz - 1
    scatter = np.zeros((ncell, 4, nz))
    scatter[np.arange(ncell)[:, None], np.arange(4), idx] = 1.0
    wb = np.einsum("cq,cqa,can->cqn", w, basis, scatter)  # (cell, q, node)
    wb = wb.reshape(ncell * _GL_POINTS, nz)
    yflat = y.ravel()
    out = np.empty((len(ku), nz, nz))
    chunk = max(1, int(4e6 // (nz * yflat.size)))
    for s in range(0, len(ku), chunk):
        kk = ku[s:s + chunk, None, None]
        K = _kernel(kind, z[None, :, None], yflat[None, None, :], kk)
        out[s:s + chunk] = K @ wb
    return out


def normal_apply(hat: np.ndarray, grid: HalfSpaceGrid, kind: str) -> np.ndarray:
    """Apply a normal integral operator mode by mode.

    ``hat`` is tangentially transformed data with trailing dims
    ``tan_shape + (N_nor + 1,)``.
    """
    W = normal_matrices(grid, kind)
    _, groups = _unique_k(grid)
    lead = hat.shape[:hat.ndim - grid.n]
    flat = hat.reshape(lead + (-1, grid.N_nor + 1))
    out = np.empty_like(flat)
    for u, modes in enumerate(groups):
        out[..., modes, :] = flat[..., modes, :] @ W[u].T
    return out.reshape(hat.shape)


# ---------------------------------------------------------------------------
# Newtonian and boundary potentials


def newton_volume(f: ScalarField) -> ScalarField:
    """w(x) = int_{R^n_+} N(x - y) f(y) dy.

    The xi' = 0 mode uses the 1D fundamental solution |x_n - y_n| / 2, which
    differs from the full-space potential by an x-independent constant.
    """
    g = f.grid
    scale = float(np.max(np.abs(f.data)))
    top = float(np.max(np.abs(f.data[..., -2:])))
    if scale > 0 and top > 1e-6 * scale:
        warnings.warn("newton_volume: source does not decay at the truncation height "
                      f"({top:.2e} vs {scale:.2e})", RuntimeWarning, stacklevel=2)
    hat = tan_fft(f.data, g)
    return ScalarField(g, tan_ifft(normal_apply(hat, g, "free"), g))


def poisson_boundary(g_data, grid: HalfSpaceGrid, derivative: bool = True) -> ScalarField:
    """Boundary potentials of tangential data ``g_data`` (shape ``tan_shape``).

    ``derivative=False`` returns N g = int N(x' - y', x_n) g(y') dy' (symbol
    -e^{-|xi'| x_n} / (2|xi'|), mean mode dropped).  ``derivative=True``
    returns the harmonic extension P g with symbol e^{-|xi'| x_n}, which
    equals 2 D_{x_n} N g.
    """
    g_data = np.asarray(g_data, dtype=float).reshape(grid.tan_shape)
    hat = np.fft.fftn(g_data)[..., None]
    k = grid.kperp[..., None]
    z = grid.z
    if derivative:
        sym = np.exp(-k * z)
    else:
        kpos = np.where(k > 0, k, 1.0)
        sym = np.where(k > 0, -np.exp(-kpos * z) / (2 * kpos), 0.0)
    out = np.fft.ifftn(hat * sym, axes=tuple(range(grid.n - 1))).real
    return ScalarField(grid, out)


def riesz_tangential(f: Field, i: int) -> Field:
    """Tangential Riesz transform with symbol -i xi_i / |xi'| (zero at xi' = 0)."""
    g = f.grid
    if not 0 <= i < g.n - 1:
        raise ValueError(f"tangential index must be in [0, {g.n - 2}], got {i}")
    k = g.kperp
    sym = np.where(k > 0, -1j * g.kvec_deriv[i] / np.where(k > 0, k, 1.0), 0.0)
    hat = tan_fft(f.data, g) * sym[..., None]
    return type(f)(g, tan_ifft(hat, g))


def multiplier_decay_check(j: int, t: float, grid: HalfSpaceGrid) -> tuple[float, float]:
    """(L^1 norm of the kernel of Phi_j(xi) e^{-t|xi|^2} on the doubled box,
    e^{-t 4^j / 8})."""
    from .besov import fat_filter

    if not t > 0:
        raise ValueError("t must be positive")
    rho = fat_filter(box_kmag(grid), j) * np.exp(-t * box_kmag(grid) ** 2)
    kern = box_irfft(rho, grid)
    return float(np.sum(np.abs(kern))), math.exp(-t * 4.0**j / 8)
