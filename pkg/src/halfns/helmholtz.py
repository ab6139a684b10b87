"""Helmholtz projection of divergence-form forcing on the half space.

For f = div F with F symmetric and F = 0 on x_n = 0, the projection is
again in divergence form, Pf = div F', with

    F'_{nm} = F_{nm} - delta_{nm} F_{nn}
    F'_{bg} = F_{bg} - delta_{bg} F_{nn}
              + D_g ( sum_q int D_{y_q}N+ F_{bq} + int D_{y_n}N+ F_{nb}
                      - int D_{y_b}N+ F_{nn} )
    F'_{bn} = - sum_g D_g int D_{x_n}N+ F_{bg} + D_b int D_{x_n}N+ F_{nn}
              - F_{bn} + 2 sum_g D_g int D_{x_g}N- F_{bn}

where b, g run over tangential indices, N+- = N(x - y) +- N(x - y*), and the
divergence contracts the first index: (Pf)_k = sum_m D_m F'_{mk}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .besov import BesovParams, besov_norm
from .grid import (Field, SymTensorField, TensorField, VectorField, array_lp_norm,
                   lp_norm, partial)

__all__ = [
    "ProjectedForcing",
    "project_div_form",
    "div_form",
    "projection_norm_check",
]

BOUNDARY_TOL = 1e-8


def div_form(F: Field) -> VectorField:
    """f_k = sum_m D_m F_{mk} for a symmetric or general tensor field."""
    g = F.grid
    full = F.full()
    return VectorField(g, np.stack([sum(partial(full[m, k], g, m) for m in range(g.n))
                                    for k in range(g.n)]))


@dataclass(frozen=True, eq=False)
class ProjectedForcing:
    Fprime: TensorField
    source: SymTensorField
    div_residual: float
    trace_residual: float
    boundary_flag: bool = False

    @property
    def Pf(self) -> VectorField:
        return div_form(self.Fprime)


class _Potentials:
    """N+- potentials of tangentially transformed data."""

    def __init__(self, grid):
        self.g = grid

    def _apply(self, hat, *kinds):
        out = 0
        for sign, kind in kinds:
            out = out + sign * kernels.normal_apply(hat, self.g, kind)
        return out

    def plus(self, hat):            # int N+ h
        return self._apply(hat, (1, "free"), (1, "image"))

    def minus(self, hat):           # int N- h
        return self._apply(hat, (1, "free"), (-1, "image"))

    def dxn_plus(self, hat):        # int D_{x_n} N+ h
        return self._apply(hat, (1, "dx_free"), (1, "dx_image"))

    def dyn_plus(self, hat):        # int D_{y_n} N+ h
        return self._apply(hat, (-1, "dx_free"), (1, "dx_image"))


def _relative_divergence(Pf: VectorField) -> float:
    """||div Pf||_2 / ||grad Pf||_2 away from the two wall rows."""
    g = Pf.grid
    inner = slice(2, -2)
    div = sum(partial(Pf.data[i], g, i) for i in range(g.n))
    grad = np.stack([partial(Pf.data[i], g, m) for i in range(g.n) for m in range(g.n)])
    w = g.weights[..., inner]
    num = array_lp_norm(np.abs(div[..., inner]), w, 2)
    den = array_lp_norm(np.sqrt(np.sum(grad[..., inner] ** 2, axis=0)), w, 2)
    return num / den if den > 0 else 0.0


def project_div_form(F) -> ProjectedForcing:
    """Compute F' with Pf = div F'.

    ``F`` is a SymTensorField, or an (n, n, ...) array which must be
    symmetric.
    """
    if isinstance(F, np.ndarray):
        raise TypeError("pass a SymTensorField (use SymTensorField.from_full)")
    if not isinstance(F, SymTensorField):
        raise TypeError(f"expected SymTensorField, got {type(F).__name__}")
    g = F.grid
    n = g.n
    nn = n - 1
    tang = range(nn)
    full = F.full()
    scale = float(np.max(np.abs(full)))
    edge = float(np.max(np.abs(full[..., 0])))
    flag = scale > 0 and edge > BOUNDARY_TOL * scale
    if flag:
        warnings.warn(f"forcing tensor does not vanish on the wall ({edge:.2e} vs "
                      f"{scale:.2e}); projection formulas assume it does",
                      RuntimeWarning, stacklevel=2)

    hat = kernels.tan_fft(full, g)
    D = [kernels.tan_symbol(g, a) for a in tang]
    pot = _Potentials(g)
    out = np.zeros((n, n) + hat.shape[2:], dtype=complex)

    for m in range(n):
        out[nn, m] = hat[nn, m]
    out[nn, nn] = 0.0

    Np_nn = pot.plus(hat[nn, nn])
    dxn_nn = pot.dxn_plus(hat[nn, nn])
    for b in tang:
        # int D_{y_q}N+ h = -D_q int N+ h for tangential q
        inner = sum(-D[q] * pot.plus(hat[b, q]) for q in tang)
        inner = inner + 2 * pot.dyn_plus(hat[b, nn]) + D[b] * Np_nn
        for c in tang:
            out[b, c] = hat[b, c] + D[c] * inner
            if b == c:
                out[b, c] -= hat[nn, nn]
        Nm_bn = pot.minus(hat[b, nn])
        col = sum(-D[c] * pot.dxn_plus(hat[b, c]) for c in tang)
        col = col + D[b] * dxn_nn - hat[b, nn]
        col = col + 2 * sum(D[c] ** 2 for c in tang) * Nm_bn
        out[b, nn] = col

    Fp = TensorField.from_full(g, kernels.tan_ifft(out, g))
    Pf = div_form(Fp)
    trace = float(np.max(np.abs(Pf.data[nn, ..., 0])))
    return ProjectedForcing(Fp, F, _relative_divergence(Pf),
                            trace / scale if scale > 0 else 0.0, flag)


def projection_norm_check(F: SymTensorField, alpha: float, p: float) -> float:
    """||F'|| / ||F|| in B^alpha_{p,inf} (alpha > 0) or L^p (alpha = 0)."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if not np.any(F.data):
        return 0.0
    Fp = project_div_form(F).Fprime
    if alpha == 0:
        return lp_norm(Fp, p) / lp_norm(F, p)
    params = BesovParams(alpha, p)
    return besov_norm(Fp, params).value / besov_norm(F, params).value
