"""Homogeneous Besov norms through a dyadic Littlewood-Paley filter bank.

Half-space data are zero-extended across x_n = 0 onto the doubled periodic
box; band pieces and their L^p norms live on that full box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .grid import Field, HalfSpaceGrid, TimeGrid, array_lp_norm, lp_norm, pointwise_norm

__all__ = [
    "bump",
    "band_filter",
    "fat_filter",
    "DyadicFilterBank",
    "BesovParams",
    "NormReport",
    "BoxField",
    "dyadic_project",
    "besov_norm",
    "heat_characterization",
    "product_estimate_check",
    "embedding_check",
]


def bump(r: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - r^2)) on |r| < 1, zero elsewhere."""
    r = np.asarray(r, dtype=float)
    inside = np.abs(r) < 1
    out = np.zeros_like(r)
    out[inside] = np.exp(1 - 1 / (1 - r[inside] ** 2))
    return out


def band_filter(kmag: np.ndarray, j: int) -> np.ndarray:
    """phi_j(xi): the bump in log2|xi| centred at j, normalized by the two
    overlapping neighbours so that sum_j phi_j = 1 for every xi != 0."""
    kmag = np.asarray(kmag, dtype=float)
    out = np.zeros_like(kmag)
    pos = kmag > 0
    lk = np.log2(kmag[pos])
    lo = np.floor(lk)
    # the two bands whose support contains lk are lo and lo + 1
    total = bump(lk - lo) + bump(lk - lo - 1)
    out[pos] = bump(lk - j) / total
    return out


def fat_filter(kmag: np.ndarray, j: int) -> np.ndarray:
    """Phi_j = phi_{j-1} + phi_j + phi_{j+1}."""
    return sum(band_filter(kmag, i) for i in (j - 1, j, j + 1))


@dataclass(frozen=True)
class DyadicFilterBank:
    grid: HalfSpaceGrid

    @property
    def j_range(self) -> tuple[int, int]:
        return self.grid.band_range()

    @property
    def bands(self) -> range:
        lo, hi = self.j_range
        return range(lo, hi + 1)

    def filter(self, j: int) -> np.ndarray:
        return band_filter(kernels.box_kmag(self.grid), j)

    def fat(self, j: int) -> np.ndarray:
        return fat_filter(kernels.box_kmag(self.grid), j)


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float
    q: float = math.inf
    extension: str = "zero"

    def __post_init__(self):
        if not (self.p >= 1):
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not (self.q == math.inf or self.q >= 1):
            raise ValueError(f"q must be >= 1 or inf, got {self.q}")
        if self.extension != "zero":
            raise ValueError("only the zero extension is supported")


@dataclass
class NormReport:
    value: float
    bands: dict = field(default_factory=dict)
    argmax: int | None = None
    truncated: bool = False
    params: BesovParams | None = None

    def as_dict(self) -> dict:
        return {"value": self.value,
                "bands": {str(j): v for j, v in self.bands.items()},
                "argmax": self.argmax, "truncated": self.truncated,
                "s": self.params.s if self.params else None,
                "p": self.params.p if self.params else None,
                "q": self.params.q if self.params else None}


@dataclass(frozen=True, eq=False)
class BoxField:
    """Samples on the doubled periodic box [0, L)^{n-1} x [-H, H)."""

    grid: HalfSpaceGrid
    data: np.ndarray

    def magnitude(self) -> np.ndarray:
        return pointwise_norm(self.data)

    def lp_norm(self, p: float) -> float:
        return array_lp_norm(self.magnitude(), self.grid.box_cell_volume, p)


def _components(f: Field) -> np.ndarray:
    # symmetric tensors count off-diagonal entries twice (Frobenius)
    if hasattr(f, "full"):
        return f.full().reshape((-1,) + f.grid.shape)
    return f.data


def _zero_ext_hat(f: Field) -> np.ndarray:
    g = f.grid
    return kernels.box_rfft(kernels.extend(_components(f), g, "zero"), g)


def dyadic_project(f: Field, j: int) -> BoxField:
    """Band piece f~ * phi_j of the zero extension."""
    g = f.grid
    lo, hi = g.band_range()
    if not lo <= j <= hi:
        raise ValueError(f"band {j} outside resolvable range [{lo}, {hi}]")
    hat = _zero_ext_hat(f) * band_filter(kernels.box_kmag(g), j)
    return BoxField(g, kernels.box_irfft(hat, g))


def aggregate(contrib: Sequence[float], q: float) -> float:
    c = np.asarray(list(contrib), dtype=float)
    if c.size == 0:
        return 0.0
    top = float(np.max(c))
    if q == math.inf or top == 0.0:
        return top
    return top * float(np.sum((c / top) ** q) ** (1 / q))


def besov_norm(f: Field, params: BesovParams) -> NormReport:
    """sup_j 2^{js} ||f~ * phi_j||_p (l^q sum for finite q), ascending j."""
    g = f.grid
    lo, hi = g.band_range()
    hat = _zero_ext_hat(f)
    kmag = kernels.box_kmag(g)
    bands = {}
    for j in range(lo, hi + 1):
        piece = kernels.box_irfft(hat * band_filter(kmag, j), g)
        mag = pointwise_norm(piece)
        bands[j] = 2.0 ** (j * params.s) * array_lp_norm(mag, g.box_cell_volume, params.p)
    value = aggregate(bands.values(), params.q)
    if value == 0.0:
        return NormReport(0.0, bands, None, False, params)
    argmax = max(bands, key=bands.get)
    edge = max(bands[lo], bands[hi])
    truncated = argmax in (lo, hi) or edge > 0.1 * value
    return NormReport(value, bands, argmax, truncated, params)


def heat_characterization(f: Field, alpha: float, p: float,
                          times: TimeGrid | None = None) -> float:
    """sup_t t^{alpha/2} ||Gamma_t * f~||_{L^p(box)}: a heat-flow estimate of
    the B^{-alpha}_{p,inf} size of ``f``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    g = f.grid
    times = times or TimeGrid()
    hat = _zero_ext_hat(f)
    k2 = kernels.box_kmag(g) ** 2
    best = 0.0
    for t in times.times:
        piece = kernels.box_irfft(hat * np.exp(-t * k2), g)
        mag = pointwise_norm(piece)
        best = max(best, t ** (alpha / 2) * array_lp_norm(mag, g.box_cell_volume, p))
    return best


def _product(f1: Field, f2: Field) -> Field:
    if f1.ncomp != 1 and f2.ncomp != 1:
        raise ValueError("product estimate needs at least one scalar factor")
    return type(f1 if f1.ncomp > 1 else f2)(f1.grid, f1.data * f2.data)


def product_estimate_check(f1: Field, f2: Field, beta: float, p: float,
                           s1: float, r1: float, s2: float, r2: float,
                           q: float = math.inf) -> tuple[float, float]:
    """(||f1 f2||_{B^beta_{pq}},
    ||f1||_{B^beta_{s1 q}} ||f2||_{r1} + ||f1||_{s2} ||f2||_{B^beta_{r2 q}})."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    for r, s in ((r1, s1), (r2, s2)):
        if abs(1 / r + 1 / s - 1 / p) > 1e-12:
            raise ValueError(f"exponents violate 1/r + 1/s = 1/p: r={r}, s={s}, p={p}")
    lhs = besov_norm(_product(f1, f2), BesovParams(beta, p, q)).value
    rhs = (besov_norm(f1, BesovParams(beta, s1, q)).value * lp_norm(f2, r1)
           + lp_norm(f1, s2) * besov_norm(f2, BesovParams(beta, r2, q)).value)
    return lhs, rhs


def embedding_check(f: Field, p: float, p0: float) -> tuple[float, float]:
    """Critical norms ||f||_{B^{-1+n/p}_{p,inf}} and ||f||_{B^{-1+n/p0}_{p0,inf}}."""
    if not p < p0:
        raise ValueError("embedding check needs p < p0")
    n = f.grid.n
    return (besov_norm(f, BesovParams(-1 + n / p, p)).value,
            besov_norm(f, BesovParams(-1 + n / p0, p0)).value)
