"""Discretized half-space, sampled fields and the norm primitives.

The tangential directions are periodic with period ``L`` and sampled at
``N_tan`` points per axis.  The normal direction is the interval ``[0, H]``
with ``N_nor`` cells (``N_nor + 1`` nodes, both endpoints included).  Arrays
are laid out with the tangential axes first and the normal axis last; field
components form a leading axis.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "HalfSpaceGrid",
    "Field",
    "ScalarField",
    "VectorField",
    "SymTensorField",
    "TensorField",
    "TimeGrid",
    "Trajectory",
    "tangential_derivative",
    "normal_derivative",
    "partial",
    "divergence",
    "gradient",
    "laplacian",
    "boundary_trace",
    "lp_norm",
    "array_lp_norm",
    "pointwise_norm",
    "weighted_sup_norm",
    "save_field",
    "load_field",
]


def fornberg_weights(x0: float, nodes: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights at ``x0`` for derivatives up to ``order``.

    Returns an array of shape (order + 1, len(nodes)).
    """
    nodes = np.asarray(nodes, dtype=float)
    m = len(nodes)
    c = np.zeros((order + 1, m))
    c1 = 1.0
    c4 = nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, m):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _fd_matrix(z: np.ndarray, order: int, width: int) -> np.ndarray:
    """Dense banded differentiation matrix on the nodes ``z``.

    Interior rows use a centered stencil of ``width`` points; rows near the
    ends shift the stencil inside the interval (one-sided).
    """
    n = len(z)
    D = np.zeros((n, n))
    half = width // 2
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        idx = np.arange(lo, lo + width)
        D[i, idx] = fornberg_weights(z[i], z[idx], order)[order]
    return D


@dataclass(frozen=True)
class HalfSpaceGrid:
    """Periodic tangential box times a truncated normal interval."""

    n: int = 2
    L: float = 2 * math.pi
    N_tan: int = 128
    H: float = 2 * math.pi
    N_nor: int = 96
    graded: bool = False

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.n}")
        if self.N_tan < 8 or self.N_nor < 8:
            raise ValueError("N_tan and N_nor must be >= 8")
        if self.N_tan & (self.N_tan - 1):
            raise ValueError(f"N_tan must be a power of two, got {self.N_tan}")
        if self.H < self.L * (1 - 1e-12):
            raise ValueError(f"H must be >= L (H={self.H}, L={self.L})")

    # -- geometry ---------------------------------------------------------
    @property
    def dx(self) -> float:
        return self.L / self.N_tan

    @property
    def dz(self) -> float:
        return self.H / self.N_nor

    @property
    def tan_shape(self) -> tuple[int, ...]:
        return (self.N_tan,) * (self.n - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.tan_shape + (self.N_nor + 1,)

    @cached_property
    def x_tan(self) -> np.ndarray:
        return np.arange(self.N_tan) * self.dx

    @cached_property
    def z(self) -> np.ndarray:
        s = np.arange(self.N_nor + 1) / self.N_nor
        return self.H * (s**2 if self.graded else s)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays (x_1, ..., x_n)."""
        axes = [self.x_tan] * (self.n - 1) + [self.z]
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))

    def scaled(self, lam: float) -> "HalfSpaceGrid":
        """Grid for the rescaled problem x -> x / lam."""
        return HalfSpaceGrid(self.n, self.L / lam, self.N_tan, self.H / lam,
                             self.N_nor, self.graded)

    def refined(self, factor: int = 2) -> "HalfSpaceGrid":
        return HalfSpaceGrid(self.n, self.L, self.N_tan * factor, self.H,
                             self.N_nor * factor, self.graded)

    # -- spectral data ----------------------------------------------------
    @cached_property
    def kvec(self) -> tuple[np.ndarray, ...]:
        """Tangential wavenumbers, broadcastable over ``tan_shape``."""
        k = 2 * np.pi * np.fft.fftfreq(self.N_tan, d=self.dx)
        out = []
        for a in range(self.n - 1):
            shp = [1] * (self.n - 1)
            shp[a] = self.N_tan
            out.append(k.reshape(shp))
        return tuple(out)

    @cached_property
    def kvec_deriv(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers for odd derivatives (Nyquist mode zeroed)."""
        k = 2 * np.pi * np.fft.fftfreq(self.N_tan, d=self.dx)
        k[self.N_tan // 2] = 0.0
        out = []
        for a in range(self.n - 1):
            shp = [1] * (self.n - 1)
            shp[a] = self.N_tan
            out.append(k.reshape(shp))
        return tuple(out)

    @cached_property
    def kperp(self) -> np.ndarray:
        """|xi'| on the tangential frequency grid."""
        k2 = sum(k**2 for k in self.kvec)
        return np.sqrt(np.broadcast_to(k2, self.tan_shape))

    @cached_property
    def knor_box(self) -> np.ndarray:
        """Normal wavenumbers on the doubled periodic interval [-H, H)."""
        self.require_uniform()
        return 2 * np.pi * np.fft.fftfreq(2 * self.N_nor, d=self.dz)

    @cached_property
    def kmag_box(self) -> np.ndarray:
        """|xi| on the doubled box, shape tan_shape + (2 N_nor,)."""
        k2 = self.kperp[..., None] ** 2 + self.knor_box**2
        return np.sqrt(k2)

    @property
    def box_shape(self) -> tuple[int, ...]:
        return self.tan_shape + (2 * self.N_nor,)

    @property
    def box_cell_volume(self) -> float:
        return self.dx ** (self.n - 1) * self.dz

    def band_range(self) -> tuple[int, int]:
        """Resolvable dyadic bands: 2^j_min >= 2 pi / L, 2^j_max <= pi N_tan / L."""
        j_min = math.ceil(math.log2(2 * math.pi / self.L) - 1e-12)
        j_max = math.floor(math.log2(math.pi * self.N_tan / self.L) + 1e-12)
        return j_min, j_max

    def require_uniform(self):
        if self.graded:
            raise ValueError("operation requires a uniform normal mesh")

    # -- finite differences and quadrature --------------------------------
    @cached_property
    def Dz(self) -> np.ndarray:
        """Sixth-order first derivative along the normal."""
        return _fd_matrix(self.z, 1, 7)

    @cached_property
    def Dzz(self) -> np.ndarray:
        """Sixth-order second derivative along the normal."""
        D = _fd_matrix(self.z, 2, 7)
        # one-sided rows need eight points to keep sixth order
        z = self.z
        m = len(z)
        for i in (0, 1, 2, m - 3, m - 2, m - 1):
            lo = 0 if i < 3 else m - 8
            idx = np.arange(lo, lo + 8)
            D[i] = 0.0
            D[i, idx] = fornberg_weights(z[i], z[idx], 2)[2]
        return D

    @cached_property
    def zweights(self) -> np.ndarray:
        """Trapezoid weights on the (possibly graded) normal nodes."""
        dz = np.diff(self.z)
        w = np.zeros(len(self.z))
        w[:-1] += dz / 2
        w[1:] += dz / 2
        return w

    @cached_property
    def weights(self) -> np.ndarray:
        """Full quadrature weights, broadcastable to ``shape``."""
        shp = (1,) * (self.n - 1) + (len(self.z),)
        return self.dx ** (self.n - 1) * self.zweights.reshape(shp)

    def as_dict(self) -> dict:
        return {"n": self.n, "L": self.L, "N_tan": self.N_tan, "H": self.H,
                "N_nor": self.N_nor, "graded": self.graded}


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a real field on a grid; ``data`` has a leading component axis."""

    grid: HalfSpaceGrid
    data: np.ndarray

    @staticmethod
    def components(n: int) -> int:
        return 1

    @property
    def ncomp(self) -> int:
        return self.components(self.grid.n)

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        expected = (self.ncomp,) + self.grid.shape
        if data.shape != expected:
            if data.shape == self.grid.shape and self.ncomp == 1:
                data = data[None]
            else:
                raise ValueError(f"{type(self).__name__} expects shape {expected}, "
                                 f"got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise FloatingPointError(f"non-finite samples in {type(self).__name__}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, grid: HalfSpaceGrid):
        return cls(grid, np.zeros((cls.components(grid.n),) + grid.shape))

    @classmethod
    def from_function(cls, grid: HalfSpaceGrid, func):
        """Sample ``func(*coords)``; it must return ``ncomp`` arrays (or one)."""
        vals = func(*grid.coords)
        if cls.components(grid.n) == 1 and not isinstance(vals, (list, tuple)):
            vals = [vals]
        arr = np.stack([np.broadcast_to(v, grid.shape) for v in vals]).astype(float)
        return cls(grid, arr)

    def magnitude(self) -> np.ndarray:
        if self.ncomp == 1:
            return np.abs(self.data[0])
        return pointwise_norm(self.data)

    def _like(self, data):
        return type(self)(self.grid, data)

    def __add__(self, other):
        _check_same(self, other)
        return self._like(self.data + other.data)

    def __sub__(self, other):
        _check_same(self, other)
        return self._like(self.data - other.data)

    def __mul__(self, scalar):
        return self._like(self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.data)


def pointwise_norm(arr: np.ndarray, axis: int = 0) -> np.ndarray:
    """Euclidean norm over ``axis``, rescaled so tiny or huge data neither
    underflow nor overflow."""
    scale = np.max(np.abs(arr))
    if scale == 0 or not np.isfinite(scale):
        return np.sqrt(np.sum(arr**2, axis=axis))
    return scale * np.sqrt(np.sum((arr / scale) ** 2, axis=axis))


def _check_same(a: Field, b: Field):
    if type(a) is not type(b):
        raise TypeError(f"cannot combine {type(a).__name__} and {type(b).__name__}")
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


class ScalarField(Field):
    pass


class VectorField(Field):
    @staticmethod
    def components(n: int) -> int:
        return n

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.data[i])

    def outer(self, other: "VectorField | None" = None) -> "SymTensorField":
        """Symmetrized pointwise outer product (u (x) w + w (x) u) / 2."""
        w = self if other is None else other
        n = self.grid.n
        comps = []
        for k, l in sym_pairs(n):
            comps.append(0.5 * (self.data[k] * w.data[l] + w.data[k] * self.data[l]))
        return SymTensorField(self.grid, np.stack(comps))


def sym_pairs(n: int) -> list[tuple[int, int]]:
    """Upper-triangle index pairs in storage order."""
    return [(k, l) for k in range(n) for l in range(k, n)]


class SymTensorField(Field):
    """Symmetric n x n tensor field storing the upper triangle only."""

    @staticmethod
    def components(n: int) -> int:
        return n * (n + 1) // 2

    @classmethod
    def from_full(cls, grid, full: np.ndarray, tol: float = 1e-12):
        """Build from an (n, n, ...) array; raises if it is not symmetric."""
        full = np.asarray(full, dtype=float)
        scale = max(np.max(np.abs(full)), 1e-300)
        if np.max(np.abs(full - np.swapaxes(full, 0, 1))) > tol * scale:
            raise ValueError("tensor field is not symmetric")
        return cls(grid, np.stack([full[k, l] for k, l in sym_pairs(grid.n)]))

    def get(self, k: int, l: int) -> np.ndarray:
        if k > l:
            k, l = l, k
        return self.data[sym_pairs(self.grid.n).index((k, l))]

    def full(self) -> np.ndarray:
        n = self.grid.n
        return np.stack([np.stack([self.get(k, l) for l in range(n)]) for k in range(n)])

    def magnitude(self) -> np.ndarray:
        f = self.full()
        return pointwise_norm(f.reshape((-1,) + f.shape[2:]))


class TensorField(Field):
    """General n x n tensor field, row-major storage of all n^2 entries."""

    @staticmethod
    def components(n: int) -> int:
        return n * n

    @classmethod
    def from_full(cls, grid, full: np.ndarray):
        full = np.asarray(full, dtype=float)
        return cls(grid, full.reshape((grid.n * grid.n,) + full.shape[2:]))

    def get(self, k: int, l: int) -> np.ndarray:
        return self.data[k * self.grid.n + l]

    def full(self) -> np.ndarray:
        n = self.grid.n
        return self.data.reshape((n, n) + self.data.shape[1:])


# ---------------------------------------------------------------------------
# time sampling


@dataclass(frozen=True)
class TimeGrid:
    """Geometric sample times t_k = t_0 r^k."""

    t0: float = 1e-3
    ratio: float = 2 ** 0.25
    count: int = 48

    def __post_init__(self):
        if not (self.t0 > 0 and math.isfinite(self.t0)):
            raise ValueError("t0 must be positive")
        if not self.ratio > 1:
            raise ValueError("ratio must exceed 1")
        if self.count < 1:
            raise ValueError("count must be positive")

    @cached_property
    def times(self) -> np.ndarray:
        t = self.t0 * self.ratio ** np.arange(self.count)
        if not np.all(np.isfinite(t)):
            raise ValueError("time grid overflows")
        return t

    def __len__(self):
        return self.count

    def scaled(self, factor: float) -> "TimeGrid":
        return TimeGrid(self.t0 * factor, self.ratio, self.count)

    def refined(self) -> "TimeGrid":
        """Halve the logarithmic step while covering the same span."""
        return TimeGrid(self.t0, math.sqrt(self.ratio), 2 * self.count - 1)


@dataclass(frozen=True, eq=False)
class Trajectory:
    time_grid: TimeGrid
    fields: tuple

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        if len(self.fields) != len(self.time_grid):
            raise ValueError("one field per sample time is required")
        grids = {f.grid for f in self.fields}
        if len(grids) > 1:
            raise ValueError("trajectory fields must share one grid")

    @property
    def grid(self) -> HalfSpaceGrid:
        return self.fields[0].grid

    @property
    def times(self) -> np.ndarray:
        return self.time_grid.times

    def __len__(self):
        return len(self.fields)

    def __iter__(self):
        return iter(zip(self.times, self.fields))

    def __add__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.time_grid, [a + b for a, b in zip(self.fields, other.fields)])

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.time_grid, [a - b for a, b in zip(self.fields, other.fields)])

    def __mul__(self, s):
        return Trajectory(self.time_grid, [f * s for f in self.fields])

    __rmul__ = __mul__

    def stacked(self) -> np.ndarray:
        return np.stack([f.data for f in self.fields])


# ---------------------------------------------------------------------------
# differential operators


def tangential_derivative(arr: np.ndarray, grid: HalfSpaceGrid, axis: int,
                          order: int = 1) -> np.ndarray:
    """Spectral derivative along tangential ``axis`` of an array with
    trailing dimensions ``grid.shape``."""
    axes = tuple(range(arr.ndim - grid.n, arr.ndim - 1))
    hat = np.fft.fftn(arr, axes=axes)
    k = (grid.kvec_deriv if order % 2 else grid.kvec)[axis]
    mult = (1j * k) ** order
    hat = hat * mult.reshape(mult.shape + (1,))
    return np.fft.ifftn(hat, axes=axes).real


def normal_derivative(arr: np.ndarray, grid: HalfSpaceGrid, order: int = 1) -> np.ndarray:
    D = grid.Dz if order == 1 else grid.Dzz
    return np.einsum("ij,...j->...i", D, arr)


def partial(arr: np.ndarray, grid: HalfSpaceGrid, axis: int) -> np.ndarray:
    if axis == grid.n - 1:
        return normal_derivative(arr, grid)
    return tangential_derivative(arr, grid, axis)


def divergence(f: VectorField) -> ScalarField:
    """Spectral tangential plus sixth-order normal divergence."""
    g = f.grid
    if f.data.shape[0] != g.n:
        raise ValueError("vector field has the wrong number of components")
    out = sum(partial(f.data[i], g, i) for i in range(g.n))
    return ScalarField(g, out)


def gradient(f: ScalarField) -> VectorField:
    g = f.grid
    return VectorField(g, np.stack([partial(f.data[0], g, i) for i in range(g.n)]))


def laplacian(f: Field) -> Field:
    g = f.grid
    out = normal_derivative(f.data, g, 2)
    for a in range(g.n - 1):
        out = out + tangential_derivative(f.data, g, a, order=2)
    return type(f)(g, out)


def boundary_trace(f: Field) -> np.ndarray:
    """The x_n = 0 node row, shape (ncomp,) + tan_shape."""
    return np.array(f.data[..., 0])


# ---------------------------------------------------------------------------
# norms


def _check_p(p: float):
    if not (p == math.inf or p >= 1):
        raise ValueError(f"L^p exponent must be >= 1 or inf, got {p}")


def array_lp_norm(mag: np.ndarray, weights, p: float) -> float:
    """L^p norm of a nonnegative array with quadrature ``weights``.

    ``weights`` may be a scalar (uniform periodic box) or broadcastable array.
    """
    _check_p(p)
    if p == math.inf:
        return float(np.max(mag))
    scale = float(np.max(mag))
    if scale == 0.0:
        return 0.0
    w = np.broadcast_to(weights, mag.shape)
    # pairwise summation of a flattened array is deterministic
    total = np.sum(((mag / scale) ** p * w).ravel())
    return scale * float(total) ** (1.0 / p)


def lp_norm(f: Field, p: float) -> float:
    """Trapezoid-rule L^p norm over the half-space box (max for p = inf)."""
    return array_lp_norm(f.magnitude(), f.grid.weights, p)


def weighted_sup_norm(traj: Trajectory, beta: float, p: float) -> float:
    """max_k t_k^beta ||f(t_k)||_p."""
    vals = [t**beta * lp_norm(f, p) for t, f in traj]
    return float(max(vals)) if vals else 0.0


# ---------------------------------------------------------------------------
# serialization

_HEADER = struct.Struct("<qqqddq")
HEADER_BYTES = 64


def save_field(f: Field, path) -> Path:
    """Write ``path`` (flat little-endian float64 with a 64-byte header)
    and a ``.json`` sidecar with the same metadata."""
    path = Path(path)
    g = f.grid
    head = _HEADER.pack(g.n, g.N_tan, g.N_nor, g.L, g.H, f.data.shape[0])
    head += b"\0" * (HEADER_BYTES - len(head))
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(f.data, dtype="<f8").tobytes())
    meta = dict(g.as_dict(), components=int(f.data.shape[0]), kind=type(f).__name__)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2))
    return path


def load_field(path) -> Field:
    path = Path(path)
    raw = path.read_bytes()
    n, N_tan, N_nor, L, H, ncomp = _HEADER.unpack(raw[:_HEADER.size])
    graded = False
    kind = None
    side = path.with_suffix(path.suffix + ".json")
    if side.exists():
        meta = json.loads(side.read_text())
        graded = bool(meta.get("graded", False))
        kind = meta.get("kind")
    grid = HalfSpaceGrid(n, L, N_tan, H, N_nor, graded)
    data = np.frombuffer(raw[HEADER_BYTES:], dtype="<f8").reshape((ncomp,) + grid.shape)
    cls = {"ScalarField": ScalarField, "VectorField": VectorField,
           "SymTensorField": SymTensorField}.get(kind)
    if cls is None:
        cls = {1: ScalarField, n: VectorField, n * (n + 1) // 2: SymTensorField}[ncomp]
    return cls(grid, data.copy())


def stack_fields(fields: Sequence[Field]) -> np.ndarray:
    return np.stack([f.data for f in fields])
