"""Linear Stokes problem on the half space through its representation formula.

The homogeneous part is v = G(t) u0 with the Green tensor

    G_ij = delta_ij (Gamma - Gamma*) + 4 (1 - delta_jn) D_{x_j} int_0^{x_n}
           int D_{x_i} N(x - z) Gamma(z - y*, t) dz,

evaluated as an odd-reflected heat flow plus a correction: the image heat
flow b = Gamma* u0 is pushed through the Newtonian x_i-derivative restricted
to 0 < z_n < x_n, one tangential frequency at a time.  The forced part is
the Duhamel integral of G(t - tau) applied to the projected forcing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import kernels
from .grid import (HalfSpaceGrid, ScalarField, SymTensorField, TimeGrid, Trajectory,
                   VectorField, array_lp_norm, laplacian, lp_norm, normal_derivative,
                   partial)
from .helmholtz import project_div_form

__all__ = [
    "StokesProblem",
    "StokesSolution",
    "GradedRule",
    "SampledForcing",
    "PowerForcing",
    "forcing_weighted_norm",
    "theorem_lp_ratio",
    "theorem_besov_ratio",
    "green_tensor_apply",
    "pressure",
    "solve_homogeneous",
    "duhamel_apply",
    "solve_stokes",
    "divergence_residual",
    "trace_residual",
    "momentum_residual",
    "stream_velocity",
]

DIV_TOL = 1e-8
TRACE_TOL = 1e-8


# ---------------------------------------------------------------------------
# diagnostics


def divergence_residual(u: VectorField) -> float:
    """||div u||_2 / ||grad u||_2 (0 for u = 0)."""
    g = u.grid
    div = sum(partial(u.data[i], g, i) for i in range(g.n))
    grad = np.stack([partial(u.data[i], g, m) for i in range(g.n) for m in range(g.n)])
    den = array_lp_norm(np.sqrt(np.sum(grad**2, axis=0)), g.weights, 2)
    if den == 0:
        return 0.0
    return array_lp_norm(np.abs(div), g.weights, 2) / den


def trace_residual(u: VectorField) -> float:
    """max |u(x', 0)| / max |u|."""
    scale = float(np.max(np.abs(u.data)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(u.data[..., 0]))) / scale


def stream_velocity(potential: np.ndarray, grid: HalfSpaceGrid) -> VectorField:
    """Discretely divergence-free velocity from a stream function (n = 2,
    shape ``grid.shape``) or a vector potential (n = 3, shape (2,) +
    ``grid.shape``, third component taken as zero).

    The potential is pinned so the discrete normal derivative vanishes on
    the wall; the velocity then has an exactly zero trace and the discrete
    divergence cancels to roundoff.
    """
    g = grid
    A = np.array(potential, dtype=float).reshape((-1,) + g.shape)
    if A.shape[0] != g.n - 1:
        raise ValueError(f"expected {g.n - 1} potential components")
    w = g.Dz[0]
    A[..., 0] = 0.0
    A[..., 1] = -(A[..., 2:7] @ w[2:7]) / w[1]
    dz = normal_derivative(A, g)
    dz[..., 0] = 0.0
    if g.n == 2:
        psi = A[0]
        u = np.stack([dz[0], -partial(psi, g, 0)])
    else:
        u = np.stack([-dz[1], dz[0], partial(A[1], g, 0) - partial(A[0], g, 1)])
    return VectorField(g, u)


# ---------------------------------------------------------------------------
# problem types


@dataclass(frozen=True)
class GradedRule:
    """Composite 2-point Gauss rule on geometric panels shrinking by
    ``ratio`` toward the right end of each interval."""

    nodes: int = 24
    ratio: float = 0.7

    def __post_init__(self):
        if self.nodes < 8:
            raise ValueError(f"graded rule needs at least 8 nodes, got {self.nodes}")
        if self.nodes % 2:
            raise ValueError("node count must be even (2 per panel)")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")

    def refined(self) -> "GradedRule":
        return GradedRule(2 * self.nodes, math.sqrt(self.ratio))

    def points(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        if not b > a:
            raise ValueError("empty quadrature interval")
        m = self.nodes // 2
        widths = self.ratio ** np.arange(m)
        widths *= (b - a) / widths.sum()
        edges = a + np.concatenate([[0.0], np.cumsum(widths)])
        edges[-1] = b
        gx = np.array([-1, 1]) / math.sqrt(3)
        mid = (edges[:-1] + edges[1:]) / 2
        half = np.diff(edges) / 2
        tau = (mid[:, None] + half[:, None] * gx).ravel()
        w = np.repeat(half, 2)
        return tau, w

    def points_two_sided(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Graded toward both ends; used where the integrand is also singular at ``a``."""
        mid = (a + b) / 2
        tr, wr = self.points(mid, b)
        return np.concatenate([a + b - tr[::-1], tr]), np.concatenate([wr[::-1], wr])


ForcingProvider = Callable[[float], SymTensorField]


class SampledForcing:
    """Forcing known at trajectory samples, with projections cached.

    Pf is interpolated by a cubic spline in log tau between samples and
    linearly between tau = 0 (the ``initial`` tensor) and the first sample.
    """

    def __init__(self, times: Sequence[float], tensors: Sequence[SymTensorField],
                 initial: SymTensorField | None = None):
        if len(times) != len(tensors) or len(times) < 2:
            raise ValueError("need at least two forcing samples")
        self.grid = tensors[0].grid
        self.times = np.asarray(times, dtype=float)
        self._tensors = list(tensors)
        proj = np.stack([project_div_form(F).Pf.data for F in tensors])
        self._spline = CubicSpline(np.log(self.times), proj, axis=0)
        self._first = proj[0]
        self._zero = (project_div_form(initial).Pf.data if initial is not None
                      else np.zeros_like(proj[0]))

    def __call__(self, tau: float) -> SymTensorField:
        k = int(np.argmin(np.abs(self.times - tau)))
        return self._tensors[k]

    def projected(self, tau: float) -> VectorField:
        if tau < self.times[0]:
            s = tau / self.times[0]
            data = (1 - s) * self._zero + s * self._first
        else:
            data = self._spline(math.log(min(tau, self.times[-1])))
        return VectorField(self.grid, data)


class PowerForcing:
    """F(tau) = tau^{-weight} F_hat; the projection is computed once."""

    def __init__(self, F_hat: SymTensorField, weight: float = 0.0):
        self.F_hat = F_hat
        self.weight = float(weight)
        self.grid = F_hat.grid
        self._Pf = project_div_form(F_hat).Pf.data

    def __call__(self, tau: float) -> SymTensorField:
        return SymTensorField(self.grid, tau ** -self.weight * self.F_hat.data)

    def projected(self, tau: float) -> VectorField:
        return VectorField(self.grid, tau ** -self.weight * self._Pf)


def _projected(provider, tau: float) -> VectorField:
    if hasattr(provider, "projected"):
        return provider.projected(tau)
    return project_div_form(provider(tau)).Pf


@dataclass
class StokesProblem:
    u0: VectorField
    forcing: ForcingProvider | None = None
    time_grid: TimeGrid = field(default_factory=TimeGrid)
    rule: GradedRule = field(default_factory=GradedRule)

    def __post_init__(self):
        if self.u0.ncomp != self.u0.grid.n:
            raise ValueError("u0 must be a vector field")
        div = divergence_residual(self.u0)
        if div > DIV_TOL:
            raise ValueError(f"u0 is not divergence free (relative {div:.2e})")
        tr = trace_residual(self.u0)
        if tr > TRACE_TOL:
            raise ValueError(f"u0 has a nonzero boundary trace (relative {tr:.2e})")

    @property
    def grid(self) -> HalfSpaceGrid:
        return self.u0.grid


@dataclass
class StokesSolution:
    velocity: Trajectory
    pressure: Trajectory | None = None
    diagnostics: list = field(default_factory=list)

    def max_residuals(self) -> dict:
        if not self.diagnostics:
            return {"trace": 0.0, "divergence": 0.0}
        return {"trace": max(d["trace"] for d in self.diagnostics),
                "divergence": max(d["divergence"] for d in self.diagnostics)}


def _diagnose(t: float, u: VectorField) -> dict:
    return {"t": t, "trace": trace_residual(u), "divergence": divergence_residual(u)}


# ---------------------------------------------------------------------------
# homogeneous part


def green_tensor_apply(u0: VectorField, t: float) -> VectorField:
    """v(t) = int G(x, y, t) u0(y) dy."""
    if not t > 0:
        raise ValueError(f"green_tensor_apply needs t > 0, got {t}")
    g = u0.grid
    n = g.n
    odd = kernels.heat_convolve(u0, t, kernels.ReflectionKind.ODD).data
    b = kernels.heat_image(u0, t).data
    bhat = kernels.tan_fft(b[:n - 1], g)
    D = [kernels.tan_symbol(g, a) for a in range(n - 1)]
    # sum_j D_j int_0^{x_n} e^{-k(x_n - z)} b_j(z) dz
    s = kernels.normal_apply(sum(D[j] * bhat[j] for j in range(n - 1)), g, "causal")
    k = g.kperp[..., None]
    inv2k = np.where(k > 0, 1 / (2 * np.where(k > 0, k, 1.0)), 0.0)
    corr = [-4 * D[i] * inv2k * s for i in range(n - 1)] + [2 * s]
    corr = kernels.tan_ifft(np.stack(corr), g)
    return VectorField(g, odd + corr)


def pressure(u0: VectorField, t: float) -> ScalarField:
    """Pressure of the homogeneous flow at time t (defined up to a constant):
    pi = 4 sum_b D_b P[b_b(0) / 2 - D_n b_b(0) / (2|xi'|)], with b = Gamma* u0
    and P the harmonic extension of wall data."""
    if not t > 0:
        raise ValueError(f"pressure needs t > 0, got {t}")
    g = u0.grid
    n = g.n
    b = kernels.heat_image(u0, t).data[:n - 1]
    b0 = kernels.tan_fft(b, g)[..., 0]
    db0 = kernels.tan_fft(normal_derivative(b, g), g)[..., 0]
    k = g.kperp
    inv2k = np.where(k > 0, 1 / (2 * np.where(k > 0, k, 1.0)), 0.0)
    wall = sum(1j * g.kvec_deriv[j] * (b0[j] / 2 - inv2k * db0[j]) for j in range(n - 1))
    hat = 4 * wall[..., None] * np.exp(-k[..., None] * g.z)
    return ScalarField(g, kernels.tan_ifft(hat, g))


def solve_homogeneous(prob: StokesProblem, with_pressure: bool = False) -> StokesSolution:
    if prob.forcing is not None:
        raise ValueError("solve_homogeneous expects an unforced problem")
    times = prob.time_grid.times
    vel = [green_tensor_apply(prob.u0, t) for t in times]
    pres = (Trajectory(prob.time_grid, [pressure(prob.u0, t) for t in times])
            if with_pressure else None)
    return StokesSolution(Trajectory(prob.time_grid, vel), pres,
                          [_diagnose(t, v) for t, v in zip(times, vel)])


def momentum_residual(u0: VectorField, t: float, ratio: float) -> float:
    """Relative interior residual of v_t - Delta v + grad pi at time t, with
    v_t from the three-point rule on t / ratio, t, t * ratio."""
    g = u0.grid
    ts = (t / ratio, t, t * ratio)
    v = [green_tensor_apply(u0, s).data for s in ts]
    h1, h2 = ts[1] - ts[0], ts[2] - ts[1]
    vt = (-h2 / (h1 * (h1 + h2)) * v[0] + (h2 - h1) / (h1 * h2) * v[1]
          + h1 / (h2 * (h1 + h2)) * v[2])
    lap = laplacian(VectorField(g, v[1])).data
    p = pressure(u0, t).data[0]
    gp = np.stack([partial(p, g, i) for i in range(g.n)])
    res = vt - lap + gp
    inner = slice(3, -3)
    w = g.weights[..., inner]
    num = array_lp_norm(np.sqrt(np.sum(res[..., inner] ** 2, axis=0)), w, 2)
    den = array_lp_norm(np.sqrt(np.sum(lap[..., inner] ** 2, axis=0)), w, 2)
    return num / den if den > 0 else 0.0


# ---------------------------------------------------------------------------
# forced part


def duhamel_apply(forcing: ForcingProvider, t: float, rule: GradedRule | None = None,
                  grid: HalfSpaceGrid | None = None) -> VectorField:
    """V(t) = int_0^t G(t - tau) Pf(tau) dtau with a graded rule on (0, t)."""
    rule = rule or GradedRule()
    if not t > 0:
        raise ValueError("duhamel_apply needs t > 0")
    taus, ws = rule.points(0.0, t)
    out = None
    for tau, w in zip(taus, ws):
        term = green_tensor_apply(_projected(forcing, tau), t - tau).data * w
        out = term if out is None else out + term
    return VectorField(grid or _projected(forcing, taus[0]).grid, out)


def _interval(forcing, a: float, b: float, rule: GradedRule) -> np.ndarray:
    # the forcing may be singular at tau = 0, so the first interval is graded at both ends
    taus, ws = rule.points_two_sided(a, b) if a == 0 else rule.points(a, b)
    return sum(w * green_tensor_apply(_projected(forcing, tau), b - tau).data
               for tau, w in zip(taus, ws))


def solve_stokes(prob: StokesProblem) -> StokesSolution:
    """u = v + V at every sample time.

    V is accumulated interval by interval:
    V(t_{k+1}) = G(t_{k+1} - t_k) V(t_k) + int_{t_k}^{t_{k+1}} G(t_{k+1} - tau) Pf(tau),
    which is the Duhamel integral split at the sample times.
    """
    g = prob.grid
    times = prob.time_grid.times
    vel = []
    V = None
    prev = 0.0
    for t in times:
        v = green_tensor_apply(prob.u0, t).data
        if prob.forcing is not None:
            piece = _interval(prob.forcing, prev, t, prob.rule)
            V = piece if V is None else green_tensor_apply(VectorField(g, V), t - prev).data + piece
            v = v + V
        vel.append(VectorField(g, v))
        prev = t
    return StokesSolution(Trajectory(prob.time_grid, vel), None,
                          [_diagnose(t, u) for t, u in zip(times, vel)])


# ---------------------------------------------------------------------------
# measured estimate ratios


def forcing_weighted_norm(forcing, times: Sequence[float], weight: float, norm) -> float:
    """sup over ``times`` of t^weight * norm(F(t))."""
    return max(t ** weight * norm(forcing(t)) for t in times)


def theorem_lp_ratio(sol: StokesSolution, u0: VectorField, forcing, alpha: float,
                     p: float, p1: float) -> dict:
    """||u||_{L^inf_{alpha/2} L^p} against ||u0||_{B^{-alpha}_{p,inf}} + ||F||_{L^inf_w L^p1}
    with w = alpha/2 + 1/2 - n/2 (1/p1 - 1/p)."""
    from .besov import BesovParams, besov_norm
    from .grid import weighted_sup_norm

    n = u0.grid.n
    if not (1 < p1 <= p and alpha > 0 and -1 + alpha < n / p1 - n / p < 1):
        raise ValueError(f"exponents outside the admissible range: alpha={alpha}, p={p}, p1={p1}")
    w = alpha / 2 + 0.5 - n / 2 * (1 / p1 - 1 / p)
    lhs = weighted_sup_norm(sol.velocity, alpha / 2, p)
    rep = besov_norm(u0, BesovParams(-alpha, p))
    f_norm = 0.0 if forcing is None else forcing_weighted_norm(
        forcing, sol.velocity.time_grid.times, w, lambda F: lp_norm(F, p1))
    rhs = rep.value + f_norm
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else math.inf,
            "weight": w, "truncated": rep.truncated}


def theorem_besov_ratio(sol: StokesSolution, u0: VectorField, forcing, alpha: float,
                        p: float, p1: float) -> dict:
    """sup_t ||u(t)||_{B^alpha_{p,inf}} against ||u0||_{B^alpha_{p,inf}} + ||F||_{L^inf_w B^alpha_{p1,inf}}
    with w = 1/2 - n/(2 p1) + n/(2 p)."""
    from .besov import BesovParams, besov_norm

    n = u0.grid.n
    if not (0 < alpha < 2 and 1 + (n - 1) / p < n / p1 < 1 + n / p):
        raise ValueError(f"exponents outside the admissible range: alpha={alpha}, p={p}, p1={p1}")
    w = 0.5 - n / (2 * p1) + n / (2 * p)
    par = BesovParams(alpha, p)
    reps = [besov_norm(u, par) for u in sol.velocity.fields]
    lhs = max(r.value for r in reps)
    rep0 = besov_norm(u0, par)
    f_norm = 0.0 if forcing is None else forcing_weighted_norm(
        forcing, sol.velocity.time_grid.times, w,
        lambda F: besov_norm(F, BesovParams(alpha, p1)).value)
    rhs = rep0.value + f_norm
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else math.inf,
            "weight": w, "truncated": rep0.truncated or any(r.truncated for r in reps)}
