"""Picard iteration for the half-space Navier-Stokes mild formulation.

u^1 = G(t) u0 and u^{m+1} = G(t) u0 + V[-u^m (x) u^m], where V is the
Duhamel integral of the projected forcing.  Two norms are tracked:

    X   = sup_t t^{1/2 - n/(2 p0)} ||u(t)||_{p0}
    Bes = sup_t ||u(t)||_{B^{-1+n/p}_{p,inf}}

Difference norms are reported relative to the size of u^1, so the stopping
tolerance is independent of the data amplitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .besov import BesovParams, besov_norm
from .grid import (SymTensorField, TimeGrid, Trajectory, VectorField, lp_norm, partial,
                   weighted_sup_norm)
from .stats import slope_regress
from .stokes import (GradedRule, SampledForcing, StokesProblem, solve_homogeneous,
                     solve_stokes, stream_velocity)

__all__ = [
    "SmallnessBudget",
    "IterationState",
    "SmallnessViolated",
    "DecayFit",
    "dealias",
    "nonlinear_forcing",
    "bilinear",
    "x_norm",
    "besov_sup",
    "fit_constants",
    "iterate",
    "contraction_report",
    "uniqueness_probe",
    "decay_fit",
    "weak_residual",
    "test_functions",
]

BLOWUP = 1e6


class SmallnessViolated(RuntimeError):
    """Raised when an iterate norm exceeds BLOWUP times the first one."""

    def __init__(self, message: str, state: "IterationState | None" = None):
        super().__init__(message)
        self.state = state


@dataclass
class SmallnessBudget:
    p0: float = 4.0
    p: float = 1.5
    c1_hat: float = 1.0
    c5_hat: float = 1.0
    c6_hat: float = 1.0
    n: int = 2

    def __post_init__(self):
        if not self.p0 > self.n:
            raise ValueError(f"p0 must exceed n = {self.n}, got {self.p0}")
        if not self.n / 3 < self.p < self.n:
            raise ValueError(f"p must lie in (n/3, n), got {self.p}")
        for name in ("c1_hat", "c5_hat", "c6_hat"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def beta(self) -> float:
        return 0.5 - self.n / (2 * self.p0)

    @property
    def s(self) -> float:
        return -1 + self.n / self.p

    def thresholds(self, N0: float, M0: float) -> dict:
        """Discrete analogues of the smallness conditions on (N0, M0)."""
        return {
            "M0_le_half_inv_c1": M0 <= 1 / (2 * self.c1_hat),
            "N0_lt_M0_over_2c1": N0 < M0 / (2 * self.c1_hat),
            "two_c5_M0_lt_1": 2 * self.c5_hat * M0 < 1,
            "M0_lt_inv_c6": M0 < 1 / self.c6_hat,
        }

    def coupling(self, M0: float) -> float:
        """A with A (c6 - c5) M0 >= c6 M, taking M = M0 (1 when c6 <= c5)."""
        gap = (self.c6_hat - self.c5_hat) * M0
        return max(1.0, self.c6_hat * M0 / gap) if gap > 0 else 1.0


@dataclass
class IterationState:
    m: int = 0
    iterates: list = field(default_factory=list)   # last two trajectories
    norms: list = field(default_factory=list)      # (X, Bes) per iterate
    diffs: list = field(default_factory=list)      # relative (X, Bes) of u^{m+1} - u^m
    ratios: list = field(default_factory=list)
    converged: bool = False
    truncated: list = field(default_factory=list)
    budget: SmallnessBudget | None = None

    @property
    def current(self) -> Trajectory | None:
        return self.iterates[-1] if self.iterates else None

    def summary(self) -> dict:
        return {"m": self.m, "converged": self.converged,
                "norms": [list(x) for x in self.norms],
                "diffs": [list(x) for x in self.diffs],
                "ratios": [list(x) for x in self.ratios]}


# ---------------------------------------------------------------------------
# norms and the bilinear term


def x_norm(traj: Trajectory, p0: float) -> float:
    n = traj.fields[0].grid.n
    return weighted_sup_norm(traj, 0.5 - n / (2 * p0), p0)


def besov_sup(traj: Trajectory, p: float) -> tuple[float, bool]:
    """sup_t ||u(t)||_{B^{-1+n/p}_{p,inf}} and whether any sample was truncated."""
    n = traj.fields[0].grid.n
    params = BesovParams(-1 + n / p, p)
    reports = [besov_norm(u, params) for u in traj.fields]
    return max(r.value for r in reports), any(r.truncated for r in reports)


def dealias(data: np.ndarray, grid) -> np.ndarray:
    """Zero tangential modes above two thirds of the Nyquist frequency."""
    axes = tuple(range(data.ndim - grid.n, data.ndim - 1))
    hat = np.fft.fftn(data, axes=axes)
    kmax = (2 / 3) * grid.N_tan / 2 * (2 * math.pi / grid.L)
    mask = np.ones(grid.tan_shape, dtype=bool)
    for k in grid.kvec:
        mask &= np.abs(k) <= kmax + 1e-9
    hat *= mask[..., None]
    return np.fft.ifftn(hat, axes=axes).real


def nonlinear_forcing(u: VectorField, w: VectorField | None = None) -> SymTensorField:
    """F = -(u (x) w + w (x) u) / 2, dealiased; the wall row is exactly zero."""
    F = u.outer(w)
    data = -dealias(F.data, u.grid)
    data[..., 0] = 0.0
    return SymTensorField(u.grid, data)


def _forcing(a: Trajectory, b: Trajectory | None, u0: VectorField,
             u0b: VectorField | None = None) -> SampledForcing:
    bf = b.fields if b is not None else [None] * len(a.fields)
    tensors = [nonlinear_forcing(x, y) for x, y in zip(a.fields, bf)]
    return SampledForcing(a.time_grid.times, tensors, nonlinear_forcing(u0, u0b))


def bilinear(a: Trajectory, b: Trajectory | None, u0: VectorField, rule: GradedRule,
             u0b: VectorField | None = None) -> Trajectory:
    """V[-sym(a (x) b)] on the time grid of ``a`` (b = a when None)."""
    g = u0.grid
    prob = StokesProblem(VectorField.zeros(g), _forcing(a, b, u0, u0b), a.time_grid, rule)
    return solve_stokes(prob).velocity


def _homogeneous(u0: VectorField, times: TimeGrid) -> Trajectory:
    return solve_homogeneous(StokesProblem(u0, None, times)).velocity


# ---------------------------------------------------------------------------
# fitted constants


def fit_constants(samples, times: TimeGrid, rule: GradedRule | None = None,
                  p0: float = 4.0, p: float = 1.5) -> SmallnessBudget:
    """Measure c1_hat, c5_hat, c6_hat from linear and bilinear solves.

    c1_hat bounds both ||G u0||_X / ||u0||_{B^{-1+n/p0}_{p0,inf}} and
    ||V[w (x) w]||_X / ||w||_X^2; c5_hat and c6_hat bound the difference
    quotient of the bilinear map in the X and Besov norms.
    """
    rule = rule or GradedRule(8)
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    n = samples[0].grid.n
    crit = BesovParams(-1 + n / p0, p0)
    lin, bil, lin_traj, quad = [], [], [], []
    for u0 in samples:
        w = _homogeneous(u0, times)
        lin.append(x_norm(w, p0) / besov_norm(u0, crit).value)
        B = bilinear(w, None, u0, rule)
        bil.append(x_norm(B, p0) / x_norm(w, p0) ** 2)
        lin_traj.append(w)
        quad.append(B)
    c5, c6 = [], []
    for i in range(len(samples) - 1):
        a, b = lin_traj[i], lin_traj[i + 1]
        diff_in = a - b
        diff_out = quad[i] - quad[i + 1]
        scale = x_norm(a, p0) + x_norm(b, p0)
        c5.append(x_norm(diff_out, p0) / (scale * x_norm(diff_in, p0)))
        c6.append(besov_sup(diff_out, p)[0] / (scale * besov_sup(diff_in, p)[0]))
    return SmallnessBudget(p0, p, max(max(lin), max(bil)), max(c5), max(c6), n)


# ---------------------------------------------------------------------------
# iteration


def _measure(traj: Trajectory, budget: SmallnessBudget) -> tuple[tuple[float, float], bool]:
    bes, trunc = besov_sup(traj, budget.p)
    return (x_norm(traj, budget.p0), bes), trunc


def _chain(u0: VectorField, start: Trajectory, budget: SmallnessBudget, m_max: int,
           stop_tol: float, rule: GradedRule) -> IterationState:
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    lin = _homogeneous(u0, start.time_grid)
    state = IterationState(m=1, iterates=[start], budget=budget)
    norms, trunc = _measure(start, budget)
    state.norms.append(norms)
    state.truncated.append(trunc)
    ref = norms
    if ref[0] == 0.0:
        state.diffs.append((0.0, 0.0))
        state.converged = True
        return state
    while state.m < m_max:
        cur = state.current
        try:
            nxt = lin + bilinear(cur, None, u0, rule)
        except FloatingPointError as exc:
            raise SmallnessViolated("smallness violated: non-finite iterate", state) from exc
        norms, trunc = _measure(nxt, budget)
        if norms[0] > BLOWUP * ref[0] or norms[1] > BLOWUP * ref[1]:
            raise SmallnessViolated(
                f"smallness violated: iterate {state.m + 1} norms {norms} exceed "
                f"{BLOWUP:g} x initial {ref}", state)
        d = nxt - cur
        dn, _ = _measure(d, budget)
        rel = (dn[0] / ref[0], dn[1] / ref[1] if ref[1] > 0 else 0.0)
        if state.diffs:
            prev = state.diffs[-1]
            state.ratios.append(tuple(a / b if b > 0 else 0.0 for a, b in zip(rel, prev)))
        state.diffs.append(rel)
        state.norms.append(norms)
        state.truncated.append(trunc)
        state.iterates = [cur, nxt]
        state.m += 1
        if max(rel) < stop_tol:
            state.converged = True
            break
    return state


def iterate(u0: VectorField, budget: SmallnessBudget, m_max: int = 12,
            stop_tol: float = 1e-7, times: TimeGrid | None = None,
            rule: GradedRule | None = None) -> IterationState:
    """Run the Picard scheme until both relative difference norms fall below
    ``stop_tol`` or ``m_max`` iterates exist."""
    times = times or TimeGrid()
    rule = rule or GradedRule(8)
    return _chain(u0, _homogeneous(u0, times), budget, m_max, stop_tol, rule)


def contraction_report(state: IterationState) -> list[dict]:
    """Per-iteration table of differences, ratios and the combined quantity
    ||U^m||_Bes + A ||U^m||_X."""
    if state.m < 3 or not state.ratios:
        return []
    M0 = max(x for x, _ in state.norms)
    A = state.budget.coupling(M0) if state.budget else 1.0
    rows = []
    combined_prev = None
    for i, (dx, db) in enumerate(state.diffs):
        combined = db + A * dx
        row = {"m": i + 1, "diff_Lp0": dx, "diff_Besov": db,
               "ratio_Lp0": None, "ratio_Besov": None, "A_combined": combined,
               "ratio_combined": None}
        if i >= 1:
            rx, rb = state.ratios[i - 1]
            row.update(ratio_Lp0=rx, ratio_Besov=rb,
                       ratio_combined=combined / combined_prev if combined_prev else 0.0)
        rows.append(row)
        combined_prev = combined
    return rows


def uniqueness_probe(u0: VectorField, budget: SmallnessBudget, perturbation: VectorField,
                     m_max: int = 12, stop_tol: float = 1e-7, times: TimeGrid | None = None,
                     rule: GradedRule | None = None) -> list[dict]:
    """Run two chains toward the same fixed point, one started from u^1 and
    one from u^1 plus the Stokes evolution of ``perturbation``; report their
    relative X-distance after each step."""
    times = times or TimeGrid()
    rule = rule or GradedRule(8)
    lin = _homogeneous(u0, times)
    start_b = lin + _homogeneous(perturbation, times)
    ref = x_norm(lin, budget.p0)
    a, b = lin, start_b
    table = []
    scale = ref if ref > 0 else 1.0
    for m in range(1, m_max + 1):
        dist = x_norm(a - b, budget.p0) / scale
        table.append({"m": m, "distance": dist})
        if dist < stop_tol or m == m_max:
            break
        a = lin + bilinear(a, None, u0, rule)
        b = lin + bilinear(b, None, u0, rule)
    return table


@dataclass
class DecayFit:
    slope: float | None
    stderr: float | None
    bound: float
    reliable: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr, "bound": self.bound,
                "reliable": self.reliable, "note": self.note}


def decay_fit(traj: Trajectory, p0: float = 4.0, truncated: bool = False) -> DecayFit:
    """Slope of log ||u(t)||_{p0} against log t over the upper half of the
    time grid, with the bound -(1/2 - n/(2 p0))."""
    n = traj.fields[0].grid.n
    bound = -(0.5 - n / (2 * p0))
    t = traj.time_grid.times
    vals = np.array([lp_norm(u, p0) for u in traj.fields])
    if not np.any(vals > 0):
        return DecayFit(None, None, bound, False, "zero data: no fit")
    k = len(t) // 2
    slope, err = slope_regress(t, vals, (k, len(t)))
    note = "besov truncation flagged" if truncated else ""
    return DecayFit(slope, err, bound, not truncated, note)


# ---------------------------------------------------------------------------
# weak formulation


def test_functions(grid, count: int = 3, seed: int = 0) -> list[np.ndarray]:
    """Divergence-free bumps compactly supported away from the wall and the
    top of the box (stream-function curls)."""
    rng = np.random.default_rng(seed)
    coords = grid.coords
    z = coords[-1]
    out = []
    for _ in range(count):
        centre = [rng.uniform(0, grid.L) for _ in range(grid.n - 1)]
        zc = rng.uniform(0.35, 0.5) * grid.H
        rad = 0.25 * min(grid.H, grid.L)
        r2 = (z - zc) ** 2
        for c, x in zip(centre, coords[:-1]):
            d = (x - c + grid.L / 2) % grid.L - grid.L / 2
            r2 = r2 + d**2
        q = np.clip(1 - r2 / rad**2, 0, None)
        psi = q**6
        if grid.n == 2:
            out.append(stream_velocity(psi, grid).data)
        else:
            out.append(stream_velocity(np.stack([psi, np.roll(psi, 3, axis=0)]), grid).data)
    return out


def weak_residual(u0: VectorField, traj: Trajectory, phis=None) -> float:
    """max over test fields of |int int u.Lap(Phi) + u.Phi_t + (u (x) u):grad Phi
    + int u0.Phi(0)| divided by the sum of the absolute term sizes, with
    Phi(x, t) = phi(x) cos^2(pi t / 2T) and T the last sample time."""
    g = u0.grid
    phis = test_functions(g) if phis is None else phis
    T = traj.time_grid.times[-1]
    ts = np.concatenate([[0.0], traj.time_grid.times])
    us = [u0.data] + [u.data for u in traj.fields]
    theta = np.cos(np.pi * ts / (2 * T)) ** 2
    dtheta = -np.pi / (2 * T) * np.sin(np.pi * ts / T)
    w = g.weights
    worst = 0.0
    for phi in phis:
        lap = sum(partial(partial(phi, g, a), g, a) for a in range(g.n))
        grad = [[partial(phi[j], g, i) for j in range(g.n)] for i in range(g.n)]
        a_lap, a_t, a_nl = [], [], []
        for u in us:
            a_lap.append(np.sum(w * np.sum(u * lap, axis=0)))
            a_t.append(np.sum(w * np.sum(u * phi, axis=0)))
            a_nl.append(sum(np.sum(w * u[i] * u[j] * grad[i][j])
                            for i in range(g.n) for j in range(g.n)))
        a_lap, a_t, a_nl = map(np.array, (a_lap, a_t, a_nl))
        terms = [simpson(a_lap * theta, x=ts), simpson(a_t * dtheta, x=ts),
                 simpson(a_nl * theta, x=ts), a_t[0] * theta[0]]
        size = sum(abs(x) for x in terms)
        if size > 0:
            worst = max(worst, abs(sum(terms)) / size)
    return worst
