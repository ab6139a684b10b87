"""Scenario library: reproducible solenoidal initial data with zero trace."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..grid import HalfSpaceGrid, SymTensorField, TimeGrid, VectorField, sym_pairs
from ..stokes import divergence_residual, stream_velocity, trace_residual

__all__ = ["FAMILIES", "ScenarioSpec", "forcing_tensor", "generate_initial_data",
           "scenario_from_config"]

FAMILIES = ("dipole", "wall_sine", "ring", "single_band", "ensemble", "critical")

# relative divergence accepted after cleaning; the curl construction is exact
# up to roundoff, so anything larger means a broken potential
CLEAN_TOL = 1e-12


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "dipole"
    n: int = 2
    L: float = 2 * math.pi
    N_tan: int = 128
    H: float = 2 * math.pi
    N_nor: int = 96
    family: str = "dipole"
    amplitude: float = 1.0
    seed: int = 0
    j: int = 2
    p: float = 4.0
    p0: float = 4.0
    p1: float = 2.0
    alpha: float = 0.5
    t0: float = 1e-3
    ratio: float = 2 ** 0.25
    count: int = 48

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family in ("dipole", "wall_sine") and self.n != 2:
            raise ValueError(f"family {self.family!r} is two-dimensional")
        if self.family == "critical" and self.n != 2:
            raise ValueError("family 'critical' is two-dimensional")
        if self.family == "ring" and self.n != 3:
            raise ValueError("family 'ring' is three-dimensional")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def grid(self) -> HalfSpaceGrid:
        return HalfSpaceGrid(self.n, self.L, self.N_tan, self.H, self.N_nor)

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.t0, self.ratio, self.count)

    def with_grid(self, grid: HalfSpaceGrid) -> "ScenarioSpec":
        return replace(self, n=grid.n, L=grid.L, N_tan=grid.N_tan, H=grid.H, N_nor=grid.N_nor)

    def as_dict(self) -> dict:
        return asdict(self)


def scenario_from_config(cfg, name: str | None = None) -> ScenarioSpec:
    g, t, s = cfg.section("grid"), cfg.section("time"), cfg.section("scenario")
    return ScenarioSpec(
        name=name or s["family"], n=g["n"], L=g["L"], N_tan=g["N_tan"], H=g["H"],
        N_nor=g["N_nor"], family=s["family"], amplitude=s["amplitude"], seed=s["seed"],
        j=s["j"], p=cfg["theorem.p"], p0=cfg["picard.p0"], p1=cfg["theorem.p1"],
        alpha=cfg["theorem.alpha"], t0=t["t0"], ratio=t["ratio"], count=t["count"])


def _wall_profile(z: np.ndarray, centre: float, width: float) -> np.ndarray:
    # vanishes to second order at the wall and is negligible there to all orders
    return z ** 2 * np.exp(-((z - centre) / width) ** 2)


def _periodic_bump(x: np.ndarray, centre: float, L: float, kappa: float) -> np.ndarray:
    return np.exp(kappa * (np.cos(2 * np.pi * (x - centre) / L) - 1.0))


def _potential(spec: ScenarioSpec, grid: HalfSpaceGrid) -> np.ndarray:
    X = grid.coords
    z, L, H = X[-1], grid.L, grid.H
    fam = spec.family
    if fam == "wall_sine":
        return z ** 2 * np.exp(-z) * np.sin(2 * np.pi * X[0] / L)
    if fam == "dipole":
        kap = 4.0 * (L / (2 * np.pi)) ** 2
        pair = _periodic_bump(X[0], 0.4 * L, L, kap) - _periodic_bump(X[0], 0.6 * L, L, kap)
        return pair * _wall_profile(z, min(2.0, H / 3), 0.6)
    if fam == "ring":
        c = L / 2
        bump = _periodic_bump(X[0], c, L, 3.0) * _periodic_bump(X[1], c, L, 3.0)
        s1 = np.sin(2 * np.pi * (X[0] - c) / L)
        s2 = np.sin(2 * np.pi * (X[1] - c) / L)
        prof = _wall_profile(z, min(2.0, H / 3), 0.6)
        return np.stack([-s2 * bump * prof, s1 * bump * prof])
    if fam == "single_band":
        k = 2.0 ** spec.j * 2 * np.pi / L
        prof = _wall_profile(z, H / 2, math.sqrt(2.0)) / k
        psi = np.cos(k * X[0]) * prof
        if grid.n == 3:
            return np.stack([psi, np.cos(k * X[1]) * prof])
        return psi
    # ensemble: random band-limited tangential modes times random wall-compact profiles
    rng = np.random.default_rng(spec.seed)
    kmax = min(4, grid.N_tan // 4)
    comps = []
    for _ in range(grid.n - 1):
        acc = np.zeros(grid.shape)
        for _ in range(3):
            modes = rng.integers(-kmax, kmax + 1, size=grid.n - 1)
            if not np.any(modes):
                modes[0] = 1
            phase = rng.uniform(0, 2 * np.pi)
            arg = sum(int(m) * 2 * np.pi * X[a] / L for a, m in enumerate(modes)) + phase
            centre = rng.uniform(2.0, 2.5)
            width = rng.uniform(0.45, 0.6)
            amp = rng.normal() / math.hypot(*modes)
            acc += amp * np.cos(arg) * _wall_profile(z, centre, width)
        comps.append(acc)
    return comps[0] if grid.n == 2 else np.stack(comps)


def _critical(spec: ScenarioSpec, g: HalfSpaceGrid) -> VectorField:
    """Sum over every resolvable band of a solenoidal piece scaled to unit
    B^{-1+n/p0}_{p0,inf} band norm, so no band dominates the critical norm."""
    from ..besov import dyadic_project

    x, z = g.coords
    prof = _wall_profile(z, min(4.0, g.H / 3), 1.4)
    s = -1 + g.n / spec.p0
    lo, hi = g.band_range()
    total = np.zeros((g.n,) + g.shape)
    for j in range(lo, hi + 1):
        k = 2.0 ** j * 2 * np.pi / g.L
        u = stream_velocity(np.cos(k * x + 0.7 * j) * prof / k, g)
        total += u.data / (2.0 ** (j * s) * dyadic_project(u, j).lp_norm(spec.p0))
    return VectorField(g, spec.amplitude * total)


def generate_initial_data(spec: ScenarioSpec, grid: HalfSpaceGrid | None = None) -> VectorField:
    """Initial velocity for ``spec`` (on ``grid`` if given, else the scenario's own).

    The potential has its tangential mean removed before the curl is taken,
    so the velocity is mean-free in the tangential directions.  Raises
    ``ValueError`` if the cleaned field fails the divergence or trace check.
    """
    g = grid or spec.grid
    if spec.amplitude == 0:
        return VectorField.zeros(g)
    if spec.family == "critical":
        return _critical(spec, g)
    pot = spec.amplitude * np.asarray(_potential(spec, g), dtype=float)
    tan_axes = tuple(range(pot.ndim - g.n, pot.ndim - 1))
    pot = pot - pot.mean(axis=tan_axes, keepdims=True)
    u = stream_velocity(pot, g)
    div, tr = divergence_residual(u), trace_residual(u)
    if not (div <= CLEAN_TOL and tr == 0.0):
        raise ValueError(f"scenario {spec.name!r}: invariants violated after cleaning "
                         f"(divergence {div:.2e}, trace {tr:.2e})")
    return u


def forcing_tensor(grid: HalfSpaceGrid, seed: int = 0) -> SymTensorField:
    """Random band-limited symmetric tensor with wall-compact entries (a forcing F with f = div F)."""
    rng = np.random.default_rng(seed + 10_000)
    X = grid.coords
    z, L = X[-1], grid.L
    comps = []
    for _ in sym_pairs(grid.n):
        modes = rng.integers(1, 4, size=grid.n - 1) * rng.choice([-1, 1], size=grid.n - 1)
        arg = sum(int(m) * 2 * np.pi * X[a] / L for a, m in enumerate(modes))
        prof = _wall_profile(z, rng.uniform(2.0, 2.5), rng.uniform(0.45, 0.6))
        comps.append(rng.normal() * np.cos(arg + rng.uniform(0, 2 * np.pi)) * prof)
    return SymTensorField(grid, np.stack(comps))
