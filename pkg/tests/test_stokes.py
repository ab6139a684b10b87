import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfns.grid import HalfSpaceGrid, ScalarField, TimeGrid, VectorField, lp_norm, partial
from halfns.harness.scenarios import ScenarioSpec, forcing_tensor, generate_initial_data
from halfns.helmholtz import project_div_form
from halfns.kernels import ReflectionKind, heat_convolve, heat_image
from halfns.stokes import (GradedRule, PowerForcing, SampledForcing, StokesProblem,
                           divergence_residual, duhamel_apply, green_tensor_apply,
                           momentum_residual, pressure, solve_homogeneous, solve_stokes,
                           stream_velocity, theorem_besov_ratio, theorem_lp_ratio,
                           trace_residual)

TWO_PI = 2 * math.pi
DIPOLE = ScenarioSpec(name="dipole", family="dipole")


def ensemble(grid, seed):
    return generate_initial_data(ScenarioSpec(name="e", family="ensemble", seed=seed), grid)


class LinearForcing:
    """F(tau) = tau G."""

    def __init__(self, G):
        self.G = G
        self.grid = G.grid
        self._Pf = project_div_form(G).Pf.data

    def __call__(self, tau):
        return self.G * tau

    def projected(self, tau):
        return VectorField(self.grid, tau * self._Pf)


@pytest.fixture(scope="module")
def forced():
    return HalfSpaceGrid(2, TWO_PI, 16, 2 * TWO_PI, 48)


# -- problem and rule types -----------------------------------------------------------


def test_problem_rejects_inadmissible_data(small):
    x, z = small.coords
    bad_div = VectorField(small, np.broadcast_to(np.sin(x) * z**2 * np.exp(-z), (2,) + small.shape))
    with pytest.raises(ValueError, match="divergence"):
        StokesProblem(bad_div)
    psi = np.cos(x) * np.exp(-((z - 3) ** 2))
    slip = VectorField(small, [np.broadcast_to(np.exp(-z), small.shape), 0 * psi])
    with pytest.raises(ValueError, match="trace"):
        StokesProblem(slip)


@pytest.mark.parametrize("kwargs", [dict(nodes=6), dict(nodes=9), dict(ratio=1.0),
                                    dict(ratio=0.0)])
def test_graded_rule_validation(kwargs):
    with pytest.raises(ValueError):
        GradedRule(**kwargs)


@pytest.mark.parametrize("two_sided", [False, True])
def test_graded_rule_integrates_cubics(two_sided):
    rule = GradedRule(16, 0.7)
    tau, w = (rule.points_two_sided if two_sided else rule.points)(0.5, 2.0)
    assert np.all((tau > 0.5) & (tau < 2.0))
    for k in range(4):
        assert np.sum(w * tau**k) == pytest.approx((2.0 ** (k + 1) - 0.5 ** (k + 1)) / (k + 1))


def test_graded_rule_clusters_toward_right_end():
    tau, _ = GradedRule(24, 0.7).points(0.0, 1.0)
    gaps = np.diff(tau)
    assert gaps[-1] < gaps[0] / 20


def test_stream_velocity_is_clean(desk, rng):
    x, z = desk.coords
    psi = np.cos(2 * x) * z**2 * np.exp(-((z - 2.2) / 0.5) ** 2)
    u = stream_velocity(np.broadcast_to(psi, desk.shape), desk)
    assert trace_residual(u) == 0.0
    assert divergence_residual(u) <= 1e-13
    with pytest.raises(ValueError):
        stream_velocity(np.zeros((2,) + desk.shape), desk)


# -- homogeneous flow -----------------------------------------------------------------------------


def test_green_of_zero_and_time_check(small):
    assert not np.any(green_tensor_apply(VectorField.zeros(small), 0.1).data)
    with pytest.raises(ValueError):
        green_tensor_apply(VectorField.zeros(small), 0.0)
    with pytest.raises(ValueError):
        pressure(VectorField.zeros(small), -1.0)


@given(st.integers(0, 10_000), st.floats(1e-3, 2.0))
def test_green_keeps_wall_trace(seed, t):
    g = HalfSpaceGrid(2, TWO_PI, 32, TWO_PI, 32)
    u0 = ensemble(g, seed)
    v = green_tensor_apply(u0, t)
    assert np.max(np.abs(v.data[..., 0])) <= 1e-8 * np.max(np.abs(u0.data))


@pytest.mark.parametrize("t", [0.01, 0.1, 0.5])
def test_green_divergence_refines(t):
    res = []
    for N, N_nor in ((32, 24), (64, 48), (128, 96)):
        g = HalfSpaceGrid(2, TWO_PI, N, TWO_PI, N_nor)
        res.append(divergence_residual(green_tensor_apply(generate_initial_data(DIPOLE, g), t)))
    assert math.log2(res[0] / res[2]) / 2 >= 2.0
    assert res[-1] <= 1e-6


def test_solve_homogeneous_zero_and_forced_guard(small, forced):
    tg = TimeGrid(0.01, 2.0, 3)
    sol = solve_homogeneous(StokesProblem(VectorField.zeros(small), None, tg))
    assert all(not np.any(f.data) for f in sol.velocity.fields)
    assert sol.max_residuals() == {"trace": 0.0, "divergence": 0.0}
    F = PowerForcing(forcing_tensor(forced, 0))
    with pytest.raises(ValueError):
        solve_homogeneous(StokesProblem(VectorField.zeros(forced), F, tg))


def test_momentum_residual_is_second_order_in_time():
    g = HalfSpaceGrid(2, TWO_PI, 64, TWO_PI, 48)
    u0 = generate_initial_data(DIPOLE, g)
    r = [momentum_residual(u0, 0.1, 2.0 ** (1 / m)) for m in (2, 4, 8)]
    orders = np.log2(np.array(r[:-1]) / np.array(r[1:]))
    assert np.all(orders >= 1.8)


def test_pressure_trajectory_is_optional(small):
    u0 = generate_initial_data(DIPOLE, small)
    tg = TimeGrid(0.05, 2.0, 2)
    assert solve_homogeneous(StokesProblem(u0, None, tg)).pressure is None
    pres = solve_homogeneous(StokesProblem(u0, None, tg), with_pressure=True).pressure
    assert len(pres) == 2 and isinstance(pres.fields[0], ScalarField)


@pytest.mark.parametrize("k", [0, 1])
def test_green_bounded_by_heat_pieces(k):
    def size(f, g):
        if k == 0:
            return lp_norm(f, 2)
        return math.sqrt(sum(lp_norm(ScalarField(g, partial(f.data[i], g, m)), 2) ** 2
                             for i in range(g.n) for m in range(g.n)))

    fits = []
    for N, N_nor in ((64, 48), (128, 96)):
        g = HalfSpaceGrid(2, TWO_PI, N, TWO_PI, N_nor)
        ratios = []
        for seed in range(4):
            u0 = ensemble(g, seed)
            for t in (0.01, 0.1, 1.0):
                v = green_tensor_apply(u0, t)
                a = heat_convolve(u0, t, ReflectionKind.NONE)
                ratios.append(size(v, g) / (size(a, g) + size(heat_image(u0, t), g)))
        fits.append(max(ratios))
    assert np.isfinite(fits).all()
    assert abs(fits[1] / fits[0] - 1) <= 0.2


def test_scaling_equivariance_is_exact(small):
    lam, t = 2.0, 0.05
    u0 = generate_initial_data(DIPOLE, small)
    fine = small.scaled(lam)
    v_lam = green_tensor_apply(VectorField(fine, lam * u0.data), t).data
    v = green_tensor_apply(u0, lam**2 * t).data
    assert np.max(np.abs(v_lam - lam * v)) <= 1e-12 * np.max(np.abs(lam * v))


# -- forced flow --------------------------------------------------------------------------------------


def test_duhamel_of_zero_and_guards(forced):
    zero = PowerForcing(forcing_tensor(forced, 0) * 0.0)
    assert not np.any(duhamel_apply(zero, 0.2).data)
    with pytest.raises(ValueError):
        duhamel_apply(zero, 0.0)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_duhamel_is_linear(a, b):
    g = HalfSpaceGrid(2, TWO_PI, 16, 2 * TWO_PI, 32)
    F, G = forcing_tensor(g, 1), forcing_tensor(g, 2)
    rule = GradedRule(8, 0.7)
    lhs = duhamel_apply(PowerForcing(a * F + b * G), 0.3, rule).data
    rhs = (a * duhamel_apply(PowerForcing(F), 0.3, rule).data
           + b * duhamel_apply(PowerForcing(G), 0.3, rule).data)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + abs(a) + abs(b)) * max(1.0, np.max(np.abs(rhs)))


def test_duhamel_graded_rule_self_convergence(forced):
    F = LinearForcing(forcing_tensor(forced, 1))
    rule, prev, changes = GradedRule(8, 0.7), None, []
    for _ in range(4):
        V = duhamel_apply(F, 0.5, rule).data
        if prev is not None:
            changes.append(np.max(np.abs(V - prev)))
        prev, rule = V, rule.refined()
    for a, b in zip(changes, changes[1:]):
        assert b <= a / 3
        assert math.log2(a / b) >= 1.5


def test_unforced_solve_matches_homogeneous(small):
    u0 = ensemble(small, 3)
    tg = TimeGrid(0.01, 2.0, 4)
    a = solve_stokes(StokesProblem(u0, None, tg))
    b = solve_homogeneous(StokesProblem(u0, None, tg))
    for fa, fb in zip(a.velocity.fields, b.velocity.fields):
        np.testing.assert_array_equal(fa.data, fb.data)


def test_zero_data_solve_matches_direct_duhamel():
    # marching V(t_k) through the semigroup is exact for solenoidal V; the
    # discrete V carries an O(h^2) divergence, so agreement is O(h^2)
    errs = []
    for N_nor in (48, 96, 192):
        g = HalfSpaceGrid(2, TWO_PI, 16, 2 * TWO_PI, N_nor)
        F = PowerForcing(forcing_tensor(g, 1))
        sol = solve_stokes(StokesProblem(VectorField.zeros(g), F, TimeGrid(0.05, 2.0, 2),
                                         GradedRule(32, 0.7 ** 0.5)))
        ref = duhamel_apply(F, 0.1, GradedRule(64, 0.7 ** 0.25)).data
        errs.append(np.max(np.abs(sol.velocity.fields[-1].data - ref)) / np.max(np.abs(ref)))
        first = duhamel_apply(F, 0.05, GradedRule(64, 0.7 ** 0.25)).data
        assert np.max(np.abs(sol.velocity.fields[0].data - first)) <= 1e-6 * np.max(np.abs(first))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.8)


def test_solve_is_jointly_linear(forced):
    u0, w0 = ensemble(forced, 1), ensemble(forced, 2)
    F, G = forcing_tensor(forced, 1), forcing_tensor(forced, 2)
    tg, rule = TimeGrid(0.05, 2.0, 3), GradedRule(8, 0.7)

    def run(u, H):
        return solve_stokes(StokesProblem(u, PowerForcing(H), tg, rule)).velocity.stacked()

    lhs = run(2 * u0 - w0, 2 * F - G)
    rhs = 2 * run(u0, F) - run(w0, G)
    assert np.max(np.abs(lhs - rhs)) <= 1e-11 * np.max(np.abs(rhs))


def test_sampled_forcing_interpolates_projections(forced):
    G = forcing_tensor(forced, 4)
    times = [0.1, 0.2, 0.4, 0.8]
    prov = SampledForcing(times, [G * t for t in times])
    Pf = project_div_form(G).Pf.data
    # cubic spline in log tau of a linear profile: sub-percent interpolation error
    np.testing.assert_allclose(prov.projected(0.3).data, 0.3 * Pf, atol=1e-2 * np.max(np.abs(Pf)))
    np.testing.assert_allclose(prov.projected(0.05).data, 0.05 * Pf, atol=1e-12)
    with pytest.raises(ValueError):
        SampledForcing([0.1], [G])


def test_power_forcing_scales(forced):
    G = forcing_tensor(forced, 0)
    F = PowerForcing(G, 0.5)
    np.testing.assert_allclose(F(4.0).data, G.data / 2)
    np.testing.assert_allclose(F.projected(4.0).data, project_div_form(G).Pf.data / 2)


# -- measured estimate ratios -------------------------------------------------------------------------


def test_theorem_ratios_reject_inadmissible_exponents(forced):
    u0 = ensemble(forced, 0)
    sol = solve_homogeneous(StokesProblem(u0, None, TimeGrid(0.05, 2.0, 2)))
    with pytest.raises(ValueError):
        theorem_lp_ratio(sol, u0, None, 0.5, 2.0, 4.0)
    with pytest.raises(ValueError):
        theorem_besov_ratio(sol, u0, None, 0.5, 4.0, 2.0)
    with pytest.raises(ValueError):
        theorem_besov_ratio(sol, u0, None, 2.5, 4.0, 1.5)


def test_theorem_ratio_weights(forced):
    u0 = ensemble(forced, 0)
    F = PowerForcing(forcing_tensor(forced, 0), 0.5)
    sol = solve_stokes(StokesProblem(u0, F, TimeGrid(0.05, 2.0, 2), GradedRule(8, 0.7)))
    r = theorem_lp_ratio(sol, u0, F, 0.5, 4.0, 2.0)
    assert r["weight"] == pytest.approx(0.5)
    # F(t) = t^{-w} F_hat, so the weighted forcing norm is ||F_hat||_{p1}
    assert r["rhs"] - r["lhs"] / r["ratio"] == pytest.approx(0.0, abs=1e-12)
    rb = theorem_besov_ratio(sol, u0, PowerForcing(forcing_tensor(forced, 0), 1 / 12),
                             0.3, 4.0, 1.5)
    assert rb["weight"] == pytest.approx(1 / 12)
    assert np.isfinite(rb["ratio"])
