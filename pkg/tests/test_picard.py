import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfns import picard
from halfns.besov import BesovParams, besov_norm
from halfns.grid import HalfSpaceGrid, TimeGrid, Trajectory, VectorField, divergence
from halfns.harness.scenarios import ScenarioSpec, generate_initial_data
from halfns.picard import (SmallnessBudget, SmallnessViolated, contraction_report, decay_fit,
                           dealias, fit_constants, iterate, nonlinear_forcing,
                           uniqueness_probe, x_norm)
from halfns.stokes import StokesProblem, solve_homogeneous

TWO_PI = 2 * math.pi
TIMES = TimeGrid(1e-3, 2**0.5, 13)
TOL = 1e-7


@pytest.fixture(scope="module")
def setup():
    """Critical data on a cheap grid, fitted constants, and the amplitude whose
    predicted contraction factor 2 c5 ||u^1||_X is 0.08."""
    g = HalfSpaceGrid(2, TWO_PI, 16, 2 * TWO_PI, 32)
    crit = generate_initial_data(ScenarioSpec(name="c", family="critical", p0=4.0), g)
    dipole = generate_initial_data(ScenarioSpec(name="d", family="dipole"), g)
    budget = fit_constants([crit, dipole], TIMES)
    lin = solve_homogeneous(StokesProblem(crit, None, TIMES)).velocity
    amp = 0.08 / (2 * budget.c5_hat * x_norm(lin, budget.p0))
    return g, crit, budget, amp, lin


@pytest.fixture(scope="module")
def small_run(setup):
    g, crit, budget, amp, _ = setup
    return iterate(crit * amp, budget, 12, TOL, TIMES)


# -- budget ------------------------------------------------------------------------------------


@pytest.mark.parametrize("kwargs", [dict(p0=2.0), dict(p=0.5), dict(p=2.0),
                                    dict(c5_hat=0.0), dict(c1_hat=-1.0)])
def test_budget_validation(kwargs):
    with pytest.raises(ValueError):
        SmallnessBudget(**kwargs)


def test_budget_exponents_and_thresholds():
    b = SmallnessBudget(p0=4.0, p=1.5, c1_hat=1.0, c5_hat=0.5, c6_hat=1.0)
    assert b.beta == pytest.approx(0.25) and b.s == pytest.approx(1 / 3)
    assert all(b.thresholds(0.1, 0.4).values())
    assert not b.thresholds(0.3, 0.4)["N0_lt_M0_over_2c1"]
    assert b.coupling(0.4) == pytest.approx(2.0)
    assert SmallnessBudget(c5_hat=2.0, c6_hat=1.0).coupling(0.4) == 1.0


def test_fit_constants_needs_two_samples(setup):
    with pytest.raises(ValueError):
        fit_constants([setup[1]], TIMES)


def test_fitted_constants_are_positive(setup):
    b = setup[2]
    assert min(b.c1_hat, b.c5_hat, b.c6_hat) > 0


# -- bilinear term --------------------------------------------------------------------------------


@given(st.floats(0.01, 100), st.integers(0, 1000))
def test_forcing_is_quadratic(lam, seed):
    g = HalfSpaceGrid(2, TWO_PI, 16, TWO_PI, 16)
    u = generate_initial_data(ScenarioSpec(name="e", family="ensemble", seed=seed), g)
    F = nonlinear_forcing(u).data
    Fl = nonlinear_forcing(u * lam).data
    assert np.max(np.abs(Fl - lam**2 * F)) <= 1e-13 * lam**2 * np.max(np.abs(F))


def test_forcing_wall_row_and_symmetry(setup):
    g, crit = setup[:2]
    F = nonlinear_forcing(crit)
    assert not np.any(F.data[..., 0])
    full = F.full()
    np.testing.assert_array_equal(full, np.swapaxes(full, 0, 1))
    w = crit * 0.5
    np.testing.assert_allclose(nonlinear_forcing(crit, w).data, nonlinear_forcing(w, crit).data)


def test_dealias_removes_top_third(setup):
    g = setup[0]
    x, z = g.coords
    keep, drop = np.cos(5 * x) * np.exp(-z), np.cos(7 * x) * np.exp(-z)
    out = dealias(np.broadcast_to(keep + drop, g.shape)[None], g)[0]
    np.testing.assert_allclose(out, np.broadcast_to(keep, g.shape), atol=1e-13)


# -- iteration ------------------------------------------------------------------------------------


def test_zero_data_converges_immediately(setup):
    g, _, budget = setup[:3]
    state = iterate(VectorField.zeros(g), budget, 4, TOL, TIMES)
    assert state.converged and state.m == 1
    assert state.diffs == [(0.0, 0.0)]
    assert all(not np.any(f.data) for f in state.current.fields)
    assert contraction_report(state) == []


def test_iterate_needs_two_steps(setup):
    g, crit, budget, amp, _ = setup
    with pytest.raises(ValueError):
        iterate(crit * amp, budget, 1, TOL, TIMES)


def test_small_data_contracts(small_run):
    st_ = small_run
    assert st_.converged and st_.m <= 12
    assert max(max(r) for r in st_.ratios) < 1
    assert np.all(np.isfinite(st_.norms))
    assert len(st_.iterates) == 2
    dx = np.array([d[0] for d in st_.diffs])
    assert np.all(dx[1:] < dx[:-1])
    assert max(st_.diffs[-1]) < TOL


def test_summary_is_serializable(small_run):
    import json

    s = json.loads(json.dumps(small_run.summary()))
    assert s["m"] == small_run.m and len(s["norms"]) == small_run.m


def test_norms_obey_fitted_quadratic_bound(setup, small_run):
    _, crit, budget, amp, _ = setup
    N0 = besov_norm(crit * amp, BesovParams(-1 + 2 / budget.p0, budget.p0)).value
    X = [n[0] for n in small_run.norms]
    for a, b in zip(X[:-1], X[1:]):
        assert b <= budget.c1_hat * (N0 + a**2)


def test_contraction_report_combined_ratio(small_run):
    rows = contraction_report(small_run)
    assert [r["m"] for r in rows] == list(range(1, small_run.m))
    assert rows[0]["ratio_combined"] is None
    for r in rows[1:]:
        # the combined quantity is a positive mix, so its ratio lies between the columns
        hi = max(r["ratio_Lp0"], r["ratio_Besov"])
        lo = min(r["ratio_Lp0"], r["ratio_Besov"])
        assert lo * (1 - 1e-12) <= r["ratio_combined"] <= hi * (1 + 1e-12) < 1


def test_contraction_ratios_double_with_amplitude(setup, small_run):
    _, crit, budget, amp, _ = setup
    double = iterate(crit * (2 * amp), budget, 12, TOL, TIMES)
    for r1, r2 in list(zip(small_run.ratios, double.ratios))[:3]:
        for a, b in zip(r1, r2):
            assert b / a == pytest.approx(2.0, rel=0.1)


def test_large_data_breaks_smallness(setup):
    _, crit, budget, amp, _ = setup
    try:
        state = iterate(crit * (50 * amp), budget, 12, TOL, TIMES)
    except SmallnessViolated as exc:
        assert "smallness violated" in str(exc)
        assert exc.state is not None and exc.state.m >= 1
    else:
        assert max(max(r) for r in state.ratios) >= 1


def test_iteration_is_scaling_equivariant(setup):
    g, crit, budget, amp, _ = setup
    lam = 2.0
    scaled_times = TimeGrid(TIMES.t0 / lam**2, TIMES.ratio, len(TIMES))
    u0 = crit * amp
    big = iterate(VectorField(g.scaled(lam), lam * u0.data), budget, 4, 0.0, scaled_times)
    ref = iterate(u0, budget, 4, 0.0, TIMES)
    for a, b in zip(big.current.fields, ref.current.fields):
        assert np.max(np.abs(a.data - lam * b.data)) <= 1e-10 * np.max(np.abs(lam * b.data))
    np.testing.assert_allclose(big.norms, ref.norms, rtol=1e-10)


# -- uniqueness ---------------------------------------------------------------------------------


def test_zero_perturbation_gives_identical_chains(setup):
    g, crit, budget, amp, _ = setup
    table = uniqueness_probe(crit * amp, budget, VectorField.zeros(g), 12, TOL, TIMES)
    assert table == [{"m": 1, "distance": 0.0}]


def test_perturbed_chains_meet(setup):
    g, crit, budget, amp, _ = setup
    pert = generate_initial_data(ScenarioSpec(name="e", family="ensemble", seed=7), g)
    pert = pert * (0.1 * amp * np.max(np.abs(crit.data)) / np.max(np.abs(pert.data)))
    table = uniqueness_probe(crit * amp, budget, pert, 12, TOL, TIMES)
    d = np.array([row["distance"] for row in table])
    assert np.all(d[1:] < d[:-1])
    assert d[-1] <= 2 * TOL


# -- decay ------------------------------------------------------------------------------------------


def test_decay_fit_of_zero_data(setup):
    g = setup[0]
    traj = Trajectory(TIMES, [VectorField.zeros(g)] * len(TIMES))
    fit = decay_fit(traj)
    assert fit.slope is None and not fit.reliable and "zero" in fit.note


def test_linear_critical_flow_decays_at_half_alpha(setup):
    # all bands of unit B^{-alpha}_{4,inf} size, alpha = 1 - 2/4
    fit = decay_fit(setup[4], 4.0)
    assert fit.reliable and fit.bound == pytest.approx(-0.25)
    assert fit.slope == pytest.approx(-0.25, abs=0.05)


def test_small_data_run_respects_decay_bound(small_run):
    fit = decay_fit(small_run.current, 4.0)
    assert fit.slope >= -0.30


def test_truncation_marks_fit_unreliable(small_run):
    fit = decay_fit(small_run.current, 4.0, truncated=True)
    assert not fit.reliable and "truncation" in fit.note
    assert set(fit.as_dict()) == {"slope", "stderr", "bound", "reliable", "note"}


# -- weak formulation -----------------------------------------------------------------------------


def test_weak_test_fields_are_admissible(setup):
    g = setup[0]
    for phi in picard.test_functions(g, count=3, seed=1):
        assert not np.any(phi[..., 0]) and not np.any(phi[..., -1])
        div = divergence(VectorField(g, phi)).data
        assert np.max(np.abs(div)) <= 1e-10 * np.max(np.abs(phi)) * max(g.kvec[0].max(), 1)


def test_weak_residual_is_small_for_converged_run(setup, small_run):
    _, crit, _, amp, _ = setup
    w = picard.weak_residual(crit * amp, small_run.current)
    assert 0 <= w < 0.1
