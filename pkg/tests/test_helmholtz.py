import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfns.grid import HalfSpaceGrid, SymTensorField, VectorField
from halfns.harness.scenarios import forcing_tensor
from halfns.helmholtz import div_form, project_div_form, projection_norm_check

TWO_PI = 2 * math.pi


def _sym(grid, full):
    return SymTensorField.from_full(grid, np.broadcast_to(full, (grid.n, grid.n) + grid.shape))


def solenoidal_source(grid, k=2, c=3.0, w=0.8):
    """F = [[0, B], [B, C]] with div F = curl of cos(kx) G'(z): already
    divergence free with zero normal trace, so P div F = div F."""
    x, z = grid.coords
    e = np.exp(-(((z - c) / w) ** 2))
    G = z**3 * e
    dG = 3 * z**2 * e - 2 * (z - c) / w**2 * z**3 * e
    B = np.cos(k * x) * dG
    C = 2 * k * np.sin(k * x) * G
    return _sym(grid, np.array([[0 * B, B], [B, C]]))


def pure_trace(grid):
    x, z = grid.coords
    phi = np.sin(x) * z**2 * np.exp(-((z - 3) / 0.8) ** 2)
    zero = 0 * phi
    return _sym(grid, np.array([[phi, zero], [zero, phi]]))


def band_source(grid, j):
    x, z = grid.coords
    k = 2**j
    e = z**2 * np.exp(-((z - 3) / 0.8) ** 2)
    c, s = np.cos(k * x) * e, np.sin(k * x) * e
    return _sym(grid, np.array([[c, s], [s, 0.5 * c]]))


@pytest.fixture(scope="module")
def forced():
    return HalfSpaceGrid(2, TWO_PI, 32, 2 * TWO_PI, 96)


def test_zero_forcing(forced):
    pr = project_div_form(SymTensorField.zeros(forced))
    assert not np.any(pr.Fprime.data)
    assert pr.div_residual == 0.0 and pr.trace_residual == 0.0 and not pr.boundary_flag


def test_input_validation(forced):
    with pytest.raises(TypeError):
        project_div_form(np.zeros((2, 2) + forced.shape))
    with pytest.raises(TypeError):
        project_div_form(VectorField.zeros(forced))
    asym = np.zeros((2, 2) + forced.shape)
    asym[0, 1] = 1.0
    with pytest.raises(ValueError):
        SymTensorField.from_full(forced, asym)


def test_wall_trace_warns_and_flags(forced):
    F = _sym(forced, np.ones((2, 2) + forced.shape) * np.exp(-forced.coords[1]))
    with pytest.warns(RuntimeWarning):
        pr = project_div_form(F)
    assert pr.boundary_flag


@pytest.mark.parametrize("N_nor", [96, 192])
def test_gradients_are_annihilated(N_nor):
    g = HalfSpaceGrid(2, TWO_PI, 32, 2 * TWO_PI, N_nor)
    F = pure_trace(g)
    Pf = project_div_form(F).Pf
    assert np.max(np.abs(Pf.data)) <= 1e-12 * np.max(np.abs(div_form(F).data))


def test_projection_is_idempotent_on_solenoidal_data():
    errs = []
    for N in (128, 256, 512):
        g = HalfSpaceGrid(2, TWO_PI, 32, 2 * TWO_PI, N)
        F = solenoidal_source(g)
        f = div_form(F).data
        errs.append(np.max(np.abs(project_div_form(F).Pf.data - f)) / np.max(np.abs(f)))
    assert errs[-1] <= 1e-6
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 3.5)


def test_projected_field_is_divergence_free_with_zero_normal_trace(forced):
    pr = project_div_form(forcing_tensor(forced, 3))
    assert pr.trace_residual <= 1e-10
    assert pr.div_residual <= 1e-2


def test_divergence_residual_refines():
    res = []
    for N in (96, 192):
        g = HalfSpaceGrid(2, TWO_PI, 32, 2 * TWO_PI, N)
        res.append(project_div_form(forcing_tensor(g, 3)).div_residual)
    assert math.log2(res[0] / res[1]) >= 2.0


@given(st.floats(-4, 4), st.floats(-4, 4), st.integers(0, 1000))
def test_projection_is_linear(a, b, seed):
    g = HalfSpaceGrid(2, TWO_PI, 16, 2 * TWO_PI, 32)
    F, G = forcing_tensor(g, seed), forcing_tensor(g, seed + 1)
    lhs = project_div_form(a * F + b * G).Fprime.data
    rhs = a * project_div_form(F).Fprime.data + b * project_div_form(G).Fprime.data
    scale = np.max(np.abs(project_div_form(F).Fprime.data)) + np.max(np.abs(rhs))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + abs(a) + abs(b)) * scale


@given(st.integers(1, 15), st.integers(0, 1000))
def test_projection_commutes_with_tangential_shift(shift, seed):
    g = HalfSpaceGrid(2, TWO_PI, 16, 2 * TWO_PI, 32)
    F = forcing_tensor(g, seed)
    moved = SymTensorField(g, np.roll(F.data, shift, axis=1))
    lhs = project_div_form(moved).Fprime.data
    rhs = np.roll(project_div_form(F).Fprime.data, shift, axis=1)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


def test_norm_ratio_of_zero_and_bad_alpha(forced):
    assert projection_norm_check(SymTensorField.zeros(forced), 0.5, 2.0) == 0.0
    with pytest.raises(ValueError):
        projection_norm_check(forcing_tensor(forced, 0), -0.5, 2.0)


@pytest.mark.parametrize("alpha", [0.0, 0.5])
def test_norm_ratio_is_band_independent(alpha):
    g = HalfSpaceGrid(2, TWO_PI, 64, 2 * TWO_PI, 96)
    ratios = [projection_norm_check(band_source(g, j), alpha, 2.0) for j in (1, 2, 3, 4)]
    assert max(ratios) / min(ratios) - 1 <= 0.15


@pytest.mark.slow
def test_norm_ratio_ensemble_is_refinement_stable():
    fits = []
    for N, N_nor in ((32, 96), (64, 192)):
        g = HalfSpaceGrid(2, TWO_PI, N, 2 * TWO_PI, N_nor)
        ratios = [projection_norm_check(forcing_tensor(g, s), 0.0, 2.0) for s in range(20)]
        assert np.all(np.isfinite(ratios))
        fits.append(max(ratios))
    assert abs(fits[1] / fits[0] - 1) <= 0.2
