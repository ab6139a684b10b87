"""Numerical lab for mild solutions of the Stokes and Navier-Stokes equations
on the half space with Besov-space initial data."""

from .besov import BesovParams, NormReport, besov_norm, dyadic_project, heat_characterization
from .grid import (HalfSpaceGrid, ScalarField, SymTensorField, TensorField, TimeGrid,
                   Trajectory, VectorField, load_field, lp_norm, save_field)
from .helmholtz import ProjectedForcing, project_div_form, projection_norm_check
from .kernels import (ReflectionKind, heat_convolve, heat_image, newton_volume,
                      poisson_boundary, riesz_tangential)
from .picard import SmallnessBudget, SmallnessViolated, decay_fit, iterate, uniqueness_probe
from .stats import slope_regress
from .stokes import (GradedRule, StokesProblem, StokesSolution, duhamel_apply,
                     green_tensor_apply, solve_homogeneous, solve_stokes)

__version__ = "0.1.0"

__all__ = [
    "BesovParams", "GradedRule", "HalfSpaceGrid", "NormReport", "ProjectedForcing",
    "ReflectionKind", "ScalarField", "SmallnessBudget", "SmallnessViolated", "StokesProblem",
    "StokesSolution", "SymTensorField", "TensorField", "TimeGrid", "Trajectory", "VectorField",
    "besov_norm", "decay_fit", "duhamel_apply", "dyadic_project", "green_tensor_apply",
    "heat_characterization", "heat_convolve", "heat_image", "iterate", "load_field", "lp_norm",
    "newton_volume", "poisson_boundary", "project_div_form", "projection_norm_check",
    "riesz_tangential", "save_field", "slope_regress", "solve_homogeneous", "solve_stokes",
    "uniqueness_probe",
]
