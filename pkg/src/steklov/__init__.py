"""Steklov spectra of revolution metrics ``dr^2 + h(r)^2 g0`` on the n-ball.

Modules: :mod:`profile` (warp functions and validation), :mod:`modal` (sphere
data and spectrum tables), :mod:`shoot` (shooting solver and Rayleigh
quotients), :mod:`fem` (finite-element oracle), :mod:`theorems` (bound
constants and verdicts), :mod:`sweep` (eps-sweeps and trend fits) and
:mod:`cli`.
"""

from .fem import AssemblyError, Mesh1D, MeshError, bisect_mesh, build_mesh, steklov_mode_fem
from .modal import (
    SolverInconsistencyError,
    SpectrumTable,
    assemble_spectrum,
    sphere_eigenvalue,
    sphere_multiplicity,
)
from .profile import (
    Profile,
    ProfileError,
    certify_caps,
    make_capped,
    make_euclidean,
    make_piecewise,
    make_plateau_h0,
    make_plateau_large,
    make_plateau_small,
    profile_from_spec,
    smoothstep,
    validate_profile,
)
from .shoot import (
    ConvergenceError,
    InadmissibleTestFunction,
    ShootError,
    SolverOptions,
    cutoff_trial,
    piecewise_linear_trial,
    rayleigh,
    solve_mode,
    steklov_mode,
)
from .sweep import SweepRow, fit_trend, sweep_family
from .theorems import (
    BoundReport,
    gamma_bound,
    gap_bound_3d,
    gap_bound_highdim,
    n2_exact,
    ratio_bound,
    sigma_bound_3d,
    verify_profile,
)

__all__ = [
    "SolverInconsistencyError",
    "SpectrumTable",
    "assemble_spectrum",
    "sphere_eigenvalue",
    "sphere_multiplicity",
    "Profile",
    "ProfileError",
    "certify_caps",
    "make_capped",
    "make_euclidean",
    "make_piecewise",
    "make_plateau_h0",
    "make_plateau_large",
    "make_plateau_small",
    "profile_from_spec",
    "smoothstep",
    "validate_profile",
    "ConvergenceError",
    "InadmissibleTestFunction",
    "ShootError",
    "SolverOptions",
    "cutoff_trial",
    "piecewise_linear_trial",
    "rayleigh",
    "solve_mode",
    "steklov_mode",
    "BoundReport",
    "gamma_bound",
    "gap_bound_3d",
    "gap_bound_highdim",
    "n2_exact",
    "ratio_bound",
    "sigma_bound_3d",
    "verify_profile",
    "AssemblyError",
    "Mesh1D",
    "MeshError",
    "bisect_mesh",
    "build_mesh",
    "steklov_mode_fem",
    "SweepRow",
    "fit_trend",
    "sweep_family",
]

__version__ = "0.1.0"
