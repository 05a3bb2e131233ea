"""Two-peak solutions of the plasma free-boundary problem

    -ε² Δu = (u - 1)_+ - (-u - γ)_+  in Ω,   u = 0 on ∂Ω,

built from Bessel cell functions placed at minimisers of a Kirchhoff-Routh
Hamiltonian, and solved on a Cartesian cut-cell grid by semismooth Newton.
"""

from .ansatz import (Amplitudes, Ansatz, build_ansatz, calibrate_T, locate_peaks,
                     solve_amplitudes, verify_level_sets)
from .cellfn import CellParams, bubble, cell_U, k_epsilon
from .domain import DomainModel, Grid, ScalarField
from .errors import NumericalError, PlasmaPeaksError, ValidationError
from .greens import GreensTable, boundary_extremizer, harmonic_center, make_table
from .routh import PeakConfig, hamiltonian, minimize_hamiltonian
from .solver import SolveResult, plasma_eigenvalue, solve_pde
from .specfun import bessel_constants, bessel_j0, bessel_j1, first_zero_j0
from .sweep import SweepRecord, gamma_sweep, verify_boundary_expansion

__version__ = "0.1.0"

__all__ = [
    "Amplitudes", "Ansatz", "CellParams", "DomainModel", "GreensTable", "Grid",
    "NumericalError", "PeakConfig", "PlasmaPeaksError", "ScalarField", "SolveResult",
    "SweepRecord", "ValidationError", "bessel_constants", "bessel_j0", "bessel_j1", "bubble",
    "boundary_extremizer", "build_ansatz", "calibrate_T", "cell_U", "first_zero_j0",
    "gamma_sweep", "hamiltonian", "harmonic_center", "k_epsilon", "locate_peaks", "make_table",
    "minimize_hamiltonian", "plasma_eigenvalue", "solve_amplitudes", "solve_pde",
    "verify_boundary_expansion", "verify_level_sets",
]
