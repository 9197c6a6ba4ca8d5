"""Lattice-point geometry and exponent experiments for Fourier series on flat tori."""
__version__ = "0.1.0"

from .errors import ConvergenceWarning, CoverError, DecompositionError, LatticeError, ResourceLimitError
from .lattice import (
    AnnulusSpec,
    DualBasis,
    LatticeBasis,
    PointSet,
    brute_force_annulus,
    delta_from_kappa,
    dual_basis,
    enumerate_annulus,
    integer_lattice,
    load_lattice,
    save_lattice,
)
from .geometry import (
    assign_sectors,
    audit_whitney,
    build_cap_cover,
    build_direction_set,
    whitney_decompose,
)
from .census import affine_dimension, bad_cap_census, classify, integer_rank, max_cap_check
from .energy import CoeffSet, additive_energy, bilinear_l4, exact_even_norm, representation_counts
from .norms import GridSpec, coeff_norm, exponent_fit, low_exponent, p_critical, synthesize

__all__ = [
    "ConvergenceWarning",
    "CoverError",
    "DecompositionError",
    "LatticeError",
    "ResourceLimitError",
    "AnnulusSpec",
    "DualBasis",
    "LatticeBasis",
    "PointSet",
    "brute_force_annulus",
    "delta_from_kappa",
    "dual_basis",
    "enumerate_annulus",
    "integer_lattice",
    "load_lattice",
    "save_lattice",
    "assign_sectors",
    "audit_whitney",
    "build_cap_cover",
    "build_direction_set",
    "whitney_decompose",
    "affine_dimension",
    "bad_cap_census",
    "classify",
    "integer_rank",
    "max_cap_check",
    "CoeffSet",
    "additive_energy",
    "bilinear_l4",
    "exact_even_norm",
    "representation_counts",
    "GridSpec",
    "coeff_norm",
    "exponent_fit",
    "low_exponent",
    "p_critical",
    "synthesize",
]
