//! Neumann eigenbases, Bessel functions and quadrature.

mod basis;
mod bessel;
mod quadrature;

pub use basis::{
    parse_basis_file, Domain, EigenLevel, SpectralBasis, BUILTIN_ORTHONORMALITY_TOL,
    IMPORT_ORTHONORMALITY_TOL, MIN_QUAD_ORDER,
};
pub use bessel::{bessel_j0, bessel_j1, bessel_j1_positive_zeros};
pub use quadrature::QuadratureRule;
