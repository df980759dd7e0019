//! Numerical laboratory for the Dirac equation on stationary spacetimes with
//! horizons and an inner reflecting boundary.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`] — metric closures in horizon-penetrating charts (Kerr in
//!   Eddington–Finkelstein-type coordinates, flat space, low-dimensional test
//!   families), Killing-field diagnostics, Christoffel symbols and Gaussian
//!   normal charts built off the inner boundary.
//! * [`spinor`] — flat Clifford representations, pseudo-orthonormal frames
//!   adapted to the stationary slicing, curved gamma matrices, spin
//!   connection coefficients and the indefinite spin scalar product.
//! * [`operator`] — the discrete Dirac Hamiltonian on a tensor-product
//!   `(r, θ)` grid for a fixed azimuthal mode, chiral boundary conditions by
//!   projector elimination, the principal symbol and horizon detection.
//! * [`spectral`] — the double-boundary collar region, its Hermitian
//!   eigenproblem, series propagation, the tangential boundary operator and
//!   ellipticity/energy-estimate certificates.
//! * [`evolution`] — Crank–Nicolson and split near-boundary/interior
//!   propagation of Cauchy data with window monitors and diagnostics.
//!
//! Everything dense or LAPACK-shaped is delegated to `ndarray-linalg`; the
//! sparse operator plumbing lives in [`linalg`].

pub mod error;
pub mod evolution;
pub mod geometry;
pub mod linalg;
pub mod operator;
pub mod spectral;
pub mod spinor;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
