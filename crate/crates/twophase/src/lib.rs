//! Fourier-mode solution of a linearized compressible/incompressible two-phase
//! resolvent problem in a half-space over a liquid layer, together with the
//! numerical machinery used to check its analytic estimates.
//!
//! The crate is organised by role:
//!
//! - [`regions`]: physical parameters, admissible resolvent regions, uniqueness checks
//! - [`symbols`]: characteristic roots, Stokes kernels, the Lopatinski system, multiplier classes
//! - [`mode`]: closed-form per-mode solution of the reduced problem
//! - [`fd`]: finite-difference per-mode solver used as an oracle and for interior sources
//! - [`field`]: tangential/time transforms, the half time derivative, evolution, norms
//! - [`lagrangian`]: Lagrangian flow map, `V0` series and nonlinear source terms
//! - [`kernels`]: convolution kernels, kernel bounds and R-bound estimates

pub mod cmath;
pub mod error;
pub mod fd;
pub mod field;
pub mod kernels;
pub mod lagrangian;
pub mod linalg;
pub mod mode;
pub mod quad;
pub mod regions;
pub mod symbols;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use regions::{PhysicalParams, RegionCase, SpectralPoint};
