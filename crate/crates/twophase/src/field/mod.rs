//! Field-level layer for `N = 2`: tangential Fourier and weighted Laplace
//! transforms, the half time derivative, zero-initial-data evolution by mode
//! superposition, the maximal-regularity norm ratio and the compatibility
//! conditions of the data.

mod compat;
mod data;
mod evolve;
mod grid;
mod norms;
mod transform;

pub use compat::*;
pub use data::{DataBundle, DataTerm, RandomData, Target};
pub use evolve::{evolve, evolve_residual, DataIntegrals, EvolveOptions, EvolveResult, ModeIntegrals, ProbeSet, Snapshot, SolutionIntegrals, ACTIVE_TOL};
pub use grid::{Field, FieldGrid, Side};
pub use norms::*;
pub use transform::*;
