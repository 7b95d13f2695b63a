//! Closed-form solution of the reduced interface problem for one tangential
//! Fourier mode, with residual and identity checks.

mod families;
mod residual;
mod solution;

pub use families::{mode_symbols, ModeSymbols, SymbolMatrix, A_MIN, DET_FLOOR};
pub(crate) use residual::Groups;
pub use residual::{chebyshev_samples, coefficient_identity_check, residual_report, Checker, ResidualReport, CHEB_POINTS};
pub use solution::{coefficients_from_symbols, eval_mode_solution, solve_coefficients, BoundaryDataHat, CoefficientSet, Jet, ModeSolution};
