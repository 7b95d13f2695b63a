//! Characteristic roots, Stokes kernels, the Lopatinski system and the
//! numerical checks of symbol estimates.

mod detbound;
mod kernel;
mod lopatinski;
mod multiplier;
mod roots;

pub use detbound::{det_bound_sweep, region_samples, DetBoundReport, DetSample, REGIMES};
pub use kernel::{divided_exp, divided_exp_d1, divided_exp_d2, divided_exp_direct, divided_exp_series, stokes_kernel};
pub use lopatinski::{det_bound_ratio, det_l, det_l_at_zero_mode, lopatinski_system, LopatinskiSystem};
pub use multiplier::{
    multiplier_check, multiplier_check_family, region_lambdas, DerivativeRatio, MultiplierGrid, MultiplierReport, MultiplierType, SymbolSpec,
};
pub use roots::{char_roots, CharRoots};
