use crate::cmath::{expm1, phi1_series};
use crate::C64;

const SERIES_THRESHOLD: f64 = 1e-3;

/// `(e^{bz} - e^{az})/(b - a)` through the direct formula.
pub fn divided_exp_direct(a: C64, b: C64, z: f64) -> C64 {
    let w = (b - a) * z;
    if w.norm() == 0.0 {
        return z * (a * z).exp();
    }
    (a * z).exp() * expm1(w) / (b - a)
}

/// `(e^{bz} - e^{az})/(b - a)` through the exponential-difference series.
pub fn divided_exp_series(a: C64, b: C64, z: f64) -> C64 {
    z * (a * z).exp() * phi1_series((b - a) * z)
}

/// `(e^{bz} - e^{az})/(b - a)`, cancellation-safe near `b = a`.
pub fn divided_exp(a: C64, b: C64, z: f64) -> C64 {
    if ((b - a) * z).norm() < SERIES_THRESHOLD {
        divided_exp_series(a, b, z)
    } else {
        divided_exp_direct(a, b, z)
    }
}

/// First `z`-derivative: `e^{bz} + a D(z)`.
pub fn divided_exp_d1(a: C64, b: C64, z: f64) -> C64 {
    (b * z).exp() + a * divided_exp(a, b, z)
}

/// Second `z`-derivative: `b e^{bz} + a D'(z)`.
pub fn divided_exp_d2(a: C64, b: C64, z: f64) -> C64 {
    b * (b * z).exp() + a * divided_exp_d1(a, b, z)
}

/// Stokes kernel: for `z > 0` the upper form `(e^{-bz} - e^{-az})/(b-a)`,
/// otherwise the lower form `(e^{bz} - e^{az})/(b-a)`.
pub fn stokes_kernel(a: C64, b: C64, z: f64) -> C64 {
    if z > 0.0 {
        divided_exp(a, b, -z)
    } else {
        divided_exp(a, b, z)
    }
}
