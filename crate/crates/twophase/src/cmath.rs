//! Small complex helpers shared by the symbol and kernel code.

use crate::C64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `e^z - 1` without cancellation for small `|z|`.
pub fn expm1(z: C64) -> C64 {
    let em = z.re.exp_m1();
    let half = (0.5 * z.im).sin();
    let cos_m1 = -2.0 * half * half;
    C64::new(em * z.im.cos() + cos_m1, z.re.exp() * z.im.sin())
}

/// `(e^w - 1)/w` by its Taylor series; used when `|w|` is small.
pub fn phi1_series(w: C64) -> C64 {
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for k in 2..60 {
        term *= w / k as f64;
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

/// `(e^w - 1)/w`, continuous at `w = 0`.
pub fn phi1(w: C64) -> C64 {
    if w.norm() < 1e-3 {
        phi1_series(w)
    } else {
        expm1(w) / w
    }
}

/// Relative difference `|a-b| / max(|a|,|b|)`, zero when both vanish.
pub fn rel_diff(a: C64, b: C64) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}

/// Euclidean norm of a complex vector.
pub fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_finite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}
