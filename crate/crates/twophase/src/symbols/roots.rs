use serde::Serialize;

use crate::{Error, PhysicalParams, Result, SpectralPoint, C64};

/// Decay roots of one mode: `A = |xi'|`, `A+`, `B+`, `B-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharRoots {
    pub a: f64,
    pub a_plus: C64,
    pub b_plus: C64,
    pub b_minus: C64,
    /// `A+^2 - A^2`, `B+^2 - A^2`, `B-^2 - A^2` without cancellation.
    pub sq_a_plus: C64,
    pub sq_b_plus: C64,
    pub sq_b_minus: C64,
}

impl CharRoots {
    /// `A+ B+ - A^2`.
    pub fn den_plus(&self) -> C64 {
        let a2 = self.a * self.a;
        (self.sq_a_plus * self.sq_b_plus + a2 * (self.sq_a_plus + self.sq_b_plus)) / (self.a_plus * self.b_plus + a2)
    }

    /// `B+ - A+`.
    pub fn bp_minus_ap(&self) -> C64 {
        (self.sq_b_plus - self.sq_a_plus) / (self.b_plus + self.a_plus)
    }

    /// `B- - A`.
    pub fn bm_minus_a(&self) -> C64 {
        self.sq_b_minus / (self.b_minus + self.a)
    }

    /// `B+ - A`.
    pub fn bp_minus_a(&self) -> C64 {
        self.sq_b_plus / (self.b_plus + self.a)
    }
}

fn root(name: &'static str, z: C64) -> Result<C64> {
    let r = z.sqrt();
    if !(r.re > 0.0) {
        return Err(Error::BranchDefect { name, value: format!("{r}") });
    }
    Ok(r)
}

/// Principal square roots with strictly positive real part.
pub fn char_roots(pt: &SpectralPoint, params: &PhysicalParams) -> Result<CharRoots> {
    let a = pt.a();
    let a2 = a * a;
    let l = pt.lambda;
    let sq_a_plus = params.gamma1_plus * l / (params.mu_plus + params.nu_plus + pt.delta);
    let sq_b_plus = params.gamma1_plus * l / params.mu_plus;
    let sq_b_minus = params.gamma1_minus * l / params.mu_minus;
    let a_plus = root("A+", sq_a_plus + a2)?;
    let b_plus = root("B+", sq_b_plus + a2)?;
    let b_minus = root("B-", sq_b_minus + a2)?;
    Ok(CharRoots { a, a_plus, b_plus, b_minus, sq_a_plus, sq_b_plus, sq_b_minus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RegionCase;

    fn pt(l: C64, a: f64) -> SpectralPoint {
        SpectralPoint::raw(l, C64::new(0.0, 0.0), &[a], RegionCase::C3)
    }

    #[test]
    fn examples() {
        let p = PhysicalParams::default();
        let r = char_roots(&pt(C64::new(1.0, 0.0), 0.0), &p).unwrap();
        assert!((r.a_plus - C64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!((r.b_plus - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((r.b_minus - C64::new(1.0, 0.0)).norm() < 1e-15);
        let r = char_roots(&pt(C64::new(0.0, 1.0), 0.0), &p).unwrap();
        let h = 0.5f64.sqrt();
        assert!((r.b_minus - C64::new(h, h)).norm() < 1e-15);
        let r = char_roots(&pt(C64::new(1.0, 0.0), 3.0), &p).unwrap();
        assert!((r.b_minus - C64::new(10f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn cancellation_free_differences() {
        let p = PhysicalParams::default();
        let r = char_roots(&pt(C64::new(0.3, 2.0), 0.7), &p).unwrap();
        let a2 = r.a * r.a;
        assert!((r.den_plus() - (r.a_plus * r.b_plus - a2)).norm() < 1e-14);
        assert!((r.bp_minus_ap() - (r.b_plus - r.a_plus)).norm() < 1e-14);
        assert!((r.bm_minus_a() - (r.b_minus - r.a)).norm() < 1e-14);
        assert!((r.sq_b_minus - (r.b_minus * r.b_minus - a2)).norm() < 1e-14);
        // at large A the direct differences lose digits, the stored ones do not
        let r = char_roots(&pt(C64::new(1.0, 0.0), 1e4), &p).unwrap();
        assert!((r.bm_minus_a().re - 1.0 / (r.b_minus.re + 1e4)).abs() < 1e-20);
    }

    #[test]
    fn negative_real_axis_rejected() {
        let p = PhysicalParams::default();
        assert!(char_roots(&pt(C64::new(-4.0, 0.0), 0.0), &p).is_err());
    }
}
