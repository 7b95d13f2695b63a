use serde::Serialize;

use super::kernel::divided_exp;
use super::roots::{char_roots, CharRoots};
use crate::{Error, PhysicalParams, Result, SpectralPoint, C64};

/// Every ingredient of the 2x2 interface system of one mode.
#[derive(Debug, Clone, Serialize)]
pub struct LopatinskiSystem {
    pub roots: CharRoots,
    /// `e^{-B- b}`.
    pub exp_bb: C64,
    /// `e^{-A b}`.
    pub exp_ab: f64,
    /// Lower Stokes kernel at the bottom, `M-(-b)`.
    pub m_b: C64,
    pub l11_plus: C64,
    pub l11_zero: C64,
    pub l11_bottom: C64,
    pub l12_plus: C64,
    pub l12_zero: C64,
    pub l12_bottom: C64,
    pub l21_plus: C64,
    pub l21_zero: C64,
    pub l21_bottom: C64,
    pub l22_plus: C64,
    pub l22_zero: C64,
    pub l22_bottom: C64,
    pub frak_l1: C64,
    pub frak_l2: C64,
    pub n11: C64,
    pub n12: C64,
    pub n21: C64,
    pub n22: C64,
    pub l11: C64,
    pub l12: C64,
    pub l21: C64,
    pub l22: C64,
    pub det: C64,
    /// `mu+ B+ (1 - e^{-2B- b}) + mu- B- (1 + e^{-2B- b})`.
    pub d_aux: C64,
    pub n0_plus: C64,
    pub n1_plus: C64,
}

impl LopatinskiSystem {
    /// `L~_jk = L_jk^+ + L_jk^{0-}` in row-major order.
    pub fn tilde(&self) -> [C64; 4] {
        [
            self.l11_plus + self.l11_zero,
            self.l12_plus + self.l12_zero,
            self.l21_plus + self.l21_zero,
            self.l22_plus + self.l22_zero,
        ]
    }

    /// `det L~ + h`, with `h` collecting all correction products.
    pub fn det_whole(&self) -> C64 {
        let [t11, t12, t21, t22] = self.tilde();
        let h = t11 * self.n22 + t22 * self.n11 + self.n11 * self.n22 - t12 * self.n21 - t21 * self.n12 - self.n12 * self.n21;
        t11 * t22 - t12 * t21 + h
    }

    /// The leading part `H1` of the low-frequency split.
    pub fn h1_leading(&self) -> C64 {
        let bm = self.roots.b_minus;
        (self.l11_plus + self.l11_zero) * (self.l22_zero + bm * self.m_b * self.l22_bottom)
    }

    /// `H1 + h1`, an independent assembly of the determinant.
    pub fn det_split(&self) -> C64 {
        let a = self.roots.a;
        let bm = self.roots.b_minus;
        let (e, m) = (self.exp_bb, self.m_b);
        let x = self.l22_zero + bm * m * self.l22_bottom;
        let h1 = self.l11
            * (self.l22_plus * (1.0 - e * e + 2.0 * e * bm * m) - self.l22_bottom * e
                - (a * self.l21_plus + self.l22_plus) * (a + bm) * bm * m * m
                - self.l21_bottom * a * bm * m)
            + x * self.n11
            - self.l12 * self.l21;
        self.h1_leading() + h1
    }

    /// Upper-phase entries rewritten through the auxiliary symbol `P`.
    pub fn plus_entries_via_p(&self, pt: &SpectralPoint, params: &PhysicalParams) -> [C64; 4] {
        let r = &self.roots;
        let (mu, nu, d) = (params.mu_plus, params.nu_plus, pt.delta);
        let a = r.a;
        let s = 2.0 * mu + nu + d;
        let p = (r.a_plus * r.b_plus + a * a) / (params.gamma1_plus * pt.lambda / s + a * a);
        let f = (mu + nu + d) / s;
        [
            -mu * f * r.a_plus * p,
            -mu * a * a * (2.0 - f * p),
            -(2.0 * mu * (nu + d) / s * r.a_plus / (r.b_plus + r.a_plus) - mu * (nu - mu + d) / s) * a * p,
            -mu * f * a * r.b_plus * p,
        ]
    }
}

/// Assembles the interface system of one mode; requires `A > 0`.
pub fn lopatinski_system(pt: &SpectralPoint, params: &PhysicalParams) -> Result<LopatinskiSystem> {
    let a = pt.a();
    if a == 0.0 {
        return Err(Error::ZeroMode);
    }
    let roots = char_roots(pt, params)?;
    let (ap, bp, bm) = (roots.a_plus, roots.b_plus, roots.b_minus);
    let (mup, mum, nu, d) = (params.mu_plus, params.mu_minus, params.nu_plus, pt.delta);
    let b = params.b;
    let a2 = a * a;
    let ac = C64::new(a, 0.0);
    let exp_bb = (-bm * b).exp();
    let exp_ab = (-a * b).exp();
    let m_b = divided_exp(ac, bm, -b);
    let den = roots.den_plus();
    let bm_a = roots.bm_minus_a();

    let l11_plus = -mup * ap * roots.sq_b_plus / den;
    let l11_zero = -mum * (a + bm);
    let l11_bottom = mum * ((a + bm) * exp_bb + 2.0 * a2 * m_b);
    let l12_plus = -mup * a2 * (2.0 * den - roots.sq_b_plus) / den;
    let l12_zero = -mum * bm_a * a;
    let l12_bottom = -mum * (2.0 * a2 * bm * m_b + bm_a * a * exp_bb);
    let l21_plus = -a * (2.0 * mup * ap * roots.bp_minus_ap() - (nu - mup + d) * roots.sq_a_plus) / den;
    let l21_zero = -mum * bm_a;
    let l21_bottom = 2.0 * mum * a * bm * m_b - mum * bm_a * exp_ab;
    let l22_plus = -(mup + nu + d) * a * bp * roots.sq_a_plus / den;
    let l22_zero = -mum * (a + bm) * bm;
    let l22_bottom = -2.0 * mum * a2 * bm * m_b + mum * (bm + a) * bm * exp_ab;

    let m2 = m_b * m_b;
    let frak_l1 = -(a * l11_plus + l12_plus) * (a + bm) * m2 - l11_bottom * a * m_b + l12_bottom * m_b;
    let frak_l2 = -(a * l21_plus + l22_plus) * (a + bm) * m2 - l21_bottom * a * m_b + l22_bottom * m_b;

    let first = -exp_bb * exp_bb - 2.0 * exp_bb * a * m_b;
    let second = -exp_bb * exp_bb + 2.0 * exp_bb * bm * m_b;
    let n11 = l11_plus * first - l11_bottom * exp_bb + frak_l1;
    let n12 = l12_plus * second - l12_bottom * exp_bb + bm * frak_l1;
    let n21 = l21_plus * first - l21_bottom * exp_bb + frak_l2;
    let n22 = l22_plus * second - l22_bottom * exp_bb + bm * frak_l2;

    let l11 = l11_plus * (1.0 + first) + l11_zero - l11_bottom * exp_bb + frak_l1;
    let l12 = l12_plus * (1.0 + second) + l12_zero - l12_bottom * exp_bb + bm * frak_l1;
    let l21 = l21_plus * (1.0 + first) + l21_zero - l21_bottom * exp_bb + frak_l2;
    let l22 = l22_plus * (1.0 + second) + l22_zero - l22_bottom * exp_bb + bm * frak_l2;
    let det = l11 * l22 - l12 * l21;

    let e2 = exp_bb * exp_bb;
    let d_aux = mup * bp * (1.0 - e2) + mum * bm * (1.0 + e2);
    let n0_plus = roots.bp_minus_a() * (a + bm) * m2 + 1.0 - e2 - 2.0 * exp_bb * a * m_b;
    let n1_plus = (bp + bm) * (1.0 - e2) + 2.0 * bm * roots.bp_minus_a() * m_b * exp_bb;

    Ok(LopatinskiSystem {
        roots,
        exp_bb,
        exp_ab,
        m_b,
        l11_plus,
        l11_zero,
        l11_bottom,
        l12_plus,
        l12_zero,
        l12_bottom,
        l21_plus,
        l21_zero,
        l21_bottom,
        l22_plus,
        l22_zero,
        l22_bottom,
        frak_l1,
        frak_l2,
        n11,
        n12,
        n21,
        n22,
        l11,
        l12,
        l21,
        l22,
        det,
        d_aux,
        n0_plus,
        n1_plus,
    })
}

/// `det L` of one mode.
pub fn det_l(pt: &SpectralPoint, params: &PhysicalParams) -> Result<C64> {
    Ok(lopatinski_system(pt, params)?.det)
}

/// Closed form of the determinant in the limit `A -> 0`.
pub fn det_l_at_zero_mode(lambda: C64, params: &PhysicalParams) -> C64 {
    let sl = lambda.sqrt();
    let e = (-2.0 * params.b * (params.gamma1_minus * lambda / params.mu_minus).sqrt()).exp();
    2.0 * params.gamma1_minus
        * lambda
        * sl
        * ((params.mu_plus * params.gamma1_plus).sqrt() * (1.0 - e) + (params.mu_minus * params.gamma1_minus).sqrt() * (1.0 + e))
}

/// `|det L| / (|lambda|^{1/2} + A)^3`.
pub fn det_bound_ratio(pt: &SpectralPoint, params: &PhysicalParams) -> Result<f64> {
    let det = det_l(pt, params)?;
    Ok(det.norm() / pt.scale().powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmath::rel_diff;
    use crate::RegionCase;

    fn unit_pt(l: f64, a: f64) -> SpectralPoint {
        SpectralPoint::raw(C64::new(l, 0.0), C64::new(0.0, 0.0), &[a], RegionCase::C3)
    }

    #[test]
    fn l12_zero_example() {
        // A = 1 and B- = 2 happen at lambda = 3 with unit parameters.
        let p = PhysicalParams::default();
        let s = lopatinski_system(&unit_pt(3.0, 1.0), &p).unwrap();
        assert!((s.roots.b_minus - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((s.l12_zero - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_mode_examples() {
        let p = PhysicalParams::default();
        assert!((det_l_at_zero_mode(C64::new(1.0, 0.0), &p) - C64::new(4.0, 0.0)).norm() < 1e-14);
        assert!((det_l_at_zero_mode(C64::new(4.0, 0.0), &p) - C64::new(32.0, 0.0)).norm() < 1e-13);
        let v = det_l_at_zero_mode(C64::new(2.7, 0.0), &p);
        assert!(v.re > 0.0 && v.im == 0.0);
    }

    #[test]
    fn zero_mode_rejected() {
        let p = PhysicalParams::default();
        assert_eq!(lopatinski_system(&unit_pt(1.0, 0.0), &p).err(), Some(Error::ZeroMode));
    }

    #[test]
    fn det_paths_agree() {
        let p = PhysicalParams::default();
        let s = lopatinski_system(&unit_pt(1.0, 1.0), &p).unwrap();
        assert!(rel_diff(s.det, s.det_split()) < 1e-12);
        assert!(rel_diff(s.det, s.det_whole()) < 1e-12);
    }

    #[test]
    fn p_form_identities() {
        let p = PhysicalParams { mu_plus: 1.3, nu_plus: 0.7, gamma1_plus: 1.1, ..Default::default() };
        let pt = SpectralPoint::raw(C64::new(2.0, 1.5), C64::new(0.2, 0.1), &[0.8], RegionCase::C3);
        let s = lopatinski_system(&pt, &p).unwrap();
        let v = s.plus_entries_via_p(&pt, &p);
        for (x, y) in [s.l11_plus, s.l12_plus, s.l21_plus, s.l22_plus].iter().zip(v) {
            assert!(rel_diff(*x, y) < 1e-10);
        }
    }

    #[test]
    fn deep_layer_corrections_vanish() {
        let p = PhysicalParams { b: 50.0, ..Default::default() };
        let s = lopatinski_system(&unit_pt(1.0, 1.0), &p).unwrap();
        for v in [s.n11, s.n12, s.n21, s.n22, s.frak_l1, s.frak_l2, s.l11_bottom, s.l12_bottom] {
            assert!(v.norm() < 1e-15, "{v}");
        }
        // the bottom entries carrying e^{-Ab} stay small but not below 1e-15 at A = 1
        let t = s.tilde();
        assert!(rel_diff(s.l11, t[0]) < 1e-15 && rel_diff(s.l22, t[3]) < 1e-15);
    }

    #[test]
    fn straight_line_transcription() {
        let p = PhysicalParams::default();
        let s = lopatinski_system(&unit_pt(1.0, 1.0), &p).unwrap();
        // unit parameters, lambda = 1, A = 1, delta = 0
        let a = C64::new(1.0, 0.0);
        let ap = C64::new(1.5f64.sqrt(), 0.0);
        let bp = C64::new(2f64.sqrt(), 0.0);
        let bm = bp;
        let m = ((-bm).exp() - (-a).exp()) / (bm - a);
        let eb = (-bm).exp();
        let ea = (-a).exp();
        let den = ap * bp - a * a;
        let want = [
            (s.l11_plus, -ap * (bp * bp - a * a) / den),
            (s.l11_zero, -(a + bm)),
            (s.l11_bottom, (a + bm) * eb + 2.0 * a * a * m),
            (s.l12_plus, -a * a * (2.0 * ap * bp - a * a - bp * bp) / den),
            (s.l12_zero, -(bm - a) * a),
            (s.l12_bottom, -(2.0 * a * a * bm * m + (bm - a) * a * eb)),
            (s.l21_plus, -a * (2.0 * ap * (bp - ap) / den - 0.0 * (ap * ap - a * a) / den)),
            (s.l21_zero, -(bm - a)),
            (s.l21_bottom, 2.0 * a * bm * m - (bm - a) * ea),
            (s.l22_plus, -2.0 * a * bp * (ap * ap - a * a) / den),
            (s.l22_zero, -(a + bm) * bm),
            (s.l22_bottom, -2.0 * a * a * bm * m + (bm + a) * bm * ea),
        ];
        for (k, (got, w)) in want.iter().enumerate() {
            assert!(rel_diff(*got, *w) < 1e-12, "entry {k}: {got} vs {w}");
        }
    }

    #[test]
    fn zero_mode_limit() {
        let p = PhysicalParams::default();
        for l in [C64::new(1.0, 0.0), C64::new(2.0, 3.0), C64::new(50.0, -20.0)] {
            let d = |a: f64| det_l(&SpectralPoint::c1(l, &[a], &p).unwrap(), &p).unwrap();
            let (a1, a2) = (1e-3, 1e-4);
            let lim = (a1 * d(a2) - a2 * d(a1)) / (a1 - a2);
            // the closed form is the delta-independent A = 0 value
            assert!(rel_diff(lim, det_l_at_zero_mode(l, &p)) < 1e-6);
        }
    }
}
