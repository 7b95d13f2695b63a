use serde::{Deserialize, Serialize};

use super::families::{mode_symbols, ModeSymbols, DET_FLOOR};
use crate::cmath::I;
use crate::symbols::{divided_exp, divided_exp_d1, divided_exp_d2, CharRoots};
use crate::{Error, PhysicalParams, Result, SpectralPoint, C64};

/// Interface data of one mode: stress jump `h` and velocity jump `k`, each of length `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDataHat {
    pub h: Vec<C64>,
    pub k: Vec<C64>,
}

impl BoundaryDataHat {
    pub fn zeros(n: usize) -> Self {
        Self { h: vec![C64::new(0.0, 0.0); n], k: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn norm(&self) -> f64 {
        crate::cmath::vnorm(&self.h).hypot(crate::cmath::vnorm(&self.k))
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { h: self.h.iter().map(|v| c * v).collect(), k: self.k.iter().map(|v| c * v).collect() }
    }
}

/// Coefficients of the exponential ansatz
///
/// `v+ = alpha+ (e^{-B+ x} - e^{-A+ x}) + beta+ e^{-B+ x}`,
/// `v- = alpha0 (e^{B- x} - e^{A x}) + beta0 e^{B- x} + alphab (e^{-B-(x+b)} - e^{-A(x+b)}) + betab e^{-B-(x+b)}`,
/// `p- = gamma0 e^{A x} + gammab e^{-A(x+b)}`.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientSet {
    pub alpha_plus: Vec<C64>,
    pub beta_plus: Vec<C64>,
    pub alpha_zero: Vec<C64>,
    pub beta_zero: Vec<C64>,
    pub alpha_bottom: Vec<C64>,
    pub beta_bottom: Vec<C64>,
    pub gamma_zero: C64,
    pub gamma_bottom: C64,
    pub data: BoundaryDataHat,
}

/// `i xi'.u' + c u_N`.
pub(crate) fn contract(xi: &[f64], u: &[C64], c: C64) -> C64 {
    let n = u.len();
    xi.iter().zip(&u[..n - 1]).map(|(x, v)| I * *x * v).sum::<C64>() + c * u[n - 1]
}

fn apply(sym: &[Vec<Vec<C64>>; 2], row: usize, data: &BoundaryDataHat) -> C64 {
    (0..data.h.len()).map(|l| sym[0][row][l] * data.h[l] + sym[1][row][l] * data.k[l]).sum()
}

fn apply_vec(sym: &[Vec<C64>; 2], data: &BoundaryDataHat) -> C64 {
    (0..data.h.len()).map(|l| sym[0][l] * data.h[l] + sym[1][l] * data.k[l]).sum()
}

impl CoefficientSet {
    pub fn dim(&self) -> usize {
        self.data.h.len()
    }

    /// All coefficients as one vector in the order
    /// `alpha+, beta+, alpha0, beta0, alphab, betab, gamma0, gammab`.
    pub fn to_vec(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(6 * self.dim() + 2);
        for part in [&self.alpha_plus, &self.beta_plus, &self.alpha_zero, &self.beta_zero, &self.alpha_bottom, &self.beta_bottom] {
            v.extend_from_slice(part);
        }
        v.push(self.gamma_zero);
        v.push(self.gamma_bottom);
        v
    }
}

/// Closed-form coefficients for boundary data `(h, k)` using the default determinant floor.
pub fn solve_coefficients(pt: &SpectralPoint, params: &PhysicalParams, data: &BoundaryDataHat) -> Result<CoefficientSet> {
    let sym = mode_symbols(pt, params, DET_FLOOR)?;
    coefficients_from_symbols(&sym, pt, params, data)
}

/// Coefficients from precomputed symbols.
pub fn coefficients_from_symbols(sym: &ModeSymbols, pt: &SpectralPoint, params: &PhysicalParams, data: &BoundaryDataHat) -> Result<CoefficientSet> {
    let n = pt.dim();
    if data.h.len() != n || data.k.len() != n {
        return Err(Error::Dimension(format!("boundary data must have length {n}")));
    }
    let r = &sym.system.roots;
    let a = r.a;
    let nt = n - 1;
    let y_zero = apply_vec(&sym.p_zero, data);
    let y_bottom = apply_vec(&sym.p_bottom, data);
    let y_plus = apply_vec(&sym.p_plus, data);
    let den = r.den_plus();
    let bma = r.bm_minus_a();
    let mut alpha_plus = vec![C64::new(0.0, 0.0); n];
    let mut alpha_zero = alpha_plus.clone();
    let mut alpha_bottom = alpha_plus.clone();
    for j in 0..nt {
        let z = I * pt.xi[j];
        alpha_plus[j] = -z / den * y_plus;
        alpha_zero[j] = -z / (a * bma) * y_zero;
        alpha_bottom[j] = -z / (a * bma) * y_bottom;
    }
    alpha_plus[nt] = r.a_plus / den * y_plus;
    alpha_zero[nt] = -y_zero / bma;
    alpha_bottom[nt] = y_bottom / bma;
    let pf = -params.mu_minus * (a + r.b_minus) / a;
    let beta_plus = (0..n).map(|jj| apply(&sym.s_plus, jj, data)).collect();
    let beta_zero = (0..n).map(|jj| apply(&sym.s_minus, jj, data)).collect();
    let beta_bottom = (0..n).map(|jj| apply(&sym.s_bottom, jj, data)).collect();
    Ok(CoefficientSet {
        alpha_plus,
        beta_plus,
        alpha_zero,
        beta_zero,
        alpha_bottom,
        beta_bottom,
        gamma_zero: pf * y_zero,
        gamma_bottom: pf * y_bottom,
        data: data.clone(),
    })
}

/// Value, first and second `x_N`-derivative of a vector profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: Vec<C64>,
    pub d1: Vec<C64>,
    pub d2: Vec<C64>,
}

/// Closed-form profiles of one mode.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub point: SpectralPoint,
    pub params: PhysicalParams,
    pub coeffs: CoefficientSet,
    pub roots: CharRoots,
}

/// Builds the evaluators for a coefficient set.
pub fn eval_mode_solution(coeffs: &CoefficientSet, pt: &SpectralPoint, params: &PhysicalParams) -> Result<ModeSolution> {
    let roots = crate::symbols::char_roots(pt, params)?;
    if coeffs.dim() != pt.dim() {
        return Err(Error::Dimension("coefficient set and point differ in dimension".into()));
    }
    Ok(ModeSolution { point: pt.clone(), params: *params, coeffs: coeffs.clone(), roots })
}

impl ModeSolution {
    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    /// Upper velocity on `x_N >= 0`, written as `(B+ - A+) alpha+ M+(x) + beta+ e^{-B+ x}`.
    pub fn v_plus(&self, x: f64) -> Result<Jet> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::Domain(x));
        }
        let r = &self.roots;
        let c = r.bp_minus_ap();
        let (m0, m1, m2) = (divided_exp(r.a_plus, r.b_plus, -x), -divided_exp_d1(r.a_plus, r.b_plus, -x), divided_exp_d2(r.a_plus, r.b_plus, -x));
        let e = (-r.b_plus * x).exp();
        let b = r.b_plus;
        let co = &self.coeffs;
        let mut jet = Jet { value: vec![], d1: vec![], d2: vec![] };
        for jj in 0..self.dim() {
            let (al, be) = (c * co.alpha_plus[jj], co.beta_plus[jj]);
            jet.value.push(al * m0 + be * e);
            jet.d1.push(al * m1 - b * be * e);
            jet.d2.push(al * m2 + b * b * be * e);
        }
        Ok(jet)
    }

    /// Lower velocity on `-b <= x_N <= 0`.
    pub fn v_minus(&self, x: f64) -> Result<Jet> {
        let b = self.params.b;
        if !(x >= -b && x <= 0.0) {
            return Err(Error::Domain(x));
        }
        let r = &self.roots;
        let a = C64::new(r.a, 0.0);
        let bm = r.b_minus;
        let c = r.bm_minus_a();
        let y = -x - b;
        let (m0, m1, m2) = (divided_exp(a, bm, x), divided_exp_d1(a, bm, x), divided_exp_d2(a, bm, x));
        let (t0, t1, t2) = (divided_exp(a, bm, y), -divided_exp_d1(a, bm, y), divided_exp_d2(a, bm, y));
        let e0 = (bm * x).exp();
        let eb = (bm * y).exp();
        let co = &self.coeffs;
        let mut jet = Jet { value: vec![], d1: vec![], d2: vec![] };
        for jj in 0..self.dim() {
            let (r0, s0, rb, sb) = (c * co.alpha_zero[jj], co.beta_zero[jj], c * co.alpha_bottom[jj], co.beta_bottom[jj]);
            jet.value.push(r0 * m0 + s0 * e0 + rb * t0 + sb * eb);
            jet.d1.push(r0 * m1 + bm * s0 * e0 + rb * t1 - bm * sb * eb);
            jet.d2.push(r0 * m2 + bm * bm * s0 * e0 + rb * t2 + bm * bm * sb * eb);
        }
        Ok(jet)
    }

    /// Lower pressure `[p, p', p'']`.
    pub fn p_minus(&self, x: f64) -> Result<[C64; 3]> {
        let b = self.params.b;
        if !(x >= -b && x <= 0.0) {
            return Err(Error::Domain(x));
        }
        let a = self.roots.a;
        let u = self.coeffs.gamma_zero * (a * x).exp();
        let w = self.coeffs.gamma_bottom * (-a * (x + b)).exp();
        Ok([u + w, a * (u - w), a * a * (u + w)])
    }
}
