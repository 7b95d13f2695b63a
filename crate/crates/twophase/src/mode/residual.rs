use serde::Serialize;

use super::families::{mode_symbols, DET_FLOOR};
use super::solution::{contract, CoefficientSet, ModeSolution};
use crate::cmath::I;
use crate::symbols::divided_exp;
use crate::{PhysicalParams, Result, SpectralPoint, C64};

/// Chebyshev points per interval used by [`residual_report`].
pub const CHEB_POINTS: usize = 33;

/// Interior Chebyshev points of `[lo, hi]` plus both endpoints.
pub fn chebyshev_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let mut xs: Vec<f64> = (0..n).map(|k| mid + half * (std::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64).cos()).collect();
    xs.push(lo);
    xs.push(hi);
    xs
}

/// Worst normalized defect per named relation.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Checker {
    pub entries: Vec<(String, f64)>,
}

impl Checker {
    /// Records `|sum(terms) - rhs| / (sum |terms| + |rhs|)`, zero when all vanish.
    pub fn add(&mut self, name: &str, terms: &[C64], rhs: C64) {
        let s: C64 = terms.iter().sum();
        let scale = terms.iter().map(|t| t.norm()).sum::<f64>() + rhs.norm();
        let err = if scale == 0.0 { 0.0 } else { (s - rhs).norm() / scale };
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(e) => e.1 = e.1.max(err),
            None => self.entries.push((name.to_string(), err)),
        }
    }

    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == name).map(|e| e.1)
    }
}

/// Per-group largest residual and largest term magnitude.
#[derive(Default)]
pub(crate) struct Groups {
    acc: Vec<(String, f64, f64)>,
}

impl Groups {
    pub(crate) fn add(&mut self, name: &str, res: f64, scale: f64) {
        match self.acc.iter_mut().find(|e| e.0 == name) {
            Some(e) => {
                e.1 = e.1.max(res);
                e.2 = e.2.max(scale);
            }
            None => self.acc.push((name.to_string(), res, scale)),
        }
    }

    pub(crate) fn finish(self) -> Checker {
        let entries = self.acc.into_iter().map(|(n, r, s)| (n, if r == 0.0 { 0.0 } else { r / s })).collect();
        Checker { entries }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub groups: Checker,
    /// Largest normalized residual over all groups.
    pub normalized: f64,
    /// Largest raw residual divided by the data norm.
    pub max_abs_over_data: f64,
    pub upper_extent: f64,
}

/// Interior residuals of the reduced equations on Chebyshev samples of both
/// intervals and the residuals of the interface and bottom conditions.
pub fn residual_report(sol: &ModeSolution) -> Result<ResidualReport> {
    let p = &sol.params;
    let pt = &sol.point;
    let r = &sol.roots;
    let n = sol.dim();
    let nt = n - 1;
    let a2 = r.a * r.a;
    let (l, d) = (pt.lambda, pt.delta);
    let decay = r.a_plus.re.min(r.b_plus.re);
    let upper_extent = (20.0 / decay).clamp(1.0, 200.0);
    let mut groups = Groups::default();
    let mut max_abs = 0.0f64;
    let mut track = |g: &mut Groups, name: &str, terms: &[C64], rhs: C64| {
        let s: C64 = terms.iter().sum();
        max_abs = max_abs.max((s - rhs).norm());
        g.add(name, (s - rhs).norm(), terms.iter().map(|t| t.norm()).sum::<f64>() + rhs.norm());
    };
    let zero = C64::new(0.0, 0.0);

    for x in chebyshev_samples(0.0, upper_extent, CHEB_POINTS) {
        let v = sol.v_plus(x)?;
        let div = contract(&pt.xi, &v.value, zero) + v.d1[nt];
        let ddiv = contract(&pt.xi, &v.d1, zero) + v.d2[nt];
        for j in 0..nt {
            let z = I * pt.xi[j];
            let terms = [(p.gamma1_plus * l + p.mu_plus * a2) * v.value[j], -p.mu_plus * v.d2[j], -(p.nu_plus + d) * z * div];
            track(&mut groups, "upper tangential momentum", &terms, zero);
        }
        let terms = [(p.gamma1_plus * l + p.mu_plus * a2) * v.value[nt], -p.mu_plus * v.d2[nt], -(p.nu_plus + d) * ddiv];
        track(&mut groups, "upper normal momentum", &terms, zero);
    }
    for x in chebyshev_samples(-p.b, 0.0, CHEB_POINTS) {
        let v = sol.v_minus(x)?;
        let pr = sol.p_minus(x)?;
        for j in 0..nt {
            let z = I * pt.xi[j];
            let terms = [(p.gamma1_minus * l + p.mu_minus * a2) * v.value[j], -p.mu_minus * v.d2[j], z * pr[0]];
            track(&mut groups, "lower tangential momentum", &terms, zero);
        }
        let terms = [(p.gamma1_minus * l + p.mu_minus * a2) * v.value[nt], -p.mu_minus * v.d2[nt], pr[1]];
        track(&mut groups, "lower normal momentum", &terms, zero);
        let mut terms: Vec<C64> = (0..nt).map(|j| I * pt.xi[j] * v.value[j]).collect();
        terms.push(v.d1[nt]);
        track(&mut groups, "lower divergence", &terms, zero);
    }

    let up = sol.v_plus(0.0)?;
    let lo = sol.v_minus(0.0)?;
    let pr = sol.p_minus(0.0)?;
    let data = &sol.coeffs.data;
    for j in 0..nt {
        let z = I * pt.xi[j];
        let terms = [p.mu_plus * up.d1[j], p.mu_plus * z * up.value[nt], -p.mu_minus * lo.d1[j], -p.mu_minus * z * lo.value[nt]];
        track(&mut groups, "tangential stress", &terms, data.h[j]);
    }
    let div_up = contract(&pt.xi, &up.value, zero) + up.d1[nt];
    let terms = [2.0 * p.mu_plus * up.d1[nt], (p.nu_plus - p.mu_plus + d) * div_up, -2.0 * p.mu_minus * lo.d1[nt], pr[0]];
    track(&mut groups, "normal stress", &terms, data.h[nt]);
    for jj in 0..n {
        track(&mut groups, "velocity jump", &[up.value[jj], -lo.value[jj]], data.k[jj]);
    }
    // the bottom trace is compared against the size of the lower profile
    let bottom = sol.v_minus(-p.b)?;
    let scale = chebyshev_samples(-p.b, 0.0, 8)
        .into_iter()
        .map(|x| sol.v_minus(x).map(|v| crate::cmath::vnorm(&v.value)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    for v in &bottom.value {
        max_abs = max_abs.max(v.norm());
        groups.add("bottom", v.norm(), scale);
    }
    let chk = groups.finish();
    let dn = data.norm();
    Ok(ResidualReport {
        normalized: chk.worst(),
        groups: chk,
        max_abs_over_data: if dn == 0.0 { max_abs } else { max_abs / dn },
        upper_extent,
    })
}

/// Verifies the algebraic relations linking coefficients, symbols and data.
pub fn coefficient_identity_check(co: &CoefficientSet, pt: &SpectralPoint, params: &PhysicalParams) -> Result<Checker> {
    let sym = mode_symbols(pt, params, DET_FLOOR)?;
    let sys = &sym.system;
    let r = &sys.roots;
    let n = pt.dim();
    let nt = n - 1;
    let a = r.a;
    let ac = C64::new(a, 0.0);
    let (ap, bp, bm) = (r.a_plus, r.b_plus, r.b_minus);
    let (mup, mum, nu, d) = (params.mu_plus, params.mu_minus, params.nu_plus, pt.delta);
    let zero = C64::new(0.0, 0.0);
    let xi = &pt.xi;
    let ct = |u: &[C64]| contract(xi, u, zero);
    let iz = |j: usize| I * xi[j];
    let mut chk = Checker::default();

    let (apl, bpl) = (&co.alpha_plus, &co.beta_plus);
    let (a0, b0, ab, bb) = (&co.alpha_zero, &co.beta_zero, &co.alpha_bottom, &co.beta_bottom);
    let (g0, gb) = (co.gamma_zero, co.gamma_bottom);
    let sq_ab = r.sq_a_plus - r.sq_b_plus;
    let sq_m = -r.sq_b_minus;

    // interior relations
    let t = ct(apl) - ap * apl[nt];
    for j in 0..nt {
        chk.add("interior upper tangential", &[mup * sq_ab * apl[j], (nu + d) * iz(j) * t], zero);
        chk.add("interior lower tangential", &[mum * sq_m * a0[j], iz(j) * g0], zero);
        chk.add("interior lower tangential", &[mum * sq_m * ab[j], iz(j) * gb], zero);
    }
    chk.add("interior upper normal", &[mup * sq_ab * apl[nt], -(nu + d) * ap * t], zero);
    chk.add("interior upper divergence", &[ct(apl), -bp * apl[nt], ct(bpl), -bp * bpl[nt]], zero);
    chk.add("interior lower normal", &[mum * sq_m * a0[nt], a * g0], zero);
    chk.add("interior lower normal", &[mum * sq_m * ab[nt], -a * gb], zero);
    chk.add("interior lower divergence", &[ct(a0), bm * a0[nt], ct(b0), bm * b0[nt]], zero);
    chk.add("interior lower divergence", &[ct(ab), -bm * ab[nt], ct(bb), -bm * bb[nt]], zero);
    chk.add("interior lower divergence", &[ct(a0), a * a0[nt]], zero);
    chk.add("interior lower divergence", &[ct(ab), -a * ab[nt]], zero);

    // explicit alpha/gamma expressions
    let den = r.den_plus();
    let bma = r.bm_minus_a();
    let yp = ct(bpl) - bp * bpl[nt];
    let y0 = ct(b0) + bm * b0[nt];
    let yb = ct(bb) - bm * bb[nt];
    chk.add("alpha expressions", &[ct(apl)], a * a / den * yp);
    chk.add("alpha expressions", &[apl[nt]], ap / den * yp);
    chk.add("alpha expressions", &[ct(a0)], a / bma * y0);
    chk.add("alpha expressions", &[a0[nt]], -y0 / bma);
    chk.add("alpha expressions", &[ct(ab)], a / bma * yb);
    chk.add("alpha expressions", &[ab[nt]], yb / bma);
    chk.add("gamma expressions", &[g0], -mum * (a + bm) / a * y0);
    chk.add("gamma expressions", &[gb], -mum * (a + bm) / a * yb);

    // boundary relations
    let e = sys.exp_bb;
    let ea = C64::new(sys.exp_ab, 0.0);
    let diff = bma * sys.m_b; // e^{-B- b} - e^{-A b}
    let bpap = r.bp_minus_ap();
    let h = &co.data.h;
    let k = &co.data.k;
    for j in 0..nt {
        let terms = [
            -mup * bpap * apl[j],
            -mup * bp * bpl[j],
            mup * iz(j) * bpl[nt],
            -mum * bma * a0[j],
            -mum * bm * b0[j],
            -mum * (-bm * e + a * ea) * ab[j],
            mum * bm * e * bb[j],
            -mum * iz(j) * b0[nt],
            -mum * iz(j) * diff * ab[nt],
            -mum * iz(j) * e * bb[nt],
        ];
        chk.add("boundary tangential stress", &terms, h[j]);
    }
    let terms = [
        -2.0 * mup * bpap * apl[nt],
        -2.0 * mup * bp * bpl[nt],
        (nu - mup + d) * ct(bpl),
        -(nu - mup + d) * bpap * apl[nt],
        -(nu - mup + d) * bp * bpl[nt],
        -2.0 * mum * bma * a0[nt],
        -2.0 * mum * bm * b0[nt],
        -2.0 * mum * (-bm * e + a * ea) * ab[nt],
        2.0 * mum * bm * e * bb[nt],
        g0,
        ea * gb,
    ];
    chk.add("boundary normal stress", &terms, h[nt]);
    for jj in 0..n {
        chk.add("boundary velocity jump", &[bpl[jj], -b0[jj], -diff * ab[jj], -e * bb[jj]], k[jj]);
        chk.add("boundary bottom", &[diff * a0[jj], e * b0[jj], bb[jj]], zero);
    }

    // reduction onto the 2x2 system
    let terms = [
        sys.l11_plus * ct(bpl),
        sys.l11_zero * ct(b0),
        sys.l11_bottom * ct(bb),
        sys.l12_plus * bpl[nt],
        sys.l12_zero * b0[nt],
        sys.l12_bottom * bb[nt],
    ];
    chk.add("reduced tangential", &terms, ct(h));
    let terms = [
        sys.l21_plus * ct(bpl),
        sys.l21_zero * ct(b0),
        sys.l21_bottom * ct(bb),
        sys.l22_plus * bpl[nt],
        sys.l22_zero * b0[nt],
        sys.l22_bottom * bb[nt],
    ];
    chk.add("reduced normal", &terms, ac * h[nt]);

    // combined contractions through the P symbols
    let apply_vec = |s: &[Vec<C64>; 2]| -> C64 { (0..n).map(|l| s[0][l] * h[l] + s[1][l] * k[l]).sum() };
    chk.add("contraction plus", &[yp], apply_vec(&sym.p_plus));
    chk.add("contraction zero", &[y0], apply_vec(&sym.p_zero));
    chk.add("contraction bottom", &[yb], apply_vec(&sym.p_bottom));

    // profile symbols against the coefficients
    let apply = |s: &[Vec<Vec<C64>>; 2], row: usize| -> C64 { (0..n).map(|l| s[0][row][l] * h[l] + s[1][row][l] * k[l]).sum() };
    for jj in 0..n {
        chk.add("symbol R+", &[apply(&sym.r_plus, jj)], bpap * apl[jj]);
        chk.add("symbol R-", &[apply(&sym.r_minus, jj)], bma * a0[jj]);
        chk.add("symbol T-", &[apply(&sym.t_minus, jj)], bma * ab[jj]);
        chk.add("symbol S+", &[apply(&sym.s_plus, jj)], bpl[jj]);
        chk.add("symbol S-", &[apply(&sym.s_minus, jj)], b0[jj]);
        chk.add("symbol Sb", &[apply(&sym.s_bottom, jj)], bb[jj]);
    }
    chk.add("symbol pressure", &[apply_vec(&sym.pres_zero)], g0);
    chk.add("symbol pressure", &[apply_vec(&sym.pres_bottom)], gb);
    // the stored bottom kernel matches the direct definition
    chk.add("bottom kernel", &[sys.m_b], divided_exp(ac, bm, -params.b));
    Ok(chk)
}
