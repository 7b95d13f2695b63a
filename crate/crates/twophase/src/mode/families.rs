use serde::Serialize;

use crate::cmath::I;
use crate::symbols::{lopatinski_system, LopatinskiSystem};
use crate::{Error, PhysicalParams, Result, SpectralPoint, C64};

/// Smallest tangential frequency accepted by the closed-form solver.
pub const A_MIN: f64 = 1e-6;

/// Default floor for `|det L| / (|lambda|^{1/2}+A)^3`.
pub const DET_FLOOR: f64 = 1e-10;

/// `[J][l]` array of symbols.
pub type SymbolMatrix = Vec<Vec<C64>>;

/// All data-to-coefficient symbols of one mode. Index `[0]` multiplies `h`,
/// index `[1]` multiplies `k`.
#[derive(Debug, Clone, Serialize)]
pub struct ModeSymbols {
    pub system: LopatinskiSystem,
    /// `P^0_{l,i}`, coefficients of `i xi'.beta0' + B- beta0_N`.
    pub p_zero: [Vec<C64>; 2],
    /// `P^b_{l,i}`, coefficients of `i xi'.betab' - B- betab_N`.
    pub p_bottom: [Vec<C64>; 2],
    /// `P^+_{l,i}`, coefficients of `i xi'.beta+' - B+ beta+_N`.
    pub p_plus: [Vec<C64>; 2],
    /// Pressure symbols `p^0_{l,i}` and `p^b_{l,i}`.
    pub pres_zero: [Vec<C64>; 2],
    pub pres_bottom: [Vec<C64>; 2],
    pub r_plus: [SymbolMatrix; 2],
    pub r_minus: [SymbolMatrix; 2],
    pub t_minus: [SymbolMatrix; 2],
    pub s_plus: [SymbolMatrix; 2],
    pub s_minus: [SymbolMatrix; 2],
    pub s_bottom: [SymbolMatrix; 2],
}

impl ModeSymbols {
    /// Every scalar symbol in a fixed order, paired with its claimed order and a label.
    pub fn flatten(&self) -> Vec<(String, f64, C64)> {
        let mut out = Vec::new();
        let n = self.p_zero[0].len();
        for i in 0..2 {
            let s = i as f64;
            for l in 0..n {
                out.push((format!("p0[{l},{i}]"), s, self.pres_zero[i][l]));
                out.push((format!("pb[{l},{i}]"), s, self.pres_bottom[i][l]));
            }
            for (name, fam, ord) in [
                ("R+", &self.r_plus, s),
                ("R-", &self.r_minus, s),
                ("T-", &self.t_minus, s),
                ("S+", &self.s_plus, s - 1.0),
                ("S-", &self.s_minus, s - 1.0),
                ("Sb", &self.s_bottom, s - 1.0),
            ] {
                for (jj, row) in fam[i].iter().enumerate() {
                    for (l, v) in row.iter().enumerate() {
                        out.push((format!("{name}[{jj},{l},{i}]"), ord, *v));
                    }
                }
            }
        }
        out
    }
}

fn zeros(n: usize) -> SymbolMatrix {
    vec![vec![C64::new(0.0, 0.0); n]; n]
}

/// Evaluates every symbol family for one mode.
pub fn mode_symbols(pt: &SpectralPoint, params: &PhysicalParams, det_floor: f64) -> Result<ModeSymbols> {
    let a = pt.a();
    if a == 0.0 {
        return Err(Error::ZeroMode);
    }
    if a < A_MIN {
        return Err(Error::SmallFrequency(a));
    }
    let sys = lopatinski_system(pt, params)?;
    let ratio = sys.det.norm() / pt.scale().powi(3);
    if !(ratio >= det_floor) {
        return Err(Error::IllConditioned { ratio, floor: det_floor });
    }
    let r = sys.roots;
    let n = pt.dim();
    let nt = n - 1;
    let (mup, mum) = (params.mu_plus, params.mu_minus);
    let (bp, bm, ap) = (r.b_plus, r.b_minus, r.a_plus);
    let det = sys.det;
    let (l11, l12, l21, l22) = (sys.l11, sys.l12, sys.l21, sys.l22);
    let (p11, p12, p21, p22) = (sys.l11_plus, sys.l12_plus, sys.l21_plus, sys.l22_plus);
    let (e, m) = (sys.exp_bb, sys.m_b);
    let q = (a + bm) * m;
    let ixi: Vec<C64> = pt.xi.iter().map(|x| I * *x).collect();

    // Cramer coefficients of X1 = i xi'.beta0' and X2 = beta0_N
    // X1 = [c1h . i xi'.h' + c1n h_N + c1k . i xi'.k' + c1kn k_N] / det
    let c1h = l22;
    let c1n = -a * l12;
    let c1k = -(l22 * p11 - l12 * p21);
    let c1kn = -(l22 * p12 - l12 * p22);
    let c2h = -l21;
    let c2n = a * l11;
    let c2k = l21 * p11 - l11 * p21;
    let c2kn = l21 * p12 - l11 * p22;

    // Y = u X1 + w X2, expanded per data slot
    let combine = |u: C64, w: C64| -> [Vec<C64>; 2] {
        let mut h = vec![C64::new(0.0, 0.0); n];
        let mut k = vec![C64::new(0.0, 0.0); n];
        for j in 0..nt {
            h[j] = (u * c1h + w * c2h) * ixi[j] / det;
            k[j] = (u * c1k + w * c2k) * ixi[j] / det;
        }
        h[nt] = (u * c1n + w * c2n) / det;
        k[nt] = (u * c1kn + w * c2kn) / det;
        [h, k]
    };
    let one = C64::new(1.0, 0.0);
    let p_zero = combine(one, bm);
    let p_bottom = combine(-(q + e), -(q - e) * bm);
    let x2 = combine(C64::new(0.0, 0.0), one);

    let (n0, n1) = (sys.n0_plus, sys.n1_plus);
    let mut p_plus = [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]];
    for i in 0..2 {
        for l in 0..n {
            p_plus[i][l] = n0 * p_zero[i][l] - n1 * x2[i][l];
        }
    }
    for j in 0..nt {
        p_plus[1][j] += ixi[j];
    }
    p_plus[1][nt] -= bp;

    let pf = -mum * (a + bm) / a;
    let pres_zero = [p_zero[0].iter().map(|v| pf * v).collect(), p_zero[1].iter().map(|v| pf * v).collect()];
    let pres_bottom = [p_bottom[0].iter().map(|v| pf * v).collect(), p_bottom[1].iter().map(|v| pf * v).collect()];

    let den = r.den_plus();
    let bpap = r.bp_minus_ap();
    let mut r_plus = [zeros(n), zeros(n)];
    let mut r_minus = [zeros(n), zeros(n)];
    let mut t_minus = [zeros(n), zeros(n)];
    for i in 0..2 {
        for l in 0..n {
            for j in 0..nt {
                r_plus[i][j][l] = -bpap * ixi[j] / den * p_plus[i][l];
                r_minus[i][j][l] = -ixi[j] / a * p_zero[i][l];
                t_minus[i][j][l] = -ixi[j] / a * p_bottom[i][l];
            }
            r_plus[i][nt][l] = bpap * ap / den * p_plus[i][l];
            r_minus[i][nt][l] = -p_zero[i][l];
            t_minus[i][nt][l] = p_bottom[i][l];
        }
    }

    let mut s_plus = [zeros(n), zeros(n)];
    let mut s_minus = [zeros(n), zeros(n)];
    let mut s_bottom = [zeros(n), zeros(n)];
    let e_ab = C64::new(sys.exp_ab, 0.0);
    let d_aux = sys.d_aux;
    let grow = 1.0 - e * e + 2.0 * e * bm * m;
    for i in 0..2 {
        for l in 0..n {
            s_minus[i][nt][l] = x2[i][l];
            s_plus[i][nt][l] = -(a + bm) * m * m * p_zero[i][l] + grow * x2[i][l];
            s_bottom[i][nt][l] = m * p_zero[i][l] - e * x2[i][l];
        }
        s_plus[1][nt][nt] += one;
        for j in 0..nt {
            let z = ixi[j];
            for l in 0..n {
                let diag = if j == l {
                    if i == 0 {
                        one
                    } else {
                        mup * bp
                    }
                } else {
                    C64::new(0.0, 0.0)
                };
                let v = -diag + mup * z * bpap / den * p_plus[i][l] + mup * z * s_plus[i][nt][l]
                    - ((mup * bp - mum * bm) * e * m - mum) * z / a * p_zero[i][l]
                    - mum * z * s_minus[i][nt][l]
                    - ((mum * bm - mup * bp) * m + mum * e_ab) * z / a * p_bottom[i][l]
                    - mum * z * m * p_bottom[i][l]
                    - mum * z * e * s_bottom[i][nt][l];
                s_minus[i][j][l] = v / d_aux;
                s_bottom[i][j][l] = -e * s_minus[i][j][l] + m * z / a * p_zero[i][l];
                let kd = if i == 1 && j == l { one } else { C64::new(0.0, 0.0) };
                s_plus[i][j][l] = kd + (1.0 - e * e) * s_minus[i][j][l] + e * m * z / a * p_zero[i][l] - m * z / a * p_bottom[i][l];
            }
        }
    }

    Ok(ModeSymbols { system: sys, p_zero, p_bottom, p_plus, pres_zero, pres_bottom, r_plus, r_minus, t_minus, s_plus, s_minus, s_bottom })
}
