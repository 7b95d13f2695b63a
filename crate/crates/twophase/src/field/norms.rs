use serde::Serialize;

use super::evolve::EvolveResult;
use crate::{Error, Result};

/// Weighted `L2` pieces of one velocity component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct VelocityNorms {
    /// `|| e^{-gamma t} d_t v ||`
    pub dt: f64,
    /// `gamma || e^{-gamma t} v ||`
    pub gamma: f64,
    /// `|| e^{-gamma t} Lambda^{1/2} grad v ||`
    pub half: f64,
    /// `|| e^{-gamma t} grad^2 v ||`
    pub hess: f64,
}

impl VelocityNorms {
    pub fn total(&self) -> f64 {
        self.dt + self.gamma + self.half + self.hess
    }
}

/// Data norm pieces, one per displayed term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DataNorms {
    pub f_plus: f64,
    pub g_plus: f64,
    pub g_minus: f64,
    pub g_d: f64,
    pub g_d_half: f64,
    pub frak_g_d_dt: f64,
    pub h: f64,
    pub h_half: f64,
}

impl DataNorms {
    pub fn total(&self) -> f64 {
        self.f_plus + self.g_plus + self.g_minus + self.g_d + self.g_d_half + self.frak_g_d_dt + self.h + self.h_half
    }
}

/// Maximal-regularity norm pieces (`p = q = 2`) of an evolution and of its data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormBundle {
    pub gamma: f64,
    /// `|| e^{-gamma t} (d_t rho, gamma rho) ||` in `H^1`.
    pub rho: f64,
    pub grad_p: f64,
    pub v_plus: VelocityNorms,
    pub v_minus: VelocityNorms,
    pub solution: f64,
    pub data: DataNorms,
    pub data_total: f64,
    /// `solution / data_total`, zero when both vanish.
    pub ratio: f64,
}

/// Evaluates the norms by Plancherel in `x` and in the weighted time
/// transform: `int e^{-2 gamma t} int |u|^2 dx dt = L / (n dt) sum |u_hat|^2`.
/// `gamma0` must be the weight the evolution was computed with.
pub fn norms(result: &EvolveResult, gamma0: f64) -> Result<NormBundle> {
    if (result.gamma - gamma0).abs() > 1e-12 * gamma0.abs().max(1.0) {
        return Err(Error::Mismatch(format!("evolution weight {} vs requested {gamma0}", result.gamma)));
    }
    let g = gamma0;
    let g2 = g * g;
    let w = result.grid.lx / (result.grid.n_t as f64 * result.grid.dt());
    let mut acc = [0.0f64; 18];
    for mi in &result.integrals {
        let (l2, lm, a2) = (mi.lambda.norm_sqr(), mi.lambda.norm(), mi.a * mi.a);
        let s = &mi.solution;
        let d = &mi.data;
        let terms = [
            (l2 + g2) * ((1.0 + a2) * s.rho + s.drho),
            a2 * s.p + s.dp,
            l2 * s.vp,
            g2 * s.vp,
            lm * (a2 * s.vp + s.dvp),
            a2 * a2 * s.vp + 2.0 * a2 * s.dvp + s.d2vp,
            l2 * s.vm,
            g2 * s.vm,
            lm * (a2 * s.vm + s.dvm),
            a2 * a2 * s.vm + 2.0 * a2 * s.dvm + s.d2vm,
            (1.0 + a2) * d.f + d.df,
            d.gp,
            d.gm,
            (1.0 + a2) * d.gd + d.dgd,
            lm * d.gd,
            l2 * d.frak,
            (1.0 + a2) * (d.hu + d.hl) + d.dhu + d.dhl,
            lm * (d.hu + d.hl),
        ];
        for (a, t) in acc.iter_mut().zip(terms) {
            *a += t;
        }
    }
    let n: Vec<f64> = acc.iter().map(|a| (w * a).sqrt()).collect();
    let v_plus = VelocityNorms { dt: n[2], gamma: n[3], half: n[4], hess: n[5] };
    let v_minus = VelocityNorms { dt: n[6], gamma: n[7], half: n[8], hess: n[9] };
    let data = DataNorms { f_plus: n[10], g_plus: n[11], g_minus: n[12], g_d: n[13], g_d_half: n[14], frak_g_d_dt: n[15], h: n[16], h_half: n[17] };
    let solution = n[0] + n[1] + v_plus.total() + v_minus.total();
    let data_total = data.total();
    let ratio = if data_total > 0.0 {
        solution / data_total
    } else if solution > 0.0 {
        return Err(Error::ZeroDataNorm);
    } else {
        0.0
    };
    Ok(NormBundle { gamma: g, rho: n[0], grad_p: n[1], v_plus, v_minus, solution, data, data_total, ratio })
}
