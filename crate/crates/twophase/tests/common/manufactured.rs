//! Smooth exact profiles with analytically computed sources for the
//! finite-difference solvers.

use twophase::fd::{ModeGrid, ModeSources, Profile};
use twophase::mode::BoundaryDataHat;
use twophase::{PhysicalParams, SpectralPoint, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `(s0 + s1 x) e^{k x}` with derivatives.
#[derive(Clone, Copy)]
pub struct LinExp {
    pub s0: C64,
    pub s1: C64,
    pub k: f64,
}

impl LinExp {
    pub fn eval(&self, x: f64) -> [C64; 3] {
        let e = (self.k * x).exp();
        let p = self.s0 + self.s1 * x;
        [p * e, (self.s1 + self.k * p) * e, (2.0 * self.k * self.s1 + self.k * self.k * p) * e]
    }
}

pub struct Manufactured {
    pub lower: Vec<LinExp>,
    pub upper: Vec<LinExp>,
    /// `p = c0 cos x + c1`.
    pub p: (C64, C64),
    /// `f = fc e^{-x}`; zero for the reduced problem.
    pub f: C64,
    pub b: f64,
    pub x_max: f64,
}

impl Manufactured {
    pub fn new(n: usize, b: f64, x_max: f64, with_f: bool) -> Self {
        let c = |k: usize| C64::new(0.5 + 0.3 * k as f64, 0.2 - 0.4 * k as f64);
        let lower = (0..n).map(|k| LinExp { s0: b * c(k), s1: c(k), k: 0.7 }).collect();
        let upper = (0..n).map(|k| LinExp { s0: -x_max * c(k + 1), s1: c(k + 1), k: -1.0 }).collect();
        let f = if with_f { C64::new(0.8, -0.3) } else { C64::new(0.0, 0.0) };
        Self { lower, upper, p: (C64::new(0.4, 0.1), C64::new(-0.2, 0.3)), f, b, x_max }
    }

    pub fn v_lower(&self, x: f64) -> Vec<[C64; 3]> {
        self.lower.iter().map(|u| u.eval(x)).collect()
    }

    pub fn v_upper(&self, x: f64) -> Vec<[C64; 3]> {
        self.upper.iter().map(|u| u.eval(x)).collect()
    }

    pub fn pressure(&self, x: f64) -> [C64; 2] {
        [self.p.0 * x.cos() + self.p.1, -self.p.0 * x.sin()]
    }

    pub fn f_plus(&self, x: f64) -> [C64; 2] {
        let e = (-x).exp();
        [self.f * e, -self.f * e]
    }

    fn div(xi: &[f64], v: &[[C64; 3]], order: usize) -> C64 {
        let nt = xi.len();
        (0..nt).map(|j| I * xi[j] * v[j][order]).sum::<C64>() + v[nt][order + 1]
    }

    pub fn rho(&self, pt: &SpectralPoint, params: &PhysicalParams, x: f64) -> C64 {
        (self.f_plus(x)[0] - params.gamma1_plus * Self::div(&pt.xi, &self.v_upper(x), 0)) / pt.lambda
    }

    pub fn sources(&self, pt: &SpectralPoint, params: &PhysicalParams, grid: &ModeGrid) -> ModeSources {
        let xi = &pt.xi;
        let n = xi.len() + 1;
        let nt = n - 1;
        let l = pt.lambda;
        let a2: f64 = xi.iter().map(|x| x * x).sum();
        let visc = params.nu_plus + pt.delta;
        let c_lo = params.gamma1_minus * l + params.mu_minus * a2;
        let c_up = params.gamma1_plus * l + params.mu_plus * a2;
        let s = params.gamma2_plus / l;
        let g_minus: Profile = grid
            .lower_nodes()
            .iter()
            .map(|&x| {
                let v = self.v_lower(x);
                let p = self.pressure(x);
                (0..n)
                    .map(|c| {
                        let pg = if c < nt { I * xi[c] * p[0] } else { p[1] };
                        c_lo * v[c][0] - params.mu_minus * v[c][2] + pg
                    })
                    .collect()
            })
            .collect();
        let g_d = grid.lower_nodes().iter().map(|&x| Self::div(xi, &self.v_lower(x), 0)).collect();
        let frak_g_d: Profile = grid.lower_nodes().iter().map(|&x| self.v_lower(x).iter().map(|v| v[0]).collect()).collect();
        let g_plus: Profile = grid
            .upper_nodes()
            .iter()
            .map(|&x| {
                let v = self.v_upper(x);
                let (d0, d1) = (Self::div(xi, &v, 0), Self::div(xi, &v, 1));
                let f = self.f_plus(x);
                (0..n)
                    .map(|c| {
                        let (gd, gf) = if c < nt { (I * xi[c] * d0, I * xi[c] * f[0]) } else { (d1, f[1]) };
                        c_up * v[c][0] - params.mu_plus * v[c][2] - visc * gd + s * gf
                    })
                    .collect()
            })
            .collect();
        let f_plus = grid.upper_nodes().iter().map(|&x| self.f_plus(x)[0]).collect();
        let (vu, vl) = (self.v_upper(0.0), self.v_lower(0.0));
        let mut h: Vec<C64> = (0..nt)
            .map(|c| params.mu_plus * (vu[c][1] + I * xi[c] * vu[nt][0]) - params.mu_minus * (vl[c][1] + I * xi[c] * vl[nt][0]))
            .collect();
        let tang: C64 = (0..nt).map(|j| I * xi[j] * vu[j][0]).sum();
        h.push((params.mu_plus + visc) * vu[nt][1] + (visc - params.mu_plus) * tang - 2.0 * params.mu_minus * vl[nt][1] + self.pressure(0.0)[0] - s * self.f_plus(0.0)[0]);
        let k = (0..n).map(|c| vu[c][0] - vl[c][0]).collect();
        ModeSources { f_plus: Some(f_plus), g_plus: Some(g_plus), g_minus: Some(g_minus), g_d: Some(g_d), frak_g_d: Some(frak_g_d), data: BoundaryDataHat { h, k } }
    }
}

/// Max nodal errors `[upper, lower, pressure, rho]` of a discrete solution.
pub fn manufactured_errors(m: &Manufactured, pt: &SpectralPoint, params: &PhysicalParams, sol: &twophase::fd::DiscreteModeSolution) -> [f64; 4] {
    let g = &sol.grid;
    let vec_err = |a: &[C64], b: Vec<[C64; 3]>| a.iter().zip(b).map(|(x, y)| (x - y[0]).norm()).fold(0.0, f64::max);
    let up = g.upper_nodes().iter().zip(&sol.upper).map(|(x, v)| vec_err(v, m.v_upper(*x))).fold(0.0, f64::max);
    let lo = g.lower_nodes().iter().zip(&sol.lower).map(|(x, v)| vec_err(v, m.v_lower(*x))).fold(0.0, f64::max);
    let pr = g.lower_nodes().iter().zip(&sol.pressure).map(|(x, p)| (p - m.pressure(*x)[0]).norm()).fold(0.0, f64::max);
    let rho = sol.rho_plus.as_ref().map_or(0.0, |r| g.upper_nodes().iter().zip(r).map(|(x, r)| (r - m.rho(pt, params, *x)).norm()).fold(0.0, f64::max));
    [up, lo, pr, rho]
}
