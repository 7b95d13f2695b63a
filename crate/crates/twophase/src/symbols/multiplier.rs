use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::cmath::is_finite;
use crate::regions::region_contains;
use crate::{Error, PhysicalParams, RegionCase, Result, SpectralPoint, C64};

/// Type 1 bounds derivatives by `(|lambda|^{1/2}+A)^{s-|k|}`, type 2 by
/// `(|lambda|^{1/2}+A)^s A^{-|k|}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MultiplierType {
    One,
    Two,
}

/// A named scalar symbol with its claimed class.
pub struct SymbolSpec<'a> {
    pub name: String,
    pub order: f64,
    pub kind: MultiplierType,
    pub eval: Box<dyn Fn(&SpectralPoint) -> Result<C64> + Sync + 'a>,
}

/// Sample points, plus an optional wider set used for the stability verdict.
#[derive(Debug, Clone)]
pub struct MultiplierGrid {
    pub base: Vec<SpectralPoint>,
    pub extended: Option<Vec<SpectralPoint>>,
    pub description: String,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

/// `n_lambda` points with log-spaced modulus in `[lambda0, lambda_max]` and
/// arguments spread over the sector, each pulled towards the real axis until
/// it lies in the region.
pub fn region_lambdas(params: &PhysicalParams, case: RegionCase, delta: C64, n_lambda: usize, lambda_max: f64) -> Vec<C64> {
    let theta_max = PI - params.eps;
    log_space(params.lambda0, lambda_max, n_lambda)
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            // golden-ratio spread of arguments in [-theta_max, theta_max]
            let u = (k as f64 * 0.618_033_988_75).fract();
            let mut theta = (2.0 * u - 1.0) * theta_max;
            for _ in 0..200 {
                let l = C64::from_polar(r, theta);
                let pt = SpectralPoint::raw(l, delta_for(l, case, params, delta), &[1.0], case);
                if region_contains(&pt, params) {
                    return l;
                }
                theta *= 0.9;
            }
            C64::new(r, 0.0)
        })
        .collect()
}

fn delta_for(lambda: C64, case: RegionCase, params: &PhysicalParams, delta: C64) -> C64 {
    match case {
        RegionCase::C1 => params.gamma1_plus * params.gamma2_plus / lambda,
        _ => delta,
    }
}

impl MultiplierGrid {
    /// Tensor grid of region lambdas and log-spaced `A`, with `N = 2`.
    pub fn tensor(params: &PhysicalParams, case: RegionCase, delta: C64, n_lambda: usize, lambda_max: f64, n_a: usize, a_range: (f64, f64)) -> Vec<SpectralPoint> {
        let lambdas = region_lambdas(params, case, delta, n_lambda, lambda_max);
        let mut out = Vec::with_capacity(n_lambda * n_a);
        for &l in &lambdas {
            for a in log_space(a_range.0, a_range.1, n_a) {
                out.push(SpectralPoint::raw(l, delta_for(l, case, params, delta), &[a], case));
            }
        }
        out
    }

    /// 20x20 base grid (`|lambda|` up to 1e4, `A` in `[1e-3, 1e2]`) with a 20x20
    /// extension to `|lambda|` 1e6 and `A` in `[1e-4, 1e3]`.
    pub fn standard(params: &PhysicalParams, case: RegionCase, delta: C64) -> Self {
        Self {
            base: Self::tensor(params, case, delta, 20, 1e4, 20, (1e-3, 1e2)),
            extended: Some(Self::tensor(params, case, delta, 20, 1e6, 20, (1e-4, 1e3))),
            description: "20x20: |lambda| in [lambda0, 1e4], A in [1e-3, 1e2]; extension |lambda| <= 1e6, A in [1e-4, 1e3]".into(),
        }
    }
}

/// Worst ratio for one derivative order.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeRatio {
    /// `|kappa'|`.
    pub kappa: usize,
    /// Power of `tau d/dtau`.
    pub ell: usize,
    pub sup_ratio: f64,
    pub worst_lambda: C64,
    pub worst_a: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplierReport {
    pub symbol: String,
    pub order: f64,
    pub kind: MultiplierType,
    pub grid: String,
    pub ratios: Vec<DerivativeRatio>,
    pub extended_ratios: Option<Vec<DerivativeRatio>>,
    pub pass: bool,
}

impl MultiplierReport {
    pub fn sup(&self) -> f64 {
        self.ratios.iter().map(|r| r.sup_ratio).fold(0.0, f64::max)
    }
}

/// Multi-indices with `|kappa| <= 2` in `n` tangential directions.
fn multi_indices(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for i in 0..n {
        out.push(vec![i]);
    }
    for i in 0..n {
        for j in i..n {
            out.push(vec![i, j]);
        }
    }
    out
}

fn shifted(pt: &SpectralPoint, lambda: C64, xi: &[f64], params: &PhysicalParams) -> SpectralPoint {
    let mut p = pt.with_lambda(lambda, params);
    p.xi = xi.to_vec();
    p
}

/// Finite-difference estimate of `d^kappa` of the vector symbol at fixed `lambda`.
fn xi_derivative<F>(f: &F, pt: &SpectralPoint, lambda: C64, kappa: &[usize], h: f64, params: &PhysicalParams) -> Result<Vec<C64>>
where
    F: Fn(&SpectralPoint) -> Result<Vec<C64>>,
{
    let base = pt.xi.clone();
    let at = |shifts: &[(usize, f64)]| -> Result<Vec<C64>> {
        let mut xi = base.clone();
        for &(i, s) in shifts {
            xi[i] += s;
        }
        let v = f(&shifted(pt, lambda, &xi, params))?;
        if let Some(z) = v.iter().find(|z| !is_finite(**z)) {
            return Err(Error::NonFinite(format!("symbol value {z} at lambda={lambda}, xi={xi:?}")));
        }
        Ok(v)
    };
    let comb = |terms: Vec<(f64, Vec<C64>)>, div: f64| -> Vec<C64> {
        let n = terms[0].1.len();
        (0..n).map(|k| terms.iter().map(|(c, v)| *c * v[k]).sum::<C64>() / div).collect()
    };
    Ok(match kappa {
        [] => at(&[])?,
        [i] => comb(vec![(1.0, at(&[(*i, h)])?), (-1.0, at(&[(*i, -h)])?)], 2.0 * h),
        [i, j] if i == j => comb(vec![(1.0, at(&[(*i, h)])?), (-2.0, at(&[])?), (1.0, at(&[(*i, -h)])?)], h * h),
        [i, j] => comb(
            vec![
                (1.0, at(&[(*i, h), (*j, h)])?),
                (-1.0, at(&[(*i, h), (*j, -h)])?),
                (-1.0, at(&[(*i, -h), (*j, h)])?),
                (1.0, at(&[(*i, -h), (*j, -h)])?),
            ],
            4.0 * h * h,
        ),
        _ => unreachable!(),
    })
}

struct Sample {
    lambda: C64,
    a: f64,
    // [component][(kappa, ell) slot]
    ratios: Vec<Vec<f64>>,
}

fn sample_point<F>(f: &F, pt: &SpectralPoint, orders: &[f64], kind: MultiplierType, params: &PhysicalParams) -> Result<Sample>
where
    F: Fn(&SpectralPoint) -> Result<Vec<C64>>,
{
    let a = pt.a();
    let scale = pt.scale();
    let tau = pt.lambda.im;
    let k_tau = 1e-5 * tau.abs().max(1.0);
    let ncomp = orders.len();
    let mut ratios = vec![vec![0.0f64; 6]; ncomp];
    for kappa in multi_indices(pt.xi.len()) {
        let order = kappa.len();
        let rel = if order == 2 { 1e-2 } else { 1e-3 };
        let h = match kind {
            MultiplierType::One => rel * scale,
            MultiplierType::Two => rel * a,
        };
        if order > 0 && (!(h > 1e-300) || pt.xi.iter().any(|x| x + h == *x)) {
            return Err(Error::StepUnderflow(format!("xi step {h:e} at A={a:e}")));
        }
        let d0 = xi_derivative(f, pt, pt.lambda, &kappa, h, params)?;
        let up = xi_derivative(f, pt, pt.lambda + C64::new(0.0, k_tau), &kappa, h, params)?;
        let dn = xi_derivative(f, pt, pt.lambda - C64::new(0.0, k_tau), &kappa, h, params)?;
        for c in 0..ncomp {
            let bound = match kind {
                MultiplierType::One => scale.powf(orders[c] - order as f64),
                MultiplierType::Two => scale.powf(orders[c]) * a.powi(-(order as i32)),
            };
            let d1 = tau * (up[c] - dn[c]) / (2.0 * k_tau);
            let r0 = d0[c].norm() / bound;
            let r1 = d1.norm() / bound;
            if !(r0.is_finite() && r1.is_finite()) {
                return Err(Error::NonFinite(format!("ratio at lambda={}, A={a}", pt.lambda)));
            }
            let slot = 2 * order;
            ratios[c][slot] = ratios[c][slot].max(r0);
            ratios[c][slot + 1] = ratios[c][slot + 1].max(r1);
        }
    }
    Ok(Sample { lambda: pt.lambda, a, ratios })
}

fn sweep<F>(f: &F, points: &[SpectralPoint], orders: &[f64], kind: MultiplierType, params: &PhysicalParams) -> Result<Vec<Vec<DerivativeRatio>>>
where
    F: Fn(&SpectralPoint) -> Result<Vec<C64>> + Sync,
{
    let samples: Vec<Sample> = points.par_iter().map(|pt| sample_point(f, pt, orders, kind, params)).collect::<Result<_>>()?;
    Ok((0..orders.len())
        .map(|c| {
            (0..6)
                .map(|slot| {
                    let mut best = DerivativeRatio { kappa: slot / 2, ell: slot % 2, sup_ratio: 0.0, worst_lambda: C64::new(0.0, 0.0), worst_a: 0.0 };
                    for s in &samples {
                        if s.ratios[c][slot] > best.sup_ratio {
                            best.sup_ratio = s.ratios[c][slot];
                            best.worst_lambda = s.lambda;
                            best.worst_a = s.a;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect())
}

/// Checks every component of a vector-valued symbol against its own order.
///
/// A component passes when all ratios are finite and, if the grid has an
/// extension, no extended sup exceeds twice the base sup.
pub fn multiplier_check_family<F>(name: &str, orders: &[f64], kind: MultiplierType, f: F, grid: &MultiplierGrid, params: &PhysicalParams) -> Result<Vec<MultiplierReport>>
where
    F: Fn(&SpectralPoint) -> Result<Vec<C64>> + Sync,
{
    let base = sweep(&f, &grid.base, orders, kind, params)?;
    let ext = match &grid.extended {
        Some(pts) => Some(sweep(&f, pts, orders, kind, params)?),
        None => None,
    };
    Ok((0..orders.len())
        .map(|c| {
            let ratios = base[c].clone();
            let extended_ratios = ext.as_ref().map(|e| e[c].clone());
            let stable = extended_ratios
                .as_ref()
                .map(|e| e.iter().zip(&ratios).all(|(x, b)| x.sup_ratio <= 2.0 * b.sup_ratio + 1e-10))
                .unwrap_or(true);
            let name = if orders.len() == 1 { name.to_string() } else { format!("{name}[{c}]") };
            MultiplierReport {
                symbol: name,
                order: orders[c],
                kind,
                grid: grid.description.clone(),
                pass: stable && ratios.iter().all(|r| r.sup_ratio.is_finite()),
                ratios,
                extended_ratios,
            }
        })
        .collect())
}

/// Checks one scalar symbol.
pub fn multiplier_check(spec: &SymbolSpec<'_>, grid: &MultiplierGrid, params: &PhysicalParams) -> Result<MultiplierReport> {
    let f = |pt: &SpectralPoint| (spec.eval)(pt).map(|z| vec![z]);
    let mut r = multiplier_check_family(&spec.name, &[spec.order], spec.kind, f, grid, params)?;
    Ok(r.remove(0))
}
