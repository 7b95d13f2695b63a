//! Minus-to-plus convolution kernels, their decay bound, and empirical
//! R-bound estimates.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quad::gk15;
use crate::symbols::{char_roots, divided_exp, multiplier_check, MultiplierGrid, MultiplierReport, MultiplierType, SymbolSpec};
use crate::{Error, PhysicalParams, RegionCase, Result, SpectralPoint, C64};

/// `K1: m A e^{-B+ x_N} e^{A y_N}`, `K2: m A^2 M+(x_N) e^{A y_N}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "K1_minus_plus")]
    K1,
    #[serde(rename = "K2_minus_plus")]
    K2,
}

/// Multiplier symbols available to the kernels, times a real scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "symbol", rename_all = "snake_case")]
pub enum KernelMultiplier {
    Constant { scale: f64 },
    /// `scale * B- / B+`.
    RootRatio { scale: f64 },
}

impl KernelMultiplier {
    pub fn unit() -> Self {
        Self::Constant { scale: 1.0 }
    }

    pub fn scaled(self, s: f64) -> Self {
        match self {
            Self::Constant { scale } => Self::Constant { scale: scale * s },
            Self::RootRatio { scale } => Self::RootRatio { scale: scale * s },
        }
    }

    fn eval(&self, b_minus: C64, b_plus: C64) -> C64 {
        match *self {
            Self::Constant { scale } => C64::new(scale, 0.0),
            Self::RootRatio { scale } => scale * b_minus / b_plus,
        }
    }

    /// Runs the class check for order 0, type 2 on `grid`.
    pub fn class_check(&self, params: &PhysicalParams, grid: &MultiplierGrid) -> Result<MultiplierReport> {
        let m = *self;
        let spec = SymbolSpec {
            name: format!("{m:?}"),
            order: 0.0,
            kind: MultiplierType::Two,
            eval: Box::new(move |pt: &SpectralPoint| {
                let r = char_roots(pt, params)?;
                Ok(m.eval(r.b_minus, r.b_plus))
            }),
        };
        multiplier_check(&spec, grid, params)
    }
}

/// One kernel evaluation request (`N = 2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub multiplier: KernelMultiplier,
    pub lambda: C64,
    /// `x' - y'`.
    pub offset: f64,
    pub x_n: f64,
    pub y_n: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, lambda: C64, offset: f64, x_n: f64, y_n: f64) -> Self {
        Self { kind, multiplier: KernelMultiplier::unit(), lambda, offset, x_n, y_n }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_n > 0.0 && self.y_n < 0.0) || !self.offset.is_finite() || !self.x_n.is_finite() || !self.y_n.is_finite() {
            return Err(Error::InvalidParams(format!("need x_N > 0 > y_N, got x_N = {}, y_N = {}", self.x_n, self.y_n)));
        }
        Ok(())
    }

    /// `x_N - y_N`.
    pub fn depth(&self) -> f64 {
        self.x_n - self.y_n
    }
}

/// `xi`-independent pieces of the roots.
#[derive(Clone, Copy)]
struct Symbol {
    spec: KernelSpec,
    sq_a_plus: C64,
    sq_b_plus: C64,
    sq_b_minus: C64,
}

impl Symbol {
    fn new(spec: &KernelSpec, params: &PhysicalParams) -> Result<Self> {
        spec.validate()?;
        let pt = SpectralPoint::c1(spec.lambda, &[0.0], params)?;
        let r = char_roots(&pt, params)?;
        Ok(Self { spec: *spec, sq_a_plus: r.sq_a_plus, sq_b_plus: r.sq_b_plus, sq_b_minus: r.sq_b_minus })
    }

    /// The symbol at `|xi| = a`.
    fn at(&self, a: f64) -> C64 {
        let a2 = a * a;
        let b_plus = (self.sq_b_plus + a2).sqrt();
        let b_minus = (self.sq_b_minus + a2).sqrt();
        let s = &self.spec;
        let m = s.multiplier.eval(b_minus, b_plus);
        let tail = (a * s.y_n).exp();
        match s.kind {
            KernelKind::K1 => m * a * (-b_plus * s.x_n).exp() * tail,
            KernelKind::K2 => {
                let a_plus = (self.sq_a_plus + a2).sqrt();
                m * a2 * divided_exp(a_plus, b_plus, -s.x_n) * tail
            }
        }
    }

    fn integrand(&self, xi: f64) -> C64 {
        C64::from_polar(1.0, xi * self.spec.offset) * self.at(xi.abs()) / (2.0 * PI)
    }

    /// Cut-off where the envelope drops below `1e-16` of its peak.
    fn cutoff(&self) -> f64 {
        let d = self.spec.depth();
        let mut peak = 0.0f64;
        let mut a = 1e-3 / d;
        while a < 1.0 / d * 64.0 {
            peak = peak.max(self.at(a).norm() * a.max(1.0 / d));
            a *= 1.25;
        }
        let mut xi = 1.0 / d;
        while self.at(xi).norm() * xi > 1e-16 * peak && xi < 1e8 {
            xi *= 1.25;
        }
        xi
    }
}

const START_PANELS: usize = 8;
const MAX_PANELS: usize = 1 << 16;
/// Relative change between panel doublings accepted as converged.
pub const KERNEL_TOL: f64 = 1e-9;

/// Value of a kernel plus quadrature diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelValue {
    pub value: C64,
    pub cutoff: f64,
    pub panels: usize,
    /// `int |integrand|`, the scale of the relative tolerance.
    pub magnitude: f64,
}

fn panel_sum(sym: &Symbol, lo: f64, hi: f64, n: usize) -> (C64, f64) {
    let h = (hi - lo) / n as f64;
    let f = |x: f64| sym.integrand(x);
    let g = |x: f64| C64::new(sym.integrand(x).norm(), 0.0);
    (0..n).fold((C64::new(0.0, 0.0), 0.0), |(v, m), k| {
        let (a, b) = (lo + k as f64 * h, lo + (k + 1) as f64 * h);
        (v + gk15(&f, a, b).0, m + gk15(&g, a, b).0.re)
    })
}

/// Inverse Fourier transform in `xi'` by Gauss-Kronrod panels on
/// `[-Xi, 0]` and `[0, Xi]`, doubling the panel count until the value moves by
/// less than [`KERNEL_TOL`] relative to `max(|k|, int |integrand|)`.
pub fn kernel_eval(spec: &KernelSpec, params: &PhysicalParams) -> Result<KernelValue> {
    let sym = Symbol::new(spec, params)?;
    let cut = sym.cutoff();
    let waves = (cut * spec.offset.abs() / PI).ceil() as usize;
    let mut n = START_PANELS.max(waves.next_power_of_two());
    let run = |n: usize| {
        let (l, ml) = panel_sum(&sym, -cut, 0.0, n);
        let (r, mr) = panel_sum(&sym, 0.0, cut, n);
        (l + r, ml + mr)
    };
    let (mut prev, _) = run(n);
    while n < MAX_PANELS {
        n *= 2;
        let (cur, mag) = run(n);
        if !cur.re.is_finite() || !cur.im.is_finite() {
            return Err(Error::NonFinite("kernel integrand".into()));
        }
        if (cur - prev).norm() <= KERNEL_TOL * cur.norm().max(mag) {
            return Ok(KernelValue { value: cur, cutoff: cut, panels: 2 * n, magnitude: mag });
        }
        prev = cur;
    }
    Err(Error::Quadrature(format!("kernel did not converge with {MAX_PANELS} panels per side")))
}

/// Brute-force value: composite trapezoid on a uniform grid with `n` and `2n`
/// intervals per side, split at `xi = 0`, combined by one Richardson step to
/// cancel the `h^2` term left by the kink of `|xi|`.
pub fn kernel_trapezoid(spec: &KernelSpec, params: &PhysicalParams, cutoff: f64, n: usize) -> Result<C64> {
    let sym = Symbol::new(spec, params)?;
    let trap = |n: usize| -> C64 {
        let h = cutoff / n as f64;
        let side = |sign: f64| -> C64 {
            let inner: C64 = (1..n).into_par_iter().map(|k| sym.integrand(sign * k as f64 * h)).sum();
            (inner + 0.5 * (sym.integrand(0.0) + sym.integrand(sign * cutoff))) * h
        };
        side(1.0) + side(-1.0)
    };
    Ok((4.0 * trap(2 * n) - trap(n)) / 3.0)
}

/// Sample set for the decay bound: `|x' - y'|` and `x_N - y_N` log-spaced
/// on `[lo, hi]` (plus offset zero), `x_N` a fixed fraction of the depth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundSamples {
    pub n_offset: usize,
    pub n_depth: usize,
    pub lo: f64,
    pub hi: f64,
    pub fractions: Vec<f64>,
}

impl Default for BoundSamples {
    fn default() -> Self {
        Self { n_offset: 8, n_depth: 8, lo: 0.1, hi: 10.0, fractions: vec![0.25, 0.5, 0.75] }
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

impl BoundSamples {
    pub fn doubled(&self) -> Self {
        Self { n_offset: 2 * self.n_offset, n_depth: 2 * self.n_depth, ..self.clone() }
    }

    /// `(offset, x_N, y_N)` triples.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut offs = vec![0.0];
        offs.extend(log_space(self.lo, self.hi, self.n_offset));
        let mut out = vec![];
        for &s in &offs {
            for d in log_space(self.lo, self.hi, self.n_depth) {
                for &f in &self.fractions {
                    out.push((s, f * d, -(1.0 - f) * d));
                }
            }
        }
        out
    }
}

/// Sup of `|k| (|x'-y'| + x_N - y_N)^2` over a sample set.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub kind: KernelKind,
    pub multiplier: KernelMultiplier,
    pub lambda: C64,
    pub samples: BoundSamples,
    pub count: usize,
    pub sup: f64,
    /// `(offset, x_N, y_N)` of the sup.
    pub argmax: (f64, f64, f64),
    pub finite: bool,
}

pub fn kernel_bound_check(kind: KernelKind, multiplier: KernelMultiplier, lambda: C64, samples: &BoundSamples, params: &PhysicalParams) -> Result<BoundReport> {
    let pts = samples.points();
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|&(s, x, y)| {
            let spec = KernelSpec { kind, multiplier, lambda, offset: s, x_n: x, y_n: y };
            kernel_eval(&spec, params).map(|v| v.value.norm() * (s.abs() + x - y).powi(2))
        })
        .collect::<Result<_>>()?;
    let (i, sup) = vals.iter().enumerate().fold((0, 0.0f64), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    Ok(BoundReport { kind, multiplier, lambda, samples: samples.clone(), count: pts.len(), sup, argmax: pts[i], finite: vals.iter().all(|v| v.is_finite()) })
}

/// Log-log slope of `|k(0; x_N, x_N - d)|` against `d` along the diagonal
/// `x' = y'`, least squares over log-spaced `d` in `[lo, hi]`.
pub fn diagonal_slope(kind: KernelKind, lambda: C64, x_n: f64, lo: f64, hi: f64, n: usize, params: &PhysicalParams) -> Result<f64> {
    let ds = log_space(lo, hi, n);
    let ks: Vec<f64> = ds
        .par_iter()
        .map(|&d| kernel_eval(&KernelSpec::new(kind, lambda, 0.0, x_n, x_n - d), params).map(|v| v.value.norm()))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n as f64, ys.iter().sum::<f64>() / n as f64);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Families up to this size are averaged over all sign patterns exactly.
pub const EXACT_SIGNS: usize = 12;

/// Empirical R-bound estimate.
#[derive(Debug, Clone, Serialize)]
pub struct RBoundReport {
    pub estimate: f64,
    /// Best ratio among single operators, `||T_j x_j|| / ||x_j||`.
    pub singleton: f64,
    pub operators: usize,
    pub draws: usize,
    pub trials: usize,
    pub exact: bool,
    pub resampled: usize,
    pub seed: u64,
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Lower estimate of the R-bound of `ops` (`p = 2`).
///
/// Each input draw supplies one field per operator. For every prefix
/// `T_1..T_k` of the family the two sides of the defining inequality are
/// averaged over sign vectors (all `2^k` patterns for `k <=` [`EXACT_SIGNS`],
/// otherwise `trials` uniform draws); the estimate is the sup of
/// `(E ||sum r_j T_j x_j||^2 / E ||sum r_j x_j||^2)^{1/2}` over prefixes,
/// singletons and draws. Draws whose denominator vanishes are skipped and counted.
pub fn rbound_estimate<F>(ops: &[F], inputs: &[Vec<Vec<C64>>], trials: usize, seed: u64) -> Result<RBoundReport>
where
    F: Fn(&[C64]) -> Vec<C64> + Sync,
{
    let k = ops.len();
    if k == 0 {
        return Err(Error::InvalidParams("empty operator family".into()));
    }
    if let Some(d) = inputs.iter().find(|d| d.len() < k) {
        return Err(Error::Dimension(format!("input draw has {} fields for {k} operators", d.len())));
    }
    let exact = k <= EXACT_SIGNS;
    let per: Vec<(f64, f64, usize)> = inputs
        .par_iter()
        .enumerate()
        .map(|(di, xs)| {
            let txs: Vec<Vec<C64>> = ops.iter().zip(xs).map(|(t, x)| t(x)).collect();
            let mut single = 0.0f64;
            for (x, tx) in xs.iter().zip(&txs) {
                let nx = norm2(x);
                if nx > 0.0 {
                    single = single.max((norm2(tx) / nx).sqrt());
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(di as u64));
            let patterns: Vec<Vec<f64>> = if exact {
                (0..1usize << k).map(|p| (0..k).map(|j| if p >> j & 1 == 1 { 1.0 } else { -1.0 }).collect()).collect()
            } else {
                (0..trials).map(|_| (0..k).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()).collect()
            };
            let mut best = 0.0f64;
            let mut skipped = 0;
            for prefix in 1..=k {
                let (mut num, mut den) = (0.0, 0.0);
                for r in &patterns {
                    let mut sx = vec![C64::new(0.0, 0.0); xs[0].len()];
                    let mut stx = vec![C64::new(0.0, 0.0); txs[0].len()];
                    for j in 0..prefix {
                        for (a, b) in sx.iter_mut().zip(&xs[j]) {
                            *a += r[j] * b;
                        }
                        for (a, b) in stx.iter_mut().zip(&txs[j]) {
                            *a += r[j] * b;
                        }
                    }
                    num += norm2(&stx);
                    den += norm2(&sx);
                }
                if den > 0.0 {
                    best = best.max((num / den).sqrt());
                } else {
                    skipped += 1;
                }
            }
            (best.max(single), single, skipped)
        })
        .collect();
    Ok(RBoundReport {
        estimate: per.iter().map(|p| p.0).fold(0.0, f64::max),
        singleton: per.iter().map(|p| p.1).fold(0.0, f64::max),
        operators: k,
        draws: inputs.len(),
        trials: if exact { 1 << k } else { trials },
        exact,
        resampled: per.iter().map(|p| p.2).sum(),
        seed,
    })
}

/// Discrete `K1`/`K2` operator from fields on a lower `(x', y_N)` grid to an
/// upper `(x', x_N)` grid, built by tangential convolution with the kernel and
/// trapezoid weights in `y_N`. Grids are periodic in `x'` with `m` points on `[0, lx)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelOperatorGrid {
    pub m: usize,
    pub lx: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl KernelOperatorGrid {
    pub fn uniform(m: usize, lx: f64, b: f64, x_max: f64, n_lower: usize, n_upper: usize) -> Self {
        Self {
            m,
            lx,
            lower: (0..n_lower).map(|i| -b * (i as f64 + 0.5) / n_lower as f64).collect(),
            upper: (0..n_upper).map(|i| x_max * (i as f64 + 0.5) / n_upper as f64).collect(),
        }
    }

    pub fn input_len(&self) -> usize {
        self.m * self.lower.len()
    }
}

/// Dense matrix (row-major, `upper.len()*m` by `lower.len()*m`) of the discrete operator.
pub fn kernel_operator(kind: KernelKind, multiplier: KernelMultiplier, lambda: C64, grid: &KernelOperatorGrid, params: &PhysicalParams) -> Result<Vec<C64>> {
    let m = grid.m;
    let dx = grid.lx / m as f64;
    let dy = grid.lower.first().zip(grid.lower.get(1)).map_or(1.0, |(a, b)| (a - b).abs());
    let nl = grid.lower.len();
    // kernel depends on x' - y' only through the periodic offset index
    let jobs: Vec<(usize, usize, usize)> = (0..grid.upper.len()).flat_map(|i| (0..nl).flat_map(move |j| (0..m).map(move |o| (i, j, o)))).collect();
    let table: Vec<C64> = jobs
        .par_iter()
        .map(|&(i, j, o)| {
            let off = if o <= m / 2 { o as f64 * dx } else { (o as f64 - m as f64) * dx };
            let spec = KernelSpec { kind, multiplier, lambda, offset: off, x_n: grid.upper[i], y_n: grid.lower[j] };
            kernel_eval(&spec, params).map(|v| v.value)
        })
        .collect::<Result<_>>()?;
    let cols = nl * m;
    let mut out = vec![C64::new(0.0, 0.0); grid.upper.len() * m * cols];
    for i in 0..grid.upper.len() {
        for xo in 0..m {
            for j in 0..nl {
                for yo in 0..m {
                    let o = (xo + m - yo) % m;
                    out[(i * m + xo) * cols + j * m + yo] = table[(i * nl + j) * m + o] * dx * dy;
                }
            }
        }
    }
    Ok(out)
}

/// Region sample of `lambda` values for an operator family.
pub fn family_lambdas(params: &PhysicalParams, count: usize, lambda_max: f64) -> Vec<C64> {
    crate::symbols::region_lambdas(params, RegionCase::C1, C64::new(0.0, 0.0), count, lambda_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> PhysicalParams {
        PhysicalParams::default()
    }

    #[test]
    fn far_apart_is_tiny() {
        let spec = KernelSpec::new(KernelKind::K1, C64::new(1.0, 0.0), 0.0, 40.0, -40.0);
        assert!(kernel_eval(&spec, &p()).unwrap().value.norm() < 1e-10);
    }

    #[test]
    fn offsets_validated() {
        let spec = KernelSpec::new(KernelKind::K1, C64::new(1.0, 0.0), 0.0, -1.0, -2.0);
        assert!(matches!(kernel_eval(&spec, &p()), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn diagonal_closed_form() {
        // lambda = 0 limit is not admissible; at real lambda the K1 diagonal is
        // (1/pi) int_0^inf a e^{-B+ x} e^{a y} da, checked by adaptive Gauss-Legendre
        let params = p();
        let (x, y) = (0.3, -0.7);
        let spec = KernelSpec::new(KernelKind::K1, C64::new(2.0, 0.0), 0.0, x, y);
        let got = kernel_eval(&spec, &params).unwrap().value;
        let f = |a: f64| a * (-(2.0 + a * a).sqrt() * x).exp() * (a * y).exp() / PI;
        let want = crate::quad::adaptive_gl16(f, 0.0, 80.0, 1e-14).unwrap();
        assert!((got.re - want).abs() < 1e-10 * want && got.im.abs() < 1e-12, "{got} {want}");
    }

    #[test]
    fn conjugate_and_even_symmetry() {
        let params = p();
        for (l, conj) in [(C64::new(1.5, 0.0), true), (C64::new(1.0, 2.0), false)] {
            for kind in [KernelKind::K1, KernelKind::K2] {
                let a = kernel_eval(&KernelSpec::new(kind, l, 0.8, 0.4, -0.3), &params).unwrap().value;
                let b = kernel_eval(&KernelSpec::new(kind, l, -0.8, 0.4, -0.3), &params).unwrap().value;
                assert!((a - b).norm() < 1e-10 * a.norm());
                if conj {
                    assert!((a - b.conj()).norm() < 1e-10 * a.norm());
                }
            }
        }
    }

    #[test]
    fn scaled_multiplier_doubles_sup() {
        let params = p();
        let s = BoundSamples { n_offset: 3, n_depth: 3, fractions: vec![0.5], ..Default::default() };
        let one = kernel_bound_check(KernelKind::K1, KernelMultiplier::unit(), C64::new(1.0, 0.0), &s, &params).unwrap();
        let two = kernel_bound_check(KernelKind::K1, KernelMultiplier::unit().scaled(2.0), C64::new(1.0, 0.0), &s, &params).unwrap();
        assert!((two.sup / one.sup - 2.0).abs() < 1e-12);
        assert_eq!(one.count, 4 * 3);
    }

    #[test]
    fn multipliers_pass_class() {
        let params = p();
        let grid = MultiplierGrid { base: MultiplierGrid::tensor(&params, RegionCase::C1, C64::new(0.0, 0.0), 5, 1e3, 5, (1e-2, 1e2)), extended: None, description: "small".into() };
        for m in [KernelMultiplier::unit(), KernelMultiplier::RootRatio { scale: 1.0 }] {
            assert!(m.class_check(&params, &grid).unwrap().pass);
        }
    }

    #[test]
    fn rbound_trivial_cases() {
        let x = vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)];
        let t = |v: &[C64]| v.iter().map(|z| 3.0 * z).collect::<Vec<_>>();
        let r = rbound_estimate(&[t], &[vec![x.clone()]], 10, 1).unwrap();
        assert!((r.estimate - 3.0).abs() < 1e-14);
        let z = |v: &[C64]| vec![C64::new(0.0, 0.0); v.len()];
        let r = rbound_estimate(&[z, z], &[vec![x.clone(), x]], 10, 1).unwrap();
        assert_eq!(r.estimate, 0.0);
        let r = rbound_estimate(&[z], &[vec![vec![C64::new(0.0, 0.0); 2]]], 10, 1).unwrap();
        assert_eq!((r.estimate, r.resampled), (0.0, 1));
    }
}
