use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::lopatinski::lopatinski_system;
use crate::regions::region_contains;
use crate::{PhysicalParams, RegionCase, Result, SpectralPoint, C64};

/// Soft regime bands: small `A`, `|lambda|` dominant, large `A`, compact remainder.
pub const REGIMES: [&str; 4] = ["small-A", "lambda-dominant", "large-A", "compact"];

#[derive(Debug, Clone, Serialize)]
pub struct DetSample {
    pub lambda: C64,
    pub a: f64,
    pub det_abs: f64,
    pub ratio: f64,
    pub regime: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetBoundReport {
    pub samples: Vec<DetSample>,
    pub min_ratio: f64,
    pub min_by_regime: [f64; 4],
    /// Minimum over the doubled sample set.
    pub min_ratio_doubled: f64,
    /// `(min - min_doubled) / min`.
    pub relative_change: f64,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.gen::<f64>() * (hi / lo).ln()).exp()
}

/// `per_regime` region points for each of the four bands. Each band draws
/// from its own stream, so a larger count extends a smaller one.
pub fn region_samples(params: &PhysicalParams, case: RegionCase, delta: C64, per_regime: usize, seed: u64) -> Vec<(SpectralPoint, usize)> {
    let mut out = Vec::with_capacity(4 * per_regime);
    let lmin = params.lambda0;
    for regime in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(regime as u64 + 1);
        let mut got = 0;
        while got < per_regime {
            let (a, r) = match regime {
                0 => (log_uniform(&mut rng, 1e-3, 0.5), log_uniform(&mut rng, lmin, 1e4)),
                1 => {
                    let a = log_uniform(&mut rng, 1e-2, 10.0);
                    let lo = (100.0 * a * a).max(lmin);
                    (a, log_uniform(&mut rng, lo, 100.0 * lo))
                }
                2 => (log_uniform(&mut rng, 10.0, 1e2), log_uniform(&mut rng, lmin, 1e4)),
                _ => (log_uniform(&mut rng, 0.5, 10.0), log_uniform(&mut rng, lmin, 100.0)),
            };
            let theta = (2.0 * rng.gen::<f64>() - 1.0) * (PI - params.eps);
            let l = C64::from_polar(r, theta);
            let d = match case {
                RegionCase::C1 => params.gamma1_plus * params.gamma2_plus / l,
                _ => delta,
            };
            let pt = SpectralPoint::raw(l, d, &[a], case);
            if region_contains(&pt, params) {
                out.push((pt, regime));
                got += 1;
            }
        }
    }
    out
}

fn evaluate(points: &[(SpectralPoint, usize)], params: &PhysicalParams) -> Result<Vec<DetSample>> {
    points
        .par_iter()
        .map(|(pt, regime)| {
            let det = lopatinski_system(pt, params)?.det;
            Ok(DetSample { lambda: pt.lambda, a: pt.a(), det_abs: det.norm(), ratio: det.norm() / pt.scale().powi(3), regime: *regime })
        })
        .collect()
}

/// Samples `|det L| / (|lambda|^{1/2}+A)^3` over `n` points (split evenly across
/// the bands) and over `2n` points drawn from the same streams.
pub fn det_bound_sweep(params: &PhysicalParams, case: RegionCase, delta: C64, n: usize, seed: u64) -> Result<DetBoundReport> {
    let per = n.div_ceil(4);
    let doubled = region_samples(params, case, delta, 2 * per, seed);
    let all = evaluate(&doubled, params)?;
    // the first `per` draws of each band form the base set
    let samples: Vec<DetSample> = all.chunks(2 * per).flat_map(|c| c[..per].to_vec()).collect();
    let min_of = |s: &[DetSample]| s.iter().map(|x| x.ratio).fold(f64::INFINITY, f64::min);
    let mut min_by_regime = [f64::INFINITY; 4];
    for s in &samples {
        min_by_regime[s.regime] = min_by_regime[s.regime].min(s.ratio);
    }
    let min_ratio = min_of(&samples);
    let min_ratio_doubled = min_of(&all);
    Ok(DetBoundReport { samples, min_ratio, min_by_regime, min_ratio_doubled, relative_change: (min_ratio - min_ratio_doubled) / min_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_extend() {
        let p = PhysicalParams::default();
        let small = region_samples(&p, RegionCase::C1, C64::new(0.0, 0.0), 5, 3);
        let big = region_samples(&p, RegionCase::C1, C64::new(0.0, 0.0), 10, 3);
        for r in 0..4 {
            for k in 0..5 {
                assert_eq!(small[5 * r + k].0, big[10 * r + k].0);
            }
        }
    }

    #[test]
    fn sweep_positive() {
        let p = PhysicalParams::default();
        let rep = det_bound_sweep(&p, RegionCase::C1, C64::new(0.0, 0.0), 400, 1).unwrap();
        assert_eq!(rep.samples.len(), 400);
        assert!(rep.min_ratio > 0.0);
        assert!(rep.min_ratio_doubled <= rep.min_ratio);
        assert!(rep.min_by_regime.iter().all(|m| *m > 0.0 && m.is_finite()));
    }
}
