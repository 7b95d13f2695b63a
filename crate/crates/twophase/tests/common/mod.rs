#![allow(dead_code)]

pub mod dense_oracle;
pub mod manufactured;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twophase::mode::BoundaryDataHat;
use twophase::regions::region_contains;
use twophase::{PhysicalParams, SpectralPoint, C64};

/// Random case-C1 region points with `|lambda|` log-uniform in `[lambda0, 1e4]`
/// and `A` log-uniform in `[1e-3, 1e2]`.
pub fn random_c1_points(params: &PhysicalParams, n: usize, seed: u64) -> Vec<SpectralPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let r = 10f64.powf(rng.gen_range(params.lambda0.log10()..4.0));
        let th = rng.gen_range(-1.0..1.0) * (std::f64::consts::PI - params.eps);
        let a = 10f64.powf(rng.gen_range(-3.0..2.0));
        let pt = SpectralPoint::c1(C64::from_polar(r, th), &[a], params).unwrap();
        if region_contains(&pt, params) {
            out.push(pt);
        }
    }
    out
}

/// Unit-norm random interface data of dimension `n`.
pub fn random_data(n: usize, rng: &mut ChaCha8Rng) -> BoundaryDataHat {
    let mut draw = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let d = BoundaryDataHat { h: (0..n).map(|_| draw()).collect(), k: (0..n).map(|_| draw()).collect() };
    let s = d.norm();
    d.scaled(C64::new(1.0 / s, 0.0))
}
