use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twophase::kernels::*;
use twophase::{PhysicalParams, C64};

fn params() -> PhysicalParams {
    PhysicalParams::default()
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn matrix_op(a: Vec<C64>, n: usize) -> impl Fn(&[C64]) -> Vec<C64> + Sync {
    move |x: &[C64]| (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
}

#[test]
fn adaptive_matches_brute_force() {
    let p = params();
    let reference = [(0.0, 0.3, -0.2), (2.0, 0.5, -0.5), (7.0, 0.1, -0.05)];
    for kind in [KernelKind::K1, KernelKind::K2] {
        for &(s, x, y) in &reference {
            let spec = KernelSpec::new(kind, C64::new(1.0, 0.5), s, x, y);
            let v = kernel_eval(&spec, &p).unwrap();
            let brute = kernel_trapezoid(&spec, &p, v.cutoff, 1 << 18).unwrap();
            let rel = (brute - v.value).norm() / v.value.norm();
            assert!(rel < 1e-8, "{kind:?} {s} {x} {y}: {rel:e}");
        }
    }
}

#[test]
fn bound_sup_finite_and_refinement_stable() {
    let p = params();
    let s = BoundSamples::default();
    for kind in [KernelKind::K1, KernelKind::K2] {
        let base = kernel_bound_check(kind, KernelMultiplier::unit(), C64::new(1.0, 0.0), &s, &p).unwrap();
        let fine = kernel_bound_check(kind, KernelMultiplier::unit(), C64::new(1.0, 0.0), &s.doubled(), &p).unwrap();
        assert!(base.finite && fine.finite && base.sup > 0.0);
        assert!((fine.sup / base.sup - 1.0).abs() < 0.1, "{kind:?}: {} vs {}", base.sup, fine.sup);
    }
}

#[test]
fn diagonal_decay_is_inverse_square() {
    let slope = diagonal_slope(KernelKind::K1, C64::new(1.0, 0.0), 0.01, 1.0, 10.0, 10, &params()).unwrap();
    assert!((slope + 2.0).abs() < 0.1, "{slope}");
    // the second kernel carries an extra x_N-type factor and decays at least as fast
    let slope2 = diagonal_slope(KernelKind::K2, C64::new(1.0, 0.0), 0.01, 1.0, 10.0, 10, &params()).unwrap();
    assert!(slope2 < -1.9, "{slope2}");
}

#[test]
fn root_ratio_multiplier_kernel_obeys_bound() {
    let p = params();
    let s = BoundSamples { n_offset: 4, n_depth: 4, ..Default::default() };
    let r = kernel_bound_check(KernelKind::K1, KernelMultiplier::RootRatio { scale: 1.0 }, C64::new(2.0, 3.0), &s, &p).unwrap();
    assert!(r.finite && r.sup > 0.0 && r.sup < 10.0);
}

#[test]
fn singleton_estimate_is_ratio_and_approaches_norm() {
    let t = matrix_op(vec![C64::new(3.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)], 2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_field(&mut rng, 2);
    let one = rbound_estimate(&[&t], &[vec![x.clone()]], 4, 0).unwrap();
    assert!((one.estimate - norm(&t(&x)) / norm(&x)).abs() < 1e-14);
    let draws: Vec<Vec<Vec<C64>>> = (0..400).map(|_| vec![random_field(&mut rng, 2)]).collect();
    let many = rbound_estimate(&[&t], &draws, 4, 0).unwrap();
    assert!(many.estimate <= 3.0 + 1e-12 && many.estimate > 0.95 * 3.0, "{}", many.estimate);
}

#[test]
fn scalar_family_matches_enumeration() {
    let cs = [0.5, -2.0, 1.5, 0.25];
    let ops: Vec<_> = cs.iter().map(|&c| move |x: &[C64]| x.iter().map(|z| c * z).collect::<Vec<_>>()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let xs: Vec<Vec<C64>> = (0..cs.len()).map(|_| random_field(&mut rng, 3)).collect();
        let r = rbound_estimate(&ops, &[xs.clone()], 0, 1).unwrap();
        assert!(r.exact);
        assert!(r.estimate <= 2.0 + 1e-12);
        // orthogonality of sign patterns: prefix ratios are weighted root-mean-squares
        let mut want = 0.0f64;
        for k in 1..=cs.len() {
            let num: f64 = (0..k).map(|j| cs[j] * cs[j] * norm(&xs[j]).powi(2)).sum();
            let den: f64 = (0..k).map(|j| norm(&xs[j]).powi(2)).sum();
            want = want.max((num / den).sqrt());
        }
        let single = (0..cs.len()).map(|j| cs[j].abs()).fold(0.0, f64::max);
        assert!((r.estimate - want.max(single)).abs() < 1e-12);
        assert!((r.estimate - 2.0).abs() < 1e-12, "attained through the aligned singleton");
    }
}

#[test]
fn sampled_signs_approach_exact_average() {
    let n = 14;
    let cs: Vec<f64> = (0..n).map(|j| 1.0 + 0.1 * j as f64).collect();
    let ops: Vec<_> = cs.iter().map(|&c| move |x: &[C64]| x.iter().map(|z| c * z).collect::<Vec<_>>()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let xs: Vec<Vec<C64>> = (0..n).map(|_| random_field(&mut rng, 2)).collect();
    let r = rbound_estimate(&ops, &[xs], 4000, 5).unwrap();
    assert!(!r.exact);
    assert!(r.estimate <= cs[n - 1] * 1.05 && r.estimate >= cs[n - 1] - 1e-12);
}

#[test]
fn kernel_operator_family_estimate() {
    let p = params();
    let grid = KernelOperatorGrid::uniform(8, std::f64::consts::TAU, 1.0, 2.0, 3, 3);
    let lambdas = family_lambdas(&p, 3, 1e2);
    let mats: Vec<Vec<C64>> = lambdas.iter().map(|&l| kernel_operator(KernelKind::K1, KernelMultiplier::unit(), l, &grid, &p).unwrap()).collect();
    let n = grid.input_len();
    assert_eq!(mats[0].len(), n * n);
    let ops: Vec<_> = mats.into_iter().map(|a| matrix_op(a, n)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws: Vec<Vec<Vec<C64>>> = (0..10).map(|_| (0..ops.len()).map(|_| random_field(&mut rng, n)).collect()).collect();
    let r = rbound_estimate(&ops, &draws, 0, 2).unwrap();
    assert!(r.estimate.is_finite() && r.estimate > 0.0);
    assert!(r.estimate >= r.singleton);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nested_families_are_monotone(seed in 0u64..1000, k in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 3;
        let ops: Vec<_> = (0..k).map(|_| matrix_op(random_field(&mut rng, dim * dim), dim)).collect();
        let draws: Vec<Vec<Vec<C64>>> = (0..5).map(|_| (0..k).map(|_| random_field(&mut rng, dim)).collect()).collect();
        let mut prev = 0.0;
        for size in 1..=k {
            let r = rbound_estimate(&ops[..size], &draws, 0, seed).unwrap();
            prop_assert!(r.estimate >= prev);
            prev = r.estimate;
        }
    }

    #[test]
    fn multiplier_scaling_is_linear(s in 0.1f64..5.0, off in -3.0f64..3.0) {
        let p = params();
        let base = KernelSpec::new(KernelKind::K1, C64::new(1.0, 1.0), off, 0.4, -0.6);
        let scaled = KernelSpec { multiplier: KernelMultiplier::unit().scaled(s), ..base };
        let (a, b) = (kernel_eval(&base, &p).unwrap().value, kernel_eval(&scaled, &p).unwrap().value);
        prop_assert!((b - s * a).norm() <= 1e-8 * (s * a.norm()).max(1e-12));
    }
}
